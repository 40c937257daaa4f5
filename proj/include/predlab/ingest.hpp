#pragma once

#include <string>

#include "predlab/seq.hpp"

namespace predlab {

enum class Tokenizer { character, whitespace };

Tokenizer tokenizer_from_string(const std::string& s);
std::string to_string(Tokenizer t);

// Next-token prediction stream from raw text: tokens get ids by frequency
// rank (ties broken by first occurrence), everything past the cap maps to a
// trailing unknown id, and labels are the following token (the final position
// has no label and is dropped).
LabeledDataset ingest_text(const std::string& text, Tokenizer tok, int vocab_cap);
LabeledDataset ingest_corpus(const std::string& path, Tokenizer tok, int vocab_cap);

}  // namespace predlab
