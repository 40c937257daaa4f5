#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "predlab/fsmp.hpp"
#include "predlab/ingest.hpp"
#include "predlab/kvfile.hpp"
#include "predlab/markov.hpp"
#include "predlab/transformer.hpp"

namespace predlab {

// A declarative sweep: one data source, one predictor family, and a grid of
// settings crossed with seeds. Results append to a versioned CSV; a journal
// sidecar makes re-runs skip finished points.
struct ExperimentSpec {
    std::optional<SourceSpec> source;  // synthetic stream
    std::string corpus_path;           // or a text file
    Tokenizer tokenizer = Tokenizer::character;
    int vocab_cap = 256;

    std::string predictor = "fsmp";    // fsmp | transformer
    std::string evaluation = "exact";  // exact | empirical

    std::vector<int> ks;
    std::vector<long long> ns;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> modes;  // transformer: attention | aggregation
    std::vector<int> ffn_flags;      // transformer: 0 | 1
    std::vector<int> t0s;            // transformer: -1 = plain sampling, else shift start

    double alpha = 0.0;
    std::size_t test_n = std::size_t{1} << 14;
    long long enum_budget = kDefaultEnumBudget;

    ModelConfig model;  // span, mode, use_ffn, vocabularies filled per point
    TrainOpts train_opts;

    std::string out_csv = "results.csv";

    void validate() const;
    static ExperimentSpec from_kv(const KvFile& kv);
};

struct GridPoint {
    int k = 0;
    long long n = 0;
    std::uint64_t seed = 0;
    std::string mode;  // empty for fsmp
    int use_ffn = -1;  // -1 when not applicable
    int t0 = -2;       // -2 when not applicable, -1 = no augmentation
};

struct ResultRecord {
    GridPoint point;
    std::string source_id;
    std::string predictor;
    std::string evaluation;
    double train_loss_nats = std::numeric_limits<double>::quiet_NaN();
    double test_loss_nats = std::numeric_limits<double>::quiet_NaN();
    double test_loss_bits = std::numeric_limits<double>::quiet_NaN();
    double limit_bits = std::numeric_limits<double>::quiet_NaN();
    double excess_bits = std::numeric_limits<double>::quiet_NaN();
    double wall_s = 0.0;
    std::string status = "ok";
    std::string version{kVersion};
};

std::vector<GridPoint> expand_grid(const ExperimentSpec& spec);

// Everything that determines a point's outcome, joined into one string; its
// hash keys the journal.
std::string point_signature(const ExperimentSpec& spec, const GridPoint& p);

// One grid point end to end. Capacity and numerical failures during the
// point's own work come back as a status row instead of throwing.
ResultRecord run_point(const ExperimentSpec& spec, const GridPoint& p,
                       const LabeledDataset* corpus = nullptr);

std::vector<std::string> result_columns();
std::vector<std::string> result_fields(const ResultRecord& r);

struct SweepOutcome {
    std::vector<ResultRecord> fresh;  // computed by this call, in grid order
    std::size_t skipped = 0;          // found in the journal and not recomputed
};

SweepOutcome run(const ExperimentSpec& spec, int workers = 1);

}  // namespace predlab
