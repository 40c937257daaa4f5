#pragma once

#include <fstream>
#include <string_view>
#include <type_traits>

#include "predlab/common.hpp"

namespace predlab::binio {

template <class T>
void write_pod(std::ostream& out, const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw SpecError("truncated binary stream");
    return v;
}

inline void write_magic(std::ostream& out, std::string_view magic) {
    out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& in, std::string_view magic) {
    std::string buf(magic.size(), '\0');
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!in || buf != magic) throw SpecError("unrecognized binary file header");
}

}  // namespace predlab::binio
