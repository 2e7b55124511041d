#pragma once

#include <cstdint>
#include <string_view>

namespace ipd {

// FNV-1a, used to stamp output files with config/model fingerprints.
inline std::uint64_t fnv1a(std::string_view text,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace ipd
