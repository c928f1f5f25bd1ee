#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace memrouter {

// 64-bit FNV-1a. Used for content digests of vocabularies, registries and
// artifact checkpoint stamps, and as the keyed-draw hash in the simulator.
constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t seed = 0xcbf29ce484222325ULL) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t v);

/// Digest of a whole file's bytes; throws DataError if unreadable.
std::string file_digest(const std::string& path);

inline std::string content_digest(std::string_view data) {
    return to_hex(fnv1a64(data));
}

} // namespace memrouter
