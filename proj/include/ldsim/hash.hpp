#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ldsim {

// FNV-1a, used for cache keys, graph hashes and run manifests. Stable across
// platforms and runs, unlike std::hash.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t seed = 1469598103934665603ull) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string to_hex(std::uint64_t value);
std::uint64_t file_hash(const std::string& path);

}  // namespace ldsim
