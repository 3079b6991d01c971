// SPDX-License-Identifier: Apache-2.0

#include "gdistill/random.hpp"

#include "gdistill/error.hpp"

#include <numeric>

namespace gdistill {

std::vector<int> RandomStream::sample_without_replacement(int n, int k) {
    if (k < 0 || k > n) {
        throw ContractError("sample_without_replacement: need 0 <= k <= n, got k=" +
                            std::to_string(k) + " n=" + std::to_string(n));
    }
    // Partial Fisher-Yates over [0, n).
    std::vector<int> pool(static_cast<size_t>(n));
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < k; ++i) {
        size_t j = static_cast<size_t>(i) + next_index(static_cast<size_t>(n - i));
        std::swap(pool[static_cast<size_t>(i)], pool[j]);
    }
    pool.resize(static_cast<size_t>(k));
    return pool;
}

namespace {

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

uint64_t derive_seed(uint64_t base, std::string_view tag) {
    return mix(base + 0x9e3779b97f4a7c15ULL * fnv1a64(tag));
}

uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t index) {
    return mix(derive_seed(base, tag) + 0x9e3779b97f4a7c15ULL * (index + 1));
}

} // namespace gdistill
