#include "crowdmech/rng.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace crowdmech {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t RunSeed::derive(Purpose purpose) const {
    std::uint64_t h = splitmix64(master_seed ^ 0x6a09e667f3bcc908ULL);
    h = splitmix64(h ^ run);
    h = splitmix64(h ^ (episode + 0x3c6ef372fe94f82bULL));
    h = splitmix64(h ^ (step + 0xa54ff53a5f1d36f1ULL));
    h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
    return h;
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n <= 1) return 0;
    // Largest multiple of n that fits; values above it are rejected.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

std::vector<int> Rng::sample_subset(int n, int k) {
    std::vector<int> pool(static_cast<std::size_t>(n));
    std::iota(pool.begin(), pool.end(), 0);
    // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
    for (int i = 0; i < k; ++i) {
        const auto j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(k));
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace crowdmech
