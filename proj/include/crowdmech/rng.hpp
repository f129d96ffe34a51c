#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace crowdmech {

/// What a random stream is used for. Part of the seed derivation path so two
/// consumers at the same (run, episode, step) never share a stream.
enum class Purpose : std::uint64_t {
    Assignment = 1,
    Truth = 2,
    Labels = 3,
    Gibbs = 4,
    Noise = 5,
    Policy = 6,
    PeerChoice = 7,
    Dataset = 8,
    Generic = 9,
};

/// Counter-based seed derivation: master_seed -> (run, episode, step, purpose).
/// Any sub-stream can be replayed in isolation from its path alone.
struct RunSeed {
    std::uint64_t master_seed = 0;
    std::uint64_t run = 0;
    std::uint64_t episode = 0;
    std::uint64_t step = 0;

    RunSeed with_run(std::uint64_t r) const { return {master_seed, r, episode, step}; }
    RunSeed with_episode(std::uint64_t e) const { return {master_seed, run, e, step}; }
    RunSeed with_step(std::uint64_t s) const { return {master_seed, run, episode, s}; }

    /// 64-bit seed for the given purpose, a pure function of the whole path.
    std::uint64_t derive(Purpose purpose) const;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Thin wrapper over std::mt19937_64. The engine output is fully specified by
/// the standard; the conversions below are written out so streams stay
/// bit-identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(const RunSeed& path, Purpose purpose) : engine_(path.derive(purpose)) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n). Rejection sampling, unbiased.
    std::uint64_t below(std::uint64_t n);

    /// Fair-coin binary label in {-1, +1}.
    std::int8_t coin_label() { return (engine_() >> 63) ? std::int8_t{1} : std::int8_t{-1}; }

    /// Uniformly random k-subset of {0, ..., n-1}, returned sorted.
    std::vector<int> sample_subset(int n, int k);

    template <class T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace crowdmech
