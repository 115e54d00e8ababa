#pragma once

#include <cstdint>

namespace plab {

// Splitmix64 finalizer. The constants are fixed so that any other
// implementation can reproduce the exact seed streams:
//   gamma = 0x9E3779B97F4A7C15, mix1 = 0xBF58476D1CE4E5B9, mix2 = 0x94D049BB133111EB
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed for a sweep cell (or any other
/// purpose index) from a master seed. Distinct indices give distinct
/// seeds for any practical number of cells.
inline constexpr std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
    return splitmix64(master_seed ^ splitmix64(index + 0x632BE59BD9B4E019ull));
}

// Named purpose indices for derive_seed, so unrelated random streams inside
// one run never share state. Adding a consumer must not shift existing ones.
enum class Stream : std::uint64_t {
    Prototypes = 1,
    WorldData = 2,
    Templates = 3,
    Trigger = 4,
    Shuffle = 5,
    Augment = 6,
    Cluster = 7,
    ClassifierInit = 8,
    AsrOffsets = 9,
    CleanSubset = 10,
    ShrinkPerturb = 11,
};

inline constexpr std::uint64_t derive_seed(std::uint64_t master_seed, Stream s) {
    return derive_seed(master_seed, static_cast<std::uint64_t>(s));
}

/// Deterministic PRNG over a splitmix64 counter. All sampling used by the
/// lab goes through this class, so runs are reproducible bit for bit on a
/// given platform regardless of the standard library in use.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return x ^ (x >> 31);
    }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). n must be positive.
    int uniform_int(int n);

    /// Standard normal via Box-Muller (one spare cached).
    double normal();

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace plab
