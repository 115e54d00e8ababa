#include "plab/rng.hpp"

#include <cmath>
#include <numbers>

#include "plab/error.hpp"

namespace plab {

int Rng::uniform_int(int n) {
    if (n <= 0) throw Error("uniform_int: n must be positive");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    // Rejection sampling keeps the draw exactly uniform.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % un + 1) % un;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x > limit);
    return static_cast<int>(x % un);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller; u1 shifted away from 0 so log stays finite.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

} // namespace plab
