#include "plab/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "plab/error.hpp"

namespace plab {

double lr_at(int step, double peak_lr, int warmup_steps, int total_steps) {
    if (step < 0 || step > total_steps)
        throw Error("lr_at: step " + std::to_string(step) + " outside [0, " +
                    std::to_string(total_steps) + "]");
    if (warmup_steps < 0 || warmup_steps >= total_steps)
        throw Error("lr_at: warmup_steps must lie in [0, total_steps)");
    if (step < warmup_steps) return peak_lr * step / warmup_steps;
    const double progress =
        static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
    return peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

} // namespace plab
