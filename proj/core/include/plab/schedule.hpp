#pragma once

namespace plab {

/// Linear warmup from 0 to peak_lr over warmup_steps, then cosine decay to 0
/// at total_steps. Continuous at the warmup boundary and nonincreasing after.
double lr_at(int step, double peak_lr, int warmup_steps, int total_steps);

} // namespace plab
