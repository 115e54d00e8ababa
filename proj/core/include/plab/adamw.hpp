#pragma once

#include <vector>

#include "plab/tensor.hpp"

namespace plab {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

/// Decoupled-decay AdamW with bias correction:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta
/// Moment tensors mirror the parameter shapes; a per-tensor decay mask lets
/// callers exempt parameters (log_tau) from weight decay.
class AdamW {
public:
    AdamW(const std::vector<const Tensor*>& params, AdamWConfig cfg);
    AdamW(const std::vector<const Tensor*>& params, AdamWConfig cfg, std::vector<bool> decay_mask);

    /// One update step over all parameters. Throws on non-finite gradients.
    void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, double lr);

    int step_count() const { return t_; }
    const Tensor& first_moment(std::size_t i) const { return m_[i]; }
    const Tensor& second_moment(std::size_t i) const { return v_[i]; }

private:
    AdamWConfig cfg_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::vector<bool> decay_mask_;
    int t_ = 0;
};

} // namespace plab
