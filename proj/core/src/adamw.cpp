#include "plab/adamw.hpp"

#include <cmath>
#include <string>

#include "plab/error.hpp"

namespace plab {

AdamW::AdamW(const std::vector<const Tensor*>& params, AdamWConfig cfg)
    : AdamW(params, cfg, std::vector<bool>(params.size(), true)) {}

AdamW::AdamW(const std::vector<const Tensor*>& params, AdamWConfig cfg, std::vector<bool> decay_mask)
    : cfg_(cfg), decay_mask_(std::move(decay_mask)) {
    if (decay_mask_.size() != params.size())
        throw Error("adamw: decay mask size does not match parameter count");
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Tensor* p : params) {
        m_.emplace_back(p->rows, p->cols);
        v_.emplace_back(p->rows, p->cols);
    }
}

void AdamW::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
                 double lr) {
    if (params.size() != m_.size() || grads.size() != m_.size())
        throw Error("adamw: parameter/gradient count does not match optimizer state");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);

    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& theta = *params[p];
        const Tensor& g = *grads[p];
        if (!theta.same_shape(g))
            throw Error("adamw: gradient shape mismatch at parameter " + std::to_string(p));
        if (!g.all_finite()) throw Error("adamw: non-finite gradient at parameter " + std::to_string(p));
        const double wd = decay_mask_[p] ? cfg_.weight_decay : 0.0;
        Tensor& m = m_[p];
        Tensor& v = v_[p];
        for (std::size_t i = 0; i < theta.data.size(); ++i) {
            m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * g.data[i];
            v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * g.data[i] * g.data[i];
            const double m_hat = m.data[i] / bc1;
            const double v_hat = v.data[i] / bc2;
            theta.data[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg_.eps) + lr * wd * theta.data[i];
        }
    }
}

} // namespace plab
