#include "plab/gradcheck.hpp"

#include <cmath>
#include <string>

#include "plab/error.hpp"

namespace plab {

namespace {

double loss_value(const LossBuilder& builder, const std::vector<Tensor>& params,
                  std::size_t tensor_idx, std::size_t coord) {
    Graph g;
    std::vector<NodeId> leaves;
    leaves.reserve(params.size());
    for (const Tensor& t : params) leaves.push_back(g.param(t));
    const NodeId loss = builder(g, leaves);
    const double v = g.value(loss).scalar_value();
    if (!std::isfinite(v))
        throw Error("grad_check: non-finite loss at parameter " + std::to_string(tensor_idx) +
                    " coordinate " + std::to_string(coord));
    return v;
}

} // namespace

double grad_check(const LossBuilder& builder, const std::vector<Tensor>& params, double epsilon) {
    if (epsilon < 1e-7 || epsilon > 1e-4)
        throw Error("grad_check: epsilon " + std::to_string(epsilon) + " outside [1e-7, 1e-4]");

    Graph g;
    std::vector<NodeId> leaves;
    leaves.reserve(params.size());
    for (const Tensor& t : params) leaves.push_back(g.param(t));
    const NodeId loss = builder(g, leaves);
    if (!std::isfinite(g.value(loss).scalar_value()))
        throw Error("grad_check: non-finite loss at unperturbed parameters");
    auto grads = g.backward(loss);

    double max_rel = 0.0;
    std::vector<Tensor> probe = params;
    for (std::size_t t = 0; t < params.size(); ++t) {
        const Tensor& analytic = grads.at(leaves[t]);
        for (std::size_t c = 0; c < params[t].data.size(); ++c) {
            const double saved = probe[t].data[c];
            probe[t].data[c] = saved + epsilon;
            const double fp = loss_value(builder, probe, t, c);
            probe[t].data[c] = saved - epsilon;
            const double fm = loss_value(builder, probe, t, c);
            probe[t].data[c] = saved;
            const double numeric = (fp - fm) / (2.0 * epsilon);
            const double rel = std::abs(analytic.data[c] - numeric) / std::max(1.0, std::abs(numeric));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

} // namespace plab
