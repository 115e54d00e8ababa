#include "plab/graph.hpp"

#include <cmath>
#include <string>

#include "plab/error.hpp"

namespace plab {

const Node& Graph::node(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
        throw Error("graph: node id " + std::to_string(id) + " out of range");
    return nodes_[static_cast<std::size_t>(id)];
}

NodeId Graph::push(Node n) {
    n.grad = Tensor(n.value.rows, n.value.cols);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

NodeId Graph::input(Tensor value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

NodeId Graph::param(Tensor value) {
    const NodeId id = input(std::move(value));
    param_ids_.push_back(id);
    return id;
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    Node n{Op::MatMul, {a, b}, kernels::matmul(value(a), value(b)), {}};
    return push(std::move(n));
}

NodeId Graph::transpose(NodeId a) {
    Node n{Op::Transpose, {a}, kernels::transpose(value(a)), {}};
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
    Node n{Op::Add, {a, b}, kernels::add(value(a), value(b)), {}};
    return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    Node n{Op::Mul, {a, b}, kernels::mul(value(a), value(b)), {}};
    return push(std::move(n));
}

NodeId Graph::add_row(NodeId a, NodeId row) {
    Node n{Op::AddRow, {a, row}, kernels::add_row(value(a), value(row)), {}};
    return push(std::move(n));
}

NodeId Graph::tanh(NodeId a) {
    Node n{Op::Tanh, {a}, kernels::tanh(value(a)), {}};
    return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double c) {
    Node n{Op::Scale, {a}, kernels::scale(value(a), c), {}};
    n.scale_factor = c;
    return push(std::move(n));
}

NodeId Graph::row_l2_normalize(NodeId a) {
    Node n{Op::RowL2Normalize, {a}, kernels::row_l2_normalize(value(a)), {}};
    return push(std::move(n));
}

NodeId Graph::log_softmax_rows(NodeId a) {
    Node n{Op::LogSoftmaxRows, {a}, kernels::log_softmax_rows(value(a)), {}};
    return push(std::move(n));
}

NodeId Graph::select_entries(NodeId a, std::vector<std::pair<int, int>> idx) {
    Node n{Op::SelectEntries, {a}, kernels::select_entries(value(a), idx), {}};
    n.indices = std::move(idx);
    return push(std::move(n));
}

NodeId Graph::square(NodeId a) {
    Node n{Op::Square, {a}, kernels::square(value(a)), {}};
    return push(std::move(n));
}

NodeId Graph::sum_all(NodeId a) {
    Node n{Op::SumAll, {a}, kernels::sum_all(value(a)), {}};
    return push(std::move(n));
}

NodeId Graph::mean_all(NodeId a) {
    Node n{Op::MeanAll, {a}, kernels::mean_all(value(a)), {}};
    return push(std::move(n));
}

NodeId Graph::exp_scalar(NodeId a) {
    Node n{Op::ExpScalar, {a}, kernels::exp_scalar(value(a)), {}};
    return push(std::move(n));
}

std::unordered_map<NodeId, Tensor> Graph::backward(NodeId loss) {
    const Node& top = node(loss);
    if (!top.value.is_scalar())
        throw Error("backward: loss node is " + std::to_string(top.value.rows) + "x" +
                    std::to_string(top.value.cols) + ", expected 1x1 scalar");

    for (Node& n : nodes_) std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
    nodes_[static_cast<std::size_t>(loss)].grad.data[0] = 1.0;

    for (NodeId id = loss; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        const Tensor& g = n.grad;
        bool any = false;
        for (double x : g.data)
            if (x != 0.0) { any = true; break; }
        if (!any || n.op == Op::Leaf) continue;

        switch (n.op) {
        case Op::MatMul: {
            // C = A*B: dA += dC*B^T, dB += A^T*dC
            const Tensor& a = nodes_[n.parents[0]].value;
            const Tensor& b = nodes_[n.parents[1]].value;
            Tensor da = kernels::matmul(g, kernels::transpose(b));
            Tensor db = kernels::matmul(kernels::transpose(a), g);
            Tensor& ga = nodes_[n.parents[0]].grad;
            Tensor& gb = nodes_[n.parents[1]].grad;
            for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += da.data[i];
            for (std::size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += db.data[i];
            break;
        }
        case Op::Transpose: {
            Tensor& ga = nodes_[n.parents[0]].grad;
            const Tensor gt = kernels::transpose(g);
            for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += gt.data[i];
            break;
        }
        case Op::Add: {
            for (int p = 0; p < 2; ++p) {
                Tensor& gp = nodes_[n.parents[p]].grad;
                for (std::size_t i = 0; i < gp.data.size(); ++i) gp.data[i] += g.data[i];
            }
            break;
        }
        case Op::Mul: {
            const Tensor& a = nodes_[n.parents[0]].value;
            const Tensor& b = nodes_[n.parents[1]].value;
            Tensor& ga = nodes_[n.parents[0]].grad;
            Tensor& gb = nodes_[n.parents[1]].grad;
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                ga.data[i] += g.data[i] * b.data[i];
                gb.data[i] += g.data[i] * a.data[i];
            }
            break;
        }
        case Op::AddRow: {
            Tensor& ga = nodes_[n.parents[0]].grad;
            Tensor& gr = nodes_[n.parents[1]].grad;
            for (std::size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g.data[i];
            for (int i = 0; i < g.rows; ++i)
                for (int j = 0; j < g.cols; ++j) gr.data[static_cast<std::size_t>(j)] += g.at(i, j);
            break;
        }
        case Op::Tanh: {
            Tensor& ga = nodes_[n.parents[0]].grad;
            for (std::size_t i = 0; i < g.data.size(); ++i) {
                const double y = n.value.data[i];
                ga.data[i] += g.data[i] * (1.0 - y * y);
            }
            break;
        }
        case Op::Scale: {
            Tensor& ga = nodes_[n.parents[0]].grad;
            for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * n.scale_factor;
            break;
        }
        case Op::RowL2Normalize: {
            // y = x/||x||: dx = (dy - (dy . y) y) / ||x||
            const Tensor& x = nodes_[n.parents[0]].value;
            Tensor& ga = nodes_[n.parents[0]].grad;
            for (int i = 0; i < x.rows; ++i) {
                double sq = 0.0, dot = 0.0;
                for (int j = 0; j < x.cols; ++j) {
                    sq += x.at(i, j) * x.at(i, j);
                    dot += g.at(i, j) * n.value.at(i, j);
                }
                const double norm = std::sqrt(sq);
                for (int j = 0; j < x.cols; ++j)
                    ga.at(i, j) += (g.at(i, j) - dot * n.value.at(i, j)) / norm;
            }
            break;
        }
        case Op::LogSoftmaxRows: {
            // y = x - lse(x): dx = dy - softmax(x) * sum(dy)
            Tensor& ga = nodes_[n.parents[0]].grad;
            for (int i = 0; i < g.rows; ++i) {
                double gsum = 0.0;
                for (int j = 0; j < g.cols; ++j) gsum += g.at(i, j);
                for (int j = 0; j < g.cols; ++j)
                    ga.at(i, j) += g.at(i, j) - std::exp(n.value.at(i, j)) * gsum;
            }
            break;
        }
        case Op::SelectEntries: {
            Tensor& ga = nodes_[n.parents[0]].grad;
            for (std::size_t k = 0; k < n.indices.size(); ++k)
                ga.at(n.indices[k].first, n.indices[k].second) += g.data[k];
            break;
        }
        case Op::Square: {
            const Tensor& x = nodes_[n.parents[0]].value;
            Tensor& ga = nodes_[n.parents[0]].grad;
            for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += 2.0 * x.data[i] * g.data[i];
            break;
        }
        case Op::SumAll: {
            Tensor& ga = nodes_[n.parents[0]].grad;
            const double gs = g.data[0];
            for (double& x : ga.data) x += gs;
            break;
        }
        case Op::MeanAll: {
            Tensor& ga = nodes_[n.parents[0]].grad;
            const double gs = g.data[0] / static_cast<double>(ga.data.size());
            for (double& x : ga.data) x += gs;
            break;
        }
        case Op::ExpScalar: {
            Tensor& ga = nodes_[n.parents[0]].grad;
            ga.data[0] += g.data[0] * n.value.data[0];
            break;
        }
        case Op::Leaf:
            break;
        }
    }

    std::unordered_map<NodeId, Tensor> table;
    table.reserve(param_ids_.size());
    for (NodeId id : param_ids_) table.emplace(id, nodes_[static_cast<std::size_t>(id)].grad);
    return table;
}

} // namespace plab
