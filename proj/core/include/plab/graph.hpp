#pragma once

#include <unordered_map>
#include <utility>
#include <vector>

#include "plab/tensor.hpp"

namespace plab {

using NodeId = int;

enum class Op {
    Leaf,
    MatMul,
    Transpose,
    Add,
    Mul,
    AddRow,
    Tanh,
    Scale,
    RowL2Normalize,
    LogSoftmaxRows,
    SelectEntries,
    Square,
    SumAll,
    MeanAll,
    ExpScalar,
};

struct Node {
    Op op = Op::Leaf;
    std::vector<NodeId> parents;
    Tensor value;
    Tensor grad;                              // same shape as value, zeroed until backward
    double scale_factor = 0.0;                // Op::Scale only
    std::vector<std::pair<int, int>> indices; // Op::SelectEntries only
};

/// Append-only eager tape. Node ids are 0..size()-1 and parents always have
/// smaller ids, so a single reverse pass is a valid topological traversal.
/// Rebuilt per mini-batch; no state is shared between graphs.
class Graph {
public:
    /// Non-trainable leaf.
    NodeId input(Tensor value);
    /// Trainable leaf; backward() reports its gradient.
    NodeId param(Tensor value);

    NodeId matmul(NodeId a, NodeId b);
    NodeId transpose(NodeId a);
    NodeId add(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId add_row(NodeId a, NodeId row);
    NodeId tanh(NodeId a);
    NodeId scale(NodeId a, double c);
    NodeId row_l2_normalize(NodeId a);
    NodeId log_softmax_rows(NodeId a);
    NodeId select_entries(NodeId a, std::vector<std::pair<int, int>> idx);
    NodeId square(NodeId a);
    NodeId sum_all(NodeId a);
    NodeId mean_all(NodeId a);
    NodeId exp_scalar(NodeId a);

    const Tensor& value(NodeId id) const { return node(id).value; }
    const Tensor& grad(NodeId id) const { return node(id).grad; }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<NodeId>& param_ids() const { return param_ids_; }

    /// Reverse accumulation from a scalar loss node. Returns dLoss/dParam for
    /// every trainable leaf; node gradients stay readable via grad().
    std::unordered_map<NodeId, Tensor> backward(NodeId loss);

private:
    const Node& node(NodeId id) const;
    NodeId push(Node n);

    std::vector<Node> nodes_;
    std::vector<NodeId> param_ids_;
};

} // namespace plab
