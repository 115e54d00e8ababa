#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plab/graph.hpp"
#include "plab/tensor.hpp"

namespace plab {

/// MLP tower shape: input dim, hidden dims..., shared embedding dim d.
/// Hidden layers use tanh; the final projection is linear and is followed by
/// row-wise L2 normalization.
struct MlpConfig {
    std::vector<int> layer_dims;

    int input_dim() const { return layer_dims.front(); }
    int embed_dim() const { return layer_dims.back(); }
};

struct LayerParams {
    Tensor weight; // in x out
    Tensor bias;   // 1 x out
};

/// Both towers plus the learnable log temperature scale. log_tau is kept as a
/// 1x1 tensor so the optimizer and checkpoint code treat every parameter
/// uniformly.
struct DualEncoderParams {
    std::vector<LayerParams> image_layers;
    std::vector<LayerParams> text_layers;
    Tensor log_tau; // 1x1

    double log_tau_value() const { return log_tau.data[0]; }
};

inline constexpr double kTemperatureMin = 0.01;
inline constexpr double kTemperatureMax = 100.0;
inline constexpr double kLogTauInit = 2.6592600369327780; // ln(1/0.07)

/// Glorot-uniform weights, zero biases, log_tau = ln(1/0.07). Deterministic
/// per seed. Both configs must share the final embedding dim and have at
/// least an input and an output layer.
DualEncoderParams init_dual_encoder(const MlpConfig& image_cfg, const MlpConfig& text_cfg,
                                    std::uint64_t seed);

/// exp(log_tau) clamped into [0.01, 100]. The similarity logits in the
/// contrastive losses are multiplied by this value, i.e. the divisor tau of
/// the loss formulas is its reciprocal.
double temperature(const DualEncoderParams& params);

/// Canonical enumeration of all trainable tensors:
/// image layers (weight, bias) in order, text layers, then log_tau.
std::vector<Tensor*> param_tensors(DualEncoderParams& params);
std::vector<const Tensor*> param_tensors(const DualEncoderParams& params);
std::vector<std::string> param_names(const DualEncoderParams& params);

/// Parameter leaves registered on a graph, in the canonical order above.
struct EncoderLeaves {
    std::vector<std::pair<NodeId, NodeId>> image; // (weight, bias) per layer
    std::vector<std::pair<NodeId, NodeId>> text;
    NodeId log_tau = -1;

    /// Weight and bias leaves only (log_tau excluded), canonical order.
    std::vector<NodeId> weight_and_bias_ids() const;
    /// Every trainable leaf including log_tau, canonical order.
    std::vector<NodeId> all_ids() const;
};

EncoderLeaves make_leaves(Graph& g, const DualEncoderParams& params);

/// Differentiable forward pass: returns the node holding B x d unit-norm
/// embeddings. Column count of the input must match the tower's first layer.
NodeId encode_images(Graph& g, const EncoderLeaves& leaves, const Tensor& images);
NodeId encode_texts(Graph& g, const EncoderLeaves& leaves, const Tensor& texts);

/// Evaluation-only forward pass; bitwise identical to the graph route.
Tensor encode_images(const DualEncoderParams& params, const Tensor& images);
Tensor encode_texts(const DualEncoderParams& params, const Tensor& texts);

} // namespace plab
