#pragma once

#include <vector>

#include "plab/graph.hpp"

namespace plab {

/// Per-batch loss components. `total` is what the optimizer sees; the raw
/// components and their weights are kept so trajectories are self-describing.
struct LossBreakdown {
    double total = 0.0;
    double mmcl = 0.0;
    double ssl = 0.0;
    double deep_clust = 0.0;
    double l2 = 0.0;
    double ssl_weight = 0.0;
    double deep_clust_weight = 0.0;
    double l2_weight = 0.0;
};

// All loss builders take unit-norm embedding nodes and a 1x1 node holding the
// inverse temperature (the logit scale, exp(log_tau)); the divisor tau of the
// loss formulas is its reciprocal. Batch sizes must match and be >= 1.

/// Symmetric multimodal InfoNCE: average of the image->text and text->image
/// diagonal log-softmax terms, scaled by -1/(2B).
NodeId mmcl_loss(Graph& g, NodeId img_emb, NodeId txt_emb, NodeId inv_tau);

/// Intramodal self-supervision: original embeddings anchor, augmented
/// embeddings are the candidates, one term per modality, scaled by -1/(2B).
NodeId ssl_loss(Graph& g, NodeId img_emb, NodeId img_aug_emb, NodeId txt_emb, NodeId txt_aug_emb,
                NodeId inv_tau);

struct CleanClipNodes {
    NodeId total = -1;
    NodeId mmcl = -1;
    NodeId ssl = -1;
};

/// mmcl + ssl_weight * ssl with the components exposed.
CleanClipNodes cleanclip_loss(Graph& g, NodeId img_emb, NodeId img_aug_emb, NodeId txt_emb,
                              NodeId txt_aug_emb, NodeId inv_tau, double ssl_weight);

/// Mean cross-entropy of features * classifier_w against the pseudo-labels.
NodeId deep_clust_loss(Graph& g, NodeId classifier_w, NodeId features,
                       const std::vector<int>& pseudo_labels);

/// Sum of squares of the given leaves (weights and biases; log_tau excluded
/// by the caller).
NodeId l2_penalty(Graph& g, const std::vector<NodeId>& weight_and_bias_leaves);

// Value-only conveniences used by tests and small tools. tau is the divisor
// of the loss formulas and must be positive.
double mmcl_loss_value(const Tensor& img_emb, const Tensor& txt_emb, double tau);
double ssl_loss_value(const Tensor& img_emb, const Tensor& img_aug_emb, const Tensor& txt_emb,
                      const Tensor& txt_aug_emb, double tau);
double deep_clust_loss_value(const Tensor& classifier_w, const Tensor& features,
                             const std::vector<int>& pseudo_labels);

} // namespace plab
