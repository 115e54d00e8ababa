#include "plab/losses.hpp"

#include <string>

#include "plab/error.hpp"

namespace plab {

namespace {

void check_batch(const Graph& g, NodeId emb, NodeId other, const char* what) {
    if (g.value(emb).rows < 1) throw Error(std::string(what) + ": empty batch");
    if (g.value(emb).rows != g.value(other).rows)
        throw Error(std::string(what) + ": batch sizes differ (" +
                    std::to_string(g.value(emb).rows) + " vs " +
                    std::to_string(g.value(other).rows) + ")");
}

void check_inv_tau(const Graph& g, NodeId inv_tau, const char* what) {
    if (!g.value(inv_tau).is_scalar()) throw Error(std::string(what) + ": inv_tau must be 1x1");
    if (g.value(inv_tau).data[0] <= 0.0)
        throw Error(std::string(what) + ": temperature must be positive");
}

/// B x B matrix with every entry equal to the 1x1 node, built from the
/// primitive set: ones(Bx1) * s(1x1) * ones(1xB).
NodeId broadcast_scalar(Graph& g, NodeId s, int n) {
    const NodeId ones_col = g.input(Tensor::filled(n, 1, 1.0));
    const NodeId ones_row = g.input(Tensor::filled(1, n, 1.0));
    return g.matmul(g.matmul(ones_col, s), ones_row);
}

std::vector<std::pair<int, int>> diagonal(int n) {
    std::vector<std::pair<int, int>> idx;
    idx.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx.emplace_back(i, i);
    return idx;
}

/// Sum over j of log softmax(logits)[j, j] with anchors along rows.
NodeId diag_log_softmax_sum(Graph& g, NodeId logits) {
    const int n = g.value(logits).rows;
    return g.sum_all(g.select_entries(g.log_softmax_rows(logits), diagonal(n)));
}

} // namespace

NodeId mmcl_loss(Graph& g, NodeId img_emb, NodeId txt_emb, NodeId inv_tau) {
    check_batch(g, img_emb, txt_emb, "mmcl_loss");
    check_inv_tau(g, inv_tau, "mmcl_loss");
    const int b = g.value(img_emb).rows;

    const NodeId sims = g.matmul(img_emb, g.transpose(txt_emb));
    const NodeId logits = g.mul(sims, broadcast_scalar(g, inv_tau, b));
    const NodeId img_to_txt = diag_log_softmax_sum(g, logits);
    const NodeId txt_to_img = diag_log_softmax_sum(g, g.transpose(logits));
    return g.scale(g.add(img_to_txt, txt_to_img), -1.0 / (2.0 * b));
}

NodeId ssl_loss(Graph& g, NodeId img_emb, NodeId img_aug_emb, NodeId txt_emb, NodeId txt_aug_emb,
                NodeId inv_tau) {
    check_batch(g, img_emb, img_aug_emb, "ssl_loss");
    check_batch(g, txt_emb, txt_aug_emb, "ssl_loss");
    check_batch(g, img_emb, txt_emb, "ssl_loss");
    check_inv_tau(g, inv_tau, "ssl_loss");
    const int b = g.value(img_emb).rows;

    const NodeId scales = broadcast_scalar(g, inv_tau, b);
    const NodeId img_logits = g.mul(g.matmul(img_emb, g.transpose(img_aug_emb)), scales);
    const NodeId txt_logits = g.mul(g.matmul(txt_emb, g.transpose(txt_aug_emb)), scales);
    const NodeId both = g.add(diag_log_softmax_sum(g, img_logits), diag_log_softmax_sum(g, txt_logits));
    return g.scale(both, -1.0 / (2.0 * b));
}

CleanClipNodes cleanclip_loss(Graph& g, NodeId img_emb, NodeId img_aug_emb, NodeId txt_emb,
                              NodeId txt_aug_emb, NodeId inv_tau, double ssl_weight) {
    if (ssl_weight < 0.0) throw Error("cleanclip_loss: ssl_weight must be >= 0");
    CleanClipNodes out;
    out.mmcl = mmcl_loss(g, img_emb, txt_emb, inv_tau);
    out.ssl = ssl_loss(g, img_emb, img_aug_emb, txt_emb, txt_aug_emb, inv_tau);
    out.total = g.add(out.mmcl, g.scale(out.ssl, ssl_weight));
    return out;
}

NodeId deep_clust_loss(Graph& g, NodeId classifier_w, NodeId features,
                       const std::vector<int>& pseudo_labels) {
    const int b = g.value(features).rows;
    const int classes = g.value(classifier_w).cols;
    if (b < 1) throw Error("deep_clust_loss: empty batch");
    if (static_cast<int>(pseudo_labels.size()) != b)
        throw Error("deep_clust_loss: " + std::to_string(pseudo_labels.size()) + " labels for " +
                    std::to_string(b) + " rows");
    std::vector<std::pair<int, int>> picks;
    picks.reserve(pseudo_labels.size());
    for (int j = 0; j < b; ++j) {
        if (pseudo_labels[j] < 0 || pseudo_labels[j] >= classes)
            throw Error("deep_clust_loss: label " + std::to_string(pseudo_labels[j]) +
                        " out of range [0, " + std::to_string(classes) + ")");
        picks.emplace_back(j, pseudo_labels[j]);
    }
    const NodeId log_probs = g.log_softmax_rows(g.matmul(features, classifier_w));
    return g.scale(g.sum_all(g.select_entries(log_probs, picks)), -1.0 / b);
}

NodeId l2_penalty(Graph& g, const std::vector<NodeId>& weight_and_bias_leaves) {
    NodeId acc = -1;
    for (NodeId leaf : weight_and_bias_leaves) {
        const NodeId term = g.sum_all(g.square(leaf));
        acc = (acc < 0) ? term : g.add(acc, term);
    }
    if (acc < 0) acc = g.input(Tensor::scalar(0.0));
    return acc;
}

double mmcl_loss_value(const Tensor& img_emb, const Tensor& txt_emb, double tau) {
    if (tau <= 0.0) throw Error("mmcl_loss: temperature must be positive");
    Graph g;
    const NodeId inv_tau = g.input(Tensor::scalar(1.0 / tau));
    return g.value(mmcl_loss(g, g.input(img_emb), g.input(txt_emb), inv_tau)).scalar_value();
}

double ssl_loss_value(const Tensor& img_emb, const Tensor& img_aug_emb, const Tensor& txt_emb,
                      const Tensor& txt_aug_emb, double tau) {
    if (tau <= 0.0) throw Error("ssl_loss: temperature must be positive");
    Graph g;
    const NodeId inv_tau = g.input(Tensor::scalar(1.0 / tau));
    return g
        .value(ssl_loss(g, g.input(img_emb), g.input(img_aug_emb), g.input(txt_emb),
                        g.input(txt_aug_emb), inv_tau))
        .scalar_value();
}

double deep_clust_loss_value(const Tensor& classifier_w, const Tensor& features,
                             const std::vector<int>& pseudo_labels) {
    Graph g;
    return g.value(deep_clust_loss(g, g.input(classifier_w), g.input(features), pseudo_labels))
        .scalar_value();
}

} // namespace plab
