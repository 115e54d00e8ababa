#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plab/train.hpp"

namespace plab {

enum class LossMode { MMCL_only, SSL_only, MMCL_SSL };
enum class PseudoLabelSource { KMeans, Oracle };

std::string loss_mode_name(LossMode m);

struct DeepClustConfig {
    bool enabled = false;
    int k = 10;
    int relabel_every = 1;
    PseudoLabelSource source = PseudoLabelSource::KMeans;
    double weight = 1.0;
    int kmeans_max_iters = 100;
    double kmeans_tol = 1e-8;
    int kmeans_restarts = 3;
};

struct CleanConfig {
    LossMode loss_mode = LossMode::MMCL_SSL;
    int epochs = 20;
    int batch_size = 128;
    double lr = 1e-4;
    int warmup_steps = 50;
    double ssl_weight = 1.0;
    double weight_decay = 0.01;
    AugmentSpec aug{0.1, 0.1};
    DeepClustConfig deep_clust;
    double l2_weight = 0.0;
    std::uint64_t seed = 0;
};

struct ClusterState {
    Tensor centroids;             // k x d
    std::vector<int> assignments; // per-row cluster id in [0, k)
    double inertia = 0.0;
    Tensor classifier_w;          // d x k; filled by the deep-clustering loop
};

struct FinetuneResult {
    std::vector<DualEncoderParams> checkpoints; // index = epoch; [0] is the input model
    TrainTrajectory trajectory;
};

/// CleanCLIP finetuning on a trusted subset with one of the three loss modes.
/// Warmup+cosine schedule, accuracy and ASR measured at the end of every
/// epoch (epoch 0 records the starting model). Auxiliary terms must be off.
FinetuneResult cleanclip_finetune(const DualEncoderParams& start, const PairedDataset& clean_data,
                                  const CleanConfig& cfg, const EvalContext& eval_ctx,
                                  const std::string& run_id = "clean",
                                  const std::string& fingerprint = "");

/// k-means++ seeding then Lloyd iterations until the max centroid shift drops
/// below tol or max_iters is reached. An emptied cluster is re-seeded to the
/// point farthest from its assigned centroid. Inertia is checked to be
/// nonincreasing on every run. The whole procedure restarts `restarts` times
/// from fresh seedings and the lowest-inertia solution wins.
ClusterState kmeans(const Tensor& features, int k, int max_iters, double tol, Rng& rng,
                    int restarts = 10);

/// Pseudo-labels for the deep-clustering objective: k-means over the current
/// image embeddings, or the dataset's true labels (the oracle upper bound).
std::vector<int> assign_pseudo_labels(const DualEncoderParams& params,
                                      const PairedDataset& clean_data, PseudoLabelSource source,
                                      const DeepClustConfig& cfg, Rng& rng,
                                      ClusterState* state = nullptr);

/// CleanCLIP plus the pseudo-label cross-entropy head. Labels are recomputed
/// every relabel_every epochs; with the k-means source the classifier is
/// re-initialized (fresh seeded draw) on every recompute and its optimizer
/// state reset. With weight 0 the clustering branch is skipped entirely and
/// the trajectory coincides with cleanclip_finetune under shared seeds.
FinetuneResult deep_clust_finetune(const DualEncoderParams& start, const PairedDataset& clean_data,
                                   const CleanConfig& cfg, const EvalContext& eval_ctx,
                                   const std::string& run_id = "deepclust",
                                   const std::string& fingerprint = "");

/// CleanCLIP plus l2_weight times the sum of squared encoder weights and
/// biases. Requires l2_weight > 0.
FinetuneResult heavy_reg_finetune(const DualEncoderParams& start, const PairedDataset& clean_data,
                                  const CleanConfig& cfg, const EvalContext& eval_ctx,
                                  const std::string& run_id = "heavyreg",
                                  const std::string& fingerprint = "");

/// theta <- lambda * theta + N(0, sigma^2), independent draw per entry.
/// lambda in [0, 1], sigma >= 0; log_tau included unless include_log_tau is
/// false.
DualEncoderParams shrink_and_perturb(const DualEncoderParams& params, double lambda, double sigma,
                                     Rng& rng, bool include_log_tau = true);

} // namespace plab
