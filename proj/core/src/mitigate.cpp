#include "plab/mitigate.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>

#include "plab/error.hpp"
#include "plab/losses.hpp"
#include "plab/schedule.hpp"
#include "train_common.hpp"

namespace plab {

std::string loss_mode_name(LossMode m) {
    switch (m) {
    case LossMode::MMCL_only: return "MMCL";
    case LossMode::SSL_only: return "SSL";
    case LossMode::MMCL_SSL: return "MMCL_SSL";
    }
    return "?";
}

namespace {

double sq_dist(const Tensor& a, int ra, const Tensor& b, int rb) {
    double s = 0.0;
    for (int j = 0; j < a.cols; ++j) {
        const double d = a.at(ra, j) - b.at(rb, j);
        s += d * d;
    }
    return s;
}

std::vector<int> assign_to_centroids(const Tensor& points, const Tensor& centroids) {
    std::vector<int> out(static_cast<std::size_t>(points.rows), 0);
    for (int i = 0; i < points.rows; ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int c = 0; c < centroids.rows; ++c) {
            const double d = sq_dist(points, i, centroids, c);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

double total_inertia(const Tensor& points, const Tensor& centroids, const std::vector<int>& assign) {
    double s = 0.0;
    for (int i = 0; i < points.rows; ++i)
        s += sq_dist(points, i, centroids, assign[static_cast<std::size_t>(i)]);
    return s;
}

Tensor init_classifier(int d, int k, Rng& rng) {
    const double bound = std::sqrt(6.0 / (d + k));
    Tensor w(d, k);
    for (double& x : w.data) x = (2.0 * rng.uniform() - 1.0) * bound;
    return w;
}

} // namespace

namespace {

ClusterState kmeans_once(const Tensor& features, int k, int max_iters, double tol, Rng& rng) {
    const int n = features.rows;

    // k-means++ seeding.
    Tensor centroids(k, features.cols);
    std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    int first = rng.uniform_int(n);
    for (int j = 0; j < features.cols; ++j) centroids.at(0, j) = features.at(first, j);
    for (int c = 1; c < k; ++c) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            d2[static_cast<std::size_t>(i)] =
                std::min(d2[static_cast<std::size_t>(i)], sq_dist(features, i, centroids, c - 1));
            sum += d2[static_cast<std::size_t>(i)];
        }
        int pick = 0;
        if (sum > 0.0) {
            const double u = rng.uniform() * sum;
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += d2[static_cast<std::size_t>(i)];
                if (u < acc) {
                    pick = i;
                    break;
                }
                pick = i;
            }
        } else {
            pick = rng.uniform_int(n);
        }
        for (int j = 0; j < features.cols; ++j) centroids.at(c, j) = features.at(pick, j);
    }

    ClusterState state;
    state.assignments = assign_to_centroids(features, centroids);
    double prev = total_inertia(features, centroids, state.assignments);

    for (int iter = 0; iter < max_iters; ++iter) {
        // Update step: means of the current members; empty clusters are
        // re-seeded at the point farthest from its assigned centroid.
        Tensor next(k, features.cols);
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (int i = 0; i < n; ++i) {
            const int c = state.assignments[static_cast<std::size_t>(i)];
            ++counts[static_cast<std::size_t>(c)];
            for (int j = 0; j < features.cols; ++j) next.at(c, j) += features.at(i, j);
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] == 0) continue;
            for (int j = 0; j < features.cols; ++j) next.at(c, j) /= counts[static_cast<std::size_t>(c)];
        }
        std::vector<std::uint8_t> taken(static_cast<std::size_t>(n), 0);
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] != 0) continue;
            int far = -1;
            double far_d = -1.0;
            for (int i = 0; i < n; ++i) {
                if (taken[static_cast<std::size_t>(i)]) continue;
                const double d =
                    sq_dist(features, i, next, state.assignments[static_cast<std::size_t>(i)]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far < 0) break;
            taken[static_cast<std::size_t>(far)] = 1;
            for (int j = 0; j < features.cols; ++j) next.at(c, j) = features.at(far, j);
        }

        double shift = 0.0;
        for (int c = 0; c < k; ++c) shift = std::max(shift, sq_dist(next, c, centroids, c));
        centroids = std::move(next);

        state.assignments = assign_to_centroids(features, centroids);
        const double inertia = total_inertia(features, centroids, state.assignments);
        if (inertia > prev + 1e-9)
            throw Error("kmeans: inertia increased from " + std::to_string(prev) + " to " +
                        std::to_string(inertia));
        prev = inertia;
        if (std::sqrt(shift) < tol) break;
    }

    state.centroids = std::move(centroids);
    state.inertia = prev;
    return state;
}

} // namespace

ClusterState kmeans(const Tensor& features, int k, int max_iters, double tol, Rng& rng,
                    int restarts) {
    const int n = features.rows;
    if (k < 1) throw Error("kmeans: k must be >= 1");
    if (k > n) throw Error("kmeans: k " + std::to_string(k) + " exceeds " + std::to_string(n) + " points");
    if (max_iters < 1) throw Error("kmeans: max_iters must be >= 1");
    if (restarts < 1) throw Error("kmeans: restarts must be >= 1");

    ClusterState best;
    for (int r = 0; r < restarts; ++r) {
        ClusterState candidate = kmeans_once(features, k, max_iters, tol, rng);
        if (r == 0 || candidate.inertia < best.inertia) best = std::move(candidate);
    }
    return best;
}

std::vector<int> assign_pseudo_labels(const DualEncoderParams& params,
                                      const PairedDataset& clean_data, PseudoLabelSource source,
                                      const DeepClustConfig& cfg, Rng& rng, ClusterState* state) {
    if (source == PseudoLabelSource::Oracle) return clean_data.true_labels;
    const Tensor features = encode_images(params, clean_data.images);
    ClusterState cs =
        kmeans(features, cfg.k, cfg.kmeans_max_iters, cfg.kmeans_tol, rng, cfg.kmeans_restarts);
    if (state) *state = cs;
    return cs.assignments;
}

namespace {

std::vector<bool> decay_mask_for(const DualEncoderParams& params) {
    std::vector<bool> mask(param_tensors(params).size(), true);
    mask.back() = false;
    return mask;
}

FinetuneResult finetune_engine(const DualEncoderParams& start, const PairedDataset& clean_data,
                               const CleanConfig& cfg, const EvalContext& eval_ctx,
                               const std::string& run_id, const std::string& fingerprint) {
    if (cfg.epochs < 1) throw Error("finetune: epochs must be >= 1");
    if (cfg.lr < 0.0) throw Error("finetune: lr must be >= 0");
    if (cfg.ssl_weight < 0.0) throw Error("finetune: ssl_weight must be >= 0");
    if (clean_data.size() == 0) throw Error("finetune: empty cleaning set");
    if (cfg.batch_size < 1 || cfg.batch_size > clean_data.size())
        throw Error("finetune: batch_size must lie in [1, cleaning set size]");

    const int steps_per_epoch = clean_data.size() / cfg.batch_size;
    const int total_steps = cfg.epochs * steps_per_epoch;
    if (cfg.warmup_steps < 0 || cfg.warmup_steps >= total_steps)
        throw Error("finetune: warmup_steps " + std::to_string(cfg.warmup_steps) +
                    " must lie in [0, total steps " + std::to_string(total_steps) + ")");

    const bool use_mmcl = cfg.loss_mode != LossMode::SSL_only;
    const bool use_ssl = cfg.loss_mode != LossMode::MMCL_only;
    const bool use_dc = cfg.deep_clust.enabled && cfg.deep_clust.weight > 0.0;
    const bool use_l2 = cfg.l2_weight > 0.0;
    const std::string mode = loss_mode_name(cfg.loss_mode);

    DualEncoderParams params = start;
    AdamW opt(param_tensors(std::as_const(params)),
              AdamWConfig{0.9, 0.999, 1e-8, cfg.weight_decay}, decay_mask_for(params));
    Rng rng_shuffle(derive_seed(cfg.seed, Stream::Shuffle));
    Rng rng_augment(derive_seed(cfg.seed, Stream::Augment));
    Rng rng_cluster(derive_seed(cfg.seed, Stream::Cluster));
    Rng rng_winit(derive_seed(cfg.seed, Stream::ClassifierInit));

    FinetuneResult result;
    result.checkpoints.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
    result.checkpoints.push_back(params);
    {
        EvalRecord r;
        r.run_id = run_id;
        r.epoch = 0;
        r.lr = cfg.lr;
        r.loss_mode = mode;
        const EvalOutcome out = evaluate(params, eval_ctx);
        r.accuracy = out.accuracy;
        r.asr = out.asr;
        r.fingerprint = fingerprint;
        result.trajectory.records.push_back(std::move(r));
    }

    std::vector<int> pseudo_labels;
    Tensor classifier_w;
    std::unique_ptr<AdamW> opt_w;
    const int embed_dim = start.image_layers.back().weight.cols;

    int global_step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (use_dc && (epoch - 1) % cfg.deep_clust.relabel_every == 0) {
            pseudo_labels = assign_pseudo_labels(params, clean_data, cfg.deep_clust.source,
                                                 cfg.deep_clust, rng_cluster);
            // The classifier is re-initialized on every recompute with
            // clustering-derived labels; oracle labels are static so the
            // head is drawn once and kept.
            if (epoch == 1 || cfg.deep_clust.source == PseudoLabelSource::KMeans) {
                classifier_w = init_classifier(embed_dim, cfg.deep_clust.k, rng_winit);
                opt_w = std::make_unique<AdamW>(std::vector<const Tensor*>{&classifier_w},
                                                AdamWConfig{0.9, 0.999, 1e-8, cfg.weight_decay});
            }
        }

        const std::vector<int> order = detail::shuffled_indices(clean_data.size(), rng_shuffle);
        LossBreakdown epoch_mean;
        for (int b = 0; b < steps_per_epoch; ++b) {
            const detail::BatchView batch =
                detail::gather_batch(clean_data, order, b * cfg.batch_size, cfg.batch_size);
            const double lr = lr_at(global_step, cfg.lr, cfg.warmup_steps, total_steps);

            Graph g;
            const EncoderLeaves leaves = make_leaves(g, params);
            const NodeId img = encode_images(g, leaves, batch.images);
            const NodeId txt = encode_texts(g, leaves, batch.texts);
            const NodeId inv_tau = g.exp_scalar(leaves.log_tau);

            LossBreakdown bd;
            NodeId total = -1;
            auto accumulate = [&g, &total](NodeId term, double weight) {
                const NodeId scaled = (weight == 1.0) ? term : g.scale(term, weight);
                total = (total < 0) ? scaled : g.add(total, scaled);
            };

            if (use_mmcl) {
                const NodeId n = mmcl_loss(g, img, txt, inv_tau);
                bd.mmcl = g.value(n).scalar_value();
                accumulate(n, 1.0);
            }
            if (use_ssl) {
                const auto [aug_images, aug_texts] =
                    augment(batch.images, batch.texts, cfg.aug, rng_augment);
                const NodeId img_aug = encode_images(g, leaves, aug_images);
                const NodeId txt_aug = encode_texts(g, leaves, aug_texts);
                const NodeId n = ssl_loss(g, img, img_aug, txt, txt_aug, inv_tau);
                bd.ssl = g.value(n).scalar_value();
                bd.ssl_weight = cfg.ssl_weight;
                accumulate(n, cfg.ssl_weight);
            }
            NodeId w_leaf = -1;
            if (use_dc) {
                std::vector<int> batch_labels(static_cast<std::size_t>(cfg.batch_size));
                for (int i = 0; i < cfg.batch_size; ++i)
                    batch_labels[static_cast<std::size_t>(i)] =
                        pseudo_labels[static_cast<std::size_t>(order[static_cast<std::size_t>(
                            b * cfg.batch_size + i)])];
                w_leaf = g.param(classifier_w);
                const NodeId n = deep_clust_loss(g, w_leaf, img, batch_labels);
                bd.deep_clust = g.value(n).scalar_value();
                bd.deep_clust_weight = cfg.deep_clust.weight;
                accumulate(n, cfg.deep_clust.weight);
            }
            if (use_l2) {
                const NodeId n = l2_penalty(g, leaves.weight_and_bias_ids());
                bd.l2 = g.value(n).scalar_value();
                bd.l2_weight = cfg.l2_weight;
                accumulate(n, cfg.l2_weight);
            }
            bd.total = g.value(total).scalar_value();

            auto grads = g.backward(total);
            std::vector<Tensor*> tensors = param_tensors(params);
            std::vector<const Tensor*> grad_ptrs;
            grad_ptrs.reserve(tensors.size());
            for (NodeId id : leaves.all_ids()) grad_ptrs.push_back(&grads.at(id));
            opt.step(tensors, grad_ptrs, lr);
            detail::clamp_log_tau(params);
            if (use_dc)
                opt_w->step({&classifier_w}, {&grads.at(w_leaf)}, lr);
            ++global_step;

            epoch_mean.total += bd.total;
            epoch_mean.mmcl += bd.mmcl;
            epoch_mean.ssl += bd.ssl;
            epoch_mean.deep_clust += bd.deep_clust;
            epoch_mean.l2 += bd.l2;
            epoch_mean.ssl_weight = bd.ssl_weight;
            epoch_mean.deep_clust_weight = bd.deep_clust_weight;
            epoch_mean.l2_weight = bd.l2_weight;
        }
        epoch_mean.total /= steps_per_epoch;
        epoch_mean.mmcl /= steps_per_epoch;
        epoch_mean.ssl /= steps_per_epoch;
        epoch_mean.deep_clust /= steps_per_epoch;
        epoch_mean.l2 /= steps_per_epoch;
        result.trajectory.epoch_loss.push_back(epoch_mean);
        result.checkpoints.push_back(params);

        EvalRecord r;
        r.run_id = run_id;
        r.epoch = epoch;
        r.lr = cfg.lr;
        r.loss_mode = mode;
        const EvalOutcome out = evaluate(params, eval_ctx);
        r.accuracy = out.accuracy;
        r.asr = out.asr;
        r.loss = epoch_mean;
        r.fingerprint = fingerprint;
        result.trajectory.records.push_back(std::move(r));
    }
    return result;
}

} // namespace

FinetuneResult cleanclip_finetune(const DualEncoderParams& start, const PairedDataset& clean_data,
                                  const CleanConfig& cfg, const EvalContext& eval_ctx,
                                  const std::string& run_id, const std::string& fingerprint) {
    if (cfg.deep_clust.enabled && cfg.deep_clust.weight > 0.0)
        throw Error("cleanclip_finetune: deep clustering must be off (use deep_clust_finetune)");
    if (cfg.l2_weight > 0.0)
        throw Error("cleanclip_finetune: l2_weight must be 0 (use heavy_reg_finetune)");
    return finetune_engine(start, clean_data, cfg, eval_ctx, run_id, fingerprint);
}

FinetuneResult deep_clust_finetune(const DualEncoderParams& start, const PairedDataset& clean_data,
                                   const CleanConfig& cfg, const EvalContext& eval_ctx,
                                   const std::string& run_id, const std::string& fingerprint) {
    if (!cfg.deep_clust.enabled) throw Error("deep_clust_finetune: deep clustering is not enabled");
    if (cfg.deep_clust.weight < 0.0) throw Error("deep_clust_finetune: weight must be >= 0");
    if (cfg.deep_clust.k < 1) throw Error("deep_clust_finetune: k must be >= 1");
    if (cfg.deep_clust.relabel_every < 1)
        throw Error("deep_clust_finetune: relabel_every must be >= 1");
    return finetune_engine(start, clean_data, cfg, eval_ctx, run_id, fingerprint);
}

FinetuneResult heavy_reg_finetune(const DualEncoderParams& start, const PairedDataset& clean_data,
                                  const CleanConfig& cfg, const EvalContext& eval_ctx,
                                  const std::string& run_id, const std::string& fingerprint) {
    if (cfg.l2_weight <= 0.0) throw Error("heavy_reg_finetune: l2_weight must be > 0");
    return finetune_engine(start, clean_data, cfg, eval_ctx, run_id, fingerprint);
}

DualEncoderParams shrink_and_perturb(const DualEncoderParams& params, double lambda, double sigma,
                                     Rng& rng, bool include_log_tau) {
    if (lambda < 0.0 || lambda > 1.0) throw Error("shrink_and_perturb: lambda must be in [0, 1]");
    if (sigma < 0.0) throw Error("shrink_and_perturb: sigma must be >= 0");
    DualEncoderParams out = params;
    std::vector<Tensor*> tensors = param_tensors(out);
    const std::size_t count = include_log_tau ? tensors.size() : tensors.size() - 1;
    for (std::size_t t = 0; t < count; ++t)
        for (double& x : tensors[t]->data) x = lambda * x + sigma * rng.normal();
    return out;
}

} // namespace plab
