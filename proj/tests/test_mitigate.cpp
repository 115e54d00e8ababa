#include <doctest.h>

#include <cmath>
#include <set>

#include "plab/error.hpp"
#include "plab/mitigate.hpp"
#include "plab/trajectory.hpp"

using namespace plab;

namespace {

struct CleanLab {
    WorldSpec world;
    PairedDataset clean_data;
    EvalContext eval_ctx;
    DualEncoderParams start;
};

CleanLab make_clean_lab() {
    CleanLab lab;
    lab.world.num_classes = 4;
    lab.world.d_img = 12;
    lab.world.d_txt = 10;
    lab.world.noise_sigma = 0.3;
    lab.world.seed = 81;

    const TemplateBank bank = make_templates(lab.world, 2);
    const TriggerSpec trigger = make_trigger(4, 0, 29);
    lab.clean_data = generate(lab.world, 64);

    lab.eval_ctx.data = generate_split(lab.world, 40, 311);
    lab.eval_ctx.templates = bank;
    lab.eval_ctx.trigger = trigger;
    lab.eval_ctx.asr_seed = 422;

    lab.start = init_dual_encoder(MlpConfig{{12, 8, 4}}, MlpConfig{{10, 8, 4}}, 15);
    return lab;
}

CleanConfig tiny_clean_config() {
    CleanConfig cfg;
    cfg.loss_mode = LossMode::MMCL_SSL;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.lr = 3e-3;
    cfg.warmup_steps = 2;
    cfg.seed = 51;
    cfg.aug = AugmentSpec{0.1, 0.05};
    return cfg;
}

double weight_norm_sq(const DualEncoderParams& p) {
    double s = 0.0;
    const auto tensors = param_tensors(p);
    for (std::size_t i = 0; i + 1 < tensors.size(); ++i) // log_tau excluded
        for (double x : tensors[i]->data) s += x * x;
    return s;
}

Tensor random_points(int n, int d, Rng& rng) {
    Tensor t(n, d);
    for (double& x : t.data) x = rng.normal();
    return t;
}

/// Global k-means optimum by enumerating every assignment of n points to two
/// clusters (centroid = cluster mean).
double brute_force_best_inertia(const Tensor& points) {
    const int n = points.rows;
    double best = std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < (1 << n); ++mask) {
        Tensor centroids(2, points.cols);
        int counts[2] = {0, 0};
        for (int i = 0; i < n; ++i) {
            const int c = (mask >> i) & 1;
            ++counts[c];
            for (int j = 0; j < points.cols; ++j) centroids.at(c, j) += points.at(i, j);
        }
        if (counts[0] == 0 || counts[1] == 0) continue;
        for (int c = 0; c < 2; ++c)
            for (int j = 0; j < points.cols; ++j) centroids.at(c, j) /= counts[c];
        double inertia = 0.0;
        for (int i = 0; i < n; ++i) {
            const int c = (mask >> i) & 1;
            for (int j = 0; j < points.cols; ++j) {
                const double d = points.at(i, j) - centroids.at(c, j);
                inertia += d * d;
            }
        }
        best = std::min(best, inertia);
    }
    return best;
}

} // namespace

TEST_CASE("kmeans with k = N puts every point in its own cluster") {
    Rng rng(3);
    const Tensor points = random_points(6, 2, rng);
    Rng krng(4);
    const ClusterState state = kmeans(points, 6, 50, 1e-10, krng);
    CHECK(state.inertia <= 1e-18);
    std::set<int> distinct(state.assignments.begin(), state.assignments.end());
    CHECK(distinct.size() == 6);
}

TEST_CASE("kmeans recovers two well-separated blobs regardless of seed") {
    Tensor points(4, 2, {0.0, 0.1, 0.1, 0.0, 10.0, 10.1, 10.1, 10.0});
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        const ClusterState state = kmeans(points, 2, 50, 1e-10, rng);
        CHECK(state.assignments[0] == state.assignments[1]);
        CHECK(state.assignments[2] == state.assignments[3]);
        CHECK(state.assignments[0] != state.assignments[2]);
    }
}

TEST_CASE("kmeans matches the exhaustive-assignment optimum on tiny instances") {
    int exact = 0;
    const int trials = 50;
    for (std::uint64_t seed = 1; seed <= trials; ++seed) {
        Rng rng(seed * 7);
        const Tensor points = random_points(8, 2, rng);
        const double best = brute_force_best_inertia(points);
        Rng krng(seed * 13 + 1);
        const ClusterState state = kmeans(points, 2, 100, 1e-12, krng);
        CHECK(state.inertia <= best + 1e-9);
        if (state.inertia <= best + 1e-9) ++exact;
    }
    CHECK(exact >= trials * 8 / 10);
}

TEST_CASE("kmeans state is self-consistent and validates k") {
    Rng rng(5);
    const Tensor points = random_points(20, 3, rng);
    Rng krng(6);
    const ClusterState state = kmeans(points, 4, 100, 1e-10, krng);
    double recomputed = 0.0;
    for (int i = 0; i < points.rows; ++i)
        for (int j = 0; j < points.cols; ++j) {
            const double d =
                points.at(i, j) - state.centroids.at(state.assignments[static_cast<std::size_t>(i)], j);
            recomputed += d * d;
        }
    CHECK(std::abs(recomputed - state.inertia) <= 1e-9);

    Rng krng2(7);
    CHECK_THROWS_AS(kmeans(points, 21, 10, 1e-10, krng2), Error);
}

TEST_CASE("oracle pseudo-labels are the true labels") {
    const CleanLab lab = make_clean_lab();
    Rng rng(1);
    const std::vector<int> labels =
        assign_pseudo_labels(lab.start, lab.clean_data, PseudoLabelSource::Oracle, DeepClustConfig{}, rng);
    CHECK(labels == lab.clean_data.true_labels);
}

TEST_CASE("kmeans pseudo-labels recover the classes of a zero-noise world") {
    WorldSpec world;
    world.num_classes = 3;
    world.d_img = 12;
    world.d_txt = 10;
    world.noise_sigma = 0.0;
    world.seed = 93;
    const PairedDataset data = generate(world, 45);
    const DualEncoderParams params =
        init_dual_encoder(MlpConfig{{12, 8, 4}}, MlpConfig{{10, 8, 4}}, 2);

    Rng rng(11);
    ClusterState state;
    DeepClustConfig dc;
    dc.k = 3;
    const std::vector<int> labels =
        assign_pseudo_labels(params, data, PseudoLabelSource::KMeans, dc, rng, &state);

    // Same true class -> same cluster; different class -> different cluster.
    for (int i = 0; i < data.size(); ++i)
        for (int j = 0; j < data.size(); ++j) {
            const bool same_class = data.true_labels[static_cast<std::size_t>(i)] ==
                                    data.true_labels[static_cast<std::size_t>(j)];
            const bool same_cluster = labels[static_cast<std::size_t>(i)] ==
                                      labels[static_cast<std::size_t>(j)];
            CHECK(same_class == same_cluster);
        }
    CHECK(state.inertia <= 1e-16);
}

TEST_CASE("cleanclip with zero lr returns the starting parameters bitwise") {
    const CleanLab lab = make_clean_lab();
    CleanConfig cfg = tiny_clean_config();
    cfg.lr = 0.0;
    const FinetuneResult result = cleanclip_finetune(lab.start, lab.clean_data, cfg, lab.eval_ctx);
    const auto before = param_tensors(lab.start);
    const auto after = param_tensors(result.checkpoints.back());
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(*before[i] == *after[i]);
}

TEST_CASE("finetune runs are pure functions of their inputs") {
    const CleanLab lab = make_clean_lab();
    const CleanConfig cfg = tiny_clean_config();
    const FinetuneResult a = cleanclip_finetune(lab.start, lab.clean_data, cfg, lab.eval_ctx, "x");
    const FinetuneResult b = cleanclip_finetune(lab.start, lab.clean_data, cfg, lab.eval_ctx, "x");
    CHECK(to_csv(a.trajectory.records) == to_csv(b.trajectory.records));
}

TEST_CASE("ssl-only cleaning reports a zero mmcl component") {
    const CleanLab lab = make_clean_lab();
    CleanConfig cfg = tiny_clean_config();
    cfg.loss_mode = LossMode::SSL_only;
    const FinetuneResult result = cleanclip_finetune(lab.start, lab.clean_data, cfg, lab.eval_ctx);
    for (const LossBreakdown& bd : result.trajectory.epoch_loss) {
        CHECK(bd.mmcl == 0.0);
        CHECK(bd.ssl != 0.0);
    }
}

TEST_CASE("mmcl-only cleaning reports a zero ssl component") {
    const CleanLab lab = make_clean_lab();
    CleanConfig cfg = tiny_clean_config();
    cfg.loss_mode = LossMode::MMCL_only;
    const FinetuneResult result = cleanclip_finetune(lab.start, lab.clean_data, cfg, lab.eval_ctx);
    for (const LossBreakdown& bd : result.trajectory.epoch_loss) {
        CHECK(bd.ssl == 0.0);
        CHECK(bd.mmcl != 0.0);
    }
}

TEST_CASE("deep clustering with zero weight coincides bitwise with cleanclip") {
    const CleanLab lab = make_clean_lab();
    CleanConfig plain = tiny_clean_config();
    CleanConfig dc = plain;
    dc.deep_clust.enabled = true;
    dc.deep_clust.weight = 0.0;
    dc.deep_clust.k = 4;

    const FinetuneResult a = cleanclip_finetune(lab.start, lab.clean_data, plain, lab.eval_ctx, "x");
    const FinetuneResult b = deep_clust_finetune(lab.start, lab.clean_data, dc, lab.eval_ctx, "x");
    CHECK(to_csv(a.trajectory.records) == to_csv(b.trajectory.records));
    const auto ta = param_tensors(a.checkpoints.back());
    const auto tb = param_tensors(b.checkpoints.back());
    for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i] == *tb[i]);
}

TEST_CASE("deep clustering trains with both pseudo-label sources") {
    const CleanLab lab = make_clean_lab();
    CleanConfig cfg = tiny_clean_config();
    cfg.deep_clust.enabled = true;
    cfg.deep_clust.weight = 1.0;
    cfg.deep_clust.k = 4;
    cfg.deep_clust.relabel_every = 1;

    cfg.deep_clust.source = PseudoLabelSource::KMeans;
    const FinetuneResult km = deep_clust_finetune(lab.start, lab.clean_data, cfg, lab.eval_ctx);
    CHECK(km.trajectory.epoch_loss.front().deep_clust != 0.0);

    cfg.deep_clust.source = PseudoLabelSource::Oracle;
    const FinetuneResult oracle = deep_clust_finetune(lab.start, lab.clean_data, cfg, lab.eval_ctx);
    CHECK(oracle.trajectory.epoch_loss.front().deep_clust != 0.0);

    CHECK_THROWS_AS(deep_clust_finetune(lab.start, lab.clean_data, tiny_clean_config(), lab.eval_ctx),
                    Error);
}

TEST_CASE("heavy regularization requires a positive weight and shrinks the norms") {
    const CleanLab lab = make_clean_lab();
    CleanConfig cfg = tiny_clean_config();
    CHECK_THROWS_AS(heavy_reg_finetune(lab.start, lab.clean_data, cfg, lab.eval_ctx), Error);

    cfg.l2_weight = 1e6;
    cfg.epochs = 3;
    const FinetuneResult result = heavy_reg_finetune(lab.start, lab.clean_data, cfg, lab.eval_ctx);
    for (std::size_t e = 1; e < result.checkpoints.size(); ++e)
        CHECK(weight_norm_sq(result.checkpoints[e]) < weight_norm_sq(result.checkpoints[e - 1]));
    CHECK(result.trajectory.epoch_loss.front().l2 != 0.0);
}

TEST_CASE("cleanclip_finetune rejects auxiliary terms") {
    const CleanLab lab = make_clean_lab();
    CleanConfig cfg = tiny_clean_config();
    cfg.l2_weight = 1.0;
    CHECK_THROWS_AS(cleanclip_finetune(lab.start, lab.clean_data, cfg, lab.eval_ctx), Error);
}

TEST_CASE("shrink_and_perturb algebra") {
    const CleanLab lab = make_clean_lab();

    Rng rng(1);
    const DualEncoderParams same = shrink_and_perturb(lab.start, 1.0, 0.0, rng);
    const auto ta = param_tensors(lab.start);
    const auto tb = param_tensors(same);
    for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i] == *tb[i]);

    DualEncoderParams two = lab.start;
    two.image_layers[0].weight.at(0, 0) = 2.0;
    two.image_layers[0].weight.at(0, 1) = -4.0;
    Rng rng2(1);
    const DualEncoderParams halved = shrink_and_perturb(two, 0.5, 0.0, rng2);
    CHECK(halved.image_layers[0].weight.at(0, 0) == 1.0);
    CHECK(halved.image_layers[0].weight.at(0, 1) == -2.0);

    // Composition at sigma = 0 with dyadic factors is exact.
    Rng r3(2), r4(3), r5(4);
    const DualEncoderParams ab =
        shrink_and_perturb(shrink_and_perturb(lab.start, 0.5, 0.0, r3), 0.25, 0.0, r4);
    const DualEncoderParams direct = shrink_and_perturb(lab.start, 0.125, 0.0, r5);
    const auto tab = param_tensors(ab);
    const auto tdir = param_tensors(direct);
    for (std::size_t i = 0; i < tab.size(); ++i) CHECK(*tab[i] == *tdir[i]);

    CHECK_THROWS_AS(shrink_and_perturb(lab.start, 1.5, 0.0, rng), Error);
    CHECK_THROWS_AS(shrink_and_perturb(lab.start, 0.5, -1.0, rng), Error);
}

TEST_CASE("shrink_and_perturb noise is deterministic and can spare log_tau") {
    const CleanLab lab = make_clean_lab();
    Rng r1(9), r2(9);
    const DualEncoderParams a = shrink_and_perturb(lab.start, 0.8, 0.05, r1);
    const DualEncoderParams b = shrink_and_perturb(lab.start, 0.8, 0.05, r2);
    const auto ta = param_tensors(a);
    const auto tb = param_tensors(b);
    for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i] == *tb[i]);
    CHECK_FALSE(a.log_tau == lab.start.log_tau);

    Rng r3(9);
    const DualEncoderParams spared = shrink_and_perturb(lab.start, 1.0, 0.05, r3, false);
    CHECK(spared.log_tau == lab.start.log_tau);
}
