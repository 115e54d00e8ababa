#include <doctest.h>

#include <cmath>

#include "plab/adamw.hpp"
#include "plab/error.hpp"
#include "plab/schedule.hpp"
#include "plab/train.hpp"
#include "plab/trajectory.hpp"

using namespace plab;

namespace {

struct TinyLab {
    WorldSpec world;
    PairedDataset data;
    EvalContext eval_ctx;
    DualEncoderParams init;
};

TinyLab make_tiny_lab(int n = 64, int poison_count = 6) {
    TinyLab lab;
    lab.world.num_classes = 4;
    lab.world.d_img = 12;
    lab.world.d_txt = 10;
    lab.world.noise_sigma = 0.3;
    lab.world.seed = 71;

    const TemplateBank bank = make_templates(lab.world, 2);
    const TriggerSpec trigger = make_trigger(4, 0, 19);
    lab.data = generate(lab.world, n);
    Rng rng(23);
    poison(lab.data, trigger, poison_count, bank, rng);

    lab.eval_ctx.data = generate_split(lab.world, 50, 111);
    lab.eval_ctx.templates = bank;
    lab.eval_ctx.trigger = trigger;
    lab.eval_ctx.asr_seed = 222;

    lab.init = init_dual_encoder(MlpConfig{{12, 8, 4}}, MlpConfig{{10, 8, 4}}, 5);
    return lab;
}

PretrainConfig tiny_pretrain_config() {
    PretrainConfig cfg;
    cfg.objective = Objective::MMCL;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.peak_lr = 5e-3;
    cfg.warmup_steps = 2;
    cfg.seed = 9;
    cfg.eval_every = 1;
    return cfg;
}

} // namespace

TEST_CASE("lr schedule ramps, peaks, decays to zero and stays continuous") {
    CHECK(lr_at(0, 1e-3, 100, 1000) == 0.0);
    CHECK(lr_at(100, 1e-3, 100, 1000) == 1e-3);
    CHECK(lr_at(1000, 1e-3, 100, 1000) == doctest::Approx(0.0).epsilon(1e-18));

    // Continuity at the boundary: the ramp approaches the cosine value.
    const double before = lr_at(99, 1e-3, 100, 1000);
    CHECK(std::abs(before - 1e-3) <= 1e-3 / 100.0 + 1e-15);

    // Nonincreasing after warmup.
    double prev = lr_at(100, 1e-3, 100, 1000);
    for (int s = 101; s <= 1000; ++s) {
        const double lr = lr_at(s, 1e-3, 100, 1000);
        CHECK(lr <= prev);
        prev = lr;
    }

    CHECK_THROWS_AS(lr_at(-1, 1e-3, 10, 100), Error);
    CHECK_THROWS_AS(lr_at(0, 1e-3, 100, 100), Error);
}

TEST_CASE("adamw matches the hand-computed three-step trajectory") {
    Tensor theta = Tensor::scalar(1.0);
    const Tensor g = Tensor::scalar(1.0);
    AdamW opt({&theta}, AdamWConfig{0.9, 0.999, 1e-8, 0.01});

    const double expected[3] = {0.8990000010, 0.7981010020, 0.6973029020};
    for (int t = 0; t < 3; ++t) {
        opt.step({&theta}, {&g}, 0.1);
        CHECK(std::abs(theta.data[0] - expected[t]) <= 1e-9);
    }
}

TEST_CASE("adamw with zero gradient and no decay is a no-op") {
    Tensor theta = Tensor::scalar(1.5);
    const Tensor g = Tensor::scalar(0.0);
    AdamW opt({&theta}, AdamWConfig{0.9, 0.999, 1e-8, 0.0});
    opt.step({&theta}, {&g}, 0.1);
    CHECK(theta.data[0] == 1.5);
    CHECK(opt.first_moment(0).data[0] == 0.0);
    CHECK(opt.second_moment(0).data[0] == 0.0);
}

TEST_CASE("adamw decreases theta strictly under a constant positive gradient") {
    Tensor theta = Tensor::scalar(0.7);
    const Tensor g = Tensor::scalar(0.35);
    AdamW opt({&theta}, AdamWConfig{0.9, 0.999, 1e-8, 0.0});
    double prev = theta.data[0];
    for (int t = 0; t < 20; ++t) {
        opt.step({&theta}, {&g}, 0.01);
        CHECK(theta.data[0] < prev);
        prev = theta.data[0];
    }
}

TEST_CASE("adamw rejects non-finite gradients") {
    Tensor theta = Tensor::scalar(1.0);
    Tensor g = Tensor::scalar(std::nan(""));
    AdamW opt({&theta}, AdamWConfig{});
    CHECK_THROWS_WITH_AS(opt.step({&theta}, {&g}, 0.1), "adamw: non-finite gradient at parameter 0",
                         Error);
}

TEST_CASE("pretrain reduces the contrastive loss on a small dataset") {
    const TinyLab lab = make_tiny_lab();
    const PretrainResult result = pretrain(tiny_pretrain_config(), lab.init, lab.data, lab.eval_ctx);
    REQUIRE(result.trajectory.epoch_loss.size() == 3);
    CHECK(result.trajectory.epoch_loss.back().mmcl < result.trajectory.epoch_loss.front().mmcl);
    CHECK(result.checkpoints.size() == 4);
}

TEST_CASE("pretrain is deterministic per config and seed") {
    const TinyLab lab = make_tiny_lab();
    const PretrainConfig cfg = tiny_pretrain_config();
    const PretrainResult a = pretrain(cfg, lab.init, lab.data, lab.eval_ctx);
    const PretrainResult b = pretrain(cfg, lab.init, lab.data, lab.eval_ctx);
    CHECK(to_csv(a.trajectory.records) == to_csv(b.trajectory.records));
    const auto ta = param_tensors(a.checkpoints.back());
    const auto tb = param_tensors(b.checkpoints.back());
    for (std::size_t i = 0; i < ta.size(); ++i) CHECK(*ta[i] == *tb[i]);
}

TEST_CASE("an MMCL run never evaluates the ssl loss") {
    const TinyLab lab = make_tiny_lab();
    PretrainConfig cfg = tiny_pretrain_config();
    cfg.objective = Objective::MMCL;
    const PretrainResult result = pretrain(cfg, lab.init, lab.data, lab.eval_ctx);
    for (const LossBreakdown& bd : result.trajectory.epoch_loss) {
        CHECK(bd.ssl == 0.0);
        CHECK(bd.ssl_weight == 0.0);
    }
    for (const EvalRecord& r : result.trajectory.records) CHECK(r.loss.ssl == 0.0);
}

TEST_CASE("the combined objective exercises both components") {
    const TinyLab lab = make_tiny_lab();
    PretrainConfig cfg = tiny_pretrain_config();
    cfg.objective = Objective::MMCL_SSL;
    cfg.aug = AugmentSpec{0.1, 0.05};
    const PretrainResult result = pretrain(cfg, lab.init, lab.data, lab.eval_ctx);
    CHECK(result.trajectory.epoch_loss.front().ssl != 0.0);
    CHECK(result.trajectory.epoch_loss.front().ssl_weight == 1.0);
    // total = mmcl + w * ssl within 1e-12
    for (const LossBreakdown& bd : result.trajectory.epoch_loss)
        CHECK(std::abs(bd.total - (bd.mmcl + bd.ssl_weight * bd.ssl)) <= 1e-12);
}

TEST_CASE("pretrain validates its preconditions") {
    const TinyLab lab = make_tiny_lab();
    PretrainConfig cfg = tiny_pretrain_config();
    cfg.batch_size = 1000;
    CHECK_THROWS_AS(pretrain(cfg, lab.init, lab.data, lab.eval_ctx), Error);
    cfg = tiny_pretrain_config();
    cfg.warmup_steps = 100000;
    CHECK_THROWS_AS(pretrain(cfg, lab.init, lab.data, lab.eval_ctx), Error);
}

TEST_CASE("select_model applies both rules with earliest-epoch tie-breaks") {
    auto rec = [](int epoch, double acc) {
        EvalRecord r;
        r.epoch = epoch;
        r.accuracy = acc;
        return r;
    };

    CHECK(select_model({rec(3, 12.0)}, SelectRule{SelectRule::MaxAccuracy, 0}) == 3);
    CHECK(select_model({rec(1, 10), rec(2, 20), rec(3, 20)},
                       SelectRule{SelectRule::MaxAccuracy, 0}) == 2);
    CHECK(select_model({rec(1, 22.0), rec(2, 23.9), rec(3, 25.0)},
                       SelectRule{SelectRule::ClosestAccuracy, 23.76}) == 2);
    CHECK_THROWS_AS(select_model({}, SelectRule{}), Error);
}
