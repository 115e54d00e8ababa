#include "plab/pipeline.hpp"

#include <fstream>

#include "plab/checkpoint.hpp"
#include "plab/error.hpp"
#include "plab/report.hpp"
#include "plab/trajectory.hpp"

namespace plab {

namespace {

void write_text(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("pipeline: cannot open " + path.string() + " for writing");
    f << content;
    if (!f) throw Error("pipeline: write failed for " + path.string());
}

std::string epoch_name(int epoch) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "epoch_%03d.plab", epoch);
    return buf;
}

} // namespace

LabAssets build_assets(const RunConfig& cfg) {
    LabAssets assets;
    assets.templates = make_templates(cfg.world, cfg.data.templates_per_class);
    assets.trigger = make_trigger(cfg.trigger.patch_len, cfg.trigger.target_class, cfg.trigger.seed,
                                  cfg.trigger.placement, cfg.trigger.fixed_offset);
    assets.pretrain_data = generate(cfg.world, cfg.data.pretrain_rows);
    Rng poison_rng(derive_seed(cfg.trigger.seed, Stream::WorldData));
    poison(assets.pretrain_data, assets.trigger, cfg.data.poison_count, assets.templates, poison_rng);

    assets.eval_ctx.data = generate_split(cfg.world, cfg.eval.rows, cfg.eval.seed);
    assets.eval_ctx.templates = assets.templates;
    assets.eval_ctx.trigger = assets.trigger;
    assets.eval_ctx.asr_seed = cfg.eval.asr_seed;
    return assets;
}

DualEncoderParams initial_params(const RunConfig& cfg) {
    return init_dual_encoder(MlpConfig{cfg.encoder.image_dims}, MlpConfig{cfg.encoder.text_dims},
                             cfg.encoder.seed);
}

PretrainResult run_pretrain_stage(const RunConfig& cfg, const LabAssets& assets,
                                  const std::filesystem::path& out_dir) {
    const std::string run_id = objective_name(cfg.pretrain.objective) + ":pretrain";
    PretrainResult result = pretrain(cfg.pretrain, initial_params(cfg), assets.pretrain_data,
                                     assets.eval_ctx, run_id, config_fingerprint(cfg));

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_text(out_dir / "config.json", run_config_json(cfg));
        write_trajectory_csv(result.trajectory.records, out_dir / "trajectory.csv");
        for (std::size_t e = 0; e < result.checkpoints.size(); ++e)
            save_checkpoint(result.checkpoints[e],
                            out_dir / "checkpoints" / epoch_name(static_cast<int>(e)));
        const SelectRule rule{cfg.select.kind, cfg.select.target};
        const int chosen = select_model(result.trajectory.records, rule);
        save_checkpoint(result.checkpoints.at(static_cast<std::size_t>(chosen)),
                        out_dir / "selected.plab");
        save_checkpoint(result.checkpoints.back(), out_dir / "final.plab");
    }
    return result;
}

PairedDataset build_clean_subset(const RunConfig& cfg, const LabAssets& assets) {
    Rng rng(derive_seed(cfg.data.clean_seed, Stream::CleanSubset));
    return sample_clean_subset(assets.pretrain_data, cfg.data.clean_rows, cfg.data.residual_poison,
                               assets.trigger, assets.templates, rng);
}

FinetuneResult run_clean_stage(const RunConfig& cfg, const LabAssets& assets,
                               const DualEncoderParams& start, const std::string& run_id,
                               const std::filesystem::path& out_dir) {
    const PairedDataset clean_data = build_clean_subset(cfg, assets);

    DualEncoderParams model = start;
    if (cfg.shrink_perturb.enabled) {
        Rng rng(derive_seed(cfg.shrink_perturb.seed, Stream::ShrinkPerturb));
        model = shrink_and_perturb(model, cfg.shrink_perturb.lambda, cfg.shrink_perturb.sigma, rng,
                                   cfg.shrink_perturb.include_log_tau);
    }

    const std::string fingerprint = config_fingerprint(cfg);
    FinetuneResult result;
    if (cfg.clean.deep_clust.enabled)
        result = deep_clust_finetune(model, clean_data, cfg.clean, assets.eval_ctx, run_id, fingerprint);
    else if (cfg.clean.l2_weight > 0.0)
        result = heavy_reg_finetune(model, clean_data, cfg.clean, assets.eval_ctx, run_id, fingerprint);
    else
        result = cleanclip_finetune(model, clean_data, cfg.clean, assets.eval_ctx, run_id, fingerprint);

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_text(out_dir / "config.json", run_config_json(cfg));
        write_trajectory_csv(result.trajectory.records, out_dir / "trajectory.csv");
        for (std::size_t e = 0; e < result.checkpoints.size(); ++e)
            save_checkpoint(result.checkpoints[e],
                            out_dir / "checkpoints" / epoch_name(static_cast<int>(e)));
    }
    return result;
}

} // namespace plab
