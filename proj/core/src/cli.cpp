#include "plab/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "plab/checkpoint.hpp"
#include "plab/config.hpp"
#include "plab/error.hpp"
#include "plab/pipeline.hpp"
#include "plab/report.hpp"
#include "plab/sweep.hpp"
#include "plab/trajectory.hpp"

namespace plab {

namespace {

namespace fs = std::filesystem;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file")->required();
    cmd->add_option("overrides", args.overrides, "key.path=value overrides");
}

void save_templates(const TemplateBank& bank, const fs::path& path) {
    NamedTensors tensors;
    tensors.emplace_back("vectors", bank.vectors);
    tensors.emplace_back("meta", Tensor(1, 2, {static_cast<double>(bank.num_classes),
                                               static_cast<double>(bank.per_class)}));
    save_tensors(tensors, path);
}

void save_trigger(const TriggerSpec& trigger, const fs::path& path) {
    NamedTensors tensors;
    tensors.emplace_back("patch", Tensor(1, trigger.patch_len, trigger.patch));
    tensors.emplace_back(
        "meta", Tensor(1, 3, {static_cast<double>(trigger.target_class),
                              trigger.placement == Placement::RandomOffset ? 0.0 : 1.0,
                              static_cast<double>(trigger.fixed_offset)}));
    save_tensors(tensors, path);
}

DualEncoderParams load_clean_start(const RunConfig& cfg) {
    // The backdoored model to clean: the last pretraining epoch by default
    // (accuracy-based selection saturates at desk scale and would pick an
    // early, not-yet-poisoned epoch).
    fs::path path = cfg.clean_checkpoint.empty()
                        ? fs::path(cfg.output_dir) / "pretrain" / "final.plab"
                        : fs::path(cfg.clean_checkpoint);
    if (!fs::exists(path))
        throw Error("clean: starting checkpoint " + path.string() +
                    " not found (run `pretrain` first or set clean_checkpoint)");
    return load_checkpoint(path);
}

int cmd_gen_data(const CommonArgs& args) {
    const RunConfig cfg = load_run_config(args.config_path, args.overrides);
    const LabAssets assets = build_assets(cfg);
    const fs::path out = fs::path(cfg.output_dir) / "data";
    save_dataset(assets.pretrain_data, out / "pretrain.plab");
    save_dataset(assets.eval_ctx.data, out / "eval.plab");
    save_templates(assets.templates, out / "templates.plab");
    save_trigger(assets.trigger, out / "trigger.plab");
    std::cout << "gen-data: wrote " << assets.pretrain_data.size() << " pretraining rows ("
              << assets.pretrain_data.poison_count() << " poisoned), " << assets.eval_ctx.data.size()
              << " eval rows to " << out.string() << "\n";
    return 0;
}

int cmd_pretrain(const CommonArgs& args) {
    const RunConfig cfg = load_run_config(args.config_path, args.overrides);
    const LabAssets assets = build_assets(cfg);
    const fs::path out = fs::path(cfg.output_dir) / "pretrain";
    const PretrainResult result = run_pretrain_stage(cfg, assets, out);
    for (const EvalRecord& r : result.trajectory.records)
        std::cout << "epoch " << r.epoch << ": accuracy " << format_double(r.accuracy) << "% asr "
                  << format_double(r.asr) << "%\n";
    std::cout << "pretrain: outputs in " << out.string() << "\n";
    return 0;
}

int cmd_clean(const CommonArgs& args) {
    const RunConfig cfg = load_run_config(args.config_path, args.overrides);
    const LabAssets assets = build_assets(cfg);
    const DualEncoderParams start = load_clean_start(cfg);
    const std::string run_id = objective_name(cfg.pretrain.objective) + ":clean";
    const fs::path out = fs::path(cfg.output_dir) / "clean";
    const FinetuneResult result = run_clean_stage(cfg, assets, start, run_id, out);
    emit_report(result.trajectory.records, out);
    for (const EvalRecord& r : result.trajectory.records)
        std::cout << "epoch " << r.epoch << ": accuracy " << format_double(r.accuracy) << "% asr "
                  << format_double(r.asr) << "% (mmcl " << format_double(r.loss.mmcl) << ", ssl "
                  << format_double(r.loss.ssl) << ", deep_clust " << format_double(r.loss.deep_clust)
                  << ", l2 " << format_double(r.loss.l2) << ")\n";
    std::cout << "clean: outputs in " << out.string() << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint) {
    const RunConfig cfg = load_run_config(args.config_path, args.overrides);
    const LabAssets assets = build_assets(cfg);
    fs::path path = checkpoint.empty() ? fs::path(cfg.output_dir) / "pretrain" / "selected.plab"
                                       : fs::path(checkpoint);
    if (!fs::exists(path)) throw Error("eval: checkpoint " + path.string() + " not found");
    const DualEncoderParams params = load_checkpoint(path);
    const EvalOutcome out = evaluate(params, assets.eval_ctx);
    std::cout << "accuracy " << format_double(out.accuracy) << "% asr " << format_double(out.asr)
              << "%\n";

    EvalRecord r;
    r.run_id = objective_name(cfg.pretrain.objective) + ":eval";
    r.loss_mode = objective_name(cfg.pretrain.objective);
    r.accuracy = out.accuracy;
    r.asr = out.asr;
    r.fingerprint = config_fingerprint(cfg);
    write_trajectory_csv({r}, fs::path(cfg.output_dir) / "eval.csv");
    return 0;
}

int cmd_sweep(const CommonArgs& args) {
    const SweepConfig sweep = load_sweep_config(args.config_path, args.overrides);
    const fs::path out = fs::path(sweep.base.output_dir) / "sweep";
    const SweepResult result = run_sweep(sweep, out, &std::cout);
    std::size_t failed = 0;
    for (const CellOutcome& cell : result.cells) failed += cell.failed ? 1 : 0;
    std::cout << "sweep: " << result.cells.size() << " cells, " << failed << " failed, outputs in "
              << out.string() << "\n";
    const auto best = success_filter(result.all_records, 5.0);
    if (best)
        std::cout << "sweep: best cleaned model " << best->run_id << " epoch " << best->epoch
                  << ": accuracy " << format_double(best->accuracy) << "% asr "
                  << format_double(best->asr) << "%\n";
    else
        std::cout << "sweep: no record reached asr <= 5%\n";
    return 0;
}

std::vector<EvalRecord> read_many(const std::vector<std::string>& inputs) {
    std::vector<EvalRecord> records;
    for (const std::string& path : inputs) {
        if (!fs::exists(path)) throw Error("input file " + path + " not found");
        const std::vector<EvalRecord> part = read_trajectory_csv(path);
        records.insert(records.end(), part.begin(), part.end());
    }
    return records;
}

int cmd_pareto(const std::vector<std::string>& inputs, const std::string& out_path) {
    const std::vector<EvalRecord> records = read_many(inputs);
    std::vector<ParetoPoint> points;
    points.reserve(records.size());
    for (const EvalRecord& r : records)
        points.push_back(ParetoPoint{r.accuracy, r.asr, r.run_id, r.epoch});
    const std::vector<ParetoPoint> frontier = pareto_frontier(points);

    std::ostringstream csv;
    csv << "run_id,epoch,accuracy,asr\n";
    for (const ParetoPoint& p : frontier) {
        csv << p.run_id << ',' << p.epoch << ',' << format_double(p.accuracy) << ','
            << format_double(p.asr) << '\n';
        std::cout << "frontier: " << p.run_id << " epoch " << p.epoch << " accuracy "
                  << format_double(p.accuracy) << "% asr " << format_double(p.asr) << "%\n";
    }
    if (!out_path.empty()) {
        const fs::path path(out_path);
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        std::ofstream f(path, std::ios::trunc);
        if (!f) throw Error("pareto: cannot open " + out_path + " for writing");
        f << csv.str();
    }
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_dir) {
    const std::vector<EvalRecord> records = read_many(inputs);
    emit_report(records, out_dir);
    std::cout << "report: wrote trajectory.csv, scatter.svg, table_summary.csv to " << out_dir
              << "\n";
    return 0;
}

int cmd_dump_poisoned(const CommonArgs& args) {
    const RunConfig cfg = load_run_config(args.config_path, args.overrides);
    const LabAssets assets = build_assets(cfg);
    const PairedDataset& ds = assets.pretrain_data;
    const TriggerSpec& trigger = assets.trigger;

    const fs::path out = fs::path(cfg.output_dir) / "poisoned.csv";
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw Error("dump-poisoned: cannot open " + out.string() + " for writing");
    f << "row,true_label,patch_offset\n";

    int listed = 0;
    for (int i = 0; i < ds.size(); ++i) {
        if (!ds.poison_flags[static_cast<std::size_t>(i)]) continue;
        int offset = -1;
        for (int o = 0; o + trigger.patch_len <= ds.images.cols && offset < 0; ++o) {
            bool match = true;
            for (int j = 0; j < trigger.patch_len && match; ++j)
                match = ds.images.at(i, o + j) == trigger.patch[static_cast<std::size_t>(j)];
            if (match) offset = o;
        }
        f << i << ',' << ds.true_labels[static_cast<std::size_t>(i)] << ',' << offset << '\n';
        ++listed;
    }
    std::cout << "dump-poisoned: " << listed << " poisoned rows listed in " << out.string() << "\n";
    std::cout << "trigger patch (len " << trigger.patch_len << ", target class "
              << trigger.target_class << "):";
    for (double v : trigger.patch) std::cout << ' ' << format_double(v);
    std::cout << "\n";
    return 0;
}

} // namespace

int cli_dispatch(const std::vector<std::string>& args) {
    CLI::App app{"poisonlab: backdoor poisoning and mitigation experiments on a synthetic "
                 "dual-encoder world"};
    app.require_subcommand(1);

    CommonArgs gen_args, pre_args, clean_args, eval_args, sweep_args, dump_args;
    std::string eval_checkpoint;
    std::vector<std::string> pareto_inputs, report_inputs;
    std::string pareto_out, report_out = "report";

    add_common(app.add_subcommand("gen-data", "Generate and poison the synthetic datasets"),
               gen_args);
    add_common(app.add_subcommand("pretrain", "Pre-train on the poisoned dataset"), pre_args);
    add_common(app.add_subcommand("clean", "Run the configured poison-removal finetuning"),
               clean_args);
    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint (accuracy and ASR)");
    add_common(eval_cmd, eval_args);
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint to score");
    add_common(app.add_subcommand("sweep", "Run a hyperparameter sweep over the cleaning stage"),
               sweep_args);
    CLI::App* pareto_cmd = app.add_subcommand("pareto", "Pareto frontier of trajectory CSVs");
    pareto_cmd->add_option("--input", pareto_inputs, "trajectory CSV files")->required();
    pareto_cmd->add_option("--out", pareto_out, "output CSV path");
    CLI::App* report_cmd = app.add_subcommand("report", "Aggregate report from trajectory CSVs");
    report_cmd->add_option("--input", report_inputs, "trajectory CSV files")->required();
    report_cmd->add_option("--out", report_out, "output directory");
    add_common(app.add_subcommand("dump-poisoned", "List the poisoned rows and the trigger patch"),
               dump_args);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (app.got_subcommand("gen-data")) return cmd_gen_data(gen_args);
        if (app.got_subcommand("pretrain")) return cmd_pretrain(pre_args);
        if (app.got_subcommand("clean")) return cmd_clean(clean_args);
        if (app.got_subcommand("eval")) return cmd_eval(eval_args, eval_checkpoint);
        if (app.got_subcommand("sweep")) return cmd_sweep(sweep_args);
        if (app.got_subcommand("pareto")) return cmd_pareto(pareto_inputs, pareto_out);
        if (app.got_subcommand("report")) return cmd_report(report_inputs, report_out);
        if (app.got_subcommand("dump-poisoned")) return cmd_dump_poisoned(dump_args);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error (unexpected): " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace plab
