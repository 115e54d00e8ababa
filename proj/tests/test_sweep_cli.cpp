#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "micro_config.hpp"
#include "plab/checkpoint.hpp"
#include "plab/cli.hpp"
#include "plab/config.hpp"
#include "plab/error.hpp"
#include "plab/pipeline.hpp"
#include "plab/report.hpp"
#include "plab/sweep.hpp"
#include "plab/trajectory.hpp"

using namespace plab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("plab_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

fs::path write_config(const fs::path& dir, const std::string& out_dir) {
    std::string text = micro_config_json();
    const auto pos = text.find("\"OUT\"");
    text.replace(pos, 5, "\"" + out_dir + "\"");
    const fs::path path = dir / "config.json";
    std::ofstream f(path);
    f << text;
    return path;
}

fs::path write_sweep_config(const fs::path& dir, const std::string& out_dir,
                            const std::string& axes_json, int parallelism = 2) {
    std::string base = micro_config_json();
    const auto pos = base.find("\"OUT\"");
    base.replace(pos, 5, "\"" + out_dir + "\"");
    const fs::path path = dir / "sweep.json";
    std::ofstream f(path);
    f << "{\"base\": " << base << ", \"master_seed\": 33, \"parallelism\": " << parallelism
      << ", \"axes\": " << axes_json << "}";
    return path;
}

} // namespace

TEST_CASE("a one-cell sweep reproduces the single run exactly") {
    const fs::path dir = temp_dir("one_cell");
    const fs::path sweep_path = write_sweep_config(dir, (dir / "out").string(), "{}", 1);
    const SweepConfig sweep = load_sweep_config(sweep_path);
    REQUIRE(sweep.cell_count() == 1);

    const SweepResult result = run_sweep(sweep, dir / "out" / "sweep");
    REQUIRE(result.cells.size() == 1);
    REQUIRE_FALSE(result.cells[0].failed);

    // Replay the cell by hand with the derived seeds the sweep assigns.
    RunConfig cfg = sweep.base;
    const std::uint64_t cell_seed = derive_seed(sweep.master_seed, 0);
    cfg.clean.seed = cell_seed;
    cfg.data.clean_seed = derive_seed(cell_seed, Stream::CleanSubset);
    cfg.shrink_perturb.seed = derive_seed(cell_seed, Stream::ShrinkPerturb);

    const LabAssets assets = build_assets(cfg);
    PretrainResult pre = run_pretrain_stage(cfg, assets);
    const int chosen = select_model(pre.trajectory.records, SelectRule{cfg.select.kind, cfg.select.target});
    const FinetuneResult single =
        run_clean_stage(cfg, assets, pre.checkpoints.at(static_cast<std::size_t>(chosen)),
                        result.cells[0].run_id);
    CHECK(to_csv(single.trajectory.records) == to_csv(result.cells[0].records));
}

TEST_CASE("sweep writes one trajectory file per cell for a large lr grid") {
    const fs::path dir = temp_dir("lr23");
    // The 23-point learning-rate grid, on a one-epoch micro config.
    const std::string axes =
        "{\"lr\": [1e-9, 5e-9, 1e-8, 5e-8, 1e-7, 3e-7, 7e-7, 1e-6, 3e-6, 7e-6, 1e-5, 4e-5, 5e-5, "
        "6e-5, 7e-5, 9e-5, 1e-4, 3e-4, 4e-4, 5e-4, 6e-4, 1e-3, 3e-3]}";
    const fs::path sweep_path = write_sweep_config(dir, (dir / "out").string(), axes, 4);
    const SweepConfig sweep = load_sweep_config(sweep_path);
    REQUIRE(sweep.cell_count() == 23);

    const SweepResult result = run_sweep(sweep, dir / "out" / "sweep");
    int trajectory_files = 0;
    for (std::size_t c = 0; c < 23; ++c) {
        char name[16];
        std::snprintf(name, sizeof(name), "c%04zu", c);
        if (fs::exists(dir / "out" / "sweep" / "cells" / name / "trajectory.csv")) ++trajectory_files;
    }
    CHECK(trajectory_files == 23);
    for (const CellOutcome& cell : result.cells) CHECK_FALSE(cell.failed);
    CHECK(fs::exists(dir / "out" / "sweep" / "trajectory.csv"));
    CHECK(fs::exists(dir / "out" / "sweep" / "frontier.csv"));
    CHECK(fs::exists(dir / "out" / "sweep" / "scatter.svg"));
    CHECK(fs::exists(dir / "out" / "sweep" / "table_summary.csv"));
}

TEST_CASE("a crashed cell is recorded without aborting its siblings") {
    const fs::path dir = temp_dir("crash");
    // Negative lr fails the finetune precondition in one cell only.
    const fs::path sweep_path =
        write_sweep_config(dir, (dir / "out").string(), "{\"lr\": [0.003, -1.0]}", 2);
    const SweepConfig sweep = load_sweep_config(sweep_path);

    const SweepResult result = run_sweep(sweep, dir / "out" / "sweep");
    REQUIRE(result.cells.size() == 2);
    CHECK_FALSE(result.cells[0].failed);
    CHECK(result.cells[1].failed);
    CHECK(result.cells[1].error.find("lr") != std::string::npos);
    CHECK(!result.cells[0].records.empty());

    const std::string failures = read_file(dir / "out" / "sweep" / "failures.csv");
    CHECK(failures.find("c1") != std::string::npos);
}

TEST_CASE("emit_report writes the three artifacts with the pinned shapes") {
    const fs::path dir = temp_dir("report");
    std::vector<EvalRecord> records;
    for (int epoch = 0; epoch <= 3; ++epoch) {
        EvalRecord r;
        r.run_id = "MMCL:c0:lr=0.001";
        r.epoch = epoch;
        r.lr = 0.001;
        r.loss_mode = "MMCL_SSL";
        r.accuracy = 80.0 + epoch;
        r.asr = 90.0 - 25.0 * epoch;
        records.push_back(r);
    }
    EvalRecord other;
    other.run_id = "MMCL_SSL:c1:lr=0.001";
    other.epoch = 0;
    other.loss_mode = "MMCL_SSL";
    other.accuracy = 85.0;
    other.asr = 95.0;
    records.push_back(other);

    emit_report(records, dir);
    const std::string csv = read_file(dir / "trajectory.csv");
    CHECK(csv.rfind(kTrajectoryHeader, 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6); // header + 5 rows

    const std::string svg = read_file(dir / "scatter.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("<circle") != std::string::npos);

    const std::string table = read_file(dir / "table_summary.csv");
    CHECK(table.rfind("objective,Orig. Acc.,Clean Acc. (ASR <= 5%)", 0) == 0);
    CHECK(table.find("MMCL,80,") != std::string::npos);     // epoch-0 accuracy, asr<=5 hit at epoch 3
    CHECK(table.find("MMCL_SSL,85,none") != std::string::npos);

    CHECK_THROWS_AS(emit_report({}, dir), Error);
}

TEST_CASE("single-record report CSV has exactly a header and one row") {
    const fs::path dir = temp_dir("single");
    EvalRecord r;
    r.run_id = "MMCL:c0";
    r.loss_mode = "MMCL";
    emit_report({r}, dir);
    const std::string csv = read_file(dir / "trajectory.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}

TEST_CASE("cli pretrain twice produces identical trajectory files") {
    const fs::path dir = temp_dir("determinism");
    const fs::path cfg_a = write_config(dir, (dir / "a").string());
    REQUIRE(cli_dispatch({"pretrain", "--config", cfg_a.string()}) == 0);
    const fs::path cfg_b = write_config(dir, (dir / "b").string());
    REQUIRE(cli_dispatch({"pretrain", "--config", cfg_b.string()}) == 0);

    const std::string a = read_file(dir / "a" / "pretrain" / "trajectory.csv");
    const std::string b = read_file(dir / "b" / "pretrain" / "trajectory.csv");
    CHECK(!a.empty());
    CHECK(a == b);
    CHECK(fs::exists(dir / "a" / "pretrain" / "selected.plab"));
    CHECK(fs::exists(dir / "a" / "pretrain" / "checkpoints" / "epoch_002.plab"));
}

TEST_CASE("cli clean honors loss-mode overrides") {
    const fs::path dir = temp_dir("clean_mode");
    const fs::path cfg = write_config(dir, (dir / "out").string());
    REQUIRE(cli_dispatch({"pretrain", "--config", cfg.string()}) == 0);
    REQUIRE(cli_dispatch({"clean", "--config", cfg.string(), "clean.loss_mode=SSL_only"}) == 0);

    const auto records = read_trajectory_csv(dir / "out" / "clean" / "trajectory.csv");
    REQUIRE(!records.empty());
    for (const EvalRecord& r : records) CHECK(r.loss.mmcl == 0.0);
    CHECK(records.back().loss_mode == "SSL");
}

TEST_CASE("cli gen-data, dump-poisoned and eval work from one config") {
    const fs::path dir = temp_dir("misc");
    const fs::path cfg = write_config(dir, (dir / "out").string());

    REQUIRE(cli_dispatch({"gen-data", "--config", cfg.string()}) == 0);
    CHECK(fs::exists(dir / "out" / "data" / "pretrain.plab"));
    CHECK(fs::exists(dir / "out" / "data" / "eval.plab"));
    CHECK(fs::exists(dir / "out" / "data" / "templates.plab"));
    CHECK(fs::exists(dir / "out" / "data" / "trigger.plab"));
    const PairedDataset ds = load_dataset(dir / "out" / "data" / "pretrain.plab");
    CHECK(ds.size() == 64);
    CHECK(ds.poison_count() == 6);

    REQUIRE(cli_dispatch({"dump-poisoned", "--config", cfg.string()}) == 0);
    const std::string dump = read_file(dir / "out" / "poisoned.csv");
    CHECK(dump.rfind("row,true_label,patch_offset", 0) == 0);
    CHECK(std::count(dump.begin(), dump.end(), '\n') == 7); // header + 6 poisoned rows
    CHECK(dump.find(",-1") == std::string::npos);           // every patch was located

    REQUIRE(cli_dispatch({"pretrain", "--config", cfg.string()}) == 0);
    REQUIRE(cli_dispatch({"eval", "--config", cfg.string()}) == 0);
    CHECK(fs::exists(dir / "out" / "eval.csv"));
}

TEST_CASE("cli pareto and report consume trajectory CSVs") {
    const fs::path dir = temp_dir("pareto");
    std::vector<EvalRecord> records;
    auto add = [&](double acc, double asr, int epoch) {
        EvalRecord r;
        r.run_id = "MMCL:c0";
        r.loss_mode = "MMCL_SSL";
        r.epoch = epoch;
        r.accuracy = acc;
        r.asr = asr;
        records.push_back(r);
    };
    add(10, 10, 0);
    add(20, 20, 1);
    add(15, 5, 2);
    write_trajectory_csv(records, dir / "t.csv");

    const fs::path frontier_csv = dir / "frontier.csv";
    REQUIRE(cli_dispatch({"pareto", "--input", (dir / "t.csv").string(), "--out",
                          frontier_csv.string()}) == 0);
    const std::string frontier = read_file(frontier_csv);
    CHECK(frontier.find("15,5") != std::string::npos);
    CHECK(frontier.find("20,20") != std::string::npos);
    CHECK(frontier.find("10,10") == std::string::npos);

    REQUIRE(cli_dispatch({"report", "--input", (dir / "t.csv").string(), "--out",
                          (dir / "rep").string()}) == 0);
    CHECK(fs::exists(dir / "rep" / "scatter.svg"));
}

TEST_CASE("cli rejects unknown flags, bad configs and missing files distinctly") {
    const fs::path dir = temp_dir("errors");
    CHECK(cli_dispatch({"pretrain", "--config", (dir / "nope.json").string()}) != 0);
    CHECK(cli_dispatch({"pretrain", "--no-such-flag"}) != 0);
    CHECK(cli_dispatch({"no-such-command"}) != 0);

    std::ofstream(dir / "bad.json") << "{ not json";
    CHECK(cli_dispatch({"pretrain", "--config", (dir / "bad.json").string()}) != 0);

    const fs::path cfg = write_config(dir, (dir / "out").string());
    CHECK(cli_dispatch({"clean", "--config", cfg.string()}) != 0); // no checkpoint yet
    CHECK(cli_dispatch({"pareto", "--input", (dir / "missing.csv").string()}) != 0);
}
