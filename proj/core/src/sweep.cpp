#include "plab/sweep.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "plab/checkpoint.hpp"
#include "plab/error.hpp"
#include "plab/pipeline.hpp"
#include "plab/report.hpp"
#include "plab/trajectory.hpp"

namespace plab {

namespace {

struct Axis {
    std::string name;
    std::size_t size = 1; // 1 when the axis is absent
};

struct CellSpec {
    RunConfig cfg;
    std::string run_id;
};

/// Applies the cell's axis values onto a copy of the base config and builds
/// the run id. Axis order is fixed: lr, ssl_weight, l2_weight, lambda, sigma,
/// residual_poison, clean_rows, epochs (row-major, lr slowest).
CellSpec make_cell(const SweepConfig& sweep, std::size_t index) {
    CellSpec cell;
    cell.cfg = sweep.base;

    std::ostringstream id;
    id << objective_name(sweep.base.pretrain.objective) << ":c" << index;

    std::size_t rest = index;
    auto pick = [&rest](std::size_t n) {
        const std::size_t dim = n == 0 ? 1 : n;
        const std::size_t i = rest % dim;
        rest /= dim;
        return i;
    };
    // pick() consumes the fastest-varying axis first, so run in reverse of
    // the documented order.
    const std::size_t i_epochs = pick(sweep.epochs.size());
    const std::size_t i_clean_rows = pick(sweep.clean_rows.size());
    const std::size_t i_residual = pick(sweep.residual_poison.size());
    const std::size_t i_sigma = pick(sweep.sigma.size());
    const std::size_t i_lambda = pick(sweep.lambda.size());
    const std::size_t i_l2 = pick(sweep.l2_weight.size());
    const std::size_t i_ssl = pick(sweep.ssl_weight.size());
    const std::size_t i_lr = pick(sweep.lr.size());

    if (!sweep.lr.empty()) {
        cell.cfg.clean.lr = sweep.lr[i_lr];
        id << ":lr=" << format_double(cell.cfg.clean.lr);
    }
    if (!sweep.ssl_weight.empty()) {
        cell.cfg.clean.ssl_weight = sweep.ssl_weight[i_ssl];
        id << ":ssl_w=" << format_double(cell.cfg.clean.ssl_weight);
    }
    if (!sweep.l2_weight.empty()) {
        cell.cfg.clean.l2_weight = sweep.l2_weight[i_l2];
        id << ":l2=" << format_double(cell.cfg.clean.l2_weight);
    }
    if (!sweep.lambda.empty()) {
        cell.cfg.shrink_perturb.enabled = true;
        cell.cfg.shrink_perturb.lambda = sweep.lambda[i_lambda];
        id << ":lambda=" << format_double(cell.cfg.shrink_perturb.lambda);
    }
    if (!sweep.sigma.empty()) {
        cell.cfg.shrink_perturb.enabled = true;
        cell.cfg.shrink_perturb.sigma = sweep.sigma[i_sigma];
        id << ":sigma=" << format_double(cell.cfg.shrink_perturb.sigma);
    }
    if (!sweep.residual_poison.empty()) {
        cell.cfg.data.residual_poison = sweep.residual_poison[i_residual];
        id << ":residual=" << cell.cfg.data.residual_poison;
    }
    if (!sweep.clean_rows.empty()) {
        cell.cfg.data.clean_rows = sweep.clean_rows[i_clean_rows];
        id << ":clean_rows=" << cell.cfg.data.clean_rows;
    }
    if (!sweep.epochs.empty()) {
        cell.cfg.clean.epochs = sweep.epochs[i_epochs];
        id << ":epochs=" << cell.cfg.clean.epochs;
    }

    // Isolated per-cell seed streams.
    const std::uint64_t cell_seed = derive_seed(sweep.master_seed, index);
    cell.cfg.clean.seed = cell_seed;
    cell.cfg.data.clean_seed = derive_seed(cell_seed, Stream::CleanSubset);
    cell.cfg.shrink_perturb.seed = derive_seed(cell_seed, Stream::ShrinkPerturb);
    cell.run_id = id.str();
    return cell;
}

std::string cell_dir_name(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "c%04zu", index);
    return buf;
}

} // namespace

SweepResult run_sweep(const SweepConfig& sweep, const std::filesystem::path& out_dir,
                      std::ostream* log) {
    const std::size_t cells = sweep.cell_count();
    if (cells == 0) throw Error("sweep: empty cross product");
    if (log) *log << "sweep: " << cells << " cells, parallelism " << sweep.parallelism << "\n";

    std::filesystem::create_directories(out_dir);
    {
        std::ofstream f(out_dir / "sweep_config.json", std::ios::trunc);
        if (!f) throw Error("sweep: cannot write sweep_config.json");
        f << sweep_config_json(sweep);
    }

    // One shared starting model and shared read-only assets for every cell.
    const LabAssets assets = build_assets(sweep.base);
    DualEncoderParams start;
    if (!sweep.base.clean_checkpoint.empty()) {
        start = load_checkpoint(sweep.base.clean_checkpoint);
    } else {
        if (log) *log << "sweep: pre-training the shared starting model\n";
        PretrainResult pre = run_pretrain_stage(sweep.base, assets, out_dir / "pretrain");
        start = pre.checkpoints.back();
    }

    SweepResult result;
    result.cells.resize(cells);

    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&]() {
        while (true) {
            const std::size_t index = next.fetch_add(1);
            if (index >= cells) return;
            CellOutcome& outcome = result.cells[index];
            outcome.index = index;
            try {
                const CellSpec cell = make_cell(sweep, index);
                outcome.run_id = cell.run_id;
                const FinetuneResult ft = run_clean_stage(cell.cfg, assets, start, cell.run_id,
                                                          out_dir / "cells" / cell_dir_name(index));
                outcome.records = ft.trajectory.records;
            } catch (const std::exception& e) {
                outcome.failed = true;
                outcome.error = e.what();
            }
            if (log) {
                std::lock_guard<std::mutex> lock(log_mutex);
                *log << "sweep: cell " << index << (outcome.failed ? " FAILED: " + outcome.error : " done")
                     << "\n";
            }
        }
    };

    const int threads = std::min<int>(sweep.parallelism, static_cast<int>(cells));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    for (const CellOutcome& cell : result.cells)
        if (!cell.failed)
            result.all_records.insert(result.all_records.end(), cell.records.begin(),
                                      cell.records.end());

    // Failure ledger: one row per failed cell so missing trajectory rows are
    // accounted for.
    {
        std::ofstream f(out_dir / "failures.csv", std::ios::trunc);
        if (!f) throw Error("sweep: cannot write failures.csv");
        f << "cell,run_id,error\n";
        for (const CellOutcome& cell : result.cells)
            if (cell.failed) {
                std::string msg = cell.error;
                for (char& c : msg)
                    if (c == ',' || c == '\n') c = ';';
                f << cell.index << ',' << cell.run_id << ',' << msg << '\n';
            }
    }

    if (!result.all_records.empty()) {
        emit_report(result.all_records, out_dir);
        std::vector<ParetoPoint> points;
        points.reserve(result.all_records.size());
        for (const EvalRecord& r : result.all_records)
            points.push_back(ParetoPoint{r.accuracy, r.asr, r.run_id, r.epoch});
        const std::vector<ParetoPoint> frontier = pareto_frontier(points);
        std::ofstream f(out_dir / "frontier.csv", std::ios::trunc);
        if (!f) throw Error("sweep: cannot write frontier.csv");
        f << "run_id,epoch,accuracy,asr\n";
        for (const ParetoPoint& p : frontier)
            f << p.run_id << ',' << p.epoch << ',' << format_double(p.accuracy) << ','
              << format_double(p.asr) << '\n';
    }
    return result;
}

} // namespace plab
