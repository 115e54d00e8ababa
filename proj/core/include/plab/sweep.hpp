#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "plab/config.hpp"
#include "plab/evalkit.hpp"

namespace plab {

struct CellOutcome {
    std::size_t index = 0;
    std::string run_id;
    bool failed = false;
    std::string error;
    std::vector<EvalRecord> records;
};

struct SweepResult {
    std::vector<CellOutcome> cells;
    std::vector<EvalRecord> all_records; // successful cells, cell order
};

/// Executes the cross product of the configured axes over the cleaning stage,
/// up to `parallelism` cells concurrently. The starting checkpoint comes from
/// base.clean_checkpoint, or is pre-trained once from the base config. Every
/// cell gets a derived seed and its own output subdirectory; a crashed cell
/// is recorded as failed without stopping its siblings. Writes per-cell
/// trajectories, failures.csv, frontier.csv and the aggregate report files.
SweepResult run_sweep(const SweepConfig& sweep, const std::filesystem::path& out_dir,
                      std::ostream* log = nullptr);

} // namespace plab
