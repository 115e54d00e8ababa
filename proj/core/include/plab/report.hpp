#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "plab/evalkit.hpp"

namespace plab {

/// Objective tag encoded as the run_id prefix up to the first ':'
/// (e.g. "MMCL:c0001:lr=0.0003" -> "MMCL").
std::string objective_of_run(const std::string& run_id);

/// Writes into out_dir:
///   trajectory.csv    all records under the pinned header
///   scatter.svg       accuracy (y) vs ASR (x); one polyline per run ordered
///                     by epoch, marker size growing with epoch
///   table_summary.csv per objective: starting accuracy vs the best accuracy
///                     among records with ASR <= 5%
/// Records must be nonempty.
void emit_report(const std::vector<EvalRecord>& records, const std::filesystem::path& out_dir);

/// The scatter plot as an SVG document (no plotting dependency).
std::string render_scatter_svg(const std::vector<EvalRecord>& records);

/// The per-objective summary as CSV text with columns
/// objective, "Orig. Acc.", "Clean Acc. (ASR <= 5%)".
std::string render_table_summary(const std::vector<EvalRecord>& records);

} // namespace plab
