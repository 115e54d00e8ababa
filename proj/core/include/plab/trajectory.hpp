#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "plab/evalkit.hpp"

namespace plab {

inline constexpr const char* kTrajectoryHeader =
    "run_id,epoch,lr,loss_mode,accuracy,asr,mmcl,ssl,deep_clust,l2";

/// Locale-independent shortest round-trip formatting ('.' decimal separator,
/// no grouping).
std::string format_double(double v);
double parse_double(const std::string& s);

std::string to_csv(const std::vector<EvalRecord>& records);
void write_trajectory_csv(const std::vector<EvalRecord>& records, const std::filesystem::path& path);
std::vector<EvalRecord> read_trajectory_csv(const std::filesystem::path& path);
std::vector<EvalRecord> parse_trajectory_csv(const std::string& text, const std::string& origin);

} // namespace plab
