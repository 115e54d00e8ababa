#pragma once

#include <filesystem>

#include "plab/config.hpp"
#include "plab/mitigate.hpp"
#include "plab/train.hpp"

namespace plab {

/// Deterministic materialization of everything a run needs: the poisoned
/// pre-training dataset, the template bank, the trigger and the evaluation
/// context. Rebuilding from the same config is bitwise identical.
struct LabAssets {
    PairedDataset pretrain_data;
    TemplateBank templates;
    TriggerSpec trigger;
    EvalContext eval_ctx;
};

LabAssets build_assets(const RunConfig& cfg);

DualEncoderParams initial_params(const RunConfig& cfg);

/// Pre-training stage: runs pretrain() and, when out_dir is nonempty, writes
/// config.json, trajectory.csv, per-epoch checkpoints and the selected
/// checkpoint.
PretrainResult run_pretrain_stage(const RunConfig& cfg, const LabAssets& assets,
                                  const std::filesystem::path& out_dir = {});

/// The clean subset for the cleaning stage (clean_rows rows, residual_poison
/// of them poisoned), sampled from the unpoisoned pretraining rows.
PairedDataset build_clean_subset(const RunConfig& cfg, const LabAssets& assets);

/// Cleaning stage: applies shrink-and-perturb when enabled, then dispatches
/// on the config: deep clustering if enabled, heavy regularization if
/// l2_weight > 0, plain CleanCLIP otherwise.
FinetuneResult run_clean_stage(const RunConfig& cfg, const LabAssets& assets,
                               const DualEncoderParams& start, const std::string& run_id,
                               const std::filesystem::path& out_dir = {});

} // namespace plab
