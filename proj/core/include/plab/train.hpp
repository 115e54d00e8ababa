#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plab/adamw.hpp"
#include "plab/encoder.hpp"
#include "plab/evalkit.hpp"
#include "plab/synthworld.hpp"

namespace plab {

enum class Objective { MMCL, MMCL_SSL };

std::string objective_name(Objective o);

struct PretrainConfig {
    Objective objective = Objective::MMCL;
    int epochs = 40;
    int batch_size = 128;
    double peak_lr = 1e-3;
    int warmup_steps = 200;
    double ssl_weight = 1.0;
    double weight_decay = 0.01;
    AugmentSpec aug{0.1, 0.1};
    std::uint64_t seed = 0;
    int eval_every = 1;
};

/// Everything needed to score a checkpoint: a held-out split, the template
/// bank for the zero-shot head, the trigger, and the seed fixing the ASR
/// trigger offsets.
struct EvalContext {
    PairedDataset data;
    TemplateBank templates;
    TriggerSpec trigger;
    std::uint64_t asr_seed = 0;
};

struct EvalOutcome {
    double accuracy = 0.0;
    double asr = 0.0;
};

EvalOutcome evaluate(const DualEncoderParams& params, const EvalContext& ctx);

struct TrainTrajectory {
    std::vector<EvalRecord> records;        // sorted by epoch; epoch 0 is the starting model
    std::vector<LossBreakdown> epoch_loss;  // entry e-1 is the mean over epoch e
};

struct PretrainResult {
    std::vector<DualEncoderParams> checkpoints; // index = epoch; [0] is the initial model
    TrainTrajectory trajectory;
};

/// Pre-training over the poisoned dataset. Shuffles per epoch, drops the last
/// partial batch, applies AdamW with the warmup+cosine schedule, clamps the
/// temperature after every step, and scores the model every eval_every
/// epochs (and at the final epoch). Deterministic per (config, seed).
PretrainResult pretrain(const PretrainConfig& cfg, const DualEncoderParams& init,
                        const PairedDataset& dataset, const EvalContext& eval_ctx,
                        const std::string& run_id = "pretrain",
                        const std::string& fingerprint = "");

struct SelectRule {
    enum Kind { MaxAccuracy, ClosestAccuracy } kind = MaxAccuracy;
    double target = 0.0;
};

/// Epoch of the record chosen by the rule: highest accuracy, or accuracy
/// closest to the target. Ties resolve to the earliest epoch.
int select_model(const std::vector<EvalRecord>& records, const SelectRule& rule);

} // namespace plab
