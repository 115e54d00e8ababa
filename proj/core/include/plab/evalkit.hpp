#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plab/encoder.hpp"
#include "plab/losses.hpp"
#include "plab/synthworld.hpp"

namespace plab {

/// One row per class of unit-norm averaged template embeddings.
struct ZeroShotHead {
    Tensor class_embeddings; // K x d
};

/// One evaluated point of a training or cleaning trajectory.
struct EvalRecord {
    std::string run_id;
    int epoch = 0;
    double lr = 0.0;
    std::string loss_mode;
    double accuracy = 0.0; // percent
    double asr = 0.0;      // percent
    LossBreakdown loss;
    std::string fingerprint;
};

struct ParetoPoint {
    double accuracy = 0.0;
    double asr = 0.0;
    std::string run_id;
    int epoch = 0;
};

/// Encodes every template, averages per class, re-normalizes to unit norm.
ZeroShotHead build_head(const DualEncoderParams& params, const TemplateBank& templates);

/// Argmax cosine similarity against the head rows; exact ties resolve to the
/// lowest class index.
std::vector<int> classify(const ZeroShotHead& head, const Tensor& image_embeddings);

/// Percent of rows whose zero-shot prediction equals the true label.
double accuracy(const DualEncoderParams& params, const ZeroShotHead& head,
                const PairedDataset& eval_data);

/// Attack success rate: the trigger is applied to every evaluation image
/// (target-class rows included) at an offset per the placement rule. The
/// statistic is the percent of items whose true class differs from the
/// target that get classified as the target; target-class items are excluded
/// from the percentage, otherwise correct classification alone would pin it
/// near 100/K and no cleaning could reach the sub-5% success band.
/// Deterministic per offset_seed.
double asr(const DualEncoderParams& params, const ZeroShotHead& head, const PairedDataset& eval_data,
           const TriggerSpec& trigger, std::uint64_t offset_seed);

/// Highest-accuracy record among those with asr <= threshold (ties keep the
/// earliest); nullopt when none qualifies.
std::optional<EvalRecord> success_filter(const std::vector<EvalRecord>& records,
                                         double asr_threshold = 5.0);

/// Maximal points under (accuracy up, asr down) dominance, exact duplicates
/// collapsed, sorted by ascending accuracy.
std::vector<ParetoPoint> pareto_frontier(std::vector<ParetoPoint> points);

} // namespace plab
