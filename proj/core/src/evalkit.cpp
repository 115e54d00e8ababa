#include "plab/evalkit.hpp"

#include <algorithm>
#include <cmath>

#include "plab/error.hpp"
#include "plab/rng.hpp"

namespace plab {

ZeroShotHead build_head(const DualEncoderParams& params, const TemplateBank& templates) {
    if (templates.num_classes < 1 || templates.per_class < 1)
        throw Error("build_head: empty template bank");
    const Tensor encoded = encode_texts(params, templates.vectors);
    const int d = encoded.cols;

    Tensor head(templates.num_classes, d);
    for (int c = 0; c < templates.num_classes; ++c) {
        for (int t = 0; t < templates.per_class; ++t)
            for (int j = 0; j < d; ++j) head.at(c, j) += encoded.at(c * templates.per_class + t, j);
        double sq = 0.0;
        for (int j = 0; j < d; ++j) {
            head.at(c, j) /= templates.per_class;
            sq += head.at(c, j) * head.at(c, j);
        }
        const double norm = std::sqrt(sq);
        if (norm < 1e-12)
            throw Error("build_head: degenerate averaged embedding for class " + std::to_string(c));
        for (int j = 0; j < d; ++j) head.at(c, j) /= norm;
    }
    return ZeroShotHead{std::move(head)};
}

std::vector<int> classify(const ZeroShotHead& head, const Tensor& image_embeddings) {
    const Tensor& h = head.class_embeddings;
    if (image_embeddings.cols != h.cols)
        throw Error("classify: embedding dim " + std::to_string(image_embeddings.cols) +
                    " does not match head dim " + std::to_string(h.cols));
    std::vector<int> out(static_cast<std::size_t>(image_embeddings.rows), 0);
    for (int i = 0; i < image_embeddings.rows; ++i) {
        // Head rows are unit norm, so cosine argmax reduces to dot-product
        // argmax and is invariant to positive rescaling of the image row.
        int best = 0;
        double best_sim = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < h.rows; ++c) {
            double dot = 0.0;
            for (int j = 0; j < h.cols; ++j) dot += image_embeddings.at(i, j) * h.at(c, j);
            if (dot > best_sim) {
                best_sim = dot;
                best = c;
            }
        }
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

double accuracy(const DualEncoderParams& params, const ZeroShotHead& head,
                const PairedDataset& eval_data) {
    if (eval_data.size() == 0) throw Error("accuracy: empty evaluation set");
    const std::vector<int> preds = classify(head, encode_images(params, eval_data.images));
    int hits = 0;
    for (int i = 0; i < eval_data.size(); ++i)
        if (preds[static_cast<std::size_t>(i)] == eval_data.true_labels[static_cast<std::size_t>(i)])
            ++hits;
    return 100.0 * hits / eval_data.size();
}

double asr(const DualEncoderParams& params, const ZeroShotHead& head, const PairedDataset& eval_data,
           const TriggerSpec& trigger, std::uint64_t offset_seed) {
    if (eval_data.size() == 0) throw Error("asr: empty evaluation set");
    Tensor triggered = eval_data.images;
    Rng rng(derive_seed(offset_seed, Stream::AsrOffsets));
    for (int i = 0; i < triggered.rows; ++i) apply_trigger(triggered, i, trigger, rng);
    const std::vector<int> preds = classify(head, encode_images(params, triggered));
    int hits = 0, eligible = 0;
    for (int i = 0; i < eval_data.size(); ++i) {
        if (eval_data.true_labels[static_cast<std::size_t>(i)] == trigger.target_class) continue;
        ++eligible;
        if (preds[static_cast<std::size_t>(i)] == trigger.target_class) ++hits;
    }
    if (eligible == 0) throw Error("asr: every evaluation item belongs to the target class");
    return 100.0 * hits / eligible;
}

std::optional<EvalRecord> success_filter(const std::vector<EvalRecord>& records,
                                         double asr_threshold) {
    std::optional<EvalRecord> best;
    for (const EvalRecord& r : records) {
        if (r.asr > asr_threshold) continue;
        if (!best || r.accuracy > best->accuracy) best = r;
    }
    return best;
}

std::vector<ParetoPoint> pareto_frontier(std::vector<ParetoPoint> points) {
    // Collapse exact (accuracy, asr) duplicates, keeping the first seen.
    std::vector<ParetoPoint> unique;
    for (const ParetoPoint& p : points) {
        bool dup = false;
        for (const ParetoPoint& q : unique)
            if (q.accuracy == p.accuracy && q.asr == p.asr) { dup = true; break; }
        if (!dup) unique.push_back(p);
    }

    std::vector<ParetoPoint> frontier;
    for (const ParetoPoint& p : unique) {
        bool dominated = false;
        for (const ParetoPoint& q : unique) {
            if (q.accuracy >= p.accuracy && q.asr <= p.asr &&
                (q.accuracy > p.accuracy || q.asr < p.asr)) {
                dominated = true;
                break;
            }
        }
        if (!dominated) frontier.push_back(p);
    }
    std::sort(frontier.begin(), frontier.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
        return a.accuracy < b.accuracy;
    });
    return frontier;
}

} // namespace plab
