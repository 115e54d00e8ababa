#pragma once

#include <cstdint>
#include <vector>

#include "plab/rng.hpp"
#include "plab/tensor.hpp"

namespace plab {

/// Gaussian prototype world: K class prototypes per modality, datapoints are
/// prototype + isotropic noise. Stand-in for a captioned image corpus.
struct WorldSpec {
    int num_classes = 10;
    int d_img = 64;
    int d_txt = 48;
    double prototype_scale = 1.0;
    double noise_sigma = 0.35;
    std::uint64_t seed = 0;
};

struct PairedDataset {
    Tensor images;                     // N x d_img
    Tensor texts;                      // N x d_txt
    std::vector<int> true_labels;      // length N; poisoning never rewrites these
    std::vector<std::uint8_t> poison_flags; // length N, 1 iff row was poisoned

    int size() const { return images.rows; }
    int poison_count() const;
};

enum class Placement { RandomOffset, FixedOffset };

/// Contiguous-span trigger: L fixed Gaussian values overwrite L consecutive
/// image coordinates. The 1-D analog of a square pixel patch at a random
/// location.
struct TriggerSpec {
    std::vector<double> patch;
    int patch_len = 16;
    Placement placement = Placement::RandomOffset;
    int fixed_offset = 0;
    int target_class = 0;
};

/// Coordinate dropout plus Gaussian jitter.
struct AugmentSpec {
    double jitter_sigma = 0.0;
    double dropout_prob = 0.0;
};

/// Class-major bank of text template vectors: row c*per_class + t is template
/// t of class c.
struct TemplateBank {
    int num_classes = 0;
    int per_class = 0;
    Tensor vectors; // (num_classes * per_class) x d_txt

    Tensor class_template(int cls, int t) const;
};

/// Patch drawn once from a standard Gaussian, deterministic per seed.
TriggerSpec make_trigger(int patch_len, int target_class, std::uint64_t seed,
                         Placement placement = Placement::RandomOffset, int fixed_offset = 0);

/// n datapoints with uniform class draws; deterministic per (spec, n). The
/// prototype draws depend only on spec.seed, so evaluation splits built with
/// a held-out noise seed share the same class structure.
PairedDataset generate(const WorldSpec& spec, int n);

/// Same world prototypes, fresh noise stream: the evaluation split.
PairedDataset generate_split(const WorldSpec& spec, int n, std::uint64_t noise_seed);

/// per_class template vectors per class, fresh prototype-plus-noise draws.
TemplateBank make_templates(const WorldSpec& spec, int per_class);

/// Overwrites the trigger span in one image row at an offset chosen by the
/// placement rule.
void apply_trigger(Tensor& images, int row, const TriggerSpec& trigger, Rng& rng);

/// Poisons `count` rows sampled uniformly without replacement from rows that
/// are not already poisoned and whose true label differs from the target
/// class: trigger span written into the image, text replaced by a uniformly
/// chosen target-class template, poison flag set. True labels are untouched.
void poison(PairedDataset& dataset, const TriggerSpec& trigger, int count,
            const TemplateBank& bank, Rng& rng);

/// Per coordinate: zero with probability dropout_prob, otherwise add
/// jitter_sigma * N(0,1). Images first, then texts.
std::pair<Tensor, Tensor> augment(const Tensor& batch_images, const Tensor& batch_texts,
                                  const AugmentSpec& aug, Rng& rng);

/// m unpoisoned rows sampled uniformly without replacement, then
/// residual_poison of them poisoned. residual_poison = 0 is the
/// guaranteed-clean finetuning set.
PairedDataset sample_clean_subset(const PairedDataset& dataset, int m, int residual_poison,
                                  const TriggerSpec& trigger, const TemplateBank& bank, Rng& rng);

} // namespace plab
