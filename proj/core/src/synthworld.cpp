#include "plab/synthworld.hpp"

#include <string>

#include "plab/error.hpp"

namespace plab {

namespace {

struct Prototypes {
    Tensor image; // K x d_img
    Tensor text;  // K x d_txt
};

Prototypes make_prototypes(const WorldSpec& spec) {
    if (spec.num_classes < 2) throw Error("world: num_classes must be >= 2");
    if (spec.d_img <= 0 || spec.d_txt <= 0) throw Error("world: dims must be positive");
    if (spec.noise_sigma < 0.0) throw Error("world: noise_sigma must be >= 0");
    Rng rng(derive_seed(spec.seed, Stream::Prototypes));
    Prototypes protos{Tensor(spec.num_classes, spec.d_img), Tensor(spec.num_classes, spec.d_txt)};
    for (double& x : protos.image.data) x = spec.prototype_scale * rng.normal();
    for (double& x : protos.text.data) x = spec.prototype_scale * rng.normal();
    return protos;
}

PairedDataset generate_from(const WorldSpec& spec, int n, std::uint64_t noise_seed) {
    if (n < 1) throw Error("generate: n must be >= 1");
    const Prototypes protos = make_prototypes(spec);
    Rng rng(noise_seed);

    PairedDataset ds;
    ds.images = Tensor(n, spec.d_img);
    ds.texts = Tensor(n, spec.d_txt);
    ds.true_labels.resize(static_cast<std::size_t>(n));
    ds.poison_flags.assign(static_cast<std::size_t>(n), 0);

    for (int i = 0; i < n; ++i) {
        const int c = rng.uniform_int(spec.num_classes);
        ds.true_labels[static_cast<std::size_t>(i)] = c;
        for (int j = 0; j < spec.d_img; ++j)
            ds.images.at(i, j) = protos.image.at(c, j) + spec.noise_sigma * rng.normal();
        for (int j = 0; j < spec.d_txt; ++j)
            ds.texts.at(i, j) = protos.text.at(c, j) + spec.noise_sigma * rng.normal();
    }
    return ds;
}

} // namespace

int PairedDataset::poison_count() const {
    int count = 0;
    for (std::uint8_t f : poison_flags) count += f;
    return count;
}

Tensor TemplateBank::class_template(int cls, int t) const {
    if (cls < 0 || cls >= num_classes || t < 0 || t >= per_class)
        throw Error("template_bank: index (" + std::to_string(cls) + "," + std::to_string(t) +
                    ") out of range");
    Tensor out(1, vectors.cols);
    const int row = cls * per_class + t;
    for (int j = 0; j < vectors.cols; ++j) out.at(0, j) = vectors.at(row, j);
    return out;
}

TriggerSpec make_trigger(int patch_len, int target_class, std::uint64_t seed, Placement placement,
                         int fixed_offset) {
    if (patch_len < 1) throw Error("make_trigger: patch_len must be >= 1");
    TriggerSpec trigger;
    trigger.patch_len = patch_len;
    trigger.target_class = target_class;
    trigger.placement = placement;
    trigger.fixed_offset = fixed_offset;
    trigger.patch.resize(static_cast<std::size_t>(patch_len));
    Rng rng(derive_seed(seed, Stream::Trigger));
    for (double& x : trigger.patch) x = rng.normal();
    return trigger;
}

PairedDataset generate(const WorldSpec& spec, int n) {
    return generate_from(spec, n, derive_seed(spec.seed, Stream::WorldData));
}

PairedDataset generate_split(const WorldSpec& spec, int n, std::uint64_t noise_seed) {
    return generate_from(spec, n, noise_seed);
}

TemplateBank make_templates(const WorldSpec& spec, int per_class) {
    if (per_class < 1) throw Error("make_templates: per_class must be >= 1");
    const Prototypes protos = make_prototypes(spec);
    Rng rng(derive_seed(spec.seed, Stream::Templates));

    TemplateBank bank;
    bank.num_classes = spec.num_classes;
    bank.per_class = per_class;
    bank.vectors = Tensor(spec.num_classes * per_class, spec.d_txt);
    for (int c = 0; c < spec.num_classes; ++c)
        for (int t = 0; t < per_class; ++t)
            for (int j = 0; j < spec.d_txt; ++j)
                bank.vectors.at(c * per_class + t, j) =
                    protos.text.at(c, j) + spec.noise_sigma * rng.normal();
    return bank;
}

void apply_trigger(Tensor& images, int row, const TriggerSpec& trigger, Rng& rng) {
    const int d = images.cols;
    const int len = trigger.patch_len;
    if (len > d)
        throw Error("apply_trigger: patch length " + std::to_string(len) + " exceeds image dim " +
                    std::to_string(d));
    int offset = trigger.fixed_offset;
    if (trigger.placement == Placement::RandomOffset) offset = rng.uniform_int(d - len + 1);
    if (offset < 0 || offset + len > d)
        throw Error("apply_trigger: offset " + std::to_string(offset) + " out of range");
    for (int j = 0; j < len; ++j)
        images.at(row, offset + j) = trigger.patch[static_cast<std::size_t>(j)];
}

void poison(PairedDataset& dataset, const TriggerSpec& trigger, int count, const TemplateBank& bank,
            Rng& rng) {
    if (count < 0) throw Error("poison: count must be >= 0");
    if (count == 0) return;
    if (trigger.target_class < 0 || trigger.target_class >= bank.num_classes)
        throw Error("poison: target class " + std::to_string(trigger.target_class) +
                    " outside template bank");

    std::vector<int> eligible;
    for (int i = 0; i < dataset.size(); ++i)
        if (!dataset.poison_flags[static_cast<std::size_t>(i)] &&
            dataset.true_labels[static_cast<std::size_t>(i)] != trigger.target_class)
            eligible.push_back(i);
    if (count > static_cast<int>(eligible.size()))
        throw Error("poison: requested " + std::to_string(count) + " rows but only " +
                    std::to_string(eligible.size()) + " are eligible");

    // Partial Fisher-Yates: the first `count` entries are a uniform sample
    // without replacement.
    for (int i = 0; i < count; ++i) {
        const int j = i + rng.uniform_int(static_cast<int>(eligible.size()) - i);
        std::swap(eligible[static_cast<std::size_t>(i)], eligible[static_cast<std::size_t>(j)]);
    }

    for (int i = 0; i < count; ++i) {
        const int row = eligible[static_cast<std::size_t>(i)];
        apply_trigger(dataset.images, row, trigger, rng);
        const int t = rng.uniform_int(bank.per_class);
        for (int j = 0; j < dataset.texts.cols; ++j)
            dataset.texts.at(row, j) = bank.vectors.at(trigger.target_class * bank.per_class + t, j);
        dataset.poison_flags[static_cast<std::size_t>(row)] = 1;
    }
}

namespace {

Tensor augment_one(const Tensor& batch, const AugmentSpec& aug, Rng& rng) {
    Tensor out = batch;
    for (double& x : out.data) {
        if (rng.uniform() < aug.dropout_prob)
            x = 0.0;
        else
            x += aug.jitter_sigma * rng.normal();
    }
    return out;
}

} // namespace

std::pair<Tensor, Tensor> augment(const Tensor& batch_images, const Tensor& batch_texts,
                                  const AugmentSpec& aug, Rng& rng) {
    if (aug.jitter_sigma < 0.0) throw Error("augment: jitter_sigma must be >= 0");
    if (aug.dropout_prob < 0.0 || aug.dropout_prob >= 1.0)
        throw Error("augment: dropout_prob must be in [0, 1)");
    // Identity augmentation keeps the tensors bitwise intact (no rng draws
    // would still be consumed below, so short-circuit).
    if (aug.jitter_sigma == 0.0 && aug.dropout_prob == 0.0) return {batch_images, batch_texts};
    Tensor images = augment_one(batch_images, aug, rng);
    Tensor texts = augment_one(batch_texts, aug, rng);
    return {std::move(images), std::move(texts)};
}

PairedDataset sample_clean_subset(const PairedDataset& dataset, int m, int residual_poison,
                                  const TriggerSpec& trigger, const TemplateBank& bank, Rng& rng) {
    if (m < 1) throw Error("sample_clean_subset: m must be >= 1");
    if (residual_poison < 0 || residual_poison > m)
        throw Error("sample_clean_subset: residual_poison must be in [0, m]");

    std::vector<int> clean_rows;
    for (int i = 0; i < dataset.size(); ++i)
        if (!dataset.poison_flags[static_cast<std::size_t>(i)]) clean_rows.push_back(i);
    if (m > static_cast<int>(clean_rows.size()))
        throw Error("sample_clean_subset: need " + std::to_string(m) + " unpoisoned rows, have " +
                    std::to_string(clean_rows.size()));

    for (int i = 0; i < m; ++i) {
        const int j = i + rng.uniform_int(static_cast<int>(clean_rows.size()) - i);
        std::swap(clean_rows[static_cast<std::size_t>(i)], clean_rows[static_cast<std::size_t>(j)]);
    }

    PairedDataset subset;
    subset.images = Tensor(m, dataset.images.cols);
    subset.texts = Tensor(m, dataset.texts.cols);
    subset.true_labels.resize(static_cast<std::size_t>(m));
    subset.poison_flags.assign(static_cast<std::size_t>(m), 0);
    for (int i = 0; i < m; ++i) {
        const int src = clean_rows[static_cast<std::size_t>(i)];
        for (int j = 0; j < dataset.images.cols; ++j) subset.images.at(i, j) = dataset.images.at(src, j);
        for (int j = 0; j < dataset.texts.cols; ++j) subset.texts.at(i, j) = dataset.texts.at(src, j);
        subset.true_labels[static_cast<std::size_t>(i)] =
            dataset.true_labels[static_cast<std::size_t>(src)];
    }
    poison(subset, trigger, residual_poison, bank, rng);
    return subset;
}

} // namespace plab
