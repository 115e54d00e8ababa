#include "plab/train.hpp"

#include <cmath>

#include "plab/error.hpp"
#include "plab/losses.hpp"
#include "plab/schedule.hpp"
#include "train_common.hpp"

namespace plab {

std::string objective_name(Objective o) {
    return o == Objective::MMCL ? "MMCL" : "MMCL_SSL";
}

EvalOutcome evaluate(const DualEncoderParams& params, const EvalContext& ctx) {
    const ZeroShotHead head = build_head(params, ctx.templates);
    return EvalOutcome{accuracy(params, head, ctx.data),
                       asr(params, head, ctx.data, ctx.trigger, ctx.asr_seed)};
}

namespace {

std::vector<bool> decay_mask_for(const DualEncoderParams& params) {
    // Weight decay applies to weights and biases, not the temperature.
    std::vector<bool> mask(param_tensors(params).size(), true);
    mask.back() = false;
    return mask;
}

EvalRecord make_record(const std::string& run_id, const std::string& fingerprint,
                       const std::string& loss_mode, int epoch, double lr,
                       const EvalOutcome& outcome, const LossBreakdown& loss) {
    EvalRecord r;
    r.run_id = run_id;
    r.epoch = epoch;
    r.lr = lr;
    r.loss_mode = loss_mode;
    r.accuracy = outcome.accuracy;
    r.asr = outcome.asr;
    r.loss = loss;
    r.fingerprint = fingerprint;
    return r;
}

} // namespace

PretrainResult pretrain(const PretrainConfig& cfg, const DualEncoderParams& init,
                        const PairedDataset& dataset, const EvalContext& eval_ctx,
                        const std::string& run_id, const std::string& fingerprint) {
    if (cfg.epochs < 1) throw Error("pretrain: epochs must be >= 1");
    if (cfg.peak_lr <= 0.0) throw Error("pretrain: peak_lr must be positive");
    if (cfg.warmup_steps < 0) throw Error("pretrain: warmup_steps must be >= 0");
    if (dataset.size() == 0) throw Error("pretrain: empty dataset");
    if (cfg.batch_size < 1 || cfg.batch_size > dataset.size())
        throw Error("pretrain: batch_size must lie in [1, dataset size]");

    const int steps_per_epoch = dataset.size() / cfg.batch_size;
    const int total_steps = cfg.epochs * steps_per_epoch;
    if (cfg.warmup_steps >= total_steps)
        throw Error("pretrain: warmup_steps " + std::to_string(cfg.warmup_steps) +
                    " must be below total steps " + std::to_string(total_steps));

    DualEncoderParams params = init;
    AdamW opt(param_tensors(std::as_const(params)), AdamWConfig{0.9, 0.999, 1e-8, cfg.weight_decay},
              decay_mask_for(params));
    Rng rng_shuffle(derive_seed(cfg.seed, Stream::Shuffle));
    Rng rng_augment(derive_seed(cfg.seed, Stream::Augment));
    const std::string mode = objective_name(cfg.objective);

    PretrainResult result;
    result.checkpoints.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
    result.checkpoints.push_back(params);
    result.trajectory.records.push_back(make_record(run_id, fingerprint, mode, 0, cfg.peak_lr,
                                                    evaluate(params, eval_ctx), LossBreakdown{}));

    int global_step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const std::vector<int> order = detail::shuffled_indices(dataset.size(), rng_shuffle);
        LossBreakdown epoch_mean;
        for (int b = 0; b < steps_per_epoch; ++b) {
            const detail::BatchView batch =
                detail::gather_batch(dataset, order, b * cfg.batch_size, cfg.batch_size);
            const double lr = lr_at(global_step, cfg.peak_lr, cfg.warmup_steps, total_steps);

            Graph g;
            const EncoderLeaves leaves = make_leaves(g, params);
            const NodeId img = encode_images(g, leaves, batch.images);
            const NodeId txt = encode_texts(g, leaves, batch.texts);
            const NodeId inv_tau = g.exp_scalar(leaves.log_tau);

            NodeId loss_node;
            LossBreakdown bd;
            if (cfg.objective == Objective::MMCL) {
                loss_node = mmcl_loss(g, img, txt, inv_tau);
                bd.mmcl = g.value(loss_node).scalar_value();
                bd.total = bd.mmcl;
            } else {
                const auto [aug_images, aug_texts] =
                    augment(batch.images, batch.texts, cfg.aug, rng_augment);
                const NodeId img_aug = encode_images(g, leaves, aug_images);
                const NodeId txt_aug = encode_texts(g, leaves, aug_texts);
                const CleanClipNodes nodes =
                    cleanclip_loss(g, img, img_aug, txt, txt_aug, inv_tau, cfg.ssl_weight);
                loss_node = nodes.total;
                bd.mmcl = g.value(nodes.mmcl).scalar_value();
                bd.ssl = g.value(nodes.ssl).scalar_value();
                bd.ssl_weight = cfg.ssl_weight;
                bd.total = g.value(nodes.total).scalar_value();
            }

            auto grads = g.backward(loss_node);
            std::vector<Tensor*> tensors = param_tensors(params);
            std::vector<const Tensor*> grad_ptrs;
            grad_ptrs.reserve(tensors.size());
            const std::vector<NodeId> leaf_ids = leaves.all_ids();
            for (NodeId id : leaf_ids) grad_ptrs.push_back(&grads.at(id));
            opt.step(tensors, grad_ptrs, lr);
            detail::clamp_log_tau(params);
            ++global_step;

            epoch_mean.total += bd.total;
            epoch_mean.mmcl += bd.mmcl;
            epoch_mean.ssl += bd.ssl;
            epoch_mean.ssl_weight = bd.ssl_weight;
        }
        epoch_mean.total /= steps_per_epoch;
        epoch_mean.mmcl /= steps_per_epoch;
        epoch_mean.ssl /= steps_per_epoch;
        result.trajectory.epoch_loss.push_back(epoch_mean);
        result.checkpoints.push_back(params);

        if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
            result.trajectory.records.push_back(make_record(
                run_id, fingerprint, mode, epoch, cfg.peak_lr, evaluate(params, eval_ctx), epoch_mean));
        }
    }
    return result;
}

int select_model(const std::vector<EvalRecord>& records, const SelectRule& rule) {
    if (records.empty()) throw Error("select_model: empty trajectory");
    std::size_t best = 0;
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (rule.kind == SelectRule::MaxAccuracy) {
            if (records[i].accuracy > records[best].accuracy) best = i;
        } else {
            if (std::abs(records[i].accuracy - rule.target) <
                std::abs(records[best].accuracy - rule.target))
                best = i;
        }
    }
    return records[best].epoch;
}

} // namespace plab
