#include "plab/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "plab/error.hpp"
#include "plab/rng.hpp"

namespace plab {

namespace {

void validate_config(const MlpConfig& cfg, const char* tower) {
    if (cfg.layer_dims.size() < 2)
        throw Error(std::string("init_dual_encoder: ") + tower +
                    " tower needs at least input and output dims");
    for (int d : cfg.layer_dims)
        if (d <= 0) throw Error(std::string("init_dual_encoder: ") + tower + " has non-positive dim");
}

std::vector<LayerParams> init_tower(const MlpConfig& cfg, Rng& rng) {
    std::vector<LayerParams> layers;
    for (std::size_t i = 0; i + 1 < cfg.layer_dims.size(); ++i) {
        const int fan_in = cfg.layer_dims[i];
        const int fan_out = cfg.layer_dims[i + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        LayerParams lp{Tensor(fan_in, fan_out), Tensor(1, fan_out)};
        for (double& w : lp.weight.data) w = (2.0 * rng.uniform() - 1.0) * bound;
        layers.push_back(std::move(lp));
    }
    return layers;
}

void check_input(const Tensor& x, const std::vector<LayerParams>& layers, const char* what) {
    if (layers.empty()) throw Error(std::string(what) + ": encoder has no layers");
    if (x.cols != layers.front().weight.rows)
        throw Error(std::string(what) + ": input has " + std::to_string(x.cols) +
                    " columns, tower expects " + std::to_string(layers.front().weight.rows));
}

} // namespace

DualEncoderParams init_dual_encoder(const MlpConfig& image_cfg, const MlpConfig& text_cfg,
                                    std::uint64_t seed) {
    validate_config(image_cfg, "image");
    validate_config(text_cfg, "text");
    if (image_cfg.embed_dim() != text_cfg.embed_dim())
        throw Error("init_dual_encoder: towers disagree on embedding dim (" +
                    std::to_string(image_cfg.embed_dim()) + " vs " +
                    std::to_string(text_cfg.embed_dim()) + ")");

    Rng rng(seed);
    DualEncoderParams p;
    p.image_layers = init_tower(image_cfg, rng);
    p.text_layers = init_tower(text_cfg, rng);
    p.log_tau = Tensor::scalar(kLogTauInit);
    return p;
}

double temperature(const DualEncoderParams& params) {
    return std::clamp(std::exp(params.log_tau_value()), kTemperatureMin, kTemperatureMax);
}

std::vector<Tensor*> param_tensors(DualEncoderParams& params) {
    std::vector<Tensor*> out;
    for (auto& l : params.image_layers) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    for (auto& l : params.text_layers) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    out.push_back(&params.log_tau);
    return out;
}

std::vector<const Tensor*> param_tensors(const DualEncoderParams& params) {
    std::vector<const Tensor*> out;
    for (const auto& l : params.image_layers) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    for (const auto& l : params.text_layers) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    out.push_back(&params.log_tau);
    return out;
}

std::vector<std::string> param_names(const DualEncoderParams& params) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < params.image_layers.size(); ++i) {
        out.push_back("image." + std::to_string(i) + ".weight");
        out.push_back("image." + std::to_string(i) + ".bias");
    }
    for (std::size_t i = 0; i < params.text_layers.size(); ++i) {
        out.push_back("text." + std::to_string(i) + ".weight");
        out.push_back("text." + std::to_string(i) + ".bias");
    }
    out.push_back("log_tau");
    return out;
}

std::vector<NodeId> EncoderLeaves::weight_and_bias_ids() const {
    std::vector<NodeId> out;
    for (const auto& [w, b] : image) {
        out.push_back(w);
        out.push_back(b);
    }
    for (const auto& [w, b] : text) {
        out.push_back(w);
        out.push_back(b);
    }
    return out;
}

std::vector<NodeId> EncoderLeaves::all_ids() const {
    std::vector<NodeId> out = weight_and_bias_ids();
    out.push_back(log_tau);
    return out;
}

EncoderLeaves make_leaves(Graph& g, const DualEncoderParams& params) {
    EncoderLeaves leaves;
    for (const auto& l : params.image_layers)
        leaves.image.emplace_back(g.param(l.weight), g.param(l.bias));
    for (const auto& l : params.text_layers)
        leaves.text.emplace_back(g.param(l.weight), g.param(l.bias));
    leaves.log_tau = g.param(params.log_tau);
    return leaves;
}

namespace {

NodeId encode_tower(Graph& g, const std::vector<std::pair<NodeId, NodeId>>& layers,
                    const Tensor& inputs) {
    NodeId h = g.input(inputs);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = g.add_row(g.matmul(h, layers[i].first), layers[i].second);
        if (i + 1 < layers.size()) h = g.tanh(h);
    }
    return g.row_l2_normalize(h);
}

Tensor encode_tower(const std::vector<LayerParams>& layers, const Tensor& inputs) {
    Tensor h = inputs;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = kernels::add_row(kernels::matmul(h, layers[i].weight), layers[i].bias);
        if (i + 1 < layers.size()) h = kernels::tanh(h);
    }
    return kernels::row_l2_normalize(h);
}

} // namespace

NodeId encode_images(Graph& g, const EncoderLeaves& leaves, const Tensor& images) {
    if (leaves.image.empty()) throw Error("encode_images: no image layers");
    if (images.cols != g.value(leaves.image.front().first).rows)
        throw Error("encode_images: input has " + std::to_string(images.cols) +
                    " columns, tower expects " +
                    std::to_string(g.value(leaves.image.front().first).rows));
    return encode_tower(g, leaves.image, images);
}

NodeId encode_texts(Graph& g, const EncoderLeaves& leaves, const Tensor& texts) {
    if (leaves.text.empty()) throw Error("encode_texts: no text layers");
    if (texts.cols != g.value(leaves.text.front().first).rows)
        throw Error("encode_texts: input has " + std::to_string(texts.cols) +
                    " columns, tower expects " +
                    std::to_string(g.value(leaves.text.front().first).rows));
    return encode_tower(g, leaves.text, texts);
}

Tensor encode_images(const DualEncoderParams& params, const Tensor& images) {
    check_input(images, params.image_layers, "encode_images");
    return encode_tower(params.image_layers, images);
}

Tensor encode_texts(const DualEncoderParams& params, const Tensor& texts) {
    check_input(texts, params.text_layers, "encode_texts");
    return encode_tower(params.text_layers, texts);
}

} // namespace plab
