#pragma once

// Internal helpers shared by the pre-training and finetuning loops.

#include <algorithm>
#include <cmath>
#include <vector>

#include "plab/encoder.hpp"
#include "plab/rng.hpp"
#include "plab/synthworld.hpp"

namespace plab::detail {

struct BatchView {
    Tensor images;
    Tensor texts;
    std::vector<int> labels;
};

inline std::vector<int> shuffled_indices(int n, Rng& rng) {
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
        const int j = rng.uniform_int(i + 1);
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    return order;
}

inline BatchView gather_batch(const PairedDataset& ds, const std::vector<int>& order, int start,
                              int batch_size) {
    BatchView out;
    out.images = Tensor(batch_size, ds.images.cols);
    out.texts = Tensor(batch_size, ds.texts.cols);
    out.labels.resize(static_cast<std::size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) {
        const int src = order[static_cast<std::size_t>(start + i)];
        for (int j = 0; j < ds.images.cols; ++j) out.images.at(i, j) = ds.images.at(src, j);
        for (int j = 0; j < ds.texts.cols; ++j) out.texts.at(i, j) = ds.texts.at(src, j);
        out.labels[static_cast<std::size_t>(i)] = ds.true_labels[static_cast<std::size_t>(src)];
    }
    return out;
}

/// Projects log_tau back into [ln(min), ln(max)] after an optimizer step, so
/// the in-graph exp(log_tau) never leaves the clamp range.
inline void clamp_log_tau(DualEncoderParams& params) {
    params.log_tau.data[0] = std::clamp(params.log_tau.data[0], std::log(kTemperatureMin),
                                        std::log(kTemperatureMax));
}

} // namespace plab::detail
