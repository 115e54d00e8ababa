#pragma once

#include <cstddef>
#include <vector>

namespace plab {

/// Dense row-major matrix of doubles. The only numeric carrier in the lab;
/// a scalar is a 1x1 tensor, a row vector 1xN.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
    Tensor(int r, int c, std::vector<double> values);

    static Tensor filled(int r, int c, double v);
    static Tensor scalar(double v) { return Tensor(1, 1, {v}); }

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Tensor& other) const { return rows == other.rows && cols == other.cols; }
    bool is_scalar() const { return rows == 1 && cols == 1; }
    double scalar_value() const;

    bool all_finite() const;
};

bool operator==(const Tensor& a, const Tensor& b);

// Forward kernels. The autodiff tape and the plain evaluation path both call
// these, so eager node values and graph-free evaluation agree bit for bit.
namespace kernels {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor tanh(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor row_l2_normalize(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
Tensor select_entries(const Tensor& a, const std::vector<std::pair<int, int>>& idx);
Tensor square(const Tensor& a);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor exp_scalar(const Tensor& a);

} // namespace kernels

} // namespace plab
