#include "plab/tensor.hpp"

#include <cmath>
#include <string>

#include "plab/error.hpp"

namespace plab {

namespace {

std::string shape_str(const Tensor& t) {
    return std::to_string(t.rows) + "x" + std::to_string(t.cols);
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw Error(std::string(op) + ": shape mismatch (" + shape_str(a) + " vs " + shape_str(b) + ")");
}

} // namespace

Tensor::Tensor(int r, int c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != static_cast<std::size_t>(r) * c)
        throw Error("Tensor: data length " + std::to_string(data.size()) + " does not match shape " +
                    std::to_string(r) + "x" + std::to_string(c));
}

Tensor Tensor::filled(int r, int c, double v) {
    Tensor t(r, c);
    for (double& x : t.data) x = v;
    return t;
}

double Tensor::scalar_value() const {
    if (!is_scalar()) throw Error("scalar_value: tensor is " + shape_str(*this) + ", expected 1x1");
    return data[0];
}

bool Tensor::all_finite() const {
    for (double x : data)
        if (!std::isfinite(x)) return false;
    return true;
}

bool operator==(const Tensor& a, const Tensor& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

namespace kernels {

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols != b.rows) shape_error("matmul", a, b);
    Tensor out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + static_cast<std::size_t>(i) * a.cols;
        double* orow = out.data.data() + static_cast<std::size_t>(i) * out.cols;
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            const double* brow = b.data.data() + static_cast<std::size_t>(k) * b.cols;
            for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    Tensor out(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) shape_error("add", a, b);
    Tensor out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) shape_error("mul", a, b);
    Tensor out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
    return out;
}

Tensor add_row(const Tensor& a, const Tensor& row) {
    if (row.rows != 1 || row.cols != a.cols) shape_error("add_row", a, row);
    Tensor out = a;
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) out.at(i, j) += row.data[j];
    return out;
}

Tensor tanh(const Tensor& a) {
    Tensor out = a;
    for (double& x : out.data) x = std::tanh(x);
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = a;
    for (double& x : out.data) x *= c;
    return out;
}

Tensor row_l2_normalize(const Tensor& a) {
    Tensor out = a;
    for (int i = 0; i < a.rows; ++i) {
        double sq = 0.0;
        for (int j = 0; j < a.cols; ++j) sq += a.at(i, j) * a.at(i, j);
        const double norm = std::sqrt(sq);
        if (norm < 1e-12)
            throw Error("row_l2_normalize: degenerate row norm at row " + std::to_string(i));
        for (int j = 0; j < a.cols; ++j) out.at(i, j) /= norm;
    }
    return out;
}

Tensor log_softmax_rows(const Tensor& a) {
    if (a.cols < 1) throw Error("log_softmax_rows: empty rows");
    Tensor out = a;
    for (int i = 0; i < a.rows; ++i) {
        // Max subtraction keeps exp in range at low temperature.
        double mx = a.at(i, 0);
        for (int j = 1; j < a.cols; ++j) mx = std::max(mx, a.at(i, j));
        double sum = 0.0;
        for (int j = 0; j < a.cols; ++j) sum += std::exp(a.at(i, j) - mx);
        const double lse = mx + std::log(sum);
        for (int j = 0; j < a.cols; ++j) out.at(i, j) = a.at(i, j) - lse;
    }
    return out;
}

Tensor select_entries(const Tensor& a, const std::vector<std::pair<int, int>>& idx) {
    Tensor out(static_cast<int>(idx.size()), 1);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto [r, c] = idx[k];
        if (r < 0 || r >= a.rows || c < 0 || c >= a.cols)
            throw Error("select_entries: index (" + std::to_string(r) + "," + std::to_string(c) +
                        ") out of range for " + shape_str(a));
        out.data[k] = a.at(r, c);
    }
    return out;
}

Tensor square(const Tensor& a) {
    Tensor out = a;
    for (double& x : out.data) x *= x;
    return out;
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double x : a.data) s += x;
    return Tensor::scalar(s);
}

Tensor mean_all(const Tensor& a) {
    if (a.data.empty()) throw Error("mean_all: empty tensor");
    return Tensor::scalar(sum_all(a).data[0] / static_cast<double>(a.data.size()));
}

Tensor exp_scalar(const Tensor& a) {
    if (!a.is_scalar()) throw Error("exp_scalar: tensor is " + shape_str(a) + ", expected 1x1");
    return Tensor::scalar(std::exp(a.data[0]));
}

} // namespace kernels

} // namespace plab
