#include "spectron/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace spectron {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw std::invalid_argument("DenseMatrix: data length " + std::to_string(data_.size()) +
                                    " does not match " + std::to_string(rows_) + "x" +
                                    std::to_string(cols_));
    if (!all_finite())
        throw std::invalid_argument("DenseMatrix: non-finite entry in construction");
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_)
            throw std::invalid_argument("DenseMatrix: ragged initializer");
        for (double v : r) data_.push_back(v);
    }
    if (!all_finite())
        throw std::invalid_argument("DenseMatrix: non-finite entry in construction");
}

bool DenseMatrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::zeros(std::size_t rows, std::size_t cols) {
    return DenseMatrix(rows, cols);
}

std::string shape_str(const DenseMatrix& x) {
    return std::to_string(x.rows()) + "x" + std::to_string(x.cols());
}

DenseMatrix matmul_t(const DenseMatrix& x, bool trans_x, const DenseMatrix& y, bool trans_y) {
    const std::size_t m = trans_x ? x.cols() : x.rows();
    const std::size_t k = trans_x ? x.rows() : x.cols();
    const std::size_t k2 = trans_y ? y.cols() : y.rows();
    const std::size_t n = trans_y ? y.rows() : y.cols();
    if (k != k2)
        throw std::invalid_argument("matmul: inner dimension mismatch " + shape_str(x) +
                                    (trans_x ? "^T" : "") + " * " + shape_str(y) +
                                    (trans_y ? "^T" : ""));
    DenseMatrix out(m, n);
    // Loop orders chosen so the innermost index walks contiguous memory.
    if (!trans_x && !trans_y) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const double xv = x(i, p);
                if (xv == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) out(i, j) += xv * y(p, j);
            }
    } else if (!trans_x && trans_y) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t p = 0; p < k; ++p) acc += x(i, p) * y(j, p);
                out(i, j) = acc;
            }
    } else if (trans_x && !trans_y) {
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t i = 0; i < m; ++i) {
                const double xv = x(p, i);
                if (xv == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) out(i, j) += xv * y(p, j);
            }
    } else {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t p = 0; p < k; ++p) acc += x(p, i) * y(j, p);
                out(i, j) = acc;
            }
    }
    return out;
}

DenseMatrix matmul(const DenseMatrix& x, const DenseMatrix& y) {
    return matmul_t(x, false, y, false);
}

DenseMatrix transpose(const DenseMatrix& x) {
    DenseMatrix out(x.cols(), x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(j, i) = x(i, j);
    return out;
}

static void check_same_shape(const DenseMatrix& x, const DenseMatrix& y, const char* op) {
    if (x.rows() != y.rows() || x.cols() != y.cols())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(x) +
                                    " vs " + shape_str(y));
}

DenseMatrix add(const DenseMatrix& x, const DenseMatrix& y) {
    check_same_shape(x, y, "add");
    DenseMatrix out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += y.data()[i];
    return out;
}

DenseMatrix sub(const DenseMatrix& x, const DenseMatrix& y) {
    check_same_shape(x, y, "sub");
    DenseMatrix out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= y.data()[i];
    return out;
}

DenseMatrix scale(const DenseMatrix& x, double c) {
    DenseMatrix out = x;
    for (double& v : out.data()) v *= c;
    return out;
}

void axpy(DenseMatrix& x, double c, const DenseMatrix& y) {
    check_same_shape(x, y, "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += c * y.data()[i];
}

double frobenius_norm(const DenseMatrix& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v * v;
    return std::sqrt(acc);
}

double rms_vec(const std::vector<double>& y) {
    if (y.empty()) throw std::invalid_argument("rms_vec: empty vector");
    double acc = 0.0;
    for (double v : y) acc += v * v;
    return std::sqrt(acc / static_cast<double>(y.size()));
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

} // namespace spectron
