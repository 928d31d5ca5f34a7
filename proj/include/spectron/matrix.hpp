#ifndef SPECTRON_MATRIX_HPP
#define SPECTRON_MATRIX_HPP

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace spectron {

/// Row-major dense matrix of doubles. The universal numeric carrier:
/// weights, gradients, activations, factors all live here.
class DenseMatrix {
public:
    DenseMatrix() = default;

    /// Zero-initialized rows x cols matrix.
    DenseMatrix(std::size_t rows, std::size_t cols);

    /// Takes ownership of row-major data. Throws if the length does not
    /// match rows*cols or any entry is non-finite.
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    /// Literal construction for tests: {{1,2},{3,4}}.
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    /// True when every entry is finite.
    bool all_finite() const;

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix zeros(std::size_t rows, std::size_t cols);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// X * Y. Throws std::invalid_argument on inner-dimension mismatch.
DenseMatrix matmul(const DenseMatrix& x, const DenseMatrix& y);

/// General product with optional transposes: op(X) * op(Y).
DenseMatrix matmul_t(const DenseMatrix& x, bool trans_x, const DenseMatrix& y, bool trans_y);

DenseMatrix transpose(const DenseMatrix& x);

DenseMatrix add(const DenseMatrix& x, const DenseMatrix& y);
DenseMatrix sub(const DenseMatrix& x, const DenseMatrix& y);
DenseMatrix scale(const DenseMatrix& x, double c);

/// x += c * y, shapes must match.
void axpy(DenseMatrix& x, double c, const DenseMatrix& y);

double frobenius_norm(const DenseMatrix& x);

/// sqrt((1/m) * sum y_i^2). Throws on empty input.
double rms_vec(const std::vector<double>& y);

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& v);

std::string shape_str(const DenseMatrix& x);

} // namespace spectron

#endif // SPECTRON_MATRIX_HPP
