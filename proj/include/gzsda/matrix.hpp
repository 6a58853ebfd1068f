#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace gzsda {

class Rng;

// Dense row-major matrix of doubles. Training math runs in 64-bit so the
// finite-difference gradient checks stay tight; the file formats store
// 32-bit floats and are widened on load.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // rows * cols, row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill_value = 0.0)
        : rows(r), cols(c), data(r * c, fill_value) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    std::string shape_str() const;
    bool all_finite() const;
    void fill(double v);
};

// Throws std::invalid_argument naming both shapes when a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

// [a | b] side by side; row counts must match.
Matrix hconcat(const Matrix& a, const Matrix& b);

// New matrix holding the given rows of m, in the given order.
Matrix select_rows(const Matrix& m, const std::vector<std::size_t>& idx);

Matrix random_normal(std::size_t rows, std::size_t cols, Rng& rng);

Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
void add_inplace(Matrix& a, const Matrix& b);

// Sum of squared entries.
double sum_squares(const Matrix& m);

// 1 x cols row of column sums.
Matrix column_sums(const Matrix& m);

}  // namespace gzsda
