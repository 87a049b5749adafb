#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace ldsim::nn {

/// Dense row-major matrix of doubles. Row vectors are 1xN matrices.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), 0.0) {}

    static Matrix zeros(int r, int c) { return Matrix(r, c); }

    bool empty() const { return data.empty(); }
    size_t size() const { return data.size(); }

    double& at(int r, int c) {
        assert(r >= 0 && r < rows && c >= 0 && c < cols);
        return data[static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)];
    }
    double at(int r, int c) const {
        assert(r >= 0 && r < rows && c >= 0 && c < cols);
        return data[static_cast<size_t>(r) * static_cast<size_t>(cols) + static_cast<size_t>(c)];
    }
    double* row_ptr(int r) { return data.data() + static_cast<size_t>(r) * static_cast<size_t>(cols); }
    const double* row_ptr(int r) const {
        return data.data() + static_cast<size_t>(r) * static_cast<size_t>(cols);
    }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
        return true;
    }
};

Matrix matmul(const Matrix& a, const Matrix& b);     // (m,k)·(k,n)
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // (m,k)·(n,k)ᵀ -> (m,n)
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // (k,m)ᵀ·(k,n) -> (m,n)

void add_in_place(Matrix& dst, const Matrix& src);
void add_scaled_in_place(Matrix& dst, const Matrix& src, double alpha);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows_value(const Matrix& x);

}  // namespace ldsim::nn
