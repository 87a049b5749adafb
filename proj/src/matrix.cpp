#include "ldsim/nn/matrix.hpp"

#include <algorithm>

namespace ldsim::nn {

Matrix matmul(const Matrix& a, const Matrix& b) {
    assert(a.cols == b.rows);
    Matrix out(a.rows, b.cols);
    const int m = a.rows, k = a.cols, n = b.cols;
    for (int i = 0; i < m; ++i) {
        const double* arow = a.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b.row_ptr(p);
            for (int j = 0; j < n; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    assert(a.cols == b.cols);
    Matrix out(a.rows, b.rows);
    const int m = a.rows, k = a.cols, n = b.rows;
    for (int i = 0; i < m; ++i) {
        const double* arow = a.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (int j = 0; j < n; ++j) {
            const double* brow = b.row_ptr(j);
            double acc = 0;
            for (int p = 0; p < k; ++p) {
                acc += arow[p] * brow[p];
            }
            orow[j] = acc;
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    assert(a.rows == b.rows);
    Matrix out(a.cols, b.cols);
    const int k = a.rows, m = a.cols, n = b.cols;
    for (int p = 0; p < k; ++p) {
        const double* arow = a.row_ptr(p);
        const double* brow = b.row_ptr(p);
        for (int i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) {
                continue;
            }
            double* orow = out.row_ptr(i);
            for (int j = 0; j < n; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }
    return out;
}

void add_in_place(Matrix& dst, const Matrix& src) {
    assert(dst.same_shape(src));
    for (size_t i = 0; i < dst.data.size(); ++i) {
        dst.data[i] += src.data[i];
    }
}

void add_scaled_in_place(Matrix& dst, const Matrix& src, double alpha) {
    assert(dst.same_shape(src));
    for (size_t i = 0; i < dst.data.size(); ++i) {
        dst.data[i] += alpha * src.data[i];
    }
}

Matrix softmax_rows_value(const Matrix& x) {
    Matrix out(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        const double* row = x.row_ptr(i);
        double* orow = out.row_ptr(i);
        double mx = *std::max_element(row, row + x.cols);
        double sum = 0;
        for (int j = 0; j < x.cols; ++j) {
            orow[j] = std::exp(row[j] - mx);
            sum += orow[j];
        }
        for (int j = 0; j < x.cols; ++j) {
            orow[j] /= sum;
        }
    }
    return out;
}

}  // namespace ldsim::nn
