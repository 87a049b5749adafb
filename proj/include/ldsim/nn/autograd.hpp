#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ldsim/nn/matrix.hpp"

namespace ldsim::nn {

/// A learnable tensor with its gradient and Adam state.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix adam_m;
    Matrix adam_v;

    Parameter() = default;
    Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {}

    void ensure_grad() {
        if (grad.empty()) {
            grad = Matrix::zeros(value.rows, value.cols);
        }
    }
    void zero_grad() { grad = Matrix(); }
    bool has_grad() const { return !grad.empty(); }
};

/// Handle into a Tape.
struct Val {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Neighbor lists for graph attention; every list includes the node itself.
struct Adjacency {
    std::vector<std::vector<int>> neighbors;
};

/// Reverse-mode autodiff over a dynamically built tape. Creation order is a
/// topological order, so backward() is a single reverse sweep. One tape per
/// thread; parameters are shared and read-only during the forward pass.
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    Val param(Parameter& p);
    Val constant(Matrix v);
    Val scalar(double v);

    Val matmul(Val a, Val b);
    Val matmul_nt(Val a, Val b);  // a · bᵀ
    Val add(Val a, Val b);
    Val sub(Val a, Val b);
    Val mul(Val a, Val b);  // elementwise
    Val scale(Val a, double alpha);
    Val add_rowvec(Val a, Val row);  // broadcast a 1xN row over each row of a
    Val concat_cols(Val a, Val b);
    Val gather_rows(Val a, std::vector<int> idx);
    Val row(Val a, int r) { return gather_rows(a, {r}); }
    Val slice_rows(Val a, int begin, int end);
    Val vstack(const std::vector<Val>& rows);
    Val mean_rows(Val a);
    Val sum_all(Val a);
    Val cell(Val a, int r, int c);

    Val relu(Val a);
    Val elu(Val a, double alpha = 1.0);
    Val leaky_relu(Val a, double slope);
    Val sigmoid(Val a);
    Val log(Val a);
    Val softmax_rows(Val a);
    Val log_softmax_rows(Val a);

    /// Graph-attention aggregation: for each node i, attention weights are
    /// softmax over leaky_relu(s_src[i] + s_dst[j]) for j in its neighbor
    /// list, and the output row is the weighted sum of hw rows.
    Val gat_attend(Val hw, Val s_src, Val s_dst, const Adjacency& adj, double leaky_slope = 0.2);

    const Matrix& value(Val v) const;
    const Matrix& grad_of(Val v) const;  // zero-sized if untouched
    void backward(Val root);

    size_t size() const { return nodes_.size(); }
    bool grad_enabled() const { return grad_enabled_; }

private:
    struct Node {
        Matrix value;               // owned (empty for parameter leaves)
        Parameter* leaf = nullptr;  // set for parameter leaves
        Matrix grad;
        bool needs = false;
        std::function<void()> back;
    };

    int push(Matrix value, bool needs, std::function<void()> back);
    Matrix& grad_buf(int id);
    void ensure_grad(int id);
    const Matrix& val(int id) const {
        const Node& n = nodes_[static_cast<size_t>(id)];
        return n.leaf != nullptr ? n.leaf->value : n.value;
    }
    bool needs(Val v) const { return nodes_[static_cast<size_t>(v.id)].needs; }

    std::vector<Node> nodes_;
    std::map<Parameter*, int> param_nodes_;
    bool grad_enabled_;
};

/// Draws an index from a 1xN probability row.
int categorical_sample(const Matrix& probs_row, std::mt19937_64& rng);

/// argmax with lowest-index tie break.
int argmax_row(const Matrix& probs_row);

Matrix xavier_uniform(int rows, int cols, std::mt19937_64& rng);
Matrix uniform_init(int rows, int cols, double limit, std::mt19937_64& rng);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
    /// Applies one update to every parameter that accumulated a gradient,
    /// then clears the gradients.
    void step(const std::vector<Parameter*>& params);
    std::int64_t steps_taken() const { return t_; }

private:
    AdamConfig cfg_;
    std::int64_t t_ = 0;
};

}  // namespace ldsim::nn
