#include "ldsim/nn/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ldsim::nn {

namespace {

void shape_check(bool ok, const char* what) {
    if (!ok) {
        throw std::logic_error(std::string("tape shape mismatch in ") + what);
    }
}

}  // namespace

int Tape::push(Matrix value, bool needs, std::function<void()> back) {
    Node n;
    n.value = std::move(value);
    n.needs = needs && grad_enabled_;
    if (n.needs) {
        n.back = std::move(back);
    }
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Matrix& Tape::grad_buf(int id) {
    ensure_grad(id);
    return nodes_[static_cast<size_t>(id)].grad;
}

void Tape::ensure_grad(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.empty()) {
        const Matrix& v = val(id);
        n.grad = Matrix::zeros(v.rows, v.cols);
    }
}

Val Tape::param(Parameter& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) {
        return {it->second};
    }
    Node n;
    n.leaf = &p;
    n.needs = grad_enabled_;
    nodes_.push_back(std::move(n));
    int id = static_cast<int>(nodes_.size()) - 1;
    if (grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, id, pp = &p] {
            pp->ensure_grad();
            add_in_place(pp->grad, nodes_[static_cast<size_t>(id)].grad);
        };
    }
    param_nodes_[&p] = id;
    return {id};
}

Val Tape::constant(Matrix v) {
    return {push(std::move(v), false, nullptr)};
}

Val Tape::scalar(double v) {
    Matrix m(1, 1);
    m.at(0, 0) = v;
    return constant(std::move(m));
}

const Matrix& Tape::value(Val v) const {
    return val(v.id);
}

const Matrix& Tape::grad_of(Val v) const {
    return nodes_[static_cast<size_t>(v.id)].grad;
}

void Tape::backward(Val root) {
    const Matrix& rv = val(root.id);
    if (rv.rows != 1 || rv.cols != 1) {
        throw std::logic_error("backward root must be a scalar");
    }
    if (!grad_enabled_) {
        throw std::logic_error("backward on a grad-disabled tape");
    }
    grad_buf(root.id).at(0, 0) += 1.0;
    for (int i = root.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (!n.needs || !n.back || n.grad.empty()) {
            continue;
        }
        n.back();
    }
}

Val Tape::matmul(Val a, Val b) {
    const Matrix& av = val(a.id);
    const Matrix& bv = val(b.id);
    shape_check(av.cols == bv.rows, "matmul");
    bool need = needs(a) || needs(b);
    int id = push(nn::matmul(av, bv), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, a, b, id] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            if (needs(a)) {
                add_in_place(grad_buf(a.id), nn::matmul_nt(g, val(b.id)));
            }
            if (needs(b)) {
                add_in_place(grad_buf(b.id), nn::matmul_tn(val(a.id), g));
            }
        };
    }
    return {id};
}

Val Tape::matmul_nt(Val a, Val b) {
    const Matrix& av = val(a.id);
    const Matrix& bv = val(b.id);
    shape_check(av.cols == bv.cols, "matmul_nt");
    bool need = needs(a) || needs(b);
    int id = push(nn::matmul_nt(av, bv), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, a, b, id] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            if (needs(a)) {
                add_in_place(grad_buf(a.id), nn::matmul(g, val(b.id)));
            }
            if (needs(b)) {
                add_in_place(grad_buf(b.id), nn::matmul_tn(g, val(a.id)));
            }
        };
    }
    return {id};
}

Val Tape::add(Val a, Val b) {
    const Matrix& av = val(a.id);
    const Matrix& bv = val(b.id);
    shape_check(av.same_shape(bv), "add");
    Matrix out = av;
    add_in_place(out, bv);
    bool need = needs(a) || needs(b);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, a, b, id] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            if (needs(a)) {
                add_in_place(grad_buf(a.id), g);
            }
            if (needs(b)) {
                add_in_place(grad_buf(b.id), g);
            }
        };
    }
    return {id};
}

Val Tape::sub(Val a, Val b) {
    const Matrix& av = val(a.id);
    const Matrix& bv = val(b.id);
    shape_check(av.same_shape(bv), "sub");
    Matrix out = av;
    add_scaled_in_place(out, bv, -1.0);
    bool need = needs(a) || needs(b);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, a, b, id] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            if (needs(a)) {
                add_in_place(grad_buf(a.id), g);
            }
            if (needs(b)) {
                add_scaled_in_place(grad_buf(b.id), g, -1.0);
            }
        };
    }
    return {id};
}

Val Tape::mul(Val a, Val b) {
    const Matrix& av = val(a.id);
    const Matrix& bv = val(b.id);
    shape_check(av.same_shape(bv), "mul");
    Matrix out = av;
    for (size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] *= bv.data[i];
    }
    bool need = needs(a) || needs(b);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, a, b, id] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            if (needs(a)) {
                Matrix& ga = grad_buf(a.id);
                const Matrix& bv2 = val(b.id);
                for (size_t i = 0; i < ga.data.size(); ++i) {
                    ga.data[i] += g.data[i] * bv2.data[i];
                }
            }
            if (needs(b)) {
                Matrix& gb = grad_buf(b.id);
                const Matrix& av2 = val(a.id);
                for (size_t i = 0; i < gb.data.size(); ++i) {
                    gb.data[i] += g.data[i] * av2.data[i];
                }
            }
        };
    }
    return {id};
}

Val Tape::scale(Val a, double alpha) {
    Matrix out = val(a.id);
    for (double& v : out.data) {
        v *= alpha;
    }
    bool need = needs(a);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, a, id, alpha] {
            add_scaled_in_place(grad_buf(a.id), nodes_[static_cast<size_t>(id)].grad, alpha);
        };
    }
    return {id};
}

Val Tape::add_rowvec(Val a, Val rowv) {
    const Matrix& av = val(a.id);
    const Matrix& rv = val(rowv.id);
    shape_check(rv.rows == 1 && rv.cols == av.cols, "add_rowvec");
    Matrix out = av;
    for (int i = 0; i < out.rows; ++i) {
        double* orow = out.row_ptr(i);
        for (int j = 0; j < out.cols; ++j) {
            orow[j] += rv.at(0, j);
        }
    }
    bool need = needs(a) || needs(rowv);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, a, rowv, id] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            if (needs(a)) {
                add_in_place(grad_buf(a.id), g);
            }
            if (needs(rowv)) {
                Matrix& gr = grad_buf(rowv.id);
                for (int i = 0; i < g.rows; ++i) {
                    const double* grow = g.row_ptr(i);
                    for (int j = 0; j < g.cols; ++j) {
                        gr.at(0, j) += grow[j];
                    }
                }
            }
        };
    }
    return {id};
}

Val Tape::concat_cols(Val a, Val b) {
    const Matrix& av = val(a.id);
    const Matrix& bv = val(b.id);
    shape_check(av.rows == bv.rows, "concat_cols");
    Matrix out(av.rows, av.cols + bv.cols);
    for (int i = 0; i < av.rows; ++i) {
        double* orow = out.row_ptr(i);
        std::copy(av.row_ptr(i), av.row_ptr(i) + av.cols, orow);
        std::copy(bv.row_ptr(i), bv.row_ptr(i) + bv.cols, orow + av.cols);
    }
    bool need = needs(a) || needs(b);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        const int acols = av.cols;
        nodes_[static_cast<size_t>(id)].back = [this, a, b, id, acols] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            if (needs(a)) {
                Matrix& ga = grad_buf(a.id);
                for (int i = 0; i < g.rows; ++i) {
                    for (int j = 0; j < acols; ++j) {
                        ga.at(i, j) += g.at(i, j);
                    }
                }
            }
            if (needs(b)) {
                Matrix& gb = grad_buf(b.id);
                for (int i = 0; i < g.rows; ++i) {
                    for (int j = 0; j < gb.cols; ++j) {
                        gb.at(i, j) += g.at(i, acols + j);
                    }
                }
            }
        };
    }
    return {id};
}

Val Tape::gather_rows(Val a, std::vector<int> idx) {
    const Matrix& av = val(a.id);
    Matrix out(static_cast<int>(idx.size()), av.cols);
    for (size_t t = 0; t < idx.size(); ++t) {
        shape_check(idx[t] >= 0 && idx[t] < av.rows, "gather_rows");
        std::copy(av.row_ptr(idx[t]), av.row_ptr(idx[t]) + av.cols, out.row_ptr(static_cast<int>(t)));
    }
    bool need = needs(a);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, a, id, idx = std::move(idx)] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            Matrix& ga = grad_buf(a.id);
            for (size_t t = 0; t < idx.size(); ++t) {
                const double* grow = g.row_ptr(static_cast<int>(t));
                double* garow = ga.row_ptr(idx[t]);
                for (int j = 0; j < g.cols; ++j) {
                    garow[j] += grow[j];
                }
            }
        };
    }
    return {id};
}

Val Tape::slice_rows(Val a, int begin, int end) {
    const Matrix& av = val(a.id);
    shape_check(begin >= 0 && end >= begin && end <= av.rows, "slice_rows");
    Matrix out(end - begin, av.cols);
    std::copy(av.row_ptr(begin), av.row_ptr(begin) + static_cast<size_t>(end - begin) * av.cols,
              out.data.begin());
    bool need = needs(a);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, a, id, begin] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            Matrix& ga = grad_buf(a.id);
            for (int i = 0; i < g.rows; ++i) {
                const double* grow = g.row_ptr(i);
                double* garow = ga.row_ptr(begin + i);
                for (int j = 0; j < g.cols; ++j) {
                    garow[j] += grow[j];
                }
            }
        };
    }
    return {id};
}

Val Tape::vstack(const std::vector<Val>& blocks) {
    shape_check(!blocks.empty(), "vstack");
    int cols = val(blocks[0].id).cols;
    int rows = 0;
    bool need = false;
    for (Val b : blocks) {
        shape_check(val(b.id).cols == cols, "vstack");
        rows += val(b.id).rows;
        need = need || needs(b);
    }
    Matrix out(rows, cols);
    int at = 0;
    for (Val b : blocks) {
        const Matrix& bv = val(b.id);
        std::copy(bv.data.begin(), bv.data.end(), out.row_ptr(at));
        at += bv.rows;
    }
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, id, blocks] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            int at2 = 0;
            for (Val b : blocks) {
                const Matrix& bv = val(b.id);
                if (needs(b)) {
                    Matrix& gb = grad_buf(b.id);
                    for (int i = 0; i < bv.rows; ++i) {
                        const double* grow = g.row_ptr(at2 + i);
                        double* gbrow = gb.row_ptr(i);
                        for (int j = 0; j < g.cols; ++j) {
                            gbrow[j] += grow[j];
                        }
                    }
                }
                at2 += bv.rows;
            }
        };
    }
    return {id};
}

Val Tape::mean_rows(Val a) {
    const Matrix& av = val(a.id);
    shape_check(av.rows >= 1, "mean_rows");
    Matrix out(1, av.cols);
    for (int i = 0; i < av.rows; ++i) {
        const double* arow = av.row_ptr(i);
        for (int j = 0; j < av.cols; ++j) {
            out.at(0, j) += arow[j];
        }
    }
    for (int j = 0; j < av.cols; ++j) {
        out.at(0, j) /= av.rows;
    }
    bool need = needs(a);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        const double inv = 1.0 / av.rows;
        nodes_[static_cast<size_t>(id)].back = [this, a, id, inv] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            Matrix& ga = grad_buf(a.id);
            for (int i = 0; i < ga.rows; ++i) {
                double* garow = ga.row_ptr(i);
                for (int j = 0; j < ga.cols; ++j) {
                    garow[j] += inv * g.at(0, j);
                }
            }
        };
    }
    return {id};
}

Val Tape::sum_all(Val a) {
    const Matrix& av = val(a.id);
    Matrix out(1, 1);
    for (double v : av.data) {
        out.at(0, 0) += v;
    }
    bool need = needs(a);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, a, id] {
            double g = nodes_[static_cast<size_t>(id)].grad.at(0, 0);
            Matrix& ga = grad_buf(a.id);
            for (double& v : ga.data) {
                v += g;
            }
        };
    }
    return {id};
}

Val Tape::cell(Val a, int r, int c) {
    const Matrix& av = val(a.id);
    shape_check(r >= 0 && r < av.rows && c >= 0 && c < av.cols, "cell");
    Matrix out(1, 1);
    out.at(0, 0) = av.at(r, c);
    bool need = needs(a);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, a, id, r, c] {
            grad_buf(a.id).at(r, c) += nodes_[static_cast<size_t>(id)].grad.at(0, 0);
        };
    }
    return {id};
}

Val Tape::relu(Val a) {
    Matrix out = val(a.id);
    for (double& v : out.data) {
        v = v > 0 ? v : 0;
    }
    bool need = needs(a);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, a, id] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            const Matrix& x = val(a.id);
            Matrix& ga = grad_buf(a.id);
            for (size_t i = 0; i < ga.data.size(); ++i) {
                ga.data[i] += x.data[i] > 0 ? g.data[i] : 0;
            }
        };
    }
    return {id};
}

Val Tape::elu(Val a, double alpha) {
    Matrix out = val(a.id);
    for (double& v : out.data) {
        v = v > 0 ? v : alpha * (std::exp(v) - 1.0);
    }
    bool need = needs(a);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, a, id, alpha] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            const Matrix& x = val(a.id);
            const Matrix& y = nodes_[static_cast<size_t>(id)].value;
            Matrix& ga = grad_buf(a.id);
            for (size_t i = 0; i < ga.data.size(); ++i) {
                ga.data[i] += g.data[i] * (x.data[i] > 0 ? 1.0 : y.data[i] + alpha);
            }
        };
    }
    return {id};
}

Val Tape::leaky_relu(Val a, double slope) {
    Matrix out = val(a.id);
    for (double& v : out.data) {
        v = v > 0 ? v : slope * v;
    }
    bool need = needs(a);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, a, id, slope] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            const Matrix& x = val(a.id);
            Matrix& ga = grad_buf(a.id);
            for (size_t i = 0; i < ga.data.size(); ++i) {
                ga.data[i] += g.data[i] * (x.data[i] > 0 ? 1.0 : slope);
            }
        };
    }
    return {id};
}

Val Tape::sigmoid(Val a) {
    Matrix out = val(a.id);
    for (double& v : out.data) {
        v = 1.0 / (1.0 + std::exp(-v));
    }
    bool need = needs(a);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, a, id] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            const Matrix& y = nodes_[static_cast<size_t>(id)].value;
            Matrix& ga = grad_buf(a.id);
            for (size_t i = 0; i < ga.data.size(); ++i) {
                ga.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
            }
        };
    }
    return {id};
}

Val Tape::log(Val a) {
    Matrix out = val(a.id);
    for (double& v : out.data) {
        v = std::log(v);
    }
    bool need = needs(a);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, a, id] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            const Matrix& x = val(a.id);
            Matrix& ga = grad_buf(a.id);
            for (size_t i = 0; i < ga.data.size(); ++i) {
                ga.data[i] += g.data[i] / x.data[i];
            }
        };
    }
    return {id};
}

Val Tape::softmax_rows(Val a) {
    Matrix out = softmax_rows_value(val(a.id));
    bool need = needs(a);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, a, id] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            const Matrix& y = nodes_[static_cast<size_t>(id)].value;
            Matrix& ga = grad_buf(a.id);
            for (int i = 0; i < y.rows; ++i) {
                const double* yrow = y.row_ptr(i);
                const double* grow = g.row_ptr(i);
                double dot = 0;
                for (int j = 0; j < y.cols; ++j) {
                    dot += yrow[j] * grow[j];
                }
                double* garow = ga.row_ptr(i);
                for (int j = 0; j < y.cols; ++j) {
                    garow[j] += yrow[j] * (grow[j] - dot);
                }
            }
        };
    }
    return {id};
}

Val Tape::log_softmax_rows(Val a) {
    const Matrix& x = val(a.id);
    Matrix out(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        const double* row = x.row_ptr(i);
        double mx = *std::max_element(row, row + x.cols);
        double sum = 0;
        for (int j = 0; j < x.cols; ++j) {
            sum += std::exp(row[j] - mx);
        }
        const double lse = mx + std::log(sum);
        double* orow = out.row_ptr(i);
        for (int j = 0; j < x.cols; ++j) {
            orow[j] = row[j] - lse;
        }
    }
    bool need = needs(a);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        nodes_[static_cast<size_t>(id)].back = [this, a, id] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            const Matrix& y = nodes_[static_cast<size_t>(id)].value;  // log-probs
            Matrix& ga = grad_buf(a.id);
            for (int i = 0; i < y.rows; ++i) {
                const double* yrow = y.row_ptr(i);
                const double* grow = g.row_ptr(i);
                double gsum = 0;
                for (int j = 0; j < y.cols; ++j) {
                    gsum += grow[j];
                }
                double* garow = ga.row_ptr(i);
                for (int j = 0; j < y.cols; ++j) {
                    garow[j] += grow[j] - std::exp(yrow[j]) * gsum;
                }
            }
        };
    }
    return {id};
}

Val Tape::gat_attend(Val hw, Val s_src, Val s_dst, const Adjacency& adj, double leaky_slope) {
    const Matrix& H = val(hw.id);
    const Matrix& src = val(s_src.id);
    const Matrix& dst = val(s_dst.id);
    const int n = H.rows;
    shape_check(src.rows == n && src.cols == 1 && dst.rows == n && dst.cols == 1, "gat_attend");
    shape_check(static_cast<int>(adj.neighbors.size()) == n, "gat_attend adjacency");

    auto weights = std::make_shared<std::vector<std::vector<double>>>(static_cast<size_t>(n));
    auto pres = std::make_shared<std::vector<std::vector<double>>>(static_cast<size_t>(n));
    Matrix out(n, H.cols);
    for (int i = 0; i < n; ++i) {
        const auto& nb = adj.neighbors[static_cast<size_t>(i)];
        shape_check(!nb.empty(), "gat_attend empty neighborhood");
        auto& w = (*weights)[static_cast<size_t>(i)];
        auto& pre = (*pres)[static_cast<size_t>(i)];
        w.resize(nb.size());
        pre.resize(nb.size());
        double mx = -std::numeric_limits<double>::infinity();
        for (size_t t = 0; t < nb.size(); ++t) {
            double p = src.at(i, 0) + dst.at(nb[t], 0);
            pre[t] = p;
            double e = p > 0 ? p : leaky_slope * p;
            w[t] = e;
            mx = std::max(mx, e);
        }
        double sum = 0;
        for (double& e : w) {
            e = std::exp(e - mx);
            sum += e;
        }
        double* orow = out.row_ptr(i);
        for (size_t t = 0; t < nb.size(); ++t) {
            w[t] /= sum;
            const double* hrow = H.row_ptr(nb[t]);
            for (int j = 0; j < H.cols; ++j) {
                orow[j] += w[t] * hrow[j];
            }
        }
    }

    bool need = needs(hw) || needs(s_src) || needs(s_dst);
    int id = push(std::move(out), need, nullptr);
    if (need && grad_enabled_) {
        const Adjacency* adj_ptr = &adj;  // must outlive the tape
        nodes_[static_cast<size_t>(id)].back = [this, hw, s_src, s_dst, id, adj_ptr, weights, pres,
                                                leaky_slope] {
            const Matrix& g = nodes_[static_cast<size_t>(id)].grad;
            const Matrix& H2 = val(hw.id);
            const int d = H2.cols;
            Matrix* gH = needs(hw) ? &grad_buf(hw.id) : nullptr;
            Matrix* gsrc = needs(s_src) ? &grad_buf(s_src.id) : nullptr;
            Matrix* gdst = needs(s_dst) ? &grad_buf(s_dst.id) : nullptr;
            for (int i = 0; i < H2.rows; ++i) {
                const auto& nb = adj_ptr->neighbors[static_cast<size_t>(i)];
                const auto& w = (*weights)[static_cast<size_t>(i)];
                const auto& pre = (*pres)[static_cast<size_t>(i)];
                const double* grow = g.row_ptr(i);
                std::vector<double> dw(nb.size());
                double wd = 0;
                for (size_t t = 0; t < nb.size(); ++t) {
                    const double* hrow = H2.row_ptr(nb[t]);
                    double dot = 0;
                    for (int j = 0; j < d; ++j) {
                        dot += grow[j] * hrow[j];
                    }
                    dw[t] = dot;
                    wd += w[t] * dot;
                    if (gH != nullptr) {
                        double* ghrow = gH->row_ptr(nb[t]);
                        for (int j = 0; j < d; ++j) {
                            ghrow[j] += w[t] * grow[j];
                        }
                    }
                }
                if (gsrc == nullptr && gdst == nullptr) {
                    continue;
                }
                for (size_t t = 0; t < nb.size(); ++t) {
                    double de = w[t] * (dw[t] - wd);
                    double dpre = de * (pre[t] > 0 ? 1.0 : leaky_slope);
                    if (gsrc != nullptr) {
                        gsrc->at(i, 0) += dpre;
                    }
                    if (gdst != nullptr) {
                        gdst->at(nb[t], 0) += dpre;
                    }
                }
            }
        };
    }
    return {id};
}

int categorical_sample(const Matrix& probs_row, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    double u = dist(rng);
    double cum = 0;
    for (int j = 0; j < probs_row.cols; ++j) {
        cum += probs_row.at(0, j);
        if (u < cum) {
            return j;
        }
    }
    return probs_row.cols - 1;
}

int argmax_row(const Matrix& probs_row) {
    int best = 0;
    for (int j = 1; j < probs_row.cols; ++j) {
        if (probs_row.at(0, j) > probs_row.at(0, best)) {
            best = j;
        }
    }
    return best;
}

Matrix xavier_uniform(int rows, int cols, std::mt19937_64& rng) {
    double limit = std::sqrt(6.0 / (rows + cols));
    return uniform_init(rows, cols, limit, rng);
}

Matrix uniform_init(int rows, int cols, double limit, std::mt19937_64& rng) {
    Matrix m(rows, cols);
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& v : m.data) {
        v = dist(rng);
    }
    return m;
}

void Adam::step(const std::vector<Parameter*>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (Parameter* p : params) {
        if (!p->has_grad()) {
            continue;
        }
        if (p->adam_m.empty()) {
            p->adam_m = Matrix::zeros(p->value.rows, p->value.cols);
            p->adam_v = Matrix::zeros(p->value.rows, p->value.cols);
        }
        for (size_t i = 0; i < p->value.data.size(); ++i) {
            const double g = p->grad.data[i];
            double& m = p->adam_m.data[i];
            double& v = p->adam_v.data[i];
            m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
            v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            p->value.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        p->zero_grad();
    }
}

}  // namespace ldsim::nn
