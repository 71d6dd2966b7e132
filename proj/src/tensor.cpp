#include "cohhgn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cohhgn {

namespace {

thread_local Tape* g_active_tape = nullptr;

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

std::shared_ptr<TensorNode> make_node(std::vector<int> shape) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->data.assign(shape_numel(node->shape), 0.0);
    return node;
}

// Wires parents/backward and records on the active tape when any input
// requires a gradient.
Tensor finish_op(std::shared_ptr<TensorNode> out,
                 std::vector<std::shared_ptr<TensorNode>> parents,
                 std::function<void()> backward) {
    bool needs = false;
    for (const auto& p : parents)
        if (p->requires_grad) needs = true;
    if (needs) {
        out->requires_grad = true;
        // without an active tape the op can never be backpropagated, so the
        // closure (which holds a shared_ptr to `out` itself) must not be
        // stored or it would keep the node alive forever
        if (g_active_tape != nullptr) {
            out->parents = std::move(parents);
            out->backward = std::move(backward);
            g_active_tape->record(out);
        }
    }
    return Tensor(out);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

void TensorNode::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

Tensor Tensor::zeros(const std::vector<int>& shape, bool requires_grad) {
    auto node = make_node(shape);
    node->requires_grad = requires_grad;
    return Tensor(node);
}

Tensor Tensor::from(const std::vector<int>& shape, std::vector<double> data,
                    bool requires_grad) {
    if (shape_numel(shape) != data.size())
        throw ShapeError("Tensor::from: " + shape_str(shape) + " does not hold " +
                         std::to_string(data.size()) + " values");
    auto node = std::make_shared<TensorNode>();
    node->shape = shape;
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(node);
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

int Tensor::rows() const {
    return node_->shape.empty() ? 0 : node_->shape[0];
}

int Tensor::cols() const {
    if (node_->shape.size() != 2) throw ShapeError("cols() on rank-" + std::to_string(rank()) + " tensor");
    return node_->shape[1];
}

double& Tensor::at(int r, int c) {
    return node_->data[static_cast<std::size_t>(r) * node_->shape[1] + c];
}

double Tensor::at(int r, int c) const {
    return node_->data[static_cast<std::size_t>(r) * node_->shape[1] + c];
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on tensor of size " + std::to_string(size()));
    return node_->data[0];
}

void Tensor::zero_grad() {
    node_->grad.assign(node_->data.size(), 0.0);
}

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    for (auto& n : nodes_) n->ensure_grad();
    for (auto& n : nodes_)
        for (auto& p : n->parents) p->ensure_grad();
    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if ((*it)->backward) (*it)->backward();
    }
    clear();
}

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = prev_; }

Tape* active_tape() { return g_active_tape; }

double NormalSampler::uniform01() {
    return (engine_() >> 11) * 0x1.0p-53;
}

double NormalSampler::sample(double mean, double stddev) {
    if (has_cached_) {
        has_cached_ = false;
        return mean + stddev * cached_;
    }
    double u1 = 0.0, u2 = 0.0;
    do {
        u1 = uniform01();
    } while (u1 <= 0.0);
    u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double z0 = r * std::cos(2.0 * M_PI * u2);
    cached_ = r * std::sin(2.0 * M_PI * u2);
    has_cached_ = true;
    return mean + stddev * z0;
}

Tensor he_init(const std::vector<int>& shape, std::uint64_t seed) {
    int fan_in = shape.size() == 2 ? shape[1] : shape[0];
    double stddev = std::sqrt(2.0 / fan_in);
    NormalSampler rng(seed);
    auto node = make_node(shape);
    for (auto& v : node->data) v = rng.sample(0.0, stddev);
    node->requires_grad = true;
    return Tensor(node);
}

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    auto out = make_node(a.shape());
    for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a.data()[i] + b.data()[i];
    auto an = a.node(), bn = b.node(), on = out;
    return finish_op(out, {an, bn}, [an, bn, on] {
        for (std::size_t i = 0; i < on->size(); ++i) {
            if (an->requires_grad) an->grad[i] += on->grad[i];
            if (bn->requires_grad) bn->grad[i] += on->grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    auto out = make_node(a.shape());
    for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a.data()[i] - b.data()[i];
    auto an = a.node(), bn = b.node(), on = out;
    return finish_op(out, {an, bn}, [an, bn, on] {
        for (std::size_t i = 0; i < on->size(); ++i) {
            if (an->requires_grad) an->grad[i] += on->grad[i];
            if (bn->requires_grad) bn->grad[i] -= on->grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    auto out = make_node(a.shape());
    for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a.data()[i] * b.data()[i];
    auto an = a.node(), bn = b.node(), on = out;
    return finish_op(out, {an, bn}, [an, bn, on] {
        for (std::size_t i = 0; i < on->size(); ++i) {
            if (an->requires_grad) an->grad[i] += on->grad[i] * bn->data[i];
            if (bn->requires_grad) bn->grad[i] += on->grad[i] * an->data[i];
        }
    });
}

Tensor div(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "div");
    auto out = make_node(a.shape());
    for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a.data()[i] / b.data()[i];
    auto an = a.node(), bn = b.node(), on = out;
    return finish_op(out, {an, bn}, [an, bn, on] {
        for (std::size_t i = 0; i < on->size(); ++i) {
            if (an->requires_grad) an->grad[i] += on->grad[i] / bn->data[i];
            if (bn->requires_grad)
                bn->grad[i] -= on->grad[i] * an->data[i] / (bn->data[i] * bn->data[i]);
        }
    });
}

Tensor scale(const Tensor& a, double c) {
    auto out = make_node(a.shape());
    for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a.data()[i] * c;
    auto an = a.node(), on = out;
    return finish_op(out, {an}, [an, on, c] {
        for (std::size_t i = 0; i < on->size(); ++i) an->grad[i] += on->grad[i] * c;
    });
}

Tensor add_scalar(const Tensor& a, double c) {
    auto out = make_node(a.shape());
    for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a.data()[i] + c;
    auto an = a.node(), on = out;
    return finish_op(out, {an}, [an, on] {
        for (std::size_t i = 0; i < on->size(); ++i) an->grad[i] += on->grad[i];
    });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "maximum");
    auto out = make_node(a.shape());
    for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = std::max(a.data()[i], b.data()[i]);
    auto an = a.node(), bn = b.node(), on = out;
    return finish_op(out, {an, bn}, [an, bn, on] {
        // ties route the gradient to the first argument
        for (std::size_t i = 0; i < on->size(); ++i) {
            if (an->data[i] >= bn->data[i]) {
                if (an->requires_grad) an->grad[i] += on->grad[i];
            } else if (bn->requires_grad) {
                bn->grad[i] += on->grad[i];
            }
        }
    });
}

// ---- linear algebra ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
        throw ShapeError("matmul: incompatible " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    int m = a.rows(), k = a.cols(), n = b.cols();
    auto out = make_node({m, n});
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            double av = a.at(i, p);
            if (av == 0.0) continue;
            for (int j = 0; j < n; ++j) out->data[static_cast<std::size_t>(i) * n + j] += av * b.at(p, j);
        }
    auto an = a.node(), bn = b.node(), on = out;
    return finish_op(out, {an, bn}, [an, bn, on, m, k, n] {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                double g = on->grad[static_cast<std::size_t>(i) * n + j];
                if (g == 0.0) continue;
                for (int p = 0; p < k; ++p) {
                    if (an->requires_grad)
                        an->grad[static_cast<std::size_t>(i) * k + p] += g * bn->data[static_cast<std::size_t>(p) * n + j];
                    if (bn->requires_grad)
                        bn->grad[static_cast<std::size_t>(p) * n + j] += g * an->data[static_cast<std::size_t>(i) * k + p];
                }
            }
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols())
        throw ShapeError("matmul_nt: incompatible " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()) + "^T");
    int m = a.rows(), k = a.cols(), n = b.rows();
    auto out = make_node({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a.at(i, p) * b.at(j, p);
            out->data[static_cast<std::size_t>(i) * n + j] = acc;
        }
    auto an = a.node(), bn = b.node(), on = out;
    return finish_op(out, {an, bn}, [an, bn, on, m, k, n] {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                double g = on->grad[static_cast<std::size_t>(i) * n + j];
                if (g == 0.0) continue;
                for (int p = 0; p < k; ++p) {
                    if (an->requires_grad)
                        an->grad[static_cast<std::size_t>(i) * k + p] += g * bn->data[static_cast<std::size_t>(j) * k + p];
                    if (bn->requires_grad)
                        bn->grad[static_cast<std::size_t>(j) * k + p] += g * an->data[static_cast<std::size_t>(i) * k + p];
                }
            }
    });
}

Tensor matvec(const Tensor& a, const Tensor& x) {
    if (a.rank() != 2 || x.rank() != 1 || a.cols() != x.rows())
        throw ShapeError("matvec: incompatible " + shape_str(a.shape()) + " x " +
                         shape_str(x.shape()));
    int m = a.rows(), n = a.cols();
    auto out = make_node({m});
    for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += a.at(i, j) * x.at(j);
        out->data[i] = acc;
    }
    auto an = a.node(), xn = x.node(), on = out;
    return finish_op(out, {an, xn}, [an, xn, on, m, n] {
        for (int i = 0; i < m; ++i) {
            double g = on->grad[i];
            if (g == 0.0) continue;
            for (int j = 0; j < n; ++j) {
                if (an->requires_grad) an->grad[static_cast<std::size_t>(i) * n + j] += g * xn->data[j];
                if (xn->requires_grad) xn->grad[j] += g * an->data[static_cast<std::size_t>(i) * n + j];
            }
        }
    });
}

Tensor vecmat(const Tensor& x, const Tensor& a) {
    if (x.rank() != 1 || a.rank() != 2 || x.rows() != a.rows())
        throw ShapeError("vecmat: incompatible " + shape_str(x.shape()) + " x " +
                         shape_str(a.shape()));
    int m = a.rows(), n = a.cols();
    auto out = make_node({n});
    for (int i = 0; i < m; ++i) {
        double xv = x.at(i);
        if (xv == 0.0) continue;
        for (int j = 0; j < n; ++j) out->data[j] += xv * a.at(i, j);
    }
    auto an = a.node(), xn = x.node(), on = out;
    return finish_op(out, {xn, an}, [an, xn, on, m, n] {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                double g = on->grad[j];
                if (g == 0.0) continue;
                if (xn->requires_grad) xn->grad[i] += g * an->data[static_cast<std::size_t>(i) * n + j];
                if (an->requires_grad) an->grad[static_cast<std::size_t>(i) * n + j] += g * xn->data[i];
            }
    });
}

Tensor linear(const Tensor& x, const Tensor& w) { return matmul_nt(x, w); }

Tensor dot(const Tensor& a, const Tensor& b) {
    if (a.rank() != 1 || b.rank() != 1) throw ShapeError("dot: rank-1 tensors required");
    check_same_shape(a, b, "dot");
    auto out = make_node({1});
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.data()[i] * b.data()[i];
    out->data[0] = acc;
    auto an = a.node(), bn = b.node(), on = out;
    return finish_op(out, {an, bn}, [an, bn, on] {
        double g = on->grad[0];
        for (std::size_t i = 0; i < an->size(); ++i) {
            if (an->requires_grad) an->grad[i] += g * bn->data[i];
            if (bn->requires_grad) bn->grad[i] += g * an->data[i];
        }
    });
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
    if (m.rank() != 2 || v.rank() != 1 || m.cols() != v.rows())
        throw ShapeError("add_rowvec: incompatible " + shape_str(m.shape()) + " + " +
                         shape_str(v.shape()));
    int r = m.rows(), c = m.cols();
    auto out = make_node({r, c});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out->data[static_cast<std::size_t>(i) * c + j] = m.at(i, j) + v.at(j);
    auto mn = m.node(), vn = v.node(), on = out;
    return finish_op(out, {mn, vn}, [mn, vn, on, r, c] {
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) {
                double g = on->grad[static_cast<std::size_t>(i) * c + j];
                if (mn->requires_grad) mn->grad[static_cast<std::size_t>(i) * c + j] += g;
                if (vn->requires_grad) vn->grad[j] += g;
            }
    });
}

Tensor mul_rowvec(const Tensor& m, const Tensor& v) {
    if (m.rank() != 2 || v.rank() != 1 || m.cols() != v.rows())
        throw ShapeError("mul_rowvec: incompatible " + shape_str(m.shape()) + " * " +
                         shape_str(v.shape()));
    int r = m.rows(), c = m.cols();
    auto out = make_node({r, c});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out->data[static_cast<std::size_t>(i) * c + j] = m.at(i, j) * v.at(j);
    auto mn = m.node(), vn = v.node(), on = out;
    return finish_op(out, {mn, vn}, [mn, vn, on, r, c] {
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) {
                double g = on->grad[static_cast<std::size_t>(i) * c + j];
                if (mn->requires_grad) mn->grad[static_cast<std::size_t>(i) * c + j] += g * vn->data[j];
                if (vn->requires_grad) vn->grad[j] += g * mn->data[static_cast<std::size_t>(i) * c + j];
            }
    });
}

Tensor concat_vec(const Tensor& a, const Tensor& b) {
    if (a.rank() != 1 || b.rank() != 1) throw ShapeError("concat_vec: rank-1 tensors required");
    int na = a.rows(), nb = b.rows();
    auto out = make_node({na + nb});
    std::copy(a.data().begin(), a.data().end(), out->data.begin());
    std::copy(b.data().begin(), b.data().end(), out->data.begin() + na);
    auto an = a.node(), bn = b.node(), on = out;
    return finish_op(out, {an, bn}, [an, bn, on, na, nb] {
        if (an->requires_grad)
            for (int i = 0; i < na; ++i) an->grad[i] += on->grad[i];
        if (bn->requires_grad)
            for (int i = 0; i < nb; ++i) bn->grad[i] += on->grad[na + i];
    });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.rows() != b.rows())
        throw ShapeError("concat_cols: incompatible " + shape_str(a.shape()) + " ; " +
                         shape_str(b.shape()));
    int r = a.rows(), ca = a.cols(), cb = b.cols();
    auto out = make_node({r, ca + cb});
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < ca; ++j) out->data[static_cast<std::size_t>(i) * (ca + cb) + j] = a.at(i, j);
        for (int j = 0; j < cb; ++j) out->data[static_cast<std::size_t>(i) * (ca + cb) + ca + j] = b.at(i, j);
    }
    auto an = a.node(), bn = b.node(), on = out;
    return finish_op(out, {an, bn}, [an, bn, on, r, ca, cb] {
        for (int i = 0; i < r; ++i) {
            if (an->requires_grad)
                for (int j = 0; j < ca; ++j)
                    an->grad[static_cast<std::size_t>(i) * ca + j] += on->grad[static_cast<std::size_t>(i) * (ca + cb) + j];
            if (bn->requires_grad)
                for (int j = 0; j < cb; ++j)
                    bn->grad[static_cast<std::size_t>(i) * cb + j] += on->grad[static_cast<std::size_t>(i) * (ca + cb) + ca + j];
        }
    });
}

Tensor cols(const Tensor& m, int c0, int c1) {
    if (m.rank() != 2 || c0 < 0 || c1 > m.cols() || c0 >= c1)
        throw ShapeError("cols: bad slice [" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") of " + shape_str(m.shape()));
    int r = m.rows(), c = m.cols(), w = c1 - c0;
    auto out = make_node({r, w});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < w; ++j) out->data[static_cast<std::size_t>(i) * w + j] = m.at(i, c0 + j);
    auto mn = m.node(), on = out;
    return finish_op(out, {mn}, [mn, on, r, c, c0, w] {
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < w; ++j)
                mn->grad[static_cast<std::size_t>(i) * c + c0 + j] += on->grad[static_cast<std::size_t>(i) * w + j];
    });
}

Tensor row(const Tensor& m, int r) {
    if (m.rank() != 2 || r < 0 || r >= m.rows())
        throw ShapeError("row: index " + std::to_string(r) + " out of " + shape_str(m.shape()));
    int c = m.cols();
    auto out = make_node({c});
    for (int j = 0; j < c; ++j) out->data[j] = m.at(r, j);
    auto mn = m.node(), on = out;
    return finish_op(out, {mn}, [mn, on, r, c] {
        for (int j = 0; j < c; ++j) mn->grad[static_cast<std::size_t>(r) * c + j] += on->grad[j];
    });
}

Tensor col(const Tensor& m, int c) {
    if (m.rank() != 2 || c < 0 || c >= m.cols())
        throw ShapeError("col: index " + std::to_string(c) + " out of " + shape_str(m.shape()));
    int r = m.rows(), w = m.cols();
    auto out = make_node({r});
    for (int i = 0; i < r; ++i) out->data[i] = m.at(i, c);
    auto mn = m.node(), on = out;
    return finish_op(out, {mn}, [mn, on, r, w, c] {
        for (int i = 0; i < r; ++i) mn->grad[static_cast<std::size_t>(i) * w + c] += on->grad[i];
    });
}

Tensor rows(const Tensor& table, const std::vector<int>& indices) {
    if (table.rank() != 2) throw ShapeError("rows: rank-2 table required");
    int n = table.rows(), d = table.cols(), k = static_cast<int>(indices.size());
    for (int idx : indices)
        if (idx < 0 || idx >= n)
            throw DomainError("rows: index " + std::to_string(idx) + " out of table " +
                              shape_str(table.shape()));
    auto out = make_node({k, d});
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < d; ++j) out->data[static_cast<std::size_t>(i) * d + j] = table.at(indices[i], j);
    auto tn = table.node(), on = out;
    auto idx = indices;
    return finish_op(out, {tn}, [tn, on, idx, d] {
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (int j = 0; j < d; ++j)
                tn->grad[static_cast<std::size_t>(idx[i]) * d + j] += on->grad[i * d + j];
    });
}

Tensor gather_vec(const Tensor& v, const std::vector<int>& indices) {
    if (v.rank() != 1) throw ShapeError("gather_vec: rank-1 tensor required");
    int n = v.rows();
    for (int idx : indices)
        if (idx < 0 || idx >= n) throw DomainError("gather_vec: index out of range");
    auto out = make_node({static_cast<int>(indices.size())});
    for (std::size_t i = 0; i < indices.size(); ++i) out->data[i] = v.at(indices[i]);
    auto vn = v.node(), on = out;
    auto idx = indices;
    return finish_op(out, {vn}, [vn, on, idx] {
        for (std::size_t i = 0; i < idx.size(); ++i) vn->grad[idx[i]] += on->grad[i];
    });
}

Tensor mean_rows(const Tensor& m) {
    if (m.rank() != 2) throw ShapeError("mean_rows: rank-2 tensor required");
    int r = m.rows(), c = m.cols();
    auto out = make_node({c});
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out->data[j] += m.at(i, j);
    for (int j = 0; j < c; ++j) out->data[j] /= r;
    auto mn = m.node(), on = out;
    return finish_op(out, {mn}, [mn, on, r, c] {
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) mn->grad[static_cast<std::size_t>(i) * c + j] += on->grad[j] / r;
    });
}

Tensor sum(const Tensor& a) {
    auto out = make_node({1});
    out->data[0] = std::accumulate(a.data().begin(), a.data().end(), 0.0);
    auto an = a.node(), on = out;
    return finish_op(out, {an}, [an, on] {
        for (std::size_t i = 0; i < an->size(); ++i) an->grad[i] += on->grad[0];
    });
}

Tensor outer(const Tensor& u, const Tensor& v) {
    if (u.rank() != 1 || v.rank() != 1) throw ShapeError("outer: rank-1 tensors required");
    int m = u.rows(), n = v.rows();
    auto out = make_node({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out->data[static_cast<std::size_t>(i) * n + j] = u.at(i) * v.at(j);
    auto un = u.node(), vn = v.node(), on = out;
    return finish_op(out, {un, vn}, [un, vn, on, m, n] {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                double g = on->grad[static_cast<std::size_t>(i) * n + j];
                if (un->requires_grad) un->grad[i] += g * vn->data[j];
                if (vn->requires_grad) vn->grad[j] += g * un->data[i];
            }
    });
}

// ---- nonlinearities ----

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd bwd) {
    auto out = make_node(a.shape());
    for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = fwd(a.data()[i]);
    auto an = a.node(), on = out;
    return finish_op(out, {an}, [an, on, bwd] {
        for (std::size_t i = 0; i < on->size(); ++i)
            an->grad[i] += on->grad[i] * bwd(an->data[i], on->data[i]);
    });
}

}  // namespace

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_t(const Tensor& a) {
    return unary_op(
        a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
    return unary_op(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    return unary_op(
        a, [slope](double x) { return x > 0.0 ? x : slope * x; },
        [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor exp_t(const Tensor& a) {
    return unary_op(
        a, [](double x) { return std::exp(x); },
        [](double, double y) { return y; });
}

Tensor log_t(const Tensor& a) {
    return unary_op(
        a, [](double x) { return std::log(x); },
        [](double x, double) { return 1.0 / x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    return unary_op(
        a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
        [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

// ---- softmax family ----

namespace {

// Stable softmax over data[lo, hi); writes into out.
void softmax_span(const std::vector<double>& in, std::vector<double>& out,
                  std::size_t lo, std::size_t hi) {
    double mx = in[lo];
    for (std::size_t i = lo; i < hi; ++i) mx = std::max(mx, in[i]);
    double denom = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        out[i] = std::exp(in[i] - mx);
        denom += out[i];
    }
    for (std::size_t i = lo; i < hi; ++i) out[i] /= denom;
}

// d(softmax)/dx within [lo, hi): dx_i = y_i * (g_i - sum_j g_j y_j)
void softmax_span_backward(const std::vector<double>& y, const std::vector<double>& gout,
                           std::vector<double>& gin, std::size_t lo, std::size_t hi) {
    double inner = 0.0;
    for (std::size_t i = lo; i < hi; ++i) inner += gout[i] * y[i];
    for (std::size_t i = lo; i < hi; ++i) gin[i] += y[i] * (gout[i] - inner);
}

}  // namespace

Tensor softmax_vec(const Tensor& v) {
    if (v.rank() != 1) throw ShapeError("softmax_vec: rank-1 tensor required");
    auto out = make_node(v.shape());
    softmax_span(v.data(), out->data, 0, v.size());
    auto vn = v.node(), on = out;
    return finish_op(out, {vn}, [vn, on] {
        softmax_span_backward(on->data, on->grad, vn->grad, 0, on->size());
    });
}

Tensor softmax_rows(const Tensor& m) {
    if (m.rank() != 2) throw ShapeError("softmax_rows: rank-2 tensor required");
    int r = m.rows(), c = m.cols();
    auto out = make_node(m.shape());
    for (int i = 0; i < r; ++i)
        softmax_span(m.data(), out->data, static_cast<std::size_t>(i) * c, static_cast<std::size_t>(i + 1) * c);
    auto mn = m.node(), on = out;
    return finish_op(out, {mn}, [mn, on, r, c] {
        for (int i = 0; i < r; ++i)
            softmax_span_backward(on->data, on->grad, mn->grad,
                                  static_cast<std::size_t>(i) * c, static_cast<std::size_t>(i + 1) * c);
    });
}

Tensor segment_softmax(const Tensor& scores, const std::vector<int>& segments, int n_segments) {
    if (scores.rank() != 1 || scores.size() != segments.size())
        throw ShapeError("segment_softmax: scores/segments length mismatch");
    for (std::size_t i = 1; i < segments.size(); ++i)
        if (segments[i] < segments[i - 1])
            throw DomainError("segment_softmax: segment ids must be nondecreasing");
    (void)n_segments;
    auto out = make_node(scores.shape());
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    std::size_t lo = 0;
    while (lo < segments.size()) {
        std::size_t hi = lo;
        while (hi < segments.size() && segments[hi] == segments[lo]) ++hi;
        spans.emplace_back(lo, hi);
        softmax_span(scores.data(), out->data, lo, hi);
        lo = hi;
    }
    auto sn = scores.node(), on = out;
    return finish_op(out, {sn}, [sn, on, spans] {
        for (auto [a, b] : spans) softmax_span_backward(on->data, on->grad, sn->grad, a, b);
    });
}

Tensor segment_weighted_sum(const Tensor& w, const Tensor& values,
                            const std::vector<int>& segments, int n_segments) {
    if (w.rank() != 1 || values.rank() != 2 || w.size() != values.size() / values.cols() ||
        w.size() != segments.size())
        throw ShapeError("segment_weighted_sum: incompatible " + shape_str(w.shape()) + " / " +
                         shape_str(values.shape()));
    int d = values.cols();
    auto out = make_node({n_segments, d});
    for (std::size_t e = 0; e < segments.size(); ++e) {
        int s = segments[e];
        if (s < 0 || s >= n_segments) throw DomainError("segment_weighted_sum: segment id out of range");
        double we = w.at(static_cast<int>(e));
        for (int j = 0; j < d; ++j)
            out->data[static_cast<std::size_t>(s) * d + j] += we * values.at(static_cast<int>(e), j);
    }
    auto wn = w.node(), vn = values.node(), on = out;
    auto seg = segments;
    return finish_op(out, {wn, vn}, [wn, vn, on, seg, d] {
        for (std::size_t e = 0; e < seg.size(); ++e) {
            std::size_t o = static_cast<std::size_t>(seg[e]) * d;
            if (wn->requires_grad) {
                double acc = 0.0;
                for (int j = 0; j < d; ++j) acc += on->grad[o + j] * vn->data[e * d + j];
                wn->grad[e] += acc;
            }
            if (vn->requires_grad)
                for (int j = 0; j < d; ++j) vn->grad[e * d + j] += on->grad[o + j] * wn->data[e];
        }
    });
}

Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng, bool training) {
    if (!training || rate <= 0.0) return a;
    if (rate >= 1.0) throw ConfigError("dropout: rate must be < 1");
    double keep = 1.0 - rate;
    auto mask = std::make_shared<std::vector<double>>(a.size());
    for (auto& m : *mask) {
        double u = (rng() >> 11) * 0x1.0p-53;
        m = u < rate ? 0.0 : 1.0 / keep;  // inverted scaling keeps expectation
    }
    auto out = make_node(a.shape());
    for (std::size_t i = 0; i < out->size(); ++i) out->data[i] = a.data()[i] * (*mask)[i];
    auto an = a.node(), on = out;
    return finish_op(out, {an}, [an, on, mask] {
        for (std::size_t i = 0; i < on->size(); ++i) an->grad[i] += on->grad[i] * (*mask)[i];
    });
}

}  // namespace cohhgn
