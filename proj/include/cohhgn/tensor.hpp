#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "cohhgn/errors.hpp"

namespace cohhgn {

// Dense 64-bit float tensor (rank 1 or 2) with reverse-mode autodiff.
// Ops record onto the active Tape when any input requires a gradient.

struct TensorNode {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized on demand, same length as data
    bool requires_grad = false;
    std::function<void()> backward;  // empty for leaves
    std::vector<std::shared_ptr<TensorNode>> parents;

    std::size_t size() const { return data.size(); }
    void ensure_grad();
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor zeros(const std::vector<int>& shape, bool requires_grad = false);
    static Tensor from(const std::vector<int>& shape, std::vector<double> data,
                       bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int rows() const;
    int cols() const;
    std::size_t size() const { return node_->data.size(); }

    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }
    std::vector<double>& grad() { return node_->grad; }
    const std::vector<double>& grad() const { return node_->grad; }

    double& at(int i) { return node_->data[static_cast<std::size_t>(i)]; }
    double at(int i) const { return node_->data[static_cast<std::size_t>(i)]; }
    double& at(int r, int c);
    double at(int r, int c) const;
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool b) { node_->requires_grad = b; }
    void zero_grad();

    std::shared_ptr<TensorNode> node() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

// Records op nodes in creation order (a topological order by construction).
class Tape {
public:
    ~Tape() { clear(); }

    void record(std::shared_ptr<TensorNode> node) { nodes_.push_back(std::move(node)); }
    std::size_t size() const { return nodes_.size(); }

    // Each backward closure holds a shared_ptr to its own node, so the
    // references must be severed or recorded nodes leak.
    void clear() {
        for (auto& n : nodes_) {
            n->backward = nullptr;
            n->parents.clear();
        }
        nodes_.clear();
    }

    // Seeds d(loss)/d(loss)=1 and runs every recorded backward rule in
    // reverse order; gradients accumulate additively across fan-out.
    // The tape is cleared afterwards.
    void backward(const Tensor& loss);

private:
    std::vector<std::shared_ptr<TensorNode>> nodes_;
};

// Scoped activation of a tape; ops record while one is active.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

Tape* active_tape();

// Deterministic normal sampler (Box-Muller over mt19937_64); the standard
// library normal_distribution is implementation-defined, this one is portable.
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}
    double sample(double mean, double stddev);
    double uniform01();  // in [0, 1)

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

// He initialization: i.i.d. normal(0, sqrt(2/fan_in)); fan_in is the input
// dimension (cols for matrices, the length for vectors).
Tensor he_init(const std::vector<int>& shape, std::uint64_t seed);

// ---- forward ops (each records a backward rule when needed) ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor div(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor maximum(const Tensor& a, const Tensor& b);

Tensor matmul(const Tensor& a, const Tensor& b);     // (m,k)x(k,n)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // (m,k)x(n,k)^T
Tensor matvec(const Tensor& a, const Tensor& x);     // (m,n)x(n)
Tensor vecmat(const Tensor& x, const Tensor& a);     // (m)x(m,n)
Tensor linear(const Tensor& x, const Tensor& w);     // x(m,k) * w(n,k)^T
Tensor dot(const Tensor& a, const Tensor& b);        // (n).(n) -> scalar

Tensor add_rowvec(const Tensor& m, const Tensor& v);
Tensor mul_rowvec(const Tensor& m, const Tensor& v);

Tensor concat_vec(const Tensor& a, const Tensor& b);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor cols(const Tensor& m, int c0, int c1);  // column slice [c0, c1)
Tensor row(const Tensor& m, int r);            // single row as a vector
Tensor col(const Tensor& m, int c);            // single column as a vector

Tensor rows(const Tensor& table, const std::vector<int>& indices);  // embedding lookup
Tensor gather_vec(const Tensor& v, const std::vector<int>& indices);
Tensor mean_rows(const Tensor& m);
Tensor sum(const Tensor& a);
Tensor outer(const Tensor& u, const Tensor& v);

Tensor sigmoid(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor softmax_vec(const Tensor& v);
Tensor softmax_rows(const Tensor& m);
// Softmax within contiguous segments; `segments` maps each entry to its
// segment id, entries of a segment must be adjacent.
Tensor segment_softmax(const Tensor& scores, const std::vector<int>& segments, int n_segments);
// out[s] = sum over entries e of segment s of w[e] * values[e, :]; empty
// segments produce zero rows.
Tensor segment_weighted_sum(const Tensor& w, const Tensor& values,
                            const std::vector<int>& segments, int n_segments);

Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng, bool training);

std::string shape_str(const std::vector<int>& shape);

}  // namespace cohhgn
