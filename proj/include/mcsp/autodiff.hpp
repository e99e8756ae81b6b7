#pragma once

#include "mcsp/matrix.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace mcsp::ad {

using mcsp::Matrix;

// Reverse-mode autodiff over dense matrices. Graphs are built dynamically:
// each operation allocates a node holding its value and a closure that
// scatters the node's cotangent into its parents. Leaves created with
// requires_grad survive across steps (parameters); everything else is
// per-step and freed when the last Var handle drops.
struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool grad_ready = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void accumulate(const Matrix& g) {
        if (!grad_ready) {
            grad = g;
            grad_ready = true;
        } else {
            grad += g;
        }
    }
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Var leaf(Matrix value, bool requires_grad);

    bool valid() const { return node_ != nullptr; }
    const Matrix& value() const { return node_->value; }
    // 1x1 convenience accessor.
    double scalar() const;

    bool requires_grad() const { return node_ && node_->requires_grad; }
    const Matrix& grad() const;
    bool has_grad() const { return node_ && node_->grad_ready; }
    void clear_grad() {
        if (node_) {
            node_->grad_ready = false;
            node_->grad.resize(0, 0);
        }
    }

    // Reverse pass seeded with dL/droot = seed. The no-argument overload
    // requires a 1x1 root and seeds with 1.
    void backward() const;
    void backward(const Matrix& seed) const;

    // Overwrite a leaf's value in place (optimizer updates).
    void set_value(const Matrix& v) { node_->value = v; }
    Matrix& mutable_value() { return node_->value; }

    std::shared_ptr<Node> node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

Var constant(Matrix value);
Var constant_scalar(double value);
Var parameter(Matrix value);

// ---- elementwise / scalar ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var cmul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
// s is 1x1; result = s * a.
Var smul(const Var& a, const Var& s);
Var relu(const Var& a);
// log(max(a, floor)); entries at the floor get zero gradient. When
// clamp_counter is set it is incremented once per clamped entry.
Var log_clamped(const Var& a, double floor = 1e-12, long* clamp_counter = nullptr);

// ---- linear algebra ----
Var matmul(const Var& a, const Var& b);
// a * b^T without materializing the transpose.
Var matmul_nt(const Var& a, const Var& b);
Var transpose(const Var& a);
// x [K x in] * w [in x out] + b [1 x out] broadcast over rows.
Var linear(const Var& x, const Var& w, const Var& b);

// ---- reductions / shape ----
Var row_sum(const Var& a);   // [n x d] -> [n x 1]
Var mean_rows(const Var& a); // [K x d] -> [1 x d]
Var mean_all(const Var& a);  // -> [1 x 1]
Var sum_all(const Var& a);   // -> [1 x 1]
Var diag(const Var& a);      // square [n x n] -> [n x 1]
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);

// ---- structured nonlinearities ----
Var row_softmax(const Var& a);
Var row_logsumexp(const Var& a); // [n x d] -> [n x 1]
// Rows scaled to unit L2 norm; zero-norm rows are a validation error.
Var row_l2_normalize(const Var& a);
// Row-wise layer norm with learned gain/bias (both [1 x d]).
Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
// Row-wise KL(p || q) -> [n x 1]. Zero-mass p entries contribute nothing;
// q is floored at 1e-12 inside the log.
Var kl_rows(const Var& p, const Var& q);

// Value copy cut off from the graph (stop-gradient).
Var detach(const Var& a);

} // namespace mcsp::ad
