#include "mcsp/autodiff.hpp"

#include <cmath>
#include <unordered_set>
#include <utility>

namespace mcsp::ad {

namespace {

std::shared_ptr<Node> make_node(Matrix value, std::vector<std::shared_ptr<Node>> parents,
                                std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    bool needs = false;
    for (const auto& p : parents) needs = needs || p->requires_grad;
    n->requires_grad = needs;
    if (needs) {
        n->parents = std::move(parents);
        n->backward = std::move(backward);
    }
    return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.value().rows() != b.value().rows() || a.value().cols() != b.value().cols()) {
        throw ValidationError(std::string(op) + ": shape mismatch");
    }
}

} // namespace

Var Var::leaf(Matrix value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Var(n);
}

double Var::scalar() const {
    require(node_->value.rows() == 1 && node_->value.cols() == 1,
            "Var::scalar: not a 1x1 value");
    return node_->value(0, 0);
}

const Matrix& Var::grad() const {
    require(node_ && node_->grad_ready, "Var::grad: no gradient accumulated");
    return node_->grad;
}

void Var::backward() const {
    require(node_->value.rows() == 1 && node_->value.cols() == 1,
            "Var::backward: root must be 1x1; pass an explicit seed otherwise");
    backward(Matrix::Ones(1, 1));
}

void Var::backward(const Matrix& seed) const {
    require(node_ != nullptr, "Var::backward: empty var");
    require(node_->requires_grad, "Var::backward: root does not require grad");
    require(seed.rows() == node_->value.rows() && seed.cols() == node_->value.cols(),
            "Var::backward: seed shape mismatch");
    node_->accumulate(seed);

    // Reverse topological order over the requires_grad subgraph: iterative
    // post-order DFS, then walk the order backwards so every node fires
    // after all of its consumers.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* n;
        std::size_t next;
    };
    std::vector<Frame> stack;
    stack.push_back({node_.get(), 0});
    visited.insert(node_.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.n->parents.size()) {
            Node* p = f.n->parents[f.next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.n);
            stack.pop_back();
        }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && n->grad_ready) n->backward(*n);
    }
}

Var constant(Matrix value) { return Var::leaf(std::move(value), false); }

Var constant_scalar(double value) { return Var::leaf(Matrix::Constant(1, 1, value), false); }

Var parameter(Matrix value) { return Var::leaf(std::move(value), true); }

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    auto pa = a.node(), pb = b.node();
    return Var(make_node(a.value() + b.value(), {pa, pb}, [pa, pb](Node& self) {
        if (pa->requires_grad) pa->accumulate(self.grad);
        if (pb->requires_grad) pb->accumulate(self.grad);
    }));
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    auto pa = a.node(), pb = b.node();
    return Var(make_node(a.value() - b.value(), {pa, pb}, [pa, pb](Node& self) {
        if (pa->requires_grad) pa->accumulate(self.grad);
        if (pb->requires_grad) pb->accumulate(-self.grad);
    }));
}

Var cmul(const Var& a, const Var& b) {
    check_same_shape(a, b, "cmul");
    auto pa = a.node(), pb = b.node();
    return Var(make_node(a.value().cwiseProduct(b.value()), {pa, pb}, [pa, pb](Node& self) {
        if (pa->requires_grad) pa->accumulate(self.grad.cwiseProduct(pb->value));
        if (pb->requires_grad) pb->accumulate(self.grad.cwiseProduct(pa->value));
    }));
}

Var scale(const Var& a, double s) {
    auto pa = a.node();
    return Var(make_node(a.value() * s, {pa}, [pa, s](Node& self) {
        pa->accumulate(self.grad * s);
    }));
}

Var add_scalar(const Var& a, double s) {
    auto pa = a.node();
    return Var(make_node(a.value().array() + s, {pa}, [pa](Node& self) {
        pa->accumulate(self.grad);
    }));
}

Var smul(const Var& a, const Var& s) {
    require(s.value().rows() == 1 && s.value().cols() == 1, "smul: scale must be 1x1");
    auto pa = a.node(), ps = s.node();
    return Var(make_node(a.value() * s.value()(0, 0), {pa, ps}, [pa, ps](Node& self) {
        if (pa->requires_grad) pa->accumulate(self.grad * ps->value(0, 0));
        if (ps->requires_grad) {
            ps->accumulate(Matrix::Constant(1, 1, (self.grad.cwiseProduct(pa->value)).sum()));
        }
    }));
}

Var relu(const Var& a) {
    auto pa = a.node();
    return Var(make_node(a.value().cwiseMax(0.0), {pa}, [pa](Node& self) {
        pa->accumulate(
            self.grad.cwiseProduct((pa->value.array() > 0.0).cast<double>().matrix()));
    }));
}

Var log_clamped(const Var& a, double floor, long* clamp_counter) {
    require(floor > 0.0, "log_clamped: floor must be positive");
    const Matrix& v = a.value();
    Matrix out(v.rows(), v.cols());
    long clamped = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double x = v(i);
        if (x > floor) {
            out(i) = std::log(x);
        } else {
            out(i) = std::log(floor);
            ++clamped;
        }
    }
    if (clamp_counter && clamped > 0) *clamp_counter += clamped;
    auto pa = a.node();
    const double f = floor;
    return Var(make_node(std::move(out), {pa}, [pa, f](Node& self) {
        Matrix g = self.grad;
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            const double x = pa->value(i);
            g(i) = x > f ? g(i) / x : 0.0;
        }
        pa->accumulate(g);
    }));
}

Var matmul(const Var& a, const Var& b) {
    require(a.value().cols() == b.value().rows(), "matmul: inner dimension mismatch");
    auto pa = a.node(), pb = b.node();
    return Var(make_node(a.value() * b.value(), {pa, pb}, [pa, pb](Node& self) {
        if (pa->requires_grad) pa->accumulate(self.grad * pb->value.transpose());
        if (pb->requires_grad) pb->accumulate(pa->value.transpose() * self.grad);
    }));
}

Var matmul_nt(const Var& a, const Var& b) {
    require(a.value().cols() == b.value().cols(), "matmul_nt: inner dimension mismatch");
    auto pa = a.node(), pb = b.node();
    return Var(make_node(a.value() * b.value().transpose(), {pa, pb}, [pa, pb](Node& self) {
        if (pa->requires_grad) pa->accumulate(self.grad * pb->value);
        if (pb->requires_grad) pb->accumulate(self.grad.transpose() * pa->value);
    }));
}

Var transpose(const Var& a) {
    auto pa = a.node();
    return Var(make_node(a.value().transpose(), {pa}, [pa](Node& self) {
        pa->accumulate(self.grad.transpose());
    }));
}

Var linear(const Var& x, const Var& w, const Var& b) {
    require(x.value().cols() == w.value().rows(), "linear: input width mismatch");
    require(b.value().rows() == 1 && b.value().cols() == w.value().cols(),
            "linear: bias must be 1 x out");
    auto px = x.node(), pw = w.node(), pb = b.node();
    Matrix out = x.value() * w.value();
    out.rowwise() += b.value().row(0);
    return Var(make_node(std::move(out), {px, pw, pb}, [px, pw, pb](Node& self) {
        if (px->requires_grad) px->accumulate(self.grad * pw->value.transpose());
        if (pw->requires_grad) pw->accumulate(px->value.transpose() * self.grad);
        if (pb->requires_grad) pb->accumulate(self.grad.colwise().sum());
    }));
}

Var row_sum(const Var& a) {
    auto pa = a.node();
    return Var(make_node(a.value().rowwise().sum(), {pa}, [pa](Node& self) {
        pa->accumulate(self.grad.replicate(1, pa->value.cols()));
    }));
}

Var mean_rows(const Var& a) {
    auto pa = a.node();
    const double inv = 1.0 / static_cast<double>(a.value().rows());
    Matrix out = a.value().colwise().mean();
    return Var(make_node(std::move(out), {pa}, [pa, inv](Node& self) {
        pa->accumulate((self.grad * inv).replicate(pa->value.rows(), 1));
    }));
}

Var mean_all(const Var& a) {
    auto pa = a.node();
    const double inv = 1.0 / static_cast<double>(a.value().size());
    return Var(make_node(Matrix::Constant(1, 1, a.value().mean()), {pa}, [pa, inv](Node& self) {
        pa->accumulate(Matrix::Constant(pa->value.rows(), pa->value.cols(),
                                        self.grad(0, 0) * inv));
    }));
}

Var sum_all(const Var& a) {
    auto pa = a.node();
    return Var(make_node(Matrix::Constant(1, 1, a.value().sum()), {pa}, [pa](Node& self) {
        pa->accumulate(
            Matrix::Constant(pa->value.rows(), pa->value.cols(), self.grad(0, 0)));
    }));
}

Var diag(const Var& a) {
    require(a.value().rows() == a.value().cols(), "diag: matrix must be square");
    auto pa = a.node();
    return Var(make_node(a.value().diagonal(), {pa}, [pa](Node& self) {
        Matrix g = Matrix::Zero(pa->value.rows(), pa->value.cols());
        g.diagonal() = self.grad.col(0);
        pa->accumulate(g);
    }));
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
    require(start >= 0 && count >= 0 && start + count <= a.value().cols(),
            "slice_cols: out of range");
    auto pa = a.node();
    return Var(make_node(a.value().middleCols(start, count), {pa},
                         [pa, start, count](Node& self) {
                             Matrix g = Matrix::Zero(pa->value.rows(), pa->value.cols());
                             g.middleCols(start, count) = self.grad;
                             pa->accumulate(g);
                         }));
}

Var concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_cols: empty input");
    const Eigen::Index rows = parts.front().value().rows();
    Eigen::Index cols = 0;
    std::vector<std::shared_ptr<Node>> parents;
    parents.reserve(parts.size());
    for (const auto& p : parts) {
        require(p.value().rows() == rows, "concat_cols: row mismatch");
        cols += p.value().cols();
        parents.push_back(p.node());
    }
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.middleCols(at, p.value().cols()) = p.value();
        at += p.value().cols();
    }
    auto parents_copy = parents;
    return Var(make_node(std::move(out), std::move(parents), [parents_copy](Node& self) {
        Eigen::Index at = 0;
        for (const auto& p : parents_copy) {
            if (p->requires_grad) p->accumulate(self.grad.middleCols(at, p->value.cols()));
            at += p->value.cols();
        }
    }));
}

Var concat_rows(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_rows: empty input");
    const Eigen::Index cols = parts.front().value().cols();
    Eigen::Index rows = 0;
    std::vector<std::shared_ptr<Node>> parents;
    parents.reserve(parts.size());
    for (const auto& p : parts) {
        require(p.value().cols() == cols, "concat_rows: column mismatch");
        rows += p.value().rows();
        parents.push_back(p.node());
    }
    Matrix out(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        out.middleRows(at, p.value().rows()) = p.value();
        at += p.value().rows();
    }
    auto parents_copy = parents;
    return Var(make_node(std::move(out), std::move(parents), [parents_copy](Node& self) {
        Eigen::Index at = 0;
        for (const auto& p : parents_copy) {
            if (p->requires_grad) p->accumulate(self.grad.middleRows(at, p->value.rows()));
            at += p->value.rows();
        }
    }));
}

Var row_softmax(const Var& a) {
    const Matrix& v = a.value();
    Matrix out(v.rows(), v.cols());
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        const double m = v.row(r).maxCoeff();
        out.row(r) = (v.row(r).array() - m).exp();
        out.row(r) /= out.row(r).sum();
    }
    auto pa = a.node();
    auto y = std::make_shared<Matrix>(out);
    return Var(make_node(std::move(out), {pa}, [pa, y](Node& self) {
        Matrix g(y->rows(), y->cols());
        for (Eigen::Index r = 0; r < y->rows(); ++r) {
            const double dot = self.grad.row(r).cwiseProduct(y->row(r)).sum();
            g.row(r) = (y->row(r).array() * (self.grad.row(r).array() - dot)).matrix();
        }
        pa->accumulate(g);
    }));
}

Var row_logsumexp(const Var& a) {
    const Matrix& v = a.value();
    Matrix out(v.rows(), 1);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        const double m = v.row(r).maxCoeff();
        out(r, 0) = m + std::log((v.row(r).array() - m).exp().sum());
    }
    auto pa = a.node();
    return Var(make_node(std::move(out), {pa}, [pa](Node& self) {
        const Matrix& v = pa->value;
        Matrix g(v.rows(), v.cols());
        for (Eigen::Index r = 0; r < v.rows(); ++r) {
            const double m = v.row(r).maxCoeff();
            Eigen::RowVectorXd e = (v.row(r).array() - m).exp();
            e /= e.sum();
            g.row(r) = e * self.grad(r, 0);
        }
        pa->accumulate(g);
    }));
}

Var row_l2_normalize(const Var& a) {
    const Matrix& v = a.value();
    Matrix out(v.rows(), v.cols());
    Eigen::VectorXd norms(v.rows());
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        const double n = v.row(r).norm();
        if (!(n > 0.0)) {
            throw ValidationError("row_l2_normalize: zero-norm row (cosine undefined)");
        }
        norms[r] = n;
        out.row(r) = v.row(r) / n;
    }
    auto pa = a.node();
    auto y = std::make_shared<Matrix>(out);
    auto ns = std::make_shared<Eigen::VectorXd>(std::move(norms));
    return Var(make_node(std::move(out), {pa}, [pa, y, ns](Node& self) {
        Matrix g(y->rows(), y->cols());
        for (Eigen::Index r = 0; r < y->rows(); ++r) {
            const double dot = self.grad.row(r).cwiseProduct(y->row(r)).sum();
            g.row(r) = (self.grad.row(r) - dot * y->row(r)) / (*ns)[r];
        }
        pa->accumulate(g);
    }));
}

Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, double eps) {
    const Matrix& v = x.value();
    const Eigen::Index d = v.cols();
    require(gain.value().rows() == 1 && gain.value().cols() == d, "layer_norm: gain shape");
    require(bias.value().rows() == 1 && bias.value().cols() == d, "layer_norm: bias shape");

    Matrix xhat(v.rows(), d);
    Eigen::VectorXd inv_sigma(v.rows());
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        const double mu = v.row(r).mean();
        const double var = (v.row(r).array() - mu).square().mean();
        const double is = 1.0 / std::sqrt(var + eps);
        inv_sigma[r] = is;
        xhat.row(r) = (v.row(r).array() - mu) * is;
    }
    Matrix out = xhat.array().rowwise() * gain.value().row(0).array();
    out.rowwise() += bias.value().row(0);

    auto px = x.node(), pg = gain.node(), pb = bias.node();
    auto xh = std::make_shared<Matrix>(std::move(xhat));
    auto is = std::make_shared<Eigen::VectorXd>(std::move(inv_sigma));
    return Var(make_node(std::move(out), {px, pg, pb}, [px, pg, pb, xh, is](Node& self) {
        const Eigen::Index d = xh->cols();
        if (pg->requires_grad) {
            pg->accumulate(self.grad.cwiseProduct(*xh).colwise().sum());
        }
        if (pb->requires_grad) {
            pb->accumulate(self.grad.colwise().sum());
        }
        if (px->requires_grad) {
            Matrix g(xh->rows(), d);
            for (Eigen::Index r = 0; r < xh->rows(); ++r) {
                Eigen::RowVectorXd dxhat =
                    self.grad.row(r).cwiseProduct(pg->value.row(0));
                const double m1 = dxhat.mean();
                const double m2 = dxhat.cwiseProduct(xh->row(r)).mean();
                g.row(r) =
                    ((dxhat.array() - m1) - xh->row(r).array() * m2) * (*is)[r];
            }
            px->accumulate(g);
        }
    }));
}

Var kl_rows(const Var& p, const Var& q) {
    check_same_shape(p, q, "kl_rows");
    const Matrix& pv = p.value();
    const Matrix& qv = q.value();
    constexpr double kFloor = 1e-12;
    Matrix out(pv.rows(), 1);
    for (Eigen::Index r = 0; r < pv.rows(); ++r) {
        double acc = 0.0;
        for (Eigen::Index c = 0; c < pv.cols(); ++c) {
            const double pk = pv(r, c);
            if (pk > 0.0) {
                acc += pk * (std::log(pk) - std::log(std::max(qv(r, c), kFloor)));
            }
        }
        out(r, 0) = acc;
    }
    auto pp = p.node(), pq = q.node();
    return Var(make_node(std::move(out), {pp, pq}, [pp, pq](Node& self) {
        const Matrix& pv = pp->value;
        const Matrix& qv = pq->value;
        constexpr double kFloor = 1e-12;
        if (pp->requires_grad) {
            Matrix g = Matrix::Zero(pv.rows(), pv.cols());
            for (Eigen::Index r = 0; r < pv.rows(); ++r) {
                for (Eigen::Index c = 0; c < pv.cols(); ++c) {
                    const double pk = pv(r, c);
                    if (pk > 0.0) {
                        g(r, c) = self.grad(r, 0) *
                                  (std::log(pk) - std::log(std::max(qv(r, c), kFloor)) + 1.0);
                    }
                }
            }
            pp->accumulate(g);
        }
        if (pq->requires_grad) {
            Matrix g = Matrix::Zero(qv.rows(), qv.cols());
            for (Eigen::Index r = 0; r < qv.rows(); ++r) {
                for (Eigen::Index c = 0; c < qv.cols(); ++c) {
                    const double pk = pv(r, c);
                    if (pk > 0.0 && qv(r, c) > kFloor) {
                        g(r, c) = -self.grad(r, 0) * pk / qv(r, c);
                    }
                }
            }
            pq->accumulate(g);
        }
    }));
}

Var detach(const Var& a) { return constant(a.value()); }

} // namespace mcsp::ad
