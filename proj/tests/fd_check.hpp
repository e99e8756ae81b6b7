#pragma once

#include "mcsp/autodiff.hpp"
#include "mcsp/rng.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace testutil {

using mcsp::Matrix;
namespace ad = mcsp::ad;

struct FdReport {
    double max_rel_err = 0.0;
    std::string worst;
    bool ok(double tol) const { return max_rel_err <= tol; }
};

// Central finite differences against reverse-mode gradients. `build` must
// construct a fresh 1x1 graph from the current leaf values on every call.
inline FdReport check_gradients(const std::vector<ad::Var>& leaves,
                                const std::function<ad::Var()>& build,
                                double eps = 1e-5) {
    for (const auto& l : leaves) const_cast<ad::Var&>(l).clear_grad();
    ad::Var out = build();
    out.backward();

    std::vector<Matrix> analytic;
    analytic.reserve(leaves.size());
    for (const auto& l : leaves) {
        analytic.push_back(l.has_grad() ? l.grad()
                                        : Matrix::Zero(l.value().rows(), l.value().cols()));
    }

    FdReport rep;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        ad::Var leaf = leaves[li];
        Matrix base = leaf.value();
        for (Eigen::Index i = 0; i < base.size(); ++i) {
            Matrix pert = base;
            pert(i) = base(i) + eps;
            leaf.set_value(pert);
            const double fp = build().scalar();
            pert(i) = base(i) - eps;
            leaf.set_value(pert);
            const double fm = build().scalar();
            leaf.set_value(base);

            const double fd = (fp - fm) / (2.0 * eps);
            const double an = analytic[li](i);
            const double rel = std::abs(an - fd) / std::max(1.0, std::abs(fd));
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst = "leaf " + std::to_string(li) + " entry " + std::to_string(i) +
                            " analytic " + std::to_string(an) + " fd " + std::to_string(fd);
            }
        }
    }
    return rep;
}

inline Matrix random_matrix(mcsp::Rng& rng, Eigen::Index rows, Eigen::Index cols,
                            double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal() * scale;
    return m;
}

// Reduces an arbitrary-shape graph output to a probe scalar so every output
// entry contributes to the checked gradient.
inline ad::Var probe(const ad::Var& out, const Matrix& weights) {
    return ad::sum_all(ad::cmul(out, ad::constant(weights)));
}

} // namespace testutil
