#pragma once

#include <Eigen/Dense>

#include "mcsp/errors.hpp"

#include <string>

namespace mcsp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_finite(const Matrix& m, const std::string& what) {
    if (!m.allFinite()) {
        throw ValidationError(what + ": non-finite values");
    }
}

inline void require(bool cond, const std::string& message) {
    if (!cond) throw ValidationError(message);
}

} // namespace mcsp
