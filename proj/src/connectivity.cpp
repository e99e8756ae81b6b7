#include "mcsp/connectivity.hpp"

#include "mcsp/fft.hpp"

#include <cmath>

namespace mcsp {

ConnectivityResult pearson_connectivity(const Matrix& x) {
    require(x.rows() > 0 && x.cols() >= 2, "pearson_connectivity: need >= 2 samples");
    require_finite(x, "pearson_connectivity input");

    const Eigen::Index n = x.rows();
    Matrix centered = x.colwise() - x.rowwise().mean();
    Vector norms(n);
    ConnectivityResult out;
    for (Eigen::Index i = 0; i < n; ++i) {
        norms[i] = centered.row(i).norm();
        if (norms[i] == 0.0) out.degenerate_rows.push_back(i);
    }

    out.matrix = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.matrix(i, i) = 1.0;
        if (norms[i] == 0.0) continue;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (norms[j] == 0.0) continue;
            double r = centered.row(i).dot(centered.row(j)) / (norms[i] * norms[j]);
            r = std::min(1.0, std::max(-1.0, r));
            out.matrix(i, j) = r;
            out.matrix(j, i) = r;
        }
    }
    return out;
}

ConnectivityResult power_envelope_connectivity(const Matrix& x) {
    require(x.cols() >= 8, "power_envelope_connectivity: need >= 8 samples");
    require_finite(x, "power_envelope_connectivity input");

    constexpr double kEps = 1e-8;
    Matrix log_power(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        Vector env = hilbert_envelope(x.row(r).transpose());
        log_power.row(r) = (env.array().square() + kEps).log().transpose();
    }
    return pearson_connectivity(log_power);
}

BrainGraph graph_from_connectivity(const Matrix& c, double symmetry_tol) {
    require(c.rows() == c.cols(), "graph_from_connectivity: matrix must be square");
    require_finite(c, "graph_from_connectivity input");
    const double asym = (c - c.transpose()).cwiseAbs().maxCoeff();
    if (asym > symmetry_tol) {
        throw ValidationError("graph_from_connectivity: asymmetry " + std::to_string(asym) +
                              " exceeds tolerance");
    }
    BrainGraph g;
    g.node_features = c;
    g.adjacency = c;
    return g;
}

} // namespace mcsp
