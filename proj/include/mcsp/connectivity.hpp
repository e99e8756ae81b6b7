#pragma once

#include "mcsp/matrix.hpp"

#include <vector>

namespace mcsp {

// Connectome view of one run: node features are connectivity rows, edges are
// the (signed) connectivity weights.
struct BrainGraph {
    Matrix node_features;
    Matrix adjacency;

    Eigen::Index n_roi() const { return adjacency.rows(); }
};

struct ConnectivityResult {
    Matrix matrix;
    // Row indices whose variance was zero; their off-diagonal entries are 0.
    std::vector<Eigen::Index> degenerate_rows;
};

ConnectivityResult pearson_connectivity(const Matrix& x);

// Hilbert amplitude envelope per row, log power (epsilon 1e-8), then Pearson.
ConnectivityResult power_envelope_connectivity(const Matrix& x);

BrainGraph graph_from_connectivity(const Matrix& c, double symmetry_tol = 1e-6);

} // namespace mcsp
