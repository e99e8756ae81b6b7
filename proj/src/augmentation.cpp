#include "mcsp/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace mcsp {

namespace {

struct Edge {
    double magnitude;
    Eigen::Index i, j;
};

std::vector<Edge> upper_nonzero_edges(const Matrix& adj) {
    std::vector<Edge> edges;
    for (Eigen::Index i = 0; i < adj.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < adj.cols(); ++j) {
            if (adj(i, j) != 0.0) edges.push_back({std::abs(adj(i, j)), i, j});
        }
    }
    return edges;
}

void check_graph(const BrainGraph& g) {
    require(g.adjacency.rows() == g.adjacency.cols(), "augmentation: adjacency not square");
    require(g.node_features.rows() == g.adjacency.rows(),
            "augmentation: node feature count mismatch");
    require_finite(g.adjacency, "augmentation adjacency");
}

} // namespace

void AugmentationConfig::validate() const {
    if (!(0.0 <= edge_drop_min && edge_drop_min <= edge_drop_max && edge_drop_max < 1.0)) {
        throw ConfigError("augmentation: need 0 <= edge_drop_min <= edge_drop_max < 1");
    }
    if (edge_perturb_sigma < 0.0 || noise_sigma < 0.0) {
        throw ConfigError("augmentation: sigmas must be >= 0");
    }
    if (point_drop_fraction < 0.0 || point_drop_fraction >= 1.0) {
        throw ConfigError("augmentation: point_drop_fraction must be in [0, 1)");
    }
}

BrainGraph drop_weak_edges_with_ratio(const BrainGraph& g, double ratio) {
    check_graph(g);
    require(ratio >= 0.0 && ratio < 1.0, "drop_weak_edges: ratio out of range");

    std::vector<Edge> edges = upper_nonzero_edges(g.adjacency);
    const auto k = static_cast<std::size_t>(std::floor(ratio * double(edges.size())));
    BrainGraph out = g;
    if (k == 0) return out;

    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        return std::tie(a.magnitude, a.i, a.j) < std::tie(b.magnitude, b.i, b.j);
    });
    for (std::size_t e = 0; e < k; ++e) {
        out.adjacency(edges[e].i, edges[e].j) = 0.0;
        out.adjacency(edges[e].j, edges[e].i) = 0.0;
    }
    return out;
}

BrainGraph drop_weak_edges(const BrainGraph& g, const AugmentationConfig& cfg, Rng& rng) {
    cfg.validate();
    const double r = rng.uniform(cfg.edge_drop_min, cfg.edge_drop_max);
    return drop_weak_edges_with_ratio(g, r);
}

BrainGraph perturb_strong_edges(const BrainGraph& g, const AugmentationConfig& cfg, Rng& rng) {
    cfg.validate();
    check_graph(g);
    BrainGraph out = g;
    std::vector<Edge> edges = upper_nonzero_edges(g.adjacency);
    if (edges.empty() || cfg.edge_perturb_sigma == 0.0) return out;

    std::vector<double> mags(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) mags[e] = edges[e].magnitude;
    std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
    double median = mags[mags.size() / 2];
    if (mags.size() % 2 == 0) {
        const double upper = median;
        std::nth_element(mags.begin(), mags.begin() + mags.size() / 2 - 1, mags.end());
        median = 0.5 * (mags[mags.size() / 2 - 1] + upper);
    }

    for (const Edge& e : edges) {
        if (e.magnitude <= median) continue;
        double w = g.adjacency(e.i, e.j) + rng.normal(0.0, cfg.edge_perturb_sigma);
        w = std::clamp(w, -1.1, 1.1);
        out.adjacency(e.i, e.j) = w;
        out.adjacency(e.j, e.i) = w;
    }
    return out;
}

BrainGraph augment_graph(const BrainGraph& g, const AugmentationConfig& cfg, Rng& rng) {
    return cfg.mode == GraphAugMode::REMOVE ? drop_weak_edges(g, cfg, rng)
                                            : perturb_strong_edges(g, cfg, rng);
}

Matrix augment_temporal(const Matrix& x, Modality modality, const AugmentationConfig& cfg,
                        Rng& rng) {
    cfg.validate();
    require_finite(x, "augment_temporal input");
    Matrix out = x;

    if (cfg.noise_sigma > 0.0) {
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const double mean = x.row(r).mean();
            const double sd = std::sqrt((x.row(r).array() - mean).square().mean());
            const double sigma = cfg.noise_sigma * sd;
            for (Eigen::Index t = 0; t < x.cols(); ++t) {
                out(r, t) += rng.normal(0.0, sigma);
            }
        }
    }

    if (modality == Modality::EEG && cfg.point_drop_fraction > 0.0) {
        const auto k = static_cast<std::size_t>(
            std::floor(cfg.point_drop_fraction * double(x.cols())));
        if (k > 0) {
            std::vector<Eigen::Index> idx(x.cols());
            std::iota(idx.begin(), idx.end(), Eigen::Index{0});
            for (std::size_t i = 0; i < k; ++i) {
                std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
            }
            for (std::size_t i = 0; i < k; ++i) out.col(idx[i]).setZero();
        }
    }
    return out;
}

FrequencySequence augment_frequency(const Matrix& x_temporal_augmented,
                                    Eigen::Index freq_length) {
    return fft_magnitude(x_temporal_augmented, freq_length);
}

} // namespace mcsp
