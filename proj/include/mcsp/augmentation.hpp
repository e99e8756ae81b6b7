#pragma once

#include "mcsp/connectivity.hpp"
#include "mcsp/dataset.hpp"
#include "mcsp/rng.hpp"

namespace mcsp {

enum class GraphAugMode { REMOVE, PERTURB };

struct AugmentationConfig {
    double edge_drop_min = 0.20;
    double edge_drop_max = 0.50;
    double edge_perturb_sigma = 0.05;
    // Relative to per-row standard deviation.
    double noise_sigma = 0.1;
    // Fraction of EEG time points zeroed per view.
    double point_drop_fraction = 0.1;
    GraphAugMode mode = GraphAugMode::REMOVE;
    std::uint64_t seed = 0;

    void validate() const;
};

// Zeroes the `floor(ratio * E)` off-diagonal edge pairs with smallest
// absolute weight, E being the count of nonzero upper-triangular edges.
// Ties break on the lowest (row, col) index pair.
BrainGraph drop_weak_edges_with_ratio(const BrainGraph& g, double ratio);

// Ratio drawn uniformly from [edge_drop_min, edge_drop_max].
BrainGraph drop_weak_edges(const BrainGraph& g, const AugmentationConfig& cfg, Rng& rng);

// Adds N(0, sigma^2) to edges whose |weight| exceeds the median nonzero
// |weight|; mirrored to keep symmetry, magnitudes clamped to 1.1.
BrainGraph perturb_strong_edges(const BrainGraph& g, const AugmentationConfig& cfg, Rng& rng);

BrainGraph augment_graph(const BrainGraph& g, const AugmentationConfig& cfg, Rng& rng);

// Gaussian noise scaled by each row's std; EEG additionally zeroes a shared
// random set of time columns.
Matrix augment_temporal(const Matrix& x, Modality modality, const AugmentationConfig& cfg,
                        Rng& rng);

// Frequency views are spectra of the augmented temporal view, never
// independently augmented.
FrequencySequence augment_frequency(const Matrix& x_temporal_augmented,
                                    Eigen::Index freq_length = 200);

} // namespace mcsp
