#include "doctest.h"

#include "mcsp/augmentation.hpp"
#include "mcsp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

using namespace mcsp;

namespace {

BrainGraph random_graph(Rng& rng, Eigen::Index n) {
    Matrix x(n, 64);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    return graph_from_connectivity(pearson_connectivity(x).matrix);
}

std::size_t upper_nonzero_count(const Matrix& adj) {
    std::size_t count = 0;
    for (Eigen::Index i = 0; i < adj.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < adj.cols(); ++j) {
            if (adj(i, j) != 0.0) ++count;
        }
    }
    return count;
}

} // namespace

TEST_CASE("forced-ratio drop removes exactly the weakest edges") {
    // 5-node graph with distinct magnitudes 0.1 .. 1.0 on the upper triangle.
    Matrix c = Matrix::Identity(5, 5);
    double w = 0.1;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> order;
    for (Eigen::Index i = 0; i < 5; ++i) {
        for (Eigen::Index j = i + 1; j < 5; ++j) {
            c(i, j) = w * ((i + j) % 2 == 0 ? 1.0 : -1.0);
            c(j, i) = c(i, j);
            order.emplace_back(i, j);
            w += 0.1;
        }
    }
    BrainGraph g = graph_from_connectivity(c);
    BrainGraph out = drop_weak_edges_with_ratio(g, 0.3);

    // Sort oracle: the 3 entries with smallest |w| are the first 3 inserted.
    for (std::size_t e = 0; e < order.size(); ++e) {
        auto [i, j] = order[e];
        if (e < 3) {
            CHECK(out.adjacency(i, j) == 0.0);
            CHECK(out.adjacency(j, i) == 0.0);
        } else {
            CHECK(out.adjacency(i, j) == c(i, j));
        }
    }
    CHECK(out.node_features == g.node_features);
}

TEST_CASE("zero ratio is the identity") {
    Rng rng(51);
    BrainGraph g = random_graph(rng, 10);
    BrainGraph out = drop_weak_edges_with_ratio(g, 0.0);
    CHECK(out.adjacency == g.adjacency);
}

TEST_CASE("equal magnitudes fall back to lexicographic tie-break") {
    Matrix c = Matrix::Identity(4, 4);
    for (Eigen::Index i = 0; i < 4; ++i) {
        for (Eigen::Index j = i + 1; j < 4; ++j) {
            c(i, j) = 0.5;
            c(j, i) = 0.5;
        }
    }
    BrainGraph out = drop_weak_edges_with_ratio(graph_from_connectivity(c), 0.34);
    // floor(0.34 * 6) = 2 edges: (0,1) then (0,2) by index order.
    CHECK(out.adjacency(0, 1) == 0.0);
    CHECK(out.adjacency(0, 2) == 0.0);
    CHECK(out.adjacency(0, 3) == 0.5);
    CHECK(out.adjacency(1, 2) == 0.5);
    CHECK(upper_nonzero_count(out.adjacency) == 4);
}

TEST_CASE("drop ratio stays inside the configured band over 1000 draws") {
    Rng rng(52);
    BrainGraph g = random_graph(rng, 12);
    const auto e = static_cast<double>(upper_nonzero_count(g.adjacency));
    AugmentationConfig cfg;
    Rng draws(53);
    const auto lo = static_cast<std::size_t>(std::floor(0.20 * e));
    const auto hi = static_cast<std::size_t>(std::floor(0.50 * e));
    for (int it = 0; it < 1000; ++it) {
        BrainGraph out = drop_weak_edges(g, cfg, draws);
        const std::size_t removed = upper_nonzero_count(g.adjacency) -
                                    upper_nonzero_count(out.adjacency);
        CHECK(removed >= lo);
        CHECK(removed <= hi);
        CHECK((out.adjacency - out.adjacency.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("perturbation with zero sigma is the identity") {
    Rng rng(54);
    BrainGraph g = random_graph(rng, 8);
    AugmentationConfig cfg;
    cfg.edge_perturb_sigma = 0.0;
    BrainGraph out = perturb_strong_edges(g, cfg, rng);
    CHECK(out.adjacency == g.adjacency);
}

TEST_CASE("perturbation touches only above-median edges and keeps the pattern") {
    Rng rng(55);
    BrainGraph g = random_graph(rng, 10);
    std::vector<double> mags;
    for (Eigen::Index i = 0; i < 10; ++i) {
        for (Eigen::Index j = i + 1; j < 10; ++j) {
            if (g.adjacency(i, j) != 0.0) mags.push_back(std::abs(g.adjacency(i, j)));
        }
    }
    std::sort(mags.begin(), mags.end());
    const double median = mags.size() % 2 == 1
                              ? mags[mags.size() / 2]
                              : 0.5 * (mags[mags.size() / 2 - 1] + mags[mags.size() / 2]);

    AugmentationConfig cfg;
    BrainGraph out = perturb_strong_edges(g, cfg, rng);
    CHECK(upper_nonzero_count(out.adjacency) == upper_nonzero_count(g.adjacency));
    for (Eigen::Index i = 0; i < 10; ++i) {
        for (Eigen::Index j = i + 1; j < 10; ++j) {
            const double before = g.adjacency(i, j);
            const double after = out.adjacency(i, j);
            if (std::abs(before) <= median) {
                CHECK(after == before);
            }
            CHECK(std::abs(after) <= 1.1);
            CHECK(out.adjacency(j, i) == after);
        }
    }
}

TEST_CASE("mean absolute perturbation matches the half-normal expectation") {
    Rng rng(56);
    BrainGraph g = random_graph(rng, 14);
    AugmentationConfig cfg;
    Rng draws(57);
    double total = 0.0;
    std::size_t n = 0;
    for (int it = 0; it < 1000; ++it) {
        BrainGraph out = perturb_strong_edges(g, cfg, draws);
        for (Eigen::Index i = 0; i < 14; ++i) {
            for (Eigen::Index j = i + 1; j < 14; ++j) {
                const double d = std::abs(out.adjacency(i, j) - g.adjacency(i, j));
                if (d > 0.0) {
                    total += d;
                    ++n;
                }
            }
        }
    }
    const double expected = cfg.edge_perturb_sigma * std::sqrt(2.0 / std::numbers::pi);
    const double mean = total / double(n);
    CHECK(mean > 0.9 * expected);
    CHECK(mean < 1.1 * expected);
}

TEST_CASE("temporal augmentation identity at zero settings") {
    Rng rng(58);
    Matrix x(3, 50);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    AugmentationConfig cfg;
    cfg.noise_sigma = 0.0;
    cfg.point_drop_fraction = 0.0;
    CHECK(augment_temporal(x, Modality::EEG, cfg, rng) == x);
    CHECK(augment_temporal(x, Modality::FMRI, cfg, rng) == x);
}

TEST_CASE("EEG point drop zeroes a shared column set of exact size") {
    Rng rng(59);
    Matrix x(5, 200);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal() + 3.0;
    AugmentationConfig cfg;
    cfg.noise_sigma = 0.0;
    cfg.point_drop_fraction = 0.1;
    Matrix out = augment_temporal(x, Modality::EEG, cfg, rng);
    std::set<Eigen::Index> dropped;
    for (Eigen::Index t = 0; t < 200; ++t) {
        const bool col_zero = out.col(t).cwiseAbs().maxCoeff() == 0.0;
        const bool col_same = (out.col(t) - x.col(t)).cwiseAbs().maxCoeff() == 0.0;
        CHECK((col_zero || col_same));
        if (col_zero) dropped.insert(t);
    }
    CHECK(dropped.size() == 20);

    Matrix fmri = augment_temporal(x, Modality::FMRI, cfg, rng);
    CHECK(fmri == x);
}

TEST_CASE("noise std tracks the configured relative sigma") {
    Rng rng(60);
    Matrix x(4, 1000);
    for (Eigen::Index r = 0; r < 4; ++r) {
        for (Eigen::Index t = 0; t < 1000; ++t) x(r, t) = (r + 1.0) * rng.normal();
    }
    AugmentationConfig cfg;
    cfg.noise_sigma = 0.1;
    Rng draws(61);
    Matrix out = augment_temporal(x, Modality::FMRI, cfg, draws);
    for (Eigen::Index r = 0; r < 4; ++r) {
        const double row_mean = x.row(r).mean();
        const double row_sd = std::sqrt((x.row(r).array() - row_mean).square().mean());
        Eigen::RowVectorXd diff = out.row(r) - x.row(r);
        const double diff_sd = std::sqrt((diff.array() - diff.mean()).square().mean());
        CHECK(diff_sd > 0.85 * 0.1 * row_sd);
        CHECK(diff_sd < 1.15 * 0.1 * row_sd);
    }
}

TEST_CASE("fixed seed reproduces augmented views bit-exactly") {
    Rng rng(62);
    BrainGraph g = random_graph(rng, 9);
    Matrix x(4, 120);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    AugmentationConfig cfg;

    Rng a(77), b(77);
    CHECK(drop_weak_edges(g, cfg, a).adjacency == drop_weak_edges(g, cfg, b).adjacency);
    CHECK(augment_temporal(x, Modality::EEG, cfg, a) ==
          augment_temporal(x, Modality::EEG, cfg, b));
}

TEST_CASE("frequency views are spectra of the augmented temporal view") {
    Rng rng(63);
    Matrix x(3, 128);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    FrequencySequence direct = fft_magnitude(x, 200);
    FrequencySequence via = augment_frequency(x, 200);
    CHECK((direct.values - via.values).cwiseAbs().maxCoeff() == 0.0);
    CHECK(via.values.minCoeff() >= 0.0);
}

TEST_CASE("noise keeps DC magnitude in expectation") {
    Matrix x = Matrix::Constant(1, 256, 2.0);
    AugmentationConfig cfg;
    cfg.noise_sigma = 0.0;
    cfg.point_drop_fraction = 0.0;
    // Constant row has zero std, so relative noise is zero: spectrum intact.
    Rng rng(64);
    Matrix aug = augment_temporal(x, Modality::FMRI, cfg, rng);
    FrequencySequence f = augment_frequency(aug, 129);
    CHECK(f.values(0, 0) == doctest::Approx(512.0));

    // With explicit additive noise the DC bin stays near 512 on average and
    // off-DC energy appears.
    Rng draws(65);
    double dc = 0.0, off = 0.0;
    for (int it = 0; it < 100; ++it) {
        Matrix noisy = x;
        for (Eigen::Index t = 0; t < 256; ++t) noisy(0, t) += draws.normal(0.0, 0.2);
        FrequencySequence fs = augment_frequency(noisy, 129);
        dc += fs.values(0, 0);
        off += fs.values.row(0).tail(128).sum();
    }
    CHECK(dc / 100.0 == doctest::Approx(512.0).epsilon(0.01));
    CHECK(off > 0.0);
}

TEST_CASE("config validation rejects bad ranges") {
    AugmentationConfig cfg;
    cfg.edge_drop_min = 0.6;
    cfg.edge_drop_max = 0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.point_drop_fraction = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.noise_sigma = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
