#include "doctest.h"

#include "mcsp/errors.hpp"
#include "mcsp/ssl_losses.hpp"

#include "fd_check.hpp"

#include <cmath>
#include <vector>

using namespace mcsp;
namespace ad = mcsp::ad;
using testutil::check_gradients;
using testutil::random_matrix;

namespace {

// Scalar-loop reference implementations, deliberately written without any
// shared code from the library: plain loops, direct exp/sum arithmetic.

Matrix oracle_softmax(const Matrix& h) {
    Matrix z(h.rows(), h.cols());
    for (Eigen::Index r = 0; r < h.rows(); ++r) {
        double mx = h(r, 0);
        for (Eigen::Index c = 1; c < h.cols(); ++c) mx = std::max(mx, h(r, c));
        double sum = 0.0;
        for (Eigen::Index c = 0; c < h.cols(); ++c) sum += std::exp(h(r, c) - mx);
        for (Eigen::Index c = 0; c < h.cols(); ++c) z(r, c) = std::exp(h(r, c) - mx) / sum;
    }
    return z;
}

double oracle_cos(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
        dot += a(i, c) * b(j, c);
        na += a(i, c) * a(i, c);
        nb += b(j, c) * b(j, c);
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double oracle_intra(const Matrix& z, const Matrix& zaug, double tau, bool literal) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double pos = std::exp(oracle_cos(z, i, zaug, i) / tau);
        double den = 0.0;
        for (Eigen::Index j = 0; j < z.rows(); ++j) {
            if (literal) {
                den += std::exp(oracle_cos(z, i, z, j) / tau);
            } else if (j != i) {
                den += std::exp(oracle_cos(z, i, z, j) / tau);
            }
        }
        if (!literal) den += pos;
        total += -std::log(pos / den);
    }
    return total / double(z.rows());
}

double oracle_cross(const Matrix& zx, const Matrix& zy, double tau) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < zx.rows(); ++i) {
        const double pos = std::exp(oracle_cos(zx, i, zy, i) / tau);
        double den = 0.0;
        for (Eigen::Index j = 0; j < zx.rows(); ++j) {
            den += std::exp(oracle_cos(zx, i, zy, j) / tau);
        }
        total += -std::log(pos / den);
    }
    return total / double(zx.rows());
}

double oracle_kl_row(const Matrix& p, const Matrix& q, Eigen::Index i) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
        if (p(i, c) > 0.0) acc += p(i, c) * std::log(p(i, c) / std::max(q(i, c), 1e-12));
    }
    return acc;
}

double oracle_distill(const Matrix& zf, const Matrix& ze, double tau, Domain domain) {
    const Matrix& x = domain == Domain::SPATIAL ? ze : zf;
    const Matrix& y = domain == Domain::SPATIAL ? zf : ze;
    double total = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double pos = std::exp(oracle_cos(x, i, y, i) / tau);
        double den = 0.0;
        for (Eigen::Index j = 0; j < x.rows(); ++j) {
            den += std::exp((oracle_cos(x, i, y, j) + oracle_cos(y, i, x, j)) / tau);
        }
        total += -std::log(pos / den) + oracle_kl_row(x, y, i);
    }
    return total / double(x.rows());
}

double oracle_consistency(const Matrix& zf, const Matrix& ze, const Matrix& zfe) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < zf.rows(); ++i) {
        total += oracle_kl_row(zf, ze, i) + oracle_kl_row(ze, zfe, i) +
                 oracle_kl_row(zfe, zf, i);
    }
    return total / double(zf.rows());
}

Matrix random_distribution(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    return oracle_softmax(random_matrix(rng, rows, cols));
}

LossConfig default_loss() { return LossConfig{}; }

} // namespace

TEST_CASE("softmax rows: uniform, shift invariant, matches the oracle") {
    Rng rng(301);
    const Matrix zero = Matrix::Zero(1, 8);
    const Matrix uni = softmax_rows(ad::constant(zero)).value();
    for (Eigen::Index c = 0; c < 8; ++c) CHECK(uni(0, c) == doctest::Approx(1.0 / 8).epsilon(1e-12));

    const Matrix h = random_matrix(rng, 3, 10);
    const Matrix z = softmax_rows(ad::constant(h)).value();
    const Matrix want = oracle_softmax(h);
    CHECK((z - want).cwiseAbs().maxCoeff() < 1e-9);
    for (Eigen::Index r = 0; r < 3; ++r) CHECK(z.row(r).sum() == doctest::Approx(1.0).epsilon(1e-9));

    Matrix shifted = h;
    for (Eigen::Index r = 0; r < h.rows(); ++r) shifted.row(r).array() += 3.7 * double(r + 1);
    CHECK((softmax_rows(ad::constant(shifted)).value() - z).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("intra-domain loss: forced zero, oracle match, temperature behavior") {
    Rng rng(303);
    LossConfig cfg = default_loss();

    const Matrix z1 = random_distribution(rng, 1, 6);
    const double forced =
        intra_domain_contrastive(ad::constant(z1), ad::constant(z1), cfg).scalar();
    CHECK(std::abs(forced) < 1e-9);

    const Matrix z = random_distribution(rng, 2, 8);
    const Matrix zaug = random_distribution(rng, 2, 8);
    const double lit = intra_domain_contrastive(ad::constant(z), ad::constant(zaug), cfg).scalar();
    CHECK(lit == doctest::Approx(oracle_intra(z, zaug, cfg.tau, true)).epsilon(1e-9));

    cfg.infonce_variant = InfoNceVariant::NTXENT;
    const double ntx = intra_domain_contrastive(ad::constant(z), ad::constant(zaug), cfg).scalar();
    CHECK(ntx == doctest::Approx(oracle_intra(z, zaug, cfg.tau, false)).epsilon(1e-9));
    CHECK(std::abs(lit - ntx) > 1e-9);

    // Sharper temperature tightens the loss when the positive dominates.
    LossConfig half = default_loss();
    const Matrix zb = random_distribution(rng, 3, 8);
    const double warm = intra_domain_contrastive(ad::constant(zb), ad::constant(zb), half).scalar();
    half.tau = 0.1;
    const double cold = intra_domain_contrastive(ad::constant(zb), ad::constant(zb), half).scalar();
    CHECK(warm > cold);
    CHECK(cold > 0.0);
}

TEST_CASE("cross-domain loss: batch-1 zero, oracle match, batch bound") {
    Rng rng(305);
    const LossConfig cfg = default_loss();

    const Matrix a = random_distribution(rng, 1, 7);
    const Matrix b = random_distribution(rng, 1, 7);
    CHECK(std::abs(cross_domain_contrastive(ad::constant(a), ad::constant(b), cfg).scalar()) <
          1e-9);

    const Matrix zx = random_distribution(rng, 2, 9);
    const Matrix zy = random_distribution(rng, 2, 9);
    const double got = cross_domain_contrastive(ad::constant(zx), ad::constant(zy), cfg).scalar();
    CHECK(got == doctest::Approx(oracle_cross(zx, zy, cfg.tau)).epsilon(1e-9));

    const Matrix zn = random_distribution(rng, 4, 12);
    const double self_loss =
        cross_domain_contrastive(ad::constant(zn), ad::constant(zn), cfg).scalar();
    CHECK(self_loss < std::log(4.0));
    CHECK(self_loss >= 0.0);
}

TEST_CASE("cd_ssl composes intra and cross terms with alpha") {
    Rng rng(307);
    LossConfig cfg = default_loss();
    std::vector<Matrix> zs, augs;
    for (int k = 0; k < 3; ++k) {
        zs.push_back(random_distribution(rng, 3, 8));
        augs.push_back(random_distribution(rng, 3, 8));
    }
    auto v = [](const Matrix& m) { return ad::constant(m); };

    const double intra_mean = (oracle_intra(zs[0], augs[0], cfg.tau, true) +
                               oracle_intra(zs[1], augs[1], cfg.tau, true) +
                               oracle_intra(zs[2], augs[2], cfg.tau, true)) /
                              3.0;
    const double cross_mean =
        (oracle_cross(zs[0], zs[1], cfg.tau) + oracle_cross(zs[1], zs[0], cfg.tau) +
         oracle_cross(zs[0], zs[2], cfg.tau) + oracle_cross(zs[2], zs[0], cfg.tau) +
         oracle_cross(zs[1], zs[2], cfg.tau) + oracle_cross(zs[2], zs[1], cfg.tau)) /
        6.0;

    cfg.alpha_cd = 1.0;
    CHECK(cd_ssl(v(zs[0]), v(zs[1]), v(zs[2]), v(augs[0]), v(augs[1]), v(augs[2]), cfg).scalar() ==
          doctest::Approx(intra_mean).epsilon(1e-9));
    cfg.alpha_cd = 0.0;
    CHECK(cd_ssl(v(zs[0]), v(zs[1]), v(zs[2]), v(augs[0]), v(augs[1]), v(augs[2]), cfg).scalar() ==
          doctest::Approx(cross_mean).epsilon(1e-9));
    cfg.alpha_cd = 0.5;
    CHECK(cd_ssl(v(zs[0]), v(zs[1]), v(zs[2]), v(augs[0]), v(augs[1]), v(augs[2]), cfg).scalar() ==
          doctest::Approx(0.5 * intra_mean + 0.5 * cross_mean).epsilon(1e-9));
}

TEST_CASE("distillation loss: forced floor, KL fixture, role assignment") {
    Rng rng(309);
    const LossConfig cfg = default_loss();

    const Matrix z = random_distribution(rng, 1, 6);
    const double forced =
        intra_domain_cross_modal_distill(ad::constant(z), ad::constant(z), cfg, Domain::TEMPORAL)
            .scalar();
    CHECK(forced == doctest::Approx(1.0 / cfg.tau).epsilon(1e-9));
    CHECK(forced == doctest::Approx(5.0).epsilon(1e-9));

    Matrix p = Matrix::Zero(1, 8);
    p(0, 0) = 0.5;
    p(0, 1) = 0.5;
    Matrix q = Matrix::Zero(1, 8);
    q(0, 0) = 0.9;
    q(0, 1) = 0.1;
    CHECK(oracle_kl_row(p, q, 0) == doctest::Approx(0.5 * std::log(25.0 / 9.0)).epsilon(1e-12));
    // Temporal domain distills EEG into fMRI, so p is the student here.
    const double with_kl =
        intra_domain_cross_modal_distill(ad::constant(p), ad::constant(q), cfg, Domain::TEMPORAL)
            .scalar();
    CHECK(with_kl == doctest::Approx(oracle_distill(p, q, cfg.tau, Domain::TEMPORAL)).epsilon(1e-9));

    const Matrix zf = random_distribution(rng, 2, 10);
    const Matrix ze = random_distribution(rng, 2, 10);
    for (Domain d : {Domain::SPATIAL, Domain::TEMPORAL, Domain::FREQUENCY}) {
        const double got =
            intra_domain_cross_modal_distill(ad::constant(zf), ad::constant(ze), cfg, d).scalar();
        CHECK(got == doctest::Approx(oracle_distill(zf, ze, cfg.tau, d)).epsilon(1e-9));
    }
    const double sp =
        intra_domain_cross_modal_distill(ad::constant(zf), ad::constant(ze), cfg, Domain::SPATIAL)
            .scalar();
    const double tm =
        intra_domain_cross_modal_distill(ad::constant(zf), ad::constant(ze), cfg, Domain::TEMPORAL)
            .scalar();
    CHECK(std::abs(sp - tm) > 1e-9);
}

TEST_CASE("fusion is the elementwise mean") {
    Rng rng(311);
    const Matrix h = random_matrix(rng, 3, 5);
    CHECK(fuse_embeddings(ad::constant(h), ad::constant(h)).value() == h);
    CHECK(fuse_embeddings(ad::constant(h), ad::constant(Matrix(-h))).value().cwiseAbs().maxCoeff() ==
          0.0);
    const Matrix g = random_matrix(rng, 3, 5);
    const Matrix fused = fuse_embeddings(ad::constant(h), ad::constant(g)).value();
    CHECK((fused - 0.5 * (h + g)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THROWS_AS(fuse_embeddings(ad::constant(h), ad::constant(random_matrix(rng, 2, 5))),
                    ValidationError);
}

TEST_CASE("consistency loss: zero at equality, nonnegative, oracle match") {
    Rng rng(313);
    const Matrix z = random_distribution(rng, 3, 8);
    CHECK(cross_modal_consistency(ad::constant(z), ad::constant(z), ad::constant(z)).scalar() ==
          0.0);

    const Matrix a = random_distribution(rng, 3, 8);
    const Matrix b = random_distribution(rng, 3, 8);
    const Matrix c = random_distribution(rng, 3, 8);
    const double got =
        cross_modal_consistency(ad::constant(a), ad::constant(b), ad::constant(c)).scalar();
    CHECK(got >= 0.0);
    CHECK(got == doctest::Approx(oracle_consistency(a, b, c)).epsilon(1e-9));
}

TEST_CASE("cm_ssl composes distillation and consistency with alpha") {
    Rng rng(315);
    LossConfig cfg = default_loss();

    const Matrix h = random_matrix(rng, 1, 6);
    const double identical = cm_ssl(ad::constant(h), ad::constant(h), cfg, Domain::TEMPORAL).scalar();
    CHECK(identical == doctest::Approx(cfg.alpha_cm / cfg.tau).epsilon(1e-9));

    const Matrix hf = random_matrix(rng, 2, 9);
    const Matrix he = random_matrix(rng, 2, 9);
    const Matrix zf = oracle_softmax(hf);
    const Matrix ze = oracle_softmax(he);
    const Matrix zfe = oracle_softmax(0.5 * (hf + he));
    for (Domain d : {Domain::SPATIAL, Domain::TEMPORAL}) {
        const double want = cfg.alpha_cm * oracle_distill(zf, ze, cfg.tau, d) +
                            (1.0 - cfg.alpha_cm) * oracle_consistency(zf, ze, zfe);
        CHECK(cm_ssl(ad::constant(hf), ad::constant(he), cfg, d).scalar() ==
              doctest::Approx(want).epsilon(1e-9));
    }

    cfg.alpha_cm = 1.0;
    CHECK(cm_ssl(ad::constant(hf), ad::constant(he), cfg, Domain::SPATIAL).scalar() ==
          doctest::Approx(oracle_distill(zf, ze, cfg.tau, Domain::SPATIAL)).epsilon(1e-9));
}

TEST_CASE("losses are invariant to a shared batch permutation") {
    Rng rng(317);
    const LossConfig cfg = default_loss();
    const Eigen::Index n = 4;
    std::vector<Matrix> zs, augs;
    for (int k = 0; k < 3; ++k) {
        zs.push_back(random_distribution(rng, n, 8));
        augs.push_back(random_distribution(rng, n, 8));
    }
    const Matrix hf = random_matrix(rng, n, 8);
    const Matrix he = random_matrix(rng, n, 8);

    std::vector<Eigen::Index> perm = {2, 0, 3, 1};
    auto permute = [&](const Matrix& m) {
        Matrix out(m.rows(), m.cols());
        for (Eigen::Index r = 0; r < m.rows(); ++r) out.row(r) = m.row(perm[std::size_t(r)]);
        return out;
    };
    auto v = [](const Matrix& m) { return ad::constant(m); };

    const double base =
        cd_ssl(v(zs[0]), v(zs[1]), v(zs[2]), v(augs[0]), v(augs[1]), v(augs[2]), cfg).scalar();
    const double permuted = cd_ssl(v(permute(zs[0])), v(permute(zs[1])), v(permute(zs[2])),
                                   v(permute(augs[0])), v(permute(augs[1])), v(permute(augs[2])),
                                   cfg)
                                .scalar();
    CHECK(base == doctest::Approx(permuted).epsilon(1e-12));

    const double cm_base = cm_ssl(v(hf), v(he), cfg, Domain::SPATIAL).scalar();
    const double cm_perm = cm_ssl(v(permute(hf)), v(permute(he)), cfg, Domain::SPATIAL).scalar();
    CHECK(cm_base == doctest::Approx(cm_perm).epsilon(1e-12));
}

TEST_CASE("losses are invariant to per-row shifts of raw embeddings") {
    Rng rng(319);
    const LossConfig cfg = default_loss();
    const Matrix hf = random_matrix(rng, 3, 8);
    const Matrix he = random_matrix(rng, 3, 8);
    Matrix hf_shift = hf;
    Matrix he_shift = he;
    for (Eigen::Index r = 0; r < 3; ++r) {
        hf_shift.row(r).array() += 1.3 * double(r) - 0.7;
        he_shift.row(r).array() += -2.1 * double(r) + 0.4;
    }

    const double a = cm_ssl(ad::constant(hf), ad::constant(he), cfg, Domain::TEMPORAL).scalar();
    const double b =
        cm_ssl(ad::constant(hf_shift), ad::constant(he_shift), cfg, Domain::TEMPORAL).scalar();
    CHECK(a == doctest::Approx(b).epsilon(1e-6));

    const double ia = intra_domain_contrastive(softmax_rows(ad::constant(hf)),
                                               softmax_rows(ad::constant(he)), cfg)
                          .scalar();
    const double ib = intra_domain_contrastive(softmax_rows(ad::constant(hf_shift)),
                                               softmax_rows(ad::constant(he_shift)), cfg)
                          .scalar();
    CHECK(ia == doctest::Approx(ib).epsilon(1e-6));
}

TEST_CASE("loss gradients match finite differences through the softmax") {
    Rng rng(321);
    LossConfig cfg = default_loss();
    cfg.teacher_stopgrad = false;

    ad::Var hs = ad::parameter(random_matrix(rng, 3, 10));
    ad::Var ht = ad::parameter(random_matrix(rng, 3, 10));
    ad::Var hq = ad::parameter(random_matrix(rng, 3, 10));
    ad::Var as = ad::parameter(random_matrix(rng, 3, 10));
    ad::Var at = ad::parameter(random_matrix(rng, 3, 10));
    ad::Var af = ad::parameter(random_matrix(rng, 3, 10));

    SUBCASE("cd_ssl literal") {
        auto build = [&]() {
            return cd_ssl(softmax_rows(hs), softmax_rows(ht), softmax_rows(hq), softmax_rows(as),
                          softmax_rows(at), softmax_rows(af), cfg);
        };
        auto rep = check_gradients({hs, ht, hq, as, at, af}, build, 1e-5);
        INFO(rep.worst);
        CHECK(rep.max_rel_err < 1e-4);
    }
    SUBCASE("cd_ssl ntxent") {
        cfg.infonce_variant = InfoNceVariant::NTXENT;
        auto build = [&]() {
            return cd_ssl(softmax_rows(hs), softmax_rows(ht), softmax_rows(hq), softmax_rows(as),
                          softmax_rows(at), softmax_rows(af), cfg);
        };
        auto rep = check_gradients({hs, ht, hq, as, at, af}, build, 1e-5);
        INFO(rep.worst);
        CHECK(rep.max_rel_err < 1e-4);
    }
    SUBCASE("cm_ssl both domains") {
        for (Domain d : {Domain::SPATIAL, Domain::TEMPORAL}) {
            auto build = [&]() { return cm_ssl(hs, ht, cfg, d); };
            auto rep = check_gradients({hs, ht}, build, 1e-5);
            INFO(rep.worst);
            CHECK(rep.max_rel_err < 1e-4);
        }
    }
}

TEST_CASE("teacher stop-gradient blocks the distillation gradient exactly") {
    Rng rng(323);
    LossConfig cfg = default_loss();
    REQUIRE(cfg.teacher_stopgrad);

    ad::Var hf = ad::parameter(random_matrix(rng, 3, 8));
    ad::Var he = ad::parameter(random_matrix(rng, 3, 8));
    // Temporal: fMRI is the student, EEG the teacher.
    intra_domain_cross_modal_distill(softmax_rows(hf), softmax_rows(he), cfg, Domain::TEMPORAL)
        .backward();
    CHECK(hf.has_grad());
    CHECK(hf.grad().cwiseAbs().maxCoeff() > 1e-12);
    CHECK_FALSE(he.has_grad());

    hf.clear_grad();
    // Spatial flips the roles.
    intra_domain_cross_modal_distill(softmax_rows(hf), softmax_rows(he), cfg, Domain::SPATIAL)
        .backward();
    CHECK_FALSE(hf.has_grad());
    CHECK(he.has_grad());
}

TEST_CASE("losses reject malformed distributions") {
    Rng rng(325);
    const LossConfig cfg = default_loss();
    const Matrix ok = oracle_softmax(random_matrix(rng, 2, 6));
    Matrix bad = ok;
    bad(0, 0) += 0.25;

    CHECK_THROWS_AS(intra_domain_contrastive(ad::constant(bad), ad::constant(ok), cfg),
                    ValidationError);
    CHECK_THROWS_AS(cross_domain_contrastive(ad::constant(ok), ad::constant(bad), cfg),
                    ValidationError);
    CHECK_THROWS_AS(
        intra_domain_cross_modal_distill(ad::constant(ok), ad::constant(bad), cfg, Domain::SPATIAL),
        ValidationError);
    CHECK_THROWS_AS(cross_modal_consistency(ad::constant(ok), ad::constant(ok), ad::constant(bad)),
                    ValidationError);

    const Matrix other = oracle_softmax(random_matrix(rng, 3, 6));
    CHECK_THROWS_AS(intra_domain_contrastive(ad::constant(ok), ad::constant(other), cfg),
                    ValidationError);
}
