#include "mcsp/ssl_losses.hpp"

#include "mcsp/errors.hpp"

namespace mcsp {

namespace ad_ = mcsp::ad;

namespace {

void validate_distribution(const ad_::Var& z, const char* what) {
    const Matrix& v = z.value();
    require(v.rows() >= 1 && v.cols() >= 2, std::string(what) + ": batch or width too small");
    require_finite(v, what);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        require(v.row(r).minCoeff() >= 0.0,
                std::string(what) + ": distribution rows must be nonnegative");
        require(std::abs(v.row(r).sum() - 1.0) <= 1e-6,
                std::string(what) + ": rows must sum to 1");
    }
}

void check_same_batch(const ad_::Var& a, const ad_::Var& b, const char* what) {
    require(a.value().rows() == b.value().rows() && a.value().cols() == b.value().cols(),
            std::string(what) + ": batch shapes differ");
}

// Diagonal entries pushed to -inf for denominator sums that exclude j = i.
Matrix diagonal_mask(Eigen::Index n) {
    Matrix m = Matrix::Zero(n, n);
    m.diagonal().setConstant(-1e300);
    return m;
}

// mean over i of [lse_j(den(i, j) / tau) - pos(i) / tau]; den and pos are
// passed already divided by tau.
ad_::Var nce_mean(const ad_::Var& pos_over_tau, const ad_::Var& den_over_tau) {
    return ad_::mean_all(ad_::sub(ad_::row_logsumexp(den_over_tau), pos_over_tau));
}

} // namespace

ad_::Var softmax_rows(const ad_::Var& h) {
    require_finite(h.value(), "softmax_rows input");
    return ad_::row_softmax(h);
}

ad_::Var cosine_similarity_matrix(const ad_::Var& a, const ad_::Var& b) {
    return ad_::matmul_nt(ad_::row_l2_normalize(a), ad_::row_l2_normalize(b));
}

ad_::Var intra_domain_contrastive(const ad_::Var& z, const ad_::Var& z_aug,
                                  const LossConfig& cfg) {
    cfg.validate();
    check_same_batch(z, z_aug, "intra_domain_contrastive");
    validate_distribution(z, "intra_domain_contrastive z");
    validate_distribution(z_aug, "intra_domain_contrastive z_aug");
    const double inv_tau = 1.0 / cfg.tau;

    ad_::Var pos = ad_::scale(ad_::diag(cosine_similarity_matrix(z, z_aug)), inv_tau);
    ad_::Var anchors = ad_::scale(cosine_similarity_matrix(z, z), inv_tau);
    if (cfg.infonce_variant == InfoNceVariant::LITERAL) {
        return nce_mean(pos, anchors);
    }
    ad_::Var masked = ad_::add(anchors, ad_::constant(diagonal_mask(z.value().rows())));
    return nce_mean(pos, ad_::concat_cols({masked, pos}));
}

ad_::Var cross_domain_contrastive(const ad_::Var& z_x, const ad_::Var& z_y,
                                  const LossConfig& cfg) {
    cfg.validate();
    check_same_batch(z_x, z_y, "cross_domain_contrastive");
    validate_distribution(z_x, "cross_domain_contrastive z_x");
    validate_distribution(z_y, "cross_domain_contrastive z_y");

    ad_::Var sims = ad_::scale(cosine_similarity_matrix(z_x, z_y), 1.0 / cfg.tau);
    return nce_mean(ad_::diag(sims), sims);
}

ad_::Var cd_ssl(const ad_::Var& z_s, const ad_::Var& z_t, const ad_::Var& z_f,
                const ad_::Var& aug_s, const ad_::Var& aug_t, const ad_::Var& aug_f,
                const LossConfig& cfg) {
    cfg.validate();
    ad_::Var intra = ad_::add(intra_domain_contrastive(z_s, aug_s, cfg),
                              ad_::add(intra_domain_contrastive(z_t, aug_t, cfg),
                                       intra_domain_contrastive(z_f, aug_f, cfg)));
    intra = ad_::scale(intra, 1.0 / 3.0);

    ad_::Var cross = ad_::add(
        ad_::add(cross_domain_contrastive(z_s, z_t, cfg), cross_domain_contrastive(z_t, z_s, cfg)),
        ad_::add(
            ad_::add(cross_domain_contrastive(z_s, z_f, cfg),
                     cross_domain_contrastive(z_f, z_s, cfg)),
            ad_::add(cross_domain_contrastive(z_t, z_f, cfg),
                     cross_domain_contrastive(z_f, z_t, cfg))));
    cross = ad_::scale(cross, 1.0 / 6.0);

    return ad_::add(ad_::scale(intra, cfg.alpha_cd), ad_::scale(cross, 1.0 - cfg.alpha_cd));
}

ad_::Var intra_domain_cross_modal_distill(const ad_::Var& z_fmri, const ad_::Var& z_eeg,
                                          const LossConfig& cfg, Domain domain) {
    cfg.validate();
    check_same_batch(z_fmri, z_eeg, "intra_domain_cross_modal_distill");
    validate_distribution(z_fmri, "intra_domain_cross_modal_distill z_fmri");
    validate_distribution(z_eeg, "intra_domain_cross_modal_distill z_eeg");

    const bool eeg_student = domain == Domain::SPATIAL;
    ad_::Var student = eeg_student ? z_eeg : z_fmri;
    ad_::Var teacher = eeg_student ? z_fmri : z_eeg;
    if (cfg.teacher_stopgrad) teacher = ad_::detach(teacher);

    ad_::Var sims = cosine_similarity_matrix(student, teacher);
    ad_::Var pos = ad_::scale(ad_::diag(sims), 1.0 / cfg.tau);
    ad_::Var den = ad_::scale(ad_::add(sims, ad_::transpose(sims)), 1.0 / cfg.tau);
    ad_::Var contrastive = nce_mean(pos, den);

    ad_::Var kl = ad_::mean_all(ad_::kl_rows(student, teacher));
    return ad_::add(contrastive, kl);
}

ad_::Var fuse_embeddings(const ad_::Var& h_f, const ad_::Var& h_e) {
    check_same_batch(h_f, h_e, "fuse_embeddings");
    return ad_::scale(ad_::add(h_f, h_e), 0.5);
}

ad_::Var cross_modal_consistency(const ad_::Var& z_f, const ad_::Var& z_e,
                                 const ad_::Var& z_fe) {
    check_same_batch(z_f, z_e, "cross_modal_consistency");
    check_same_batch(z_e, z_fe, "cross_modal_consistency");
    validate_distribution(z_f, "cross_modal_consistency z_f");
    validate_distribution(z_e, "cross_modal_consistency z_e");
    validate_distribution(z_fe, "cross_modal_consistency z_fe");

    ad_::Var total = ad_::add(ad_::kl_rows(z_f, z_e),
                              ad_::add(ad_::kl_rows(z_e, z_fe), ad_::kl_rows(z_fe, z_f)));
    return ad_::mean_all(total);
}

ad_::Var cm_ssl(const ad_::Var& h_f, const ad_::Var& h_e, const LossConfig& cfg, Domain domain) {
    cfg.validate();
    check_same_batch(h_f, h_e, "cm_ssl");

    ad_::Var z_f = softmax_rows(h_f);
    ad_::Var z_e = softmax_rows(h_e);
    ad_::Var distill = intra_domain_cross_modal_distill(z_f, z_e, cfg, domain);

    ad_::Var z_fe = softmax_rows(fuse_embeddings(h_f, h_e));
    ad_::Var consistency = cross_modal_consistency(z_f, z_e, z_fe);

    return ad_::add(ad_::scale(distill, cfg.alpha_cm),
                    ad_::scale(consistency, 1.0 - cfg.alpha_cm));
}

} // namespace mcsp
