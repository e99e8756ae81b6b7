#pragma once

#include "mcsp/autodiff.hpp"
#include "mcsp/config.hpp"

namespace mcsp {

// All losses are 1x1 graph nodes over [batch x width] inputs. `h` arguments
// are raw projected embeddings; `z` arguments are row distributions
// (softmaxed h) and are validated as such. Similarity is the cosine between
// distribution rows.

ad::Var softmax_rows(const ad::Var& h);

// S(i, j) = cos(a_i, b_j).
ad::Var cosine_similarity_matrix(const ad::Var& a, const ad::Var& b);

// Augmented-pair InfoNCE inside one domain. LITERAL keeps the printed
// denominator (clean anchors, j = i included, positive excluded); NTXENT is
// the standard form.
ad::Var intra_domain_contrastive(const ad::Var& z, const ad::Var& z_aug, const LossConfig& cfg);

// Same-subject positives across two domains of one modality.
ad::Var cross_domain_contrastive(const ad::Var& z_x, const ad::Var& z_y, const LossConfig& cfg);

// Full single-modality objective: alpha_cd weighted mean of the three intra
// terms plus (1 - alpha_cd) weighted mean of the six directed cross terms.
ad::Var cd_ssl(const ad::Var& z_s, const ad::Var& z_t, const ad::Var& z_f,
               const ad::Var& aug_s, const ad::Var& aug_t, const ad::Var& aug_f,
               const LossConfig& cfg);

// Cross-modal distillation inside one domain. The student/teacher roles
// follow the domain: spatial distills fMRI into EEG, temporal and frequency
// distill EEG into fMRI. With teacher_stopgrad the teacher side contributes
// no gradient.
ad::Var intra_domain_cross_modal_distill(const ad::Var& z_fmri, const ad::Var& z_eeg,
                                         const LossConfig& cfg, Domain domain);

// Elementwise mean of the two modality embeddings (pre-softmax).
ad::Var fuse_embeddings(const ad::Var& h_f, const ad::Var& h_e);

// KL(z_f || z_e) + KL(z_e || z_fe) + KL(z_fe || z_f), batch mean.
ad::Var cross_modal_consistency(const ad::Var& z_f, const ad::Var& z_e, const ad::Var& z_fe);

// Full cross-modal objective for one domain on raw embeddings.
ad::Var cm_ssl(const ad::Var& h_f, const ad::Var& h_e, const LossConfig& cfg, Domain domain);

} // namespace mcsp
