#pragma once

#include "mcsp/autodiff.hpp"
#include "mcsp/config.hpp"

namespace mcsp {

// Probability-space losses over [batch x classes] rows, reduced by batch
// mean. Student probabilities below 1e-12 under nonzero target mass are
// clamped inside the log and counted process-wide.

long distill_clamp_count();
void reset_distill_clamp_count();

// softmax(logits / temperature) rows.
ad::Var tempered_softmax(const ad::Var& logits, double temperature);

// Cross-entropy of the student against the teacher distribution.
ad::Var soft_target_loss(const ad::Var& p_teacher, const ad::Var& q_student);

// Cross-entropy against one-hot labels.
ad::Var hard_target_loss(const Matrix& y_onehot, const ad::Var& q_student);

// lambda_soft blended objective; the teacher side never receives gradient.
ad::Var distill_step_loss(const ad::Var& p_teacher, const ad::Var& q_student,
                          const Matrix& y_onehot, const DistillConfig& cfg);

} // namespace mcsp
