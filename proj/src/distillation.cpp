#include "mcsp/distillation.hpp"

#include "mcsp/errors.hpp"

#include <cmath>

namespace mcsp {

namespace ad_ = mcsp::ad;

namespace {

constexpr double kProbFloor = 1e-12;

long g_clamp_count = 0;

void validate_probabilities(const Matrix& v, const char* what) {
    require(v.rows() >= 1 && v.cols() >= 2, std::string(what) + ": need at least 2 classes");
    require_finite(v, what);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        require(v.row(r).minCoeff() >= 0.0, std::string(what) + ": negative probability");
        require(std::abs(v.row(r).sum() - 1.0) <= 1e-6,
                std::string(what) + ": rows must sum to 1");
    }
}

void count_clamped(const Matrix& target, const Matrix& q) {
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
        for (Eigen::Index c = 0; c < q.cols(); ++c) {
            if (target(r, c) > 0.0 && q(r, c) < kProbFloor) ++g_clamp_count;
        }
    }
}

// -mean over rows of sum_c target(c) * log(clamped q(c)).
ad_::Var cross_entropy_rows(const ad_::Var& target, const ad_::Var& q) {
    ad_::Var weighted = ad_::cmul(target, ad_::log_clamped(q, kProbFloor));
    return ad_::scale(ad_::mean_all(ad_::row_sum(weighted)), -1.0);
}

} // namespace

long distill_clamp_count() { return g_clamp_count; }
void reset_distill_clamp_count() { g_clamp_count = 0; }

ad_::Var tempered_softmax(const ad_::Var& logits, double temperature) {
    require(temperature > 0.0, "tempered_softmax: temperature must be > 0");
    return ad_::row_softmax(ad_::scale(logits, 1.0 / temperature));
}

ad_::Var soft_target_loss(const ad_::Var& p_teacher, const ad_::Var& q_student) {
    validate_probabilities(p_teacher.value(), "soft_target_loss teacher");
    validate_probabilities(q_student.value(), "soft_target_loss student");
    require(p_teacher.value().rows() == q_student.value().rows() &&
                p_teacher.value().cols() == q_student.value().cols(),
            "soft_target_loss: shape mismatch");
    count_clamped(p_teacher.value(), q_student.value());
    return cross_entropy_rows(p_teacher, q_student);
}

ad_::Var hard_target_loss(const Matrix& y_onehot, const ad_::Var& q_student) {
    validate_probabilities(q_student.value(), "hard_target_loss student");
    require(y_onehot.rows() == q_student.value().rows() &&
                y_onehot.cols() == q_student.value().cols(),
            "hard_target_loss: shape mismatch");
    for (Eigen::Index r = 0; r < y_onehot.rows(); ++r) {
        double sum = 0.0;
        for (Eigen::Index c = 0; c < y_onehot.cols(); ++c) {
            const double v = y_onehot(r, c);
            require(v == 0.0 || v == 1.0, "hard_target_loss: labels must be one-hot");
            sum += v;
        }
        require(sum == 1.0, "hard_target_loss: labels must be one-hot");
    }
    count_clamped(y_onehot, q_student.value());
    return cross_entropy_rows(ad_::constant(y_onehot), q_student);
}

ad_::Var distill_step_loss(const ad_::Var& p_teacher, const ad_::Var& q_student,
                           const Matrix& y_onehot, const DistillConfig& cfg) {
    cfg.validate();
    ad_::Var soft = soft_target_loss(ad_::detach(p_teacher), q_student);
    ad_::Var hard = hard_target_loss(y_onehot, q_student);
    return ad_::add(ad_::scale(soft, cfg.lambda_soft),
                    ad_::scale(hard, 1.0 - cfg.lambda_soft));
}

} // namespace mcsp
