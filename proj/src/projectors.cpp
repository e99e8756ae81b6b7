#include "mcsp/projectors.hpp"

namespace mcsp {

namespace ad_ = mcsp::ad;

namespace {

ad_::Var run_mlp(const ad_::Var& x, const ParamStore& ps, const std::string& prefix) {
    const ad_::Var w1 = ps.get(prefix + ".w1");
    require(x.value().rows() == 1, "projector: input must be a single row");
    require(x.value().cols() == w1.value().rows(),
            "projector " + prefix + ": input width " + std::to_string(x.value().cols()) +
                " does not match parameters (" + std::to_string(w1.value().rows()) + ")");
    ad_::Var hidden = ad_::relu(ad_::linear(x, w1, ps.get(prefix + ".b1")));
    return ad_::linear(hidden, ps.get(prefix + ".w2"), ps.get(prefix + ".b2"));
}

} // namespace

void init_projector_params(ParamStore& ps, const std::string& prefix, Eigen::Index in_dim,
                           const ProjectorConfig& cfg, Rng& rng) {
    cfg.validate();
    require(in_dim > 0, "init_projector_params: in_dim must be > 0");
    ps.create(prefix + ".w1", glorot_init(rng, in_dim, cfg.hidden));
    ps.create(prefix + ".b1", Matrix::Zero(1, cfg.hidden));
    ps.create(prefix + ".w2", glorot_init(rng, cfg.hidden, ProjectorConfig::kOut));
    ps.create(prefix + ".b2", Matrix::Zero(1, ProjectorConfig::kOut));
}

ad_::Var project_single(const ad_::Var& pooled, const ParamStore& ps,
                        const std::string& prefix) {
    return run_mlp(pooled, ps, prefix);
}

ad_::Var project_segments(const std::vector<ad_::Var>& pooled_segments, const ParamStore& ps,
                          const std::string& prefix, Eigen::Index expected_segments) {
    require(!pooled_segments.empty(), "project_segments: no segments");
    require(expected_segments <= 0 ||
                Eigen::Index(pooled_segments.size()) == expected_segments,
            "project_segments: got " + std::to_string(pooled_segments.size()) +
                " segments, expected " + std::to_string(expected_segments));
    return run_mlp(ad_::concat_cols(pooled_segments), ps, prefix);
}

} // namespace mcsp
