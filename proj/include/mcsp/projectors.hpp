#pragma once

#include "mcsp/config.hpp"
#include "mcsp/params.hpp"

#include <string>
#include <vector>

namespace mcsp {

// Two-layer MLP head mapping a pooled encoding into the shared 128-d space.
// Single-input form takes one [1 x d] row; the segment form concatenates the
// per-segment rows first, so its first layer carries most of the parameters.
void init_projector_params(ParamStore& ps, const std::string& prefix, Eigen::Index in_dim,
                           const ProjectorConfig& cfg, Rng& rng);

ad::Var project_single(const ad::Var& pooled, const ParamStore& ps, const std::string& prefix);

ad::Var project_segments(const std::vector<ad::Var>& pooled_segments, const ParamStore& ps,
                         const std::string& prefix, Eigen::Index expected_segments);

} // namespace mcsp
