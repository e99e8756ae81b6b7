#pragma once

#include "mcsp/config.hpp"
#include "mcsp/connectivity.hpp"
#include "mcsp/dataset.hpp"
#include "mcsp/params.hpp"

#include <string>
#include <vector>

namespace mcsp {

// Encoder output for one sample: per-token features and the pooled readout
// (mean over tokens through a learned linear map), shape [1 x d_enc].
struct DomainEmbedding {
    ad::Var tokens;
    ad::Var pooled;
};

// Registers every tensor of one encoder under `prefix`. The spatial variant
// owns a learned per-ROI positional table and a per-layer attention-bias
// scale; sequence encoders use fixed sinusoidal positions instead.
void init_encoder_params(ParamStore& ps, const std::string& prefix, const EncoderConfig& cfg,
                         Eigen::Index n_roi, Rng& rng);

DomainEmbedding encode_spatial(const BrainGraph& g, const ParamStore& ps,
                               const std::string& prefix, const EncoderConfig& cfg);

// Tokens are the L time/frequency points; each token feature is the
// cross-ROI slice. expected_length > 0 enforces the unified-length contract.
DomainEmbedding encode_sequence(const Matrix& x, const ParamStore& ps,
                                const std::string& prefix, const EncoderConfig& cfg,
                                Eigen::Index expected_length);

std::vector<DomainEmbedding> encode_eeg_segments(const SegmentSet& s, const ParamStore& ps,
                                                 const std::string& prefix,
                                                 const EncoderConfig& cfg,
                                                 Eigen::Index expected_length);

Matrix sinusoidal_positions(Eigen::Index length, Eigen::Index d_model);

} // namespace mcsp
