#pragma once

#include "mcsp/augmentation.hpp"
#include "mcsp/config.hpp"
#include "mcsp/encoders.hpp"
#include "mcsp/projectors.hpp"

#include <string>
#include <vector>

namespace mcsp {

// The three per-domain views of one recording, ready for the encoders. fMRI
// uses the single-matrix fields, EEG the segment fields.
struct SampleInputs {
    Modality modality = Modality::FMRI;
    BrainGraph graph;
    Matrix series;
    Matrix spectrum;
    SegmentSet segments;
    SegmentSet spectra;
};

// Shared-space projections of one recording, each [1 x 128].
struct DomainProjections {
    ad::Var spatial;
    ad::Var temporal;
    ad::Var frequency;

    const ad::Var& at(Domain d) const {
        switch (d) {
            case Domain::SPATIAL: return spatial;
            case Domain::TEMPORAL: return temporal;
            default: return frequency;
        }
    }
};

// Clean (weak) view of one recording.
SampleInputs build_sample_inputs(const RoiTimeSeries& run, const DatasetConfig& ds);

// Augmented (strong) view: graph augmentation on the connectivity, noise (and
// EEG point dropping) on the unified temporal series before segmentation, and
// spectra recomputed from the augmented temporal view.
SampleInputs build_augmented_inputs(const RoiTimeSeries& run, const DatasetConfig& ds,
                                    const AugmentationConfig& aug, Rng& rng);

// Three shared encoders plus six modality-aware projectors under one
// parameter store. Prefixes: enc.<domain>, proj.<domain>.<modality>.
class McspModel {
public:
    McspModel(const RunConfig& cfg, Eigen::Index n_roi);

    ParamStore& params() { return ps_; }
    const ParamStore& params() const { return ps_; }
    const RunConfig& config() const { return cfg_; }
    Eigen::Index n_roi() const { return n_roi_; }

    ad::Var forward_domain(const SampleInputs& in, Domain d) const;
    DomainProjections forward(const SampleInputs& in) const;

    // Encoder plus both projector heads of one domain.
    std::size_t param_count(Domain d) const;
    std::size_t total_param_count() const;

private:
    RunConfig cfg_;
    Eigen::Index n_roi_ = 0;
    ParamStore ps_;
};

} // namespace mcsp
