#pragma once

#include "mcsp/dataset.hpp"
#include "mcsp/rng.hpp"

#include <vector>

namespace mcsp {

// Cohort with planted, class_effect-scaled structure:
//   - class-dependent latent->ROI mixing (spatial connectivity signal),
//   - class-dependent oscillation frequency (temporal/frequency signal),
//   - a per-subject latent scaling source amplitudes identically in both
//     modalities (the cross-modal structure CM-SSL can exploit).
// class_effect = 0 makes all class-conditional distributions identical.
struct SyntheticSpec {
    int n_subjects = 64;
    int n_classes = 2;
    int n_roi = 16;
    double class_effect = 1.0;
    int shared_latent_dim = 6;
    std::uint64_t seed = 0;

    int runs_per_modality = 2;
    Eigen::Index fmri_length_min = 150;
    Eigen::Index fmri_length_max = 300;
    Eigen::Index eeg_length = 25000;
    double noise_level = 0.3;

    void validate() const;
};

// Primary planted task; balanced classes via subject_index % n_classes.
inline const char* kSyntheticPrimaryTask = "group";
// Secondary planted task with its own mixing perturbation, for cross-task
// transfer runs.
inline const char* kSyntheticSecondaryTask = "site";

// Deterministic in (spec, subject_index) alone; subjects can be generated in
// any order or in parallel.
SubjectRecord generate_synthetic_subject(const SyntheticSpec& spec, int subject_index);

std::vector<SubjectRecord> generate_synthetic_cohort(const SyntheticSpec& spec);

} // namespace mcsp
