#pragma once

#include "mcsp/matrix.hpp"

#include <map>
#include <string>
#include <vector>

namespace mcsp {

enum class Modality { FMRI, EEG };

const char* modality_name(Modality m);
Modality modality_from_name(const std::string& name);

// ROI-averaged signals, one row per region.
struct RoiTimeSeries {
    Matrix values;
    double sampling_rate = 1.0;
    Modality modality = Modality::FMRI;

    Eigen::Index n_roi() const { return values.rows(); }
    Eigen::Index length() const { return values.cols(); }
};

struct SegmentSet {
    std::vector<Matrix> segments;
};

// Per-row magnitude spectra, resampled to a common length.
struct FrequencySequence {
    Matrix values;
};

struct SubjectRecord {
    std::string subject_id;
    std::vector<RoiTimeSeries> fmri_runs;
    std::vector<RoiTimeSeries> eeg_runs;
    std::map<std::string, int> labels;
};

// One cross-matched (fMRI run, EEG run) pretraining unit.
struct PairedSample {
    std::string subject_id;
    int fmri_run_index = -1;
    int eeg_run_index = -1;
};

// Linear interpolation of each row onto `target_length` points spanning the
// same normalized time axis. Constants and endpoints are preserved exactly.
Matrix resample_rows(const Matrix& x, Eigen::Index target_length);

Matrix unify_fmri_series(const RoiTimeSeries& x, Eigen::Index target_length = 200);

SegmentSet resample_and_segment_eeg(const RoiTimeSeries& x,
                                    Eigen::Index unified_length = 25000,
                                    Eigen::Index segment_length = 200);

// One-sided DFT magnitude per row, then spectrum interpolated to freq_length.
FrequencySequence fft_magnitude(const Matrix& x, Eigen::Index freq_length = 200);

std::vector<PairedSample> cross_match_pairs(const SubjectRecord& record);

} // namespace mcsp
