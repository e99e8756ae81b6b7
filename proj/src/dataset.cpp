#include "mcsp/dataset.hpp"

#include "mcsp/fft.hpp"

#include <cmath>

namespace mcsp {

const char* modality_name(Modality m) { return m == Modality::FMRI ? "fmri" : "eeg"; }

Modality modality_from_name(const std::string& name) {
    if (name == "fmri") return Modality::FMRI;
    if (name == "eeg") return Modality::EEG;
    throw ValidationError("unknown modality '" + name + "'");
}

Matrix resample_rows(const Matrix& x, Eigen::Index target_length) {
    require(x.rows() > 0 && x.cols() > 1, "resample_rows: need at least 2 samples per row");
    require(target_length > 1, "resample_rows: target_length must be > 1");
    require_finite(x, "resample_rows input");

    const Eigen::Index src = x.cols();
    if (src == target_length) return x;

    Matrix out(x.rows(), target_length);
    const double step = static_cast<double>(src - 1) / static_cast<double>(target_length - 1);
    for (Eigen::Index t = 0; t < target_length; ++t) {
        const double pos = static_cast<double>(t) * step;
        Eigen::Index lo = static_cast<Eigen::Index>(pos);
        if (lo >= src - 1) lo = src - 2;
        const double frac = pos - static_cast<double>(lo);
        out.col(t) = (1.0 - frac) * x.col(lo) + frac * x.col(lo + 1);
    }
    return out;
}

Matrix unify_fmri_series(const RoiTimeSeries& x, Eigen::Index target_length) {
    require(x.modality == Modality::FMRI, "unify_fmri_series: input is not fMRI");
    require(x.length() >= 2, "unify_fmri_series: series shorter than 2 samples");
    return resample_rows(x.values, target_length);
}

SegmentSet resample_and_segment_eeg(const RoiTimeSeries& x, Eigen::Index unified_length,
                                    Eigen::Index segment_length) {
    require(x.modality == Modality::EEG, "resample_and_segment_eeg: input is not EEG");
    if (segment_length <= 0 || unified_length <= 0 || unified_length % segment_length != 0) {
        throw ConfigError("resample_and_segment_eeg: unified_length " +
                          std::to_string(unified_length) + " is not divisible by segment_length " +
                          std::to_string(segment_length));
    }
    Matrix unified = resample_rows(x.values, unified_length);
    const Eigen::Index count = unified_length / segment_length;
    SegmentSet out;
    out.segments.reserve(count);
    for (Eigen::Index s = 0; s < count; ++s) {
        out.segments.push_back(unified.middleCols(s * segment_length, segment_length));
    }
    return out;
}

FrequencySequence fft_magnitude(const Matrix& x, Eigen::Index freq_length) {
    require(x.cols() >= 2, "fft_magnitude: need at least 2 samples per row");
    require(freq_length > 1, "fft_magnitude: freq_length must be > 1");
    require_finite(x, "fft_magnitude input");

    const Eigen::Index bins = x.cols() / 2 + 1;
    Matrix raw(x.rows(), bins);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        raw.row(r) = dft_magnitude_onesided(x.row(r).transpose()).transpose();
    }
    FrequencySequence out;
    out.values = bins == freq_length ? raw : resample_rows(raw, freq_length);
    return out;
}

std::vector<PairedSample> cross_match_pairs(const SubjectRecord& record) {
    std::vector<PairedSample> pairs;
    pairs.reserve(record.fmri_runs.size() * record.eeg_runs.size());
    for (std::size_t f = 0; f < record.fmri_runs.size(); ++f) {
        for (std::size_t e = 0; e < record.eeg_runs.size(); ++e) {
            pairs.push_back({record.subject_id, static_cast<int>(f), static_cast<int>(e)});
        }
    }
    return pairs;
}

} // namespace mcsp
