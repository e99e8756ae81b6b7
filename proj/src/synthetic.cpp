#include "mcsp/synthetic.hpp"

#include <cmath>
#include <numbers>

namespace mcsp {

namespace {

constexpr std::uint64_t kTagMixing = 1;
constexpr std::uint64_t kTagClassOffsets = 2;
constexpr std::uint64_t kTagSiteOffsets = 3;
constexpr std::uint64_t kTagCycles = 4;
constexpr std::uint64_t kTagSubjectBase = 1u << 20;
constexpr std::uint64_t kTagRunBase = 1u << 24;

constexpr double kFreqShift = 0.25;
constexpr double kAmplitudeSpread = 0.4;
constexpr double kEegCycleMultiplier = 3.0;
constexpr double kEegModDepth = 0.5;

Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
    }
    return m;
}

struct CohortStructure {
    Matrix base_mixing;
    std::vector<Matrix> class_offsets;
    std::vector<Matrix> site_offsets;
    std::vector<double> base_cycles;
    std::vector<double> mod_cycles;
};

CohortStructure cohort_structure(const SyntheticSpec& spec) {
    const double scale = 1.0 / std::sqrt(double(spec.shared_latent_dim));
    Rng root(spec.seed);
    CohortStructure s;

    Rng mix_rng = root.derive(kTagMixing);
    s.base_mixing = gaussian_matrix(mix_rng, spec.n_roi, spec.shared_latent_dim, scale);

    Rng class_rng = root.derive(kTagClassOffsets);
    for (int y = 0; y < spec.n_classes; ++y) {
        s.class_offsets.push_back(
            gaussian_matrix(class_rng, spec.n_roi, spec.shared_latent_dim, scale));
    }
    Rng site_rng = root.derive(kTagSiteOffsets);
    for (int y = 0; y < 2; ++y) {
        s.site_offsets.push_back(
            gaussian_matrix(site_rng, spec.n_roi, spec.shared_latent_dim, scale));
    }

    Rng cyc_rng = root.derive(kTagCycles);
    for (int k = 0; k < spec.shared_latent_dim; ++k) {
        s.base_cycles.push_back(cyc_rng.uniform(4.0, 12.0));
    }
    for (int k = 0; k < spec.shared_latent_dim; ++k) {
        s.mod_cycles.push_back(cyc_rng.uniform(2.0, 5.0));
    }
    return s;
}

Matrix synth_run(const SyntheticSpec& spec, const CohortStructure& cohort,
                 const Vector& amplitudes, const Matrix& mixing, double freq_scale,
                 Modality modality, Eigen::Index length, Rng& rng) {
    const int latent = spec.shared_latent_dim;
    Matrix sources(latent, length);
    const double cycle_mult = modality == Modality::EEG ? kEegCycleMultiplier : 1.0;
    for (int k = 0; k < latent; ++k) {
        const double cycles = cohort.base_cycles[std::size_t(k)] * cycle_mult * freq_scale;
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double mod_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (Eigen::Index t = 0; t < length; ++t) {
            const double u = double(t) / double(length - 1);
            double v = std::sin(2.0 * std::numbers::pi * cycles * u + phase);
            if (modality == Modality::EEG) {
                v *= 1.0 + kEegModDepth *
                               std::sin(2.0 * std::numbers::pi *
                                            cohort.mod_cycles[std::size_t(k)] * u +
                                        mod_phase);
            }
            sources(k, t) = amplitudes[k] * v;
        }
    }
    Matrix x = mixing * sources;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index t = 0; t < x.cols(); ++t) {
            x(r, t) += spec.noise_level * rng.normal();
        }
    }
    return x;
}

} // namespace

void SyntheticSpec::validate() const {
    if (n_subjects <= 0) throw ConfigError("synthetic: n_subjects must be > 0");
    if (n_classes < 2) throw ConfigError("synthetic: n_classes must be >= 2");
    if (n_roi <= 1) throw ConfigError("synthetic: n_roi must be > 1");
    if (class_effect < 0.0) throw ConfigError("synthetic: class_effect must be >= 0");
    if (shared_latent_dim <= 0) throw ConfigError("synthetic: shared_latent_dim must be > 0");
    if (runs_per_modality <= 0) throw ConfigError("synthetic: runs_per_modality must be > 0");
    if (fmri_length_min < 8 || fmri_length_max < fmri_length_min) {
        throw ConfigError("synthetic: bad fmri length range");
    }
    if (eeg_length < 8) throw ConfigError("synthetic: eeg_length must be >= 8");
}

SubjectRecord generate_synthetic_subject(const SyntheticSpec& spec, int subject_index) {
    spec.validate();
    require(subject_index >= 0 && subject_index < spec.n_subjects,
            "generate_synthetic_subject: index out of range");

    const CohortStructure cohort = cohort_structure(spec);
    Rng root(spec.seed);

    const int y = subject_index % spec.n_classes;
    const int site = (subject_index / spec.n_classes) % 2;

    Rng subj_rng = root.derive(kTagSubjectBase + std::uint64_t(subject_index));
    Vector amplitudes(spec.shared_latent_dim);
    for (int k = 0; k < spec.shared_latent_dim; ++k) {
        amplitudes[k] = std::exp(kAmplitudeSpread * subj_rng.normal());
    }

    Matrix mixing = cohort.base_mixing +
                    spec.class_effect * (cohort.class_offsets[std::size_t(y)] +
                                         cohort.site_offsets[std::size_t(site)]);
    const double class_sign =
        spec.n_classes == 1 ? 0.0 : 2.0 * double(y) / double(spec.n_classes - 1) - 1.0;
    const double freq_scale = 1.0 + kFreqShift * spec.class_effect * class_sign;

    SubjectRecord rec;
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%04d", subject_index);
    rec.subject_id = buf;
    rec.labels[kSyntheticPrimaryTask] = y;
    rec.labels[kSyntheticSecondaryTask] = site;

    for (int r = 0; r < spec.runs_per_modality; ++r) {
        Rng run_rng = root.derive(kTagRunBase +
                                  std::uint64_t(subject_index) * 64 + std::uint64_t(r));
        const auto span =
            static_cast<std::size_t>(spec.fmri_length_max - spec.fmri_length_min + 1);
        const Eigen::Index length =
            spec.fmri_length_min + static_cast<Eigen::Index>(run_rng.index(span));
        RoiTimeSeries s;
        s.values = synth_run(spec, cohort, amplitudes, mixing, freq_scale, Modality::FMRI,
                             length, run_rng);
        s.sampling_rate = 0.5;
        s.modality = Modality::FMRI;
        rec.fmri_runs.push_back(std::move(s));
    }
    for (int r = 0; r < spec.runs_per_modality; ++r) {
        Rng run_rng = root.derive(kTagRunBase + std::uint64_t(subject_index) * 64 + 32 +
                                  std::uint64_t(r));
        RoiTimeSeries s;
        s.values = synth_run(spec, cohort, amplitudes, mixing, freq_scale, Modality::EEG,
                             spec.eeg_length, run_rng);
        s.sampling_rate = 1000.0;
        s.modality = Modality::EEG;
        rec.eeg_runs.push_back(std::move(s));
    }
    return rec;
}

std::vector<SubjectRecord> generate_synthetic_cohort(const SyntheticSpec& spec) {
    spec.validate();
    std::vector<SubjectRecord> cohort;
    cohort.reserve(std::size_t(spec.n_subjects));
    for (int s = 0; s < spec.n_subjects; ++s) {
        cohort.push_back(generate_synthetic_subject(spec, s));
    }
    return cohort;
}

} // namespace mcsp
