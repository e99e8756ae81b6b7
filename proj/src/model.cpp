#include "mcsp/model.hpp"

namespace mcsp {

namespace ad_ = mcsp::ad;

namespace {

constexpr std::uint64_t kTagModelInit = 0x4d4f44454cULL;

SegmentSet split_segments(const Matrix& unified, Eigen::Index segment_length) {
    SegmentSet out;
    const Eigen::Index count = unified.cols() / segment_length;
    out.segments.reserve(std::size_t(count));
    for (Eigen::Index s = 0; s < count; ++s) {
        out.segments.push_back(unified.middleCols(s * segment_length, segment_length));
    }
    return out;
}

SegmentSet segment_spectra(const SegmentSet& segments, Eigen::Index freq_length) {
    SegmentSet out;
    out.segments.reserve(segments.segments.size());
    for (const Matrix& seg : segments.segments) {
        out.segments.push_back(fft_magnitude(seg, freq_length).values);
    }
    return out;
}

std::string proj_prefix(Domain d, Modality m) {
    return std::string("proj.") + domain_name(d) + "." + modality_name(m);
}

std::string enc_prefix(Domain d) {
    return std::string("enc.") + domain_name(d);
}

} // namespace

SampleInputs build_sample_inputs(const RoiTimeSeries& run, const DatasetConfig& ds) {
    ds.validate();
    SampleInputs out;
    out.modality = run.modality;
    if (run.modality == Modality::FMRI) {
        out.graph = graph_from_connectivity(pearson_connectivity(run.values).matrix);
        out.series = unify_fmri_series(run, ds.fmri_length);
        out.spectrum = fft_magnitude(run.values, ds.frequency_length).values;
    } else {
        out.graph = graph_from_connectivity(power_envelope_connectivity(run.values).matrix);
        out.segments = resample_and_segment_eeg(run, ds.eeg_unified_length,
                                                ds.eeg_segment_length);
        out.spectra = segment_spectra(out.segments, ds.frequency_length);
    }
    return out;
}

SampleInputs build_augmented_inputs(const RoiTimeSeries& run, const DatasetConfig& ds,
                                    const AugmentationConfig& aug, Rng& rng) {
    ds.validate();
    SampleInputs out;
    out.modality = run.modality;
    if (run.modality == Modality::FMRI) {
        BrainGraph base = graph_from_connectivity(pearson_connectivity(run.values).matrix);
        out.graph = augment_graph(base, aug, rng);
        const Matrix unified = unify_fmri_series(run, ds.fmri_length);
        out.series = augment_temporal(unified, Modality::FMRI, aug, rng);
        out.spectrum = augment_frequency(out.series, ds.frequency_length).values;
    } else {
        BrainGraph base =
            graph_from_connectivity(power_envelope_connectivity(run.values).matrix);
        out.graph = augment_graph(base, aug, rng);
        const Matrix unified = resample_rows(run.values, ds.eeg_unified_length);
        const Matrix augmented = augment_temporal(unified, Modality::EEG, aug, rng);
        out.segments = split_segments(augmented, ds.eeg_segment_length);
        out.spectra = segment_spectra(out.segments, ds.frequency_length);
    }
    return out;
}

McspModel::McspModel(const RunConfig& cfg, Eigen::Index n_roi) : cfg_(cfg), n_roi_(n_roi) {
    cfg_.validate();
    require(n_roi > 0, "McspModel: n_roi must be > 0");
    Rng rng = Rng(cfg_.seed).derive(kTagModelInit);

    for (Domain d : {Domain::SPATIAL, Domain::TEMPORAL, Domain::FREQUENCY}) {
        init_encoder_params(ps_, enc_prefix(d), cfg_.encoder(d), n_roi_, rng);
    }
    const Eigen::Index segs = cfg_.dataset.eeg_segments();
    for (Domain d : {Domain::SPATIAL, Domain::TEMPORAL, Domain::FREQUENCY}) {
        const Eigen::Index d_enc = cfg_.encoder(d).d_enc;
        const Eigen::Index eeg_in = d == Domain::SPATIAL ? d_enc : segs * d_enc;
        init_projector_params(ps_, proj_prefix(d, Modality::FMRI), d_enc, cfg_.projector, rng);
        init_projector_params(ps_, proj_prefix(d, Modality::EEG), eeg_in, cfg_.projector, rng);
    }
}

ad_::Var McspModel::forward_domain(const SampleInputs& in, Domain d) const {
    const EncoderConfig& enc = cfg_.encoder(d);
    const std::string ep = enc_prefix(d);
    const std::string pp = proj_prefix(d, in.modality);

    if (d == Domain::SPATIAL) {
        return project_single(encode_spatial(in.graph, ps_, ep, enc).pooled, ps_, pp);
    }

    if (in.modality == Modality::FMRI) {
        const Matrix& x = d == Domain::TEMPORAL ? in.series : in.spectrum;
        const Eigen::Index want =
            d == Domain::TEMPORAL ? cfg_.dataset.fmri_length : cfg_.dataset.frequency_length;
        return project_single(encode_sequence(x, ps_, ep, enc, want).pooled, ps_, pp);
    }

    const SegmentSet& segs = d == Domain::TEMPORAL ? in.segments : in.spectra;
    const Eigen::Index want =
        d == Domain::TEMPORAL ? cfg_.dataset.eeg_segment_length : cfg_.dataset.frequency_length;
    std::vector<ad_::Var> pooled;
    pooled.reserve(segs.segments.size());
    for (const auto& e : encode_eeg_segments(segs, ps_, ep, enc, want)) {
        pooled.push_back(e.pooled);
    }
    return project_segments(pooled, ps_, pp, cfg_.dataset.eeg_segments());
}

DomainProjections McspModel::forward(const SampleInputs& in) const {
    DomainProjections out;
    out.spatial = forward_domain(in, Domain::SPATIAL);
    out.temporal = forward_domain(in, Domain::TEMPORAL);
    out.frequency = forward_domain(in, Domain::FREQUENCY);
    return out;
}

std::size_t McspModel::param_count(Domain d) const {
    const std::string ep = enc_prefix(d) + ".";
    const std::string pf = proj_prefix(d, Modality::FMRI) + ".";
    const std::string pe = proj_prefix(d, Modality::EEG) + ".";
    return ps_.parameters_matching([&](const std::string& n) {
        return n.rfind(ep, 0) == 0 || n.rfind(pf, 0) == 0 || n.rfind(pe, 0) == 0;
    });
}

std::size_t McspModel::total_param_count() const { return ps_.total_parameters(); }

} // namespace mcsp
