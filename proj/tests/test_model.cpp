#include "doctest.h"

#include "mcsp/errors.hpp"
#include "mcsp/model.hpp"

#include "fd_check.hpp"

using namespace mcsp;
namespace ad = mcsp::ad;
using testutil::random_matrix;

namespace {

RunConfig desk_config() {
    RunConfig cfg = default_config();
    for (auto* enc : {&cfg.encoder_spatial, &cfg.encoder_temporal, &cfg.encoder_frequency}) {
        enc->d_model = 8;
        enc->n_heads = 2;
        enc->n_layers = 1;
        enc->d_enc = 8;
    }
    cfg.dataset.fmri_length = 16;
    cfg.dataset.eeg_unified_length = 32;
    cfg.dataset.eeg_segment_length = 16;
    cfg.dataset.frequency_length = 16;
    return cfg;
}

RoiTimeSeries make_run(Rng& rng, Modality m, Eigen::Index n_roi, Eigen::Index length) {
    RoiTimeSeries run;
    run.values = random_matrix(rng, n_roi, length);
    run.sampling_rate = m == Modality::EEG ? 1000.0 : 0.5;
    run.modality = m;
    return run;
}

} // namespace

TEST_CASE("default sub-model parameter counts hit the published budgets") {
    McspModel model(default_config(), 100);
    const std::size_t spatial = model.param_count(Domain::SPATIAL);
    const std::size_t temporal = model.param_count(Domain::TEMPORAL);
    const std::size_t frequency = model.param_count(Domain::FREQUENCY);

    CHECK(spatial == 1232762u);
    CHECK(temporal == 1176192u);
    CHECK(frequency == 1176192u);

    CHECK(double(spatial) > 0.9 * 1.2e6);
    CHECK(double(spatial) < 1.1 * 1.2e6);
    CHECK(double(temporal) > 0.9 * 1.1e6);
    CHECK(double(temporal) < 1.1 * 1.1e6);
    CHECK(double(frequency) > 0.9 * 1.1e6);
    CHECK(double(frequency) < 1.1 * 1.1e6);

    CHECK(spatial + temporal + frequency == model.total_param_count());
}

TEST_CASE("model construction is deterministic in the seed") {
    RunConfig cfg = desk_config();
    cfg.seed = 17;
    McspModel a(cfg, 5);
    McspModel b(cfg, 5);
    REQUIRE(a.params().names() == b.params().names());
    for (const auto& name : a.params().names()) {
        CHECK(a.params().get(name).value() == b.params().get(name).value());
    }
    cfg.seed = 18;
    McspModel c(cfg, 5);
    CHECK((a.params().get("enc.spatial.embed.w").value() -
           c.params().get("enc.spatial.embed.w").value())
              .cwiseAbs()
              .maxCoeff() > 1e-8);
}

TEST_CASE("forward produces one 128-d row per domain for both modalities") {
    RunConfig cfg = desk_config();
    McspModel model(cfg, 6);
    Rng rng(91);

    const RoiTimeSeries fmri = make_run(rng, Modality::FMRI, 6, 37);
    const RoiTimeSeries eeg = make_run(rng, Modality::EEG, 6, 96);

    for (const RoiTimeSeries& run : {fmri, eeg}) {
        SampleInputs in = build_sample_inputs(run, cfg.dataset);
        DomainProjections h = model.forward(in);
        for (Domain d : {Domain::SPATIAL, Domain::TEMPORAL, Domain::FREQUENCY}) {
            const Matrix& v = h.at(d).value();
            CHECK(v.rows() == 1);
            CHECK(v.cols() == 128);
            CHECK(v.allFinite());
        }
    }
}

TEST_CASE("clean input construction matches the per-domain recipes") {
    RunConfig cfg = desk_config();
    Rng rng(93);
    const RoiTimeSeries fmri = make_run(rng, Modality::FMRI, 4, 29);
    SampleInputs in = build_sample_inputs(fmri, cfg.dataset);

    CHECK(in.graph.node_features ==
          graph_from_connectivity(pearson_connectivity(fmri.values).matrix).node_features);
    CHECK(in.series == unify_fmri_series(fmri, cfg.dataset.fmri_length));
    CHECK(in.spectrum == fft_magnitude(fmri.values, cfg.dataset.frequency_length).values);

    const RoiTimeSeries eeg = make_run(rng, Modality::EEG, 4, 96);
    SampleInputs ein = build_sample_inputs(eeg, cfg.dataset);
    REQUIRE(Eigen::Index(ein.segments.segments.size()) == cfg.dataset.eeg_segments());
    REQUIRE(ein.spectra.segments.size() == ein.segments.segments.size());
    for (std::size_t s = 0; s < ein.segments.segments.size(); ++s) {
        CHECK(ein.spectra.segments[s] ==
              fft_magnitude(ein.segments.segments[s], cfg.dataset.frequency_length).values);
    }
}

TEST_CASE("augmented views differ from clean views but keep shapes") {
    RunConfig cfg = desk_config();
    Rng rng(97);
    McspModel model(cfg, 5);

    for (Modality m : {Modality::FMRI, Modality::EEG}) {
        const RoiTimeSeries run = make_run(rng, m, 5, m == Modality::EEG ? 96 : 41);
        SampleInputs clean = build_sample_inputs(run, cfg.dataset);
        Rng aug_rng(123);
        SampleInputs aug = build_augmented_inputs(run, cfg.dataset, cfg.augmentation, aug_rng);

        CHECK(aug.graph.adjacency.rows() == clean.graph.adjacency.rows());
        CHECK((aug.graph.adjacency - clean.graph.adjacency).cwiseAbs().maxCoeff() > 1e-12);
        if (m == Modality::FMRI) {
            CHECK(aug.series.cols() == clean.series.cols());
            CHECK((aug.series - clean.series).cwiseAbs().maxCoeff() > 1e-12);
        } else {
            REQUIRE(aug.segments.segments.size() == clean.segments.segments.size());
            CHECK((aug.segments.segments[0] - clean.segments.segments[0])
                      .cwiseAbs()
                      .maxCoeff() > 1e-12);
        }

        DomainProjections h = model.forward(aug);
        for (Domain d : {Domain::SPATIAL, Domain::TEMPORAL, Domain::FREQUENCY}) {
            CHECK(h.at(d).value().allFinite());
        }

        Rng aug_rng2(123);
        SampleInputs again = build_augmented_inputs(run, cfg.dataset, cfg.augmentation, aug_rng2);
        CHECK(again.graph.adjacency == aug.graph.adjacency);
    }
}

TEST_CASE("encoders are shared across modalities and gradients reach them") {
    RunConfig cfg = desk_config();
    McspModel model(cfg, 4);
    Rng rng(101);

    const RoiTimeSeries fmri = make_run(rng, Modality::FMRI, 4, 33);
    const RoiTimeSeries eeg = make_run(rng, Modality::EEG, 4, 96);
    SampleInputs fin = build_sample_inputs(fmri, cfg.dataset);
    SampleInputs ein = build_sample_inputs(eeg, cfg.dataset);

    model.params().clear_grads();
    ad::sum_all(model.forward_domain(fin, Domain::TEMPORAL)).backward();
    const Matrix g_fmri = model.params().get("enc.temporal.embed.w").grad();
    CHECK(model.params().get("proj.temporal.fmri.w1").has_grad());
    CHECK_FALSE(model.params().get("proj.temporal.eeg.w1").has_grad());

    model.params().clear_grads();
    ad::sum_all(model.forward_domain(ein, Domain::TEMPORAL)).backward();
    const Matrix g_eeg = model.params().get("enc.temporal.embed.w").grad();
    CHECK(model.params().get("proj.temporal.eeg.w1").has_grad());

    CHECK(g_fmri.allFinite());
    CHECK(g_eeg.allFinite());
    CHECK((g_fmri - g_eeg).cwiseAbs().maxCoeff() > 1e-12);
}

TEST_CASE("model rejects mismatched ROI counts") {
    RunConfig cfg = desk_config();
    McspModel model(cfg, 4);
    Rng rng(103);
    const RoiTimeSeries run = make_run(rng, Modality::FMRI, 5, 33);
    SampleInputs in = build_sample_inputs(run, cfg.dataset);
    CHECK_THROWS_AS(model.forward(in), ValidationError);
}
