#include "mcsp/training.hpp"

#include "mcsp/array_io.hpp"
#include "mcsp/distillation.hpp"
#include "mcsp/ssl_losses.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <unordered_set>

namespace mcsp {

namespace {

constexpr std::uint64_t kTagShuffle = 0x53485546ULL;
constexpr std::uint64_t kTagSplit = 0x53504c4954ULL;
constexpr std::uint64_t kTagFold = 0x464f4c44ULL;
constexpr std::uint64_t kTagHead = 0x48454144ULL;
constexpr std::uint64_t kTagStudent = 0x53545544ULL;

constexpr Domain kDomains[3] = {Domain::SPATIAL, Domain::TEMPORAL, Domain::FREQUENCY};

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

// One training unit: a cross-matched pair, or a lone run of either modality.
struct TrainSample {
    const TrainingSubject* subject = nullptr;
    int fmri = -1;
    int eeg = -1;

    bool paired() const { return fmri >= 0 && eeg >= 0; }
};

std::vector<TrainSample> collect_samples(const TrainingSet& data, int pairs_per_subject) {
    std::vector<TrainSample> out;
    for (const TrainingSubject& s : data) {
        if (s.has_pairs()) {
            int taken = 0;
            for (std::size_t f = 0; f < s.fmri.size(); ++f) {
                for (std::size_t e = 0; e < s.eeg.size(); ++e) {
                    if (pairs_per_subject > 0 && taken >= pairs_per_subject) break;
                    out.push_back({&s, int(f), int(e)});
                    ++taken;
                }
            }
        } else {
            for (std::size_t f = 0; f < s.fmri.size(); ++f) out.push_back({&s, int(f), -1});
            for (std::size_t e = 0; e < s.eeg.size(); ++e) out.push_back({&s, -1, int(e)});
        }
    }
    return out;
}

int infer_n_classes(const TrainingSet& data, const std::string& task) {
    int max_label = -1;
    for (const TrainingSubject& s : data) {
        auto it = s.labels.find(task);
        if (it == s.labels.end()) {
            throw ValidationError("label '" + task + "' missing for subject '" + s.subject_id +
                                  "'");
        }
        require(it->second >= 0, "label '" + task + "' negative for subject '" + s.subject_id +
                                     "'");
        max_label = std::max(max_label, it->second);
    }
    require(max_label >= 1, "task '" + task + "' has fewer than 2 classes");
    return max_label + 1;
}

Matrix one_hot_rows(const std::vector<int>& labels, int n_classes) {
    Matrix y = Matrix::Zero(Eigen::Index(labels.size()), n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        require(labels[i] >= 0 && labels[i] < n_classes, "label out of range");
        y(Eigen::Index(i), labels[i]) = 1.0;
    }
    return y;
}

void init_head_params(ParamStore& ps, Eigen::Index in_dim, int n_classes, Rng& rng) {
    ps.create("head.w1", glorot_init(rng, in_dim, 128));
    ps.create("head.b1", Matrix::Zero(1, 128));
    ps.create("head.w2", glorot_init(rng, 128, n_classes));
    ps.create("head.b2", Matrix::Zero(1, n_classes));
}

ad::Var head_logits(const ParamStore& ps, const ad::Var& x) {
    ad::Var hidden = ad::relu(ad::linear(x, ps.get("head.w1"), ps.get("head.b1")));
    return ad::linear(hidden, ps.get("head.w2"), ps.get("head.b2"));
}

// Rebuilds a model (plus any extra arrays such as the classifier head) from a
// checkpoint's own config snapshot.
McspModel model_from_checkpoint(const Checkpoint& ckpt, Eigen::Index n_roi) {
    RunConfig cfg = parse_config_text(ckpt.config_text, "<checkpoint>");
    McspModel model(cfg, n_roi);
    for (const auto& [name, value] : ckpt.arrays) {
        if (!model.params().has(name)) {
            model.params().create(name, Matrix::Zero(value.rows(), value.cols()));
        }
    }
    restore_params(ckpt, model.params());
    return model;
}

std::uint64_t sample_aug_seed(std::uint64_t base, int epoch, std::size_t sample_index) {
    return Rng::mix(base, Rng::mix(std::uint64_t(epoch), std::uint64_t(sample_index)));
}

// Fused per-domain embedding of one sample's clean views; modality-degenerate
// samples pass their single embedding through unfused.
ad::Var fused_clean_domain(const McspModel& model, const TrainSample& s, Domain d,
                           const SampleInputs* fi, const SampleInputs* ei) {
    if (s.paired()) {
        return fuse_embeddings(model.forward_domain(*fi, d), model.forward_domain(*ei, d));
    }
    return s.fmri >= 0 ? model.forward_domain(*fi, d) : model.forward_domain(*ei, d);
}

void check_unique_ids(const TrainingSet& data, const std::string& where) {
    std::unordered_set<std::string> ids;
    for (const TrainingSubject& s : data) {
        require(ids.insert(s.subject_id).second,
                where + ": duplicate subject id '" + s.subject_id + "'");
    }
}

} // namespace

// ---- optimizer ----

AdamOptimizer::AdamOptimizer(ParamStore& ps, double beta1, double beta2, double eps)
    : ps_(ps), beta1_(beta1), beta2_(beta2), eps_(eps) {
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0,
            "AdamOptimizer: invalid hyperparameters");
    m_.reserve(ps.size());
    v_.reserve(ps.size());
    for (const std::string& name : ps.names()) {
        const Matrix& w = ps.get(name).value();
        m_.push_back(Matrix::Zero(w.rows(), w.cols()));
        v_.push_back(Matrix::Zero(w.rows(), w.cols()));
    }
}

void AdamOptimizer::step(double lr) {
    require(lr > 0.0, "AdamOptimizer: lr must be > 0");
    require(ps_.size() == m_.size(), "AdamOptimizer: parameters added after construction");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    const auto& names = ps_.names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        ad::Var p = ps_.get(names[i]);
        Matrix& m = m_[i];
        Matrix& v = v_[i];
        if (p.has_grad()) {
            const Matrix& g = p.grad();
            m = beta1_ * m + (1.0 - beta1_) * g;
            v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g).matrix();
        } else {
            m *= beta1_;
            v *= beta2_;
        }
        const Matrix update =
            ((m / bc1).array() / ((v / bc2).array().sqrt() + eps_)).matrix();
        p.mutable_value() -= lr * update;
    }
}

double scheduled_lr(const TrainConfig& cfg, long step, long total_steps) {
    if (cfg.lr_schedule == LrSchedule::CONSTANT) return cfg.learning_rate;
    require(total_steps > 0, "scheduled_lr: total_steps must be > 0");
    const double denom = double(std::max<long>(1, total_steps - 1));
    const double frac = std::clamp(double(step) / denom, 0.0, 1.0);
    const double pi = std::acos(-1.0);
    return cfg.lr_min + 0.5 * (cfg.learning_rate - cfg.lr_min) * (1.0 + std::cos(pi * frac));
}

// ---- dataset preparation ----

TrainingRun prepare_run(const RoiTimeSeries& run, const DatasetConfig& ds) {
    ds.validate();
    TrainingRun out;
    out.modality = run.modality;
    if (run.modality == Modality::FMRI) {
        out.graph = graph_from_connectivity(pearson_connectivity(run.values).matrix);
        out.unified = unify_fmri_series(run, ds.fmri_length);
        out.spectrum = fft_magnitude(run.values, ds.frequency_length).values;
    } else {
        out.graph = graph_from_connectivity(power_envelope_connectivity(run.values).matrix);
        out.unified = resample_rows(run.values, ds.eeg_unified_length);
        out.spectra =
            segment_spectra(split_segments(out.unified, ds.eeg_segment_length), ds.frequency_length);
    }
    return out;
}

TrainingSubject prepare_subject(const SubjectRecord& rec, const DatasetConfig& ds) {
    TrainingSubject out;
    out.subject_id = rec.subject_id;
    out.labels = rec.labels;
    out.fmri.reserve(rec.fmri_runs.size());
    out.eeg.reserve(rec.eeg_runs.size());
    for (const RoiTimeSeries& r : rec.fmri_runs) out.fmri.push_back(prepare_run(r, ds));
    for (const RoiTimeSeries& r : rec.eeg_runs) out.eeg.push_back(prepare_run(r, ds));
    return out;
}

TrainingSet prepare_cohort(const std::vector<SubjectRecord>& cohort, const DatasetConfig& ds) {
    TrainingSet out;
    out.reserve(cohort.size());
    for (const SubjectRecord& rec : cohort) out.push_back(prepare_subject(rec, ds));
    return out;
}

SampleInputs clean_views(const TrainingRun& run, const DatasetConfig& ds) {
    ds.validate();
    SampleInputs out;
    out.modality = run.modality;
    out.graph = run.graph;
    if (run.modality == Modality::FMRI) {
        out.series = run.unified;
        out.spectrum = run.spectrum;
    } else {
        out.segments = split_segments(run.unified, ds.eeg_segment_length);
        out.spectra = run.spectra;
    }
    return out;
}

SampleInputs augmented_views(const TrainingRun& run, const DatasetConfig& ds,
                             const AugmentationConfig& aug, Rng& rng) {
    ds.validate();
    SampleInputs out;
    out.modality = run.modality;
    out.graph = augment_graph(run.graph, aug, rng);
    if (run.modality == Modality::FMRI) {
        out.series = augment_temporal(run.unified, Modality::FMRI, aug, rng);
        out.spectrum = augment_frequency(out.series, ds.frequency_length).values;
    } else {
        const Matrix augmented = augment_temporal(run.unified, Modality::EEG, aug, rng);
        out.segments = split_segments(augmented, ds.eeg_segment_length);
        out.spectra = segment_spectra(out.segments, ds.frequency_length);
    }
    return out;
}

Eigen::Index training_set_n_roi(const TrainingSet& data) {
    Eigen::Index n = -1;
    for (const TrainingSubject& s : data) {
        for (const TrainingRun& r : s.fmri) {
            if (n < 0) n = r.graph.n_roi();
            require(n == r.graph.n_roi(), "training set mixes n_roi values");
        }
        for (const TrainingRun& r : s.eeg) {
            if (n < 0) n = r.graph.n_roi();
            require(n == r.graph.n_roi(), "training set mixes n_roi values");
        }
    }
    require(n > 0, "training set has no runs");
    return n;
}

// ---- dataset directories ----

namespace {

void check_built_meta(const DatasetMeta& meta, const DatasetConfig& ds) {
    if (meta.fmri_length != ds.fmri_length) {
        throw ConfigError("built dataset fmri_length " + std::to_string(meta.fmri_length) +
                          " does not match dataset.fmri_length " +
                          std::to_string(ds.fmri_length));
    }
    if (meta.eeg_unified_length != ds.eeg_unified_length) {
        throw ConfigError("built dataset eeg_unified_length does not match the config");
    }
    if (meta.eeg_segment_length != ds.eeg_segment_length) {
        throw ConfigError("built dataset eeg_segment_length does not match the config");
    }
    if (meta.frequency_length != ds.frequency_length) {
        throw ConfigError("built dataset frequency_length does not match the config");
    }
}

TrainingRun load_built_run(const std::string& dir, const ManifestRow& row,
                           const DatasetConfig& ds) {
    const std::string base = (std::filesystem::path(dir) / row.path).string();
    TrainingRun run;
    run.modality = row.modality;
    run.graph = graph_from_connectivity(read_array(base + "_spatial"));
    run.unified = read_array(base + "_temporal");
    const Matrix freq = read_array(base + "_frequency");
    const Eigen::Index n = run.graph.n_roi();
    require(run.unified.rows() == n && freq.rows() == n,
            row.path + ": built arrays disagree on n_roi");
    if (row.modality == Modality::FMRI) {
        require(run.unified.cols() == ds.fmri_length,
                row.path + ": built temporal length mismatch");
        require(freq.cols() == ds.frequency_length,
                row.path + ": built frequency length mismatch");
        run.spectrum = freq;
    } else {
        require(run.unified.cols() == ds.eeg_unified_length,
                row.path + ": built temporal length mismatch");
        const Eigen::Index segs = ds.eeg_segments();
        require(freq.cols() == segs * ds.frequency_length,
                row.path + ": built frequency length mismatch");
        run.spectra.segments.reserve(std::size_t(segs));
        for (Eigen::Index s = 0; s < segs; ++s) {
            run.spectra.segments.push_back(
                freq.middleCols(s * ds.frequency_length, ds.frequency_length));
        }
    }
    return run;
}

} // namespace

TrainingSet load_training_set(const std::string& data_dir, const DatasetConfig& ds) {
    ds.validate();
    const ManifestIndex index = read_manifest(data_dir);
    TrainingSet out;
    out.reserve(index.subjects.size());
    if (index.meta.format == "raw") {
        for (const auto& subj : index.subjects) {
            out.push_back(prepare_subject(load_subject(data_dir, subj), ds));
        }
        return out;
    }
    check_built_meta(index.meta, ds);
    for (const auto& subj : index.subjects) {
        TrainingSubject t;
        t.subject_id = subj.subject_id;
        t.labels = subj.labels;
        for (const ManifestRow& row : subj.fmri_runs) {
            t.fmri.push_back(load_built_run(data_dir, row, ds));
        }
        for (const ManifestRow& row : subj.eeg_runs) {
            t.eeg.push_back(load_built_run(data_dir, row, ds));
        }
        out.push_back(std::move(t));
    }
    return out;
}

void write_built_dataset(const std::string& in_dir, const std::string& out_dir,
                         const DatasetConfig& ds) {
    ds.validate();
    const ManifestIndex index = read_manifest(in_dir);
    if (index.meta.format != "raw") {
        throw ConfigError("build-data input must be a raw dataset, got format '" +
                          index.meta.format + "'");
    }

    DatasetWriter writer(out_dir, index.label_tasks);
    for (const auto& subj : index.subjects) {
        const SubjectRecord rec = load_subject(in_dir, subj);
        auto emit = [&](Modality modality, int run_index, const RoiTimeSeries& raw) {
            const TrainingRun run = prepare_run(raw, ds);
            const std::string rel = writer.array_base(rec.subject_id, modality, run_index);
            const std::string base = (std::filesystem::path(out_dir) / rel).string();
            write_array(base + "_spatial", run.graph.adjacency);
            write_array(base + "_temporal", run.unified);
            if (modality == Modality::FMRI) {
                write_array(base + "_frequency", run.spectrum);
            } else {
                Matrix freq(run.unified.rows(),
                            Eigen::Index(run.spectra.segments.size()) * ds.frequency_length);
                for (std::size_t s = 0; s < run.spectra.segments.size(); ++s) {
                    freq.middleCols(Eigen::Index(s) * ds.frequency_length, ds.frequency_length) =
                        run.spectra.segments[s];
                }
                write_array(base + "_frequency", freq);
            }
            ManifestRow row;
            row.subject_id = rec.subject_id;
            row.modality = modality;
            row.run = run_index;
            row.path = rel;
            row.rate = raw.sampling_rate;
            row.labels = rec.labels;
            writer.add_row(row);
        };
        for (std::size_t r = 0; r < rec.fmri_runs.size(); ++r) {
            emit(Modality::FMRI, int(r), rec.fmri_runs[r]);
        }
        for (std::size_t r = 0; r < rec.eeg_runs.size(); ++r) {
            emit(Modality::EEG, int(r), rec.eeg_runs[r]);
        }
    }

    DatasetMeta meta;
    meta.format = "built";
    meta.fmri_length = ds.fmri_length;
    meta.eeg_unified_length = ds.eeg_unified_length;
    meta.eeg_segment_length = ds.eeg_segment_length;
    meta.frequency_length = ds.frequency_length;
    writer.finalize(meta);
}

// ---- pretraining ----

PretrainResult pretrain(const TrainingSet& data, const RunConfig& cfg) {
    cfg.validate();
    require(!data.empty(), "pretrain: empty dataset");
    const Eigen::Index n_roi = training_set_n_roi(data);
    const std::vector<TrainSample> samples = collect_samples(data, cfg.train.pairs_per_subject);
    require(!samples.empty(), "pretrain: no usable runs");

    bool any_pairs = false;
    for (const TrainSample& s : samples) any_pairs = any_pairs || s.paired();

    McspModel model(cfg, n_roi);
    ParamStore& ps = model.params();
    AdamOptimizer opt(ps);

    const int epochs = cfg.train.effective_pretrain_epochs();
    const std::size_t batch = std::size_t(cfg.train.pretrain_batch);
    const long n_batches = long((samples.size() + batch - 1) / batch);
    const long total_steps = long(epochs) * n_batches;
    const std::uint64_t aug_base = Rng::mix(cfg.train.seed, cfg.augmentation.seed);
    Rng driver = Rng(cfg.train.seed).derive(kTagShuffle);

    struct SampleH {
        bool f = false, e = false;
        Matrix fc[3], fa[3], ec[3], ea[3];
    };
    struct LeafSet {
        ad::Var fc[3], fa[3], ec[3], ea[3];
    };

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t(0));

    std::vector<double> epoch_losses;
    epoch_losses.reserve(std::size_t(epochs));
    long step = 0;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        driver.shuffle(order);
        double loss_sum = 0.0;
        long batches_done = 0;

        for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
            const std::size_t b1 = std::min(order.size(), b0 + batch);
            const std::size_t bsz = b1 - b0;

            // Pass A: value-only forwards; keep the projected embeddings.
            std::vector<SampleH> hs(bsz);
            for (std::size_t k = 0; k < bsz; ++k) {
                const TrainSample& s = samples[order[b0 + k]];
                Rng aug_rng(sample_aug_seed(aug_base, epoch, order[b0 + k]));
                if (s.fmri >= 0) {
                    const TrainingRun& run = s.subject->fmri[std::size_t(s.fmri)];
                    DomainProjections pc = model.forward(clean_views(run, cfg.dataset));
                    DomainProjections pa =
                        model.forward(augmented_views(run, cfg.dataset, cfg.augmentation, aug_rng));
                    for (int d = 0; d < 3; ++d) {
                        hs[k].fc[d] = pc.at(kDomains[d]).value();
                        hs[k].fa[d] = pa.at(kDomains[d]).value();
                    }
                    hs[k].f = true;
                }
                if (s.eeg >= 0) {
                    const TrainingRun& run = s.subject->eeg[std::size_t(s.eeg)];
                    DomainProjections pc = model.forward(clean_views(run, cfg.dataset));
                    DomainProjections pa =
                        model.forward(augmented_views(run, cfg.dataset, cfg.augmentation, aug_rng));
                    for (int d = 0; d < 3; ++d) {
                        hs[k].ec[d] = pc.at(kDomains[d]).value();
                        hs[k].ea[d] = pa.at(kDomains[d]).value();
                    }
                    hs[k].e = true;
                }
            }

            // Loss graph over embedding leaves; backward gives dL/dh.
            std::vector<LeafSet> leaves(bsz);
            std::vector<ad::Var> fc[3], fa[3], ec[3], ea[3], cmf[3], cme[3];
            for (std::size_t k = 0; k < bsz; ++k) {
                for (int d = 0; d < 3; ++d) {
                    if (hs[k].f) {
                        leaves[k].fc[d] = ad::parameter(hs[k].fc[d]);
                        leaves[k].fa[d] = ad::parameter(hs[k].fa[d]);
                        fc[d].push_back(leaves[k].fc[d]);
                        fa[d].push_back(leaves[k].fa[d]);
                    }
                    if (hs[k].e) {
                        leaves[k].ec[d] = ad::parameter(hs[k].ec[d]);
                        leaves[k].ea[d] = ad::parameter(hs[k].ea[d]);
                        ec[d].push_back(leaves[k].ec[d]);
                        ea[d].push_back(leaves[k].ea[d]);
                    }
                    if (hs[k].f && hs[k].e) {
                        cmf[d].push_back(leaves[k].fc[d]);
                        cme[d].push_back(leaves[k].ec[d]);
                    }
                }
            }

            auto zcat = [](const std::vector<ad::Var>& rows) {
                return softmax_rows(ad::concat_rows(rows));
            };

            std::vector<ad::Var> terms;
            if (cfg.train.weight_cd_ssl != 0.0 && !fc[0].empty()) {
                terms.push_back(ad::scale(cd_ssl(zcat(fc[0]), zcat(fc[1]), zcat(fc[2]),
                                                 zcat(fa[0]), zcat(fa[1]), zcat(fa[2]), cfg.loss),
                                          cfg.train.weight_cd_ssl));
            }
            if (cfg.train.weight_cd_ssl != 0.0 && !ec[0].empty()) {
                terms.push_back(ad::scale(cd_ssl(zcat(ec[0]), zcat(ec[1]), zcat(ec[2]),
                                                 zcat(ea[0]), zcat(ea[1]), zcat(ea[2]), cfg.loss),
                                          cfg.train.weight_cd_ssl));
            }
            if (cfg.train.weight_cm_ssl != 0.0 && !cmf[0].empty()) {
                for (int d = 0; d < 3; ++d) {
                    terms.push_back(ad::scale(cm_ssl(ad::concat_rows(cmf[d]),
                                                     ad::concat_rows(cme[d]), cfg.loss,
                                                     kDomains[d]),
                                              cfg.train.weight_cm_ssl));
                }
            }

            if (!terms.empty()) {
                ad::Var loss = terms[0];
                for (std::size_t t = 1; t < terms.size(); ++t) loss = ad::add(loss, terms[t]);
                loss.backward();
                loss_sum += loss.scalar();

                // Pass B: re-forward and seed with the cached cotangents. The
                // augmentation rng is rebuilt from the same per-sample seed, so
                // both passes see identical views.
                auto seed_roots = [](const DomainProjections& pr, const ad::Var leaf[3]) {
                    for (int d = 0; d < 3; ++d) {
                        if (leaf[d].valid() && leaf[d].has_grad()) {
                            pr.at(kDomains[d]).backward(leaf[d].grad());
                        }
                    }
                };
                auto any_grad = [](const ad::Var leaf[3]) {
                    for (int d = 0; d < 3; ++d) {
                        if (leaf[d].valid() && leaf[d].has_grad()) return true;
                    }
                    return false;
                };
                for (std::size_t k = 0; k < bsz; ++k) {
                    const TrainSample& s = samples[order[b0 + k]];
                    const LeafSet& L = leaves[k];
                    const bool need_fa = hs[k].f && any_grad(L.fa);
                    const bool need_ea = hs[k].e && any_grad(L.ea);
                    if (need_fa || need_ea) {
                        Rng aug_rng(sample_aug_seed(aug_base, epoch, order[b0 + k]));
                        SampleInputs fav, eav;
                        if (s.fmri >= 0) {
                            fav = augmented_views(s.subject->fmri[std::size_t(s.fmri)],
                                                  cfg.dataset, cfg.augmentation, aug_rng);
                        }
                        if (s.eeg >= 0) {
                            eav = augmented_views(s.subject->eeg[std::size_t(s.eeg)], cfg.dataset,
                                                  cfg.augmentation, aug_rng);
                        }
                        if (need_fa) seed_roots(model.forward(fav), L.fa);
                        if (need_ea) seed_roots(model.forward(eav), L.ea);
                    }
                    if (hs[k].f && any_grad(L.fc)) {
                        seed_roots(model.forward(clean_views(s.subject->fmri[std::size_t(s.fmri)],
                                                             cfg.dataset)),
                                   L.fc);
                    }
                    if (hs[k].e && any_grad(L.ec)) {
                        seed_roots(model.forward(clean_views(s.subject->eeg[std::size_t(s.eeg)],
                                                             cfg.dataset)),
                                   L.ec);
                    }
                }
            }
            ++batches_done;

            opt.step(scheduled_lr(cfg.train, step, total_steps));
            ps.clear_grads();
            ++step;
        }
        epoch_losses.push_back(batches_done > 0 ? loss_sum / double(batches_done) : 0.0);
    }

    PretrainResult out;
    out.checkpoint = make_checkpoint(ps, cfg, std::uint64_t(step), driver.save_state());
    out.epoch_losses = std::move(epoch_losses);
    out.used_pairs = any_pairs && cfg.train.weight_cm_ssl != 0.0;
    return out;
}

// ---- fold assignment ----

std::vector<int> assign_folds(std::size_t n_subjects, int folds, Rng& rng) {
    require(folds >= 2, "assign_folds: folds must be >= 2");
    require(n_subjects >= std::size_t(folds), "assign_folds: fewer subjects than folds");
    std::vector<std::size_t> idx(n_subjects);
    std::iota(idx.begin(), idx.end(), std::size_t(0));
    rng.shuffle(idx);
    std::vector<int> out(n_subjects, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) out[idx[i]] = int(i % std::size_t(folds));
    return out;
}

std::uint64_t fold_assignment_hash(const std::vector<int>& assignment) {
    std::uint64_t h = 1469598103934665603ULL;
    for (int v : assignment) {
        h ^= std::uint64_t(std::uint32_t(v)) + 0x9e3779b97f4a7c15ULL;
        h *= 1099511628211ULL;
    }
    return h;
}

// ---- fine-tuning ----

Checkpoint finetune_on(const TrainingSet& train, const RunConfig& cfg, const Checkpoint* init,
                       const std::string& task) {
    cfg.validate();
    require(!train.empty(), "finetune: empty dataset");
    const Eigen::Index n_roi = training_set_n_roi(train);
    const int n_classes = infer_n_classes(train, task);
    const std::vector<TrainSample> samples = collect_samples(train, cfg.train.pairs_per_subject);
    require(!samples.empty(), "finetune: no usable runs");

    McspModel model(cfg, n_roi);
    ParamStore& ps = model.params();
    if (init) restore_params(*init, ps);
    Rng head_rng = Rng(cfg.seed).derive(kTagHead);
    init_head_params(ps, 3 * ProjectorConfig::kOut, n_classes, head_rng);
    AdamOptimizer opt(ps);

    const int epochs = cfg.train.effective_finetune_epochs();
    const std::size_t batch = std::size_t(cfg.train.finetune_batch);
    const long n_batches = long((samples.size() + batch - 1) / batch);
    const long total_steps = long(epochs) * n_batches;
    Rng driver = Rng(cfg.train.seed).derive(kTagShuffle);

    struct SampleH {
        bool f = false, e = false;
        Matrix fh[3], eh[3];
    };
    struct LeafSet {
        ad::Var fh[3], eh[3];
    };

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    long step = 0;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        driver.shuffle(order);
        for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
            const std::size_t b1 = std::min(order.size(), b0 + batch);
            const std::size_t bsz = b1 - b0;

            std::vector<SampleH> hs(bsz);
            std::vector<int> labels(bsz, 0);
            for (std::size_t k = 0; k < bsz; ++k) {
                const TrainSample& s = samples[order[b0 + k]];
                labels[k] = s.subject->labels.at(task);
                if (s.fmri >= 0) {
                    DomainProjections p = model.forward(
                        clean_views(s.subject->fmri[std::size_t(s.fmri)], cfg.dataset));
                    for (int d = 0; d < 3; ++d) hs[k].fh[d] = p.at(kDomains[d]).value();
                    hs[k].f = true;
                }
                if (s.eeg >= 0) {
                    DomainProjections p = model.forward(
                        clean_views(s.subject->eeg[std::size_t(s.eeg)], cfg.dataset));
                    for (int d = 0; d < 3; ++d) hs[k].eh[d] = p.at(kDomains[d]).value();
                    hs[k].e = true;
                }
            }

            std::vector<LeafSet> leaves(bsz);
            std::vector<ad::Var> feats;
            feats.reserve(bsz);
            for (std::size_t k = 0; k < bsz; ++k) {
                std::vector<ad::Var> fused(3);
                for (int d = 0; d < 3; ++d) {
                    if (hs[k].f) leaves[k].fh[d] = ad::parameter(hs[k].fh[d]);
                    if (hs[k].e) leaves[k].eh[d] = ad::parameter(hs[k].eh[d]);
                    if (hs[k].f && hs[k].e) {
                        fused[std::size_t(d)] = fuse_embeddings(leaves[k].fh[d], leaves[k].eh[d]);
                    } else {
                        fused[std::size_t(d)] = hs[k].f ? leaves[k].fh[d] : leaves[k].eh[d];
                    }
                }
                feats.push_back(ad::concat_cols(fused));
            }

            ad::Var q = tempered_softmax(head_logits(ps, ad::concat_rows(feats)), 1.0);
            ad::Var loss = hard_target_loss(one_hot_rows(labels, n_classes), q);
            loss.backward();

            auto seed_roots = [](const DomainProjections& pr, const ad::Var leaf[3]) {
                for (int d = 0; d < 3; ++d) {
                    if (leaf[d].valid() && leaf[d].has_grad()) {
                        pr.at(kDomains[d]).backward(leaf[d].grad());
                    }
                }
            };
            auto any_grad = [](const ad::Var leaf[3]) {
                for (int d = 0; d < 3; ++d) {
                    if (leaf[d].valid() && leaf[d].has_grad()) return true;
                }
                return false;
            };
            for (std::size_t k = 0; k < bsz; ++k) {
                const TrainSample& s = samples[order[b0 + k]];
                if (hs[k].f && any_grad(leaves[k].fh)) {
                    seed_roots(model.forward(clean_views(s.subject->fmri[std::size_t(s.fmri)],
                                                         cfg.dataset)),
                               leaves[k].fh);
                }
                if (hs[k].e && any_grad(leaves[k].eh)) {
                    seed_roots(model.forward(clean_views(s.subject->eeg[std::size_t(s.eeg)],
                                                         cfg.dataset)),
                               leaves[k].eh);
                }
            }

            opt.step(scheduled_lr(cfg.train, step, total_steps));
            ps.clear_grads();
            ++step;
        }
    }
    return make_checkpoint(ps, cfg, std::uint64_t(step), driver.save_state());
}

std::map<std::string, double> score_subjects(const TrainingSet& subjects,
                                             const Checkpoint& finetuned) {
    require(!subjects.empty(), "score_subjects: empty set");
    McspModel model = model_from_checkpoint(finetuned, training_set_n_roi(subjects));
    require(model.params().has("head.w1"), "score_subjects: checkpoint has no classifier head");
    require(model.params().get("head.w1").value().rows() == 3 * ProjectorConfig::kOut,
            "score_subjects: checkpoint head is not a full-model head");

    const std::vector<TrainSample> samples =
        collect_samples(subjects, model.config().train.pairs_per_subject);
    std::map<std::string, double> sums;
    std::map<std::string, int> counts;
    for (const TrainSample& s : samples) {
        SampleInputs fi, ei;
        if (s.fmri >= 0) {
            fi = clean_views(s.subject->fmri[std::size_t(s.fmri)], model.config().dataset);
        }
        if (s.eeg >= 0) {
            ei = clean_views(s.subject->eeg[std::size_t(s.eeg)], model.config().dataset);
        }
        std::vector<ad::Var> fused(3);
        for (int d = 0; d < 3; ++d) {
            fused[std::size_t(d)] = fused_clean_domain(model, s, kDomains[d], &fi, &ei);
        }
        ad::Var q = tempered_softmax(head_logits(model.params(), ad::concat_cols(fused)), 1.0);
        sums[s.subject->subject_id] += q.value()(0, 1);
        counts[s.subject->subject_id] += 1;
    }

    std::map<std::string, double> out;
    for (const TrainingSubject& s : subjects) {
        require(counts.count(s.subject_id) > 0,
                "score_subjects: subject '" + s.subject_id + "' has no runs");
        out[s.subject_id] = sums[s.subject_id] / double(counts[s.subject_id]);
    }
    return out;
}

FoldMetrics evaluate_on(const TrainingSet& test, const Checkpoint& finetuned,
                        const std::string& task) {
    const std::map<std::string, double> by_subject = score_subjects(test, finetuned);
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(test.size());
    labels.reserve(test.size());
    for (const TrainingSubject& s : test) {
        auto it = s.labels.find(task);
        if (it == s.labels.end()) {
            throw ValidationError("label '" + task + "' missing for subject '" + s.subject_id +
                                  "'");
        }
        scores.push_back(by_subject.at(s.subject_id));
        labels.push_back(it->second);
    }
    return evaluate_scores(scores, labels);
}

MetricsReport cross_validate(const TrainingSet& data, const RunConfig& cfg, const Checkpoint* init,
                             const std::string& task) {
    cfg.validate();
    require(data.size() >= std::size_t(cfg.train.folds), "cross_validate: fewer subjects than folds");
    check_unique_ids(data, "cross_validate");
    infer_n_classes(data, task);

    std::vector<FoldMetrics> fold_metrics;
    fold_metrics.reserve(std::size_t(cfg.train.repeats) * std::size_t(cfg.train.folds));

    for (int r = 0; r < cfg.train.repeats; ++r) {
        Rng split_rng = Rng(Rng::mix(cfg.train.seed, kTagSplit)).derive(std::uint64_t(r));
        const std::vector<int> assign = assign_folds(data.size(), cfg.train.folds, split_rng);
        for (int f = 0; f < cfg.train.folds; ++f) {
            TrainingSet train_set, test_set;
            for (std::size_t i = 0; i < data.size(); ++i) {
                (assign[i] == f ? test_set : train_set).push_back(data[i]);
            }

            std::unordered_set<std::string> train_ids;
            for (const TrainingSubject& s : train_set) train_ids.insert(s.subject_id);
            for (const TrainingSubject& s : test_set) {
                require(train_ids.count(s.subject_id) == 0,
                        "cross_validate: subject leakage across fold boundary");
            }

            RunConfig fold_cfg = cfg;
            fold_cfg.seed = Rng::mix(
                cfg.seed,
                Rng::mix(kTagFold, std::uint64_t(r) * std::uint64_t(cfg.train.folds) +
                                       std::uint64_t(f)));
            const Checkpoint ck = finetune_on(train_set, fold_cfg, init, task);
            fold_metrics.push_back(evaluate_on(test_set, ck, task));
        }
    }
    return aggregate_metrics(fold_metrics);
}

FinetuneResult finetune(const TrainingSet& data, const RunConfig& cfg, const Checkpoint* init,
                        const std::string& task) {
    FinetuneResult out;
    out.metrics = cross_validate(data, cfg, init, task);
    out.checkpoint = finetune_on(data, cfg, init, task);
    return out;
}

// ---- transfer ----

const char* transfer_scenario_name(TransferScenario s) {
    switch (s) {
        case TransferScenario::CROSS_MODALITY: return "cross-modality";
        case TransferScenario::CROSS_DATASET: return "cross-dataset";
        case TransferScenario::CROSS_TASK: return "cross-task";
        default: return "cross-site";
    }
}

TransferScenario transfer_scenario_from_name(const std::string& name) {
    if (name == "cross-modality") return TransferScenario::CROSS_MODALITY;
    if (name == "cross-dataset") return TransferScenario::CROSS_DATASET;
    if (name == "cross-task") return TransferScenario::CROSS_TASK;
    if (name == "cross-site") return TransferScenario::CROSS_SITE;
    throw ConfigError("unknown transfer scenario '" + name + "'");
}

TransferResult universal_pretrain_transfer(const TrainingSet& pretrain_set,
                                           const TrainingSet& finetune_set,
                                           TransferScenario scenario, const RunConfig& cfg,
                                           const std::string& task) {
    require(!pretrain_set.empty(), "transfer: empty pretrain set");
    require(!finetune_set.empty(), "transfer: empty finetune set");
    require(training_set_n_roi(pretrain_set) == training_set_n_roi(finetune_set),
            "transfer: incompatible shapes between pretrain and finetune sets");

    TransferResult out;
    out.scenario = scenario;
    const PretrainResult pre = pretrain(pretrain_set, cfg);
    out.pretrained = cross_validate(finetune_set, cfg, &pre.checkpoint, task);
    out.scratch = cross_validate(finetune_set, cfg, nullptr, task);
    out.auroc_delta = out.pretrained.auroc.mean - out.scratch.auroc.mean;
    out.accuracy_delta = out.pretrained.accuracy.mean - out.scratch.accuracy.mean;
    return out;
}

// ---- distillation ----

Checkpoint distill_student(const TrainingSet& train, const Checkpoint& teacher,
                           Domain student_domain, const RunConfig& cfg, const std::string& task) {
    cfg.validate();
    require(!train.empty(), "distill: empty dataset");
    const Eigen::Index n_roi = training_set_n_roi(train);
    const int n_classes = infer_n_classes(train, task);
    const std::vector<TrainSample> samples = collect_samples(train, cfg.train.pairs_per_subject);
    require(!samples.empty(), "distill: no usable runs");

    McspModel teacher_model = model_from_checkpoint(teacher, n_roi);
    require(teacher_model.params().has("head.w1"),
            "distill: teacher checkpoint has no classifier head");
    require(teacher_model.params().get("head.w2").value().cols() == n_classes,
            "distill: teacher head class count does not match the task");
    const DatasetConfig& tds = teacher_model.config().dataset;
    require(tds.fmri_length == cfg.dataset.fmri_length &&
                tds.eeg_unified_length == cfg.dataset.eeg_unified_length &&
                tds.eeg_segment_length == cfg.dataset.eeg_segment_length &&
                tds.frequency_length == cfg.dataset.frequency_length,
            "distill: teacher dataset config does not match");

    // Teacher is frozen and sees clean views only, so its tempered
    // distributions are constants of the run; compute them once.
    std::vector<Matrix> teacher_p(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const TrainSample& s = samples[i];
        SampleInputs fi, ei;
        if (s.fmri >= 0) fi = clean_views(s.subject->fmri[std::size_t(s.fmri)], cfg.dataset);
        if (s.eeg >= 0) ei = clean_views(s.subject->eeg[std::size_t(s.eeg)], cfg.dataset);
        std::vector<ad::Var> fused(3);
        for (int d = 0; d < 3; ++d) {
            fused[std::size_t(d)] = fused_clean_domain(teacher_model, s, kDomains[d], &fi, &ei);
        }
        teacher_p[i] = tempered_softmax(head_logits(teacher_model.params(), ad::concat_cols(fused)),
                                        cfg.distill.temperature)
                           .value();
    }

    RunConfig scfg = cfg;
    scfg.seed = Rng::mix(cfg.seed, kTagStudent);
    McspModel student(scfg, n_roi);
    ParamStore& ps = student.params();
    Rng head_rng = Rng(scfg.seed).derive(kTagHead);
    init_head_params(ps, ProjectorConfig::kOut, n_classes, head_rng);
    AdamOptimizer opt(ps);

    const int epochs = cfg.train.effective_finetune_epochs();
    const std::size_t batch = std::size_t(cfg.train.finetune_batch);
    const long n_batches = long((samples.size() + batch - 1) / batch);
    const long total_steps = long(epochs) * n_batches;
    Rng driver = Rng(cfg.train.seed).derive(kTagShuffle);

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    long step = 0;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        driver.shuffle(order);
        for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
            const std::size_t b1 = std::min(order.size(), b0 + batch);
            const std::size_t bsz = b1 - b0;

            struct SampleH {
                bool f = false, e = false;
                Matrix fh, eh;
            };
            std::vector<SampleH> hs(bsz);
            std::vector<int> labels(bsz, 0);
            Matrix p_rows(Eigen::Index(bsz), n_classes);
            for (std::size_t k = 0; k < bsz; ++k) {
                const TrainSample& s = samples[order[b0 + k]];
                labels[k] = s.subject->labels.at(task);
                p_rows.row(Eigen::Index(k)) = teacher_p[order[b0 + k]].row(0);
                if (s.fmri >= 0) {
                    hs[k].fh = student
                                   .forward_domain(clean_views(s.subject->fmri[std::size_t(s.fmri)],
                                                               cfg.dataset),
                                                   student_domain)
                                   .value();
                    hs[k].f = true;
                }
                if (s.eeg >= 0) {
                    hs[k].eh = student
                                   .forward_domain(clean_views(s.subject->eeg[std::size_t(s.eeg)],
                                                               cfg.dataset),
                                                   student_domain)
                                   .value();
                    hs[k].e = true;
                }
            }

            struct LeafPair {
                ad::Var fh, eh;
            };
            std::vector<LeafPair> leaves(bsz);
            std::vector<ad::Var> feats;
            feats.reserve(bsz);
            for (std::size_t k = 0; k < bsz; ++k) {
                if (hs[k].f) leaves[k].fh = ad::parameter(hs[k].fh);
                if (hs[k].e) leaves[k].eh = ad::parameter(hs[k].eh);
                if (hs[k].f && hs[k].e) {
                    feats.push_back(fuse_embeddings(leaves[k].fh, leaves[k].eh));
                } else {
                    feats.push_back(hs[k].f ? leaves[k].fh : leaves[k].eh);
                }
            }

            ad::Var q = tempered_softmax(head_logits(ps, ad::concat_rows(feats)),
                                         cfg.distill.temperature);
            ad::Var loss =
                distill_step_loss(ad::constant(p_rows), q, one_hot_rows(labels, n_classes),
                                  cfg.distill);
            loss.backward();

            for (std::size_t k = 0; k < bsz; ++k) {
                const TrainSample& s = samples[order[b0 + k]];
                if (hs[k].f && leaves[k].fh.has_grad()) {
                    student
                        .forward_domain(clean_views(s.subject->fmri[std::size_t(s.fmri)],
                                                    cfg.dataset),
                                        student_domain)
                        .backward(leaves[k].fh.grad());
                }
                if (hs[k].e && leaves[k].eh.has_grad()) {
                    student
                        .forward_domain(clean_views(s.subject->eeg[std::size_t(s.eeg)],
                                                    cfg.dataset),
                                        student_domain)
                        .backward(leaves[k].eh.grad());
                }
            }

            opt.step(scheduled_lr(cfg.train, step, total_steps));
            ps.clear_grads();
            ++step;
        }
    }
    return make_checkpoint(ps, scfg, std::uint64_t(step), driver.save_state());
}

std::map<std::string, double> score_subjects_single_domain(const TrainingSet& subjects,
                                                           const Checkpoint& student,
                                                           Domain student_domain) {
    require(!subjects.empty(), "score_subjects_single_domain: empty set");
    McspModel model = model_from_checkpoint(student, training_set_n_roi(subjects));
    require(model.params().has("head.w1"),
            "score_subjects_single_domain: checkpoint has no classifier head");
    require(model.params().get("head.w1").value().rows() == ProjectorConfig::kOut,
            "score_subjects_single_domain: checkpoint head is not a single-domain head");

    const std::vector<TrainSample> samples =
        collect_samples(subjects, model.config().train.pairs_per_subject);
    std::map<std::string, double> sums;
    std::map<std::string, int> counts;
    for (const TrainSample& s : samples) {
        ad::Var feat;
        if (s.paired()) {
            feat = fuse_embeddings(
                model.forward_domain(clean_views(s.subject->fmri[std::size_t(s.fmri)],
                                                 model.config().dataset),
                                     student_domain),
                model.forward_domain(clean_views(s.subject->eeg[std::size_t(s.eeg)],
                                                 model.config().dataset),
                                     student_domain));
        } else if (s.fmri >= 0) {
            feat = model.forward_domain(clean_views(s.subject->fmri[std::size_t(s.fmri)],
                                                    model.config().dataset),
                                        student_domain);
        } else {
            feat = model.forward_domain(clean_views(s.subject->eeg[std::size_t(s.eeg)],
                                                    model.config().dataset),
                                        student_domain);
        }
        ad::Var q = tempered_softmax(head_logits(model.params(), feat), 1.0);
        sums[s.subject->subject_id] += q.value()(0, 1);
        counts[s.subject->subject_id] += 1;
    }

    std::map<std::string, double> out;
    for (const TrainingSubject& s : subjects) {
        require(counts.count(s.subject_id) > 0,
                "score_subjects_single_domain: subject '" + s.subject_id + "' has no runs");
        out[s.subject_id] = sums[s.subject_id] / double(counts[s.subject_id]);
    }
    return out;
}

FoldMetrics evaluate_single_domain(const TrainingSet& test, const Checkpoint& student,
                                   Domain student_domain, const std::string& task) {
    const std::map<std::string, double> by_subject =
        score_subjects_single_domain(test, student, student_domain);
    std::vector<double> scores;
    std::vector<int> labels;
    for (const TrainingSubject& s : test) {
        auto it = s.labels.find(task);
        if (it == s.labels.end()) {
            throw ValidationError("label '" + task + "' missing for subject '" + s.subject_id +
                                  "'");
        }
        scores.push_back(by_subject.at(s.subject_id));
        labels.push_back(it->second);
    }
    return evaluate_scores(scores, labels);
}

} // namespace mcsp
