#pragma once

#include "mcsp/checkpoint.hpp"
#include "mcsp/metrics.hpp"
#include "mcsp/model.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mcsp {

// Adam over every parameter in the store, in creation order. Parameters
// without a gradient this step are treated as zero-gradient.
class AdamOptimizer {
public:
    explicit AdamOptimizer(ParamStore& ps, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8);

    void step(double lr);
    long steps_taken() const { return t_; }

private:
    ParamStore& ps_;
    double beta1_;
    double beta2_;
    double eps_;
    long t_ = 0;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
};

// Cosine decay from learning_rate to lr_min across total_steps; constant
// schedule ignores the step.
double scheduled_lr(const TrainConfig& cfg, long step, long total_steps);

// One recording in training-ready form: clean connectivity graph, the
// unified temporal series, and the clean spectra. This is exactly what the
// built dataset format materializes, so training consumes raw and built
// datasets through the same type.
struct TrainingRun {
    Modality modality = Modality::FMRI;
    BrainGraph graph;
    Matrix unified;
    Matrix spectrum;    // fMRI
    SegmentSet spectra; // EEG, per segment
};

struct TrainingSubject {
    std::string subject_id;
    std::vector<TrainingRun> fmri;
    std::vector<TrainingRun> eeg;
    std::map<std::string, int> labels;

    bool has_pairs() const { return !fmri.empty() && !eeg.empty(); }
};

using TrainingSet = std::vector<TrainingSubject>;

TrainingRun prepare_run(const RoiTimeSeries& run, const DatasetConfig& ds);
TrainingSubject prepare_subject(const SubjectRecord& rec, const DatasetConfig& ds);
TrainingSet prepare_cohort(const std::vector<SubjectRecord>& cohort, const DatasetConfig& ds);

SampleInputs clean_views(const TrainingRun& run, const DatasetConfig& ds);
SampleInputs augmented_views(const TrainingRun& run, const DatasetConfig& ds,
                             const AugmentationConfig& aug, Rng& rng);

Eigen::Index training_set_n_roi(const TrainingSet& data);

// Loads a dataset directory in either manifest format. Raw runs are prepared
// with `ds`; a built directory must have been materialized with the same
// lengths.
TrainingSet load_training_set(const std::string& data_dir, const DatasetConfig& ds);

// Materializes a raw dataset as a built one: a spatial/temporal/frequency
// array triple per run (EEG frequency = per-segment spectra side by side).
void write_built_dataset(const std::string& in_dir, const std::string& out_dir,
                         const DatasetConfig& ds);

// ---- pretraining ----

struct PretrainResult {
    Checkpoint checkpoint;
    std::vector<double> epoch_losses;
    bool used_pairs = false;
};

// Self-supervised pretraining. Paired subjects activate the cross-modal
// terms; a single-modality set falls back to cross-domain terms only.
PretrainResult pretrain(const TrainingSet& data, const RunConfig& cfg);

// ---- fine-tuning and evaluation ----

// Shuffled subjects dealt round-robin into folds (sizes differ by at most 1).
std::vector<int> assign_folds(std::size_t n_subjects, int folds, Rng& rng);
std::uint64_t fold_assignment_hash(const std::vector<int>& assignment);

// Trains the classifier head (and backbone) on the whole given set; the
// returned checkpoint contains backbone plus head arrays.
Checkpoint finetune_on(const TrainingSet& train, const RunConfig& cfg, const Checkpoint* init,
                       const std::string& task);

// Subject-level scores (probability of class 1) under a finetuned model.
std::map<std::string, double> score_subjects(const TrainingSet& subjects,
                                             const Checkpoint& finetuned);

FoldMetrics evaluate_on(const TrainingSet& test, const Checkpoint& finetuned,
                        const std::string& task);

// repeats x folds subject-level cross-validation; init = nullptr fine-tunes
// from scratch.
MetricsReport cross_validate(const TrainingSet& data, const RunConfig& cfg,
                             const Checkpoint* init, const std::string& task);

struct FinetuneResult {
    Checkpoint checkpoint; // trained on the full set
    MetricsReport metrics; // cross-validated
};

FinetuneResult finetune(const TrainingSet& data, const RunConfig& cfg, const Checkpoint* init,
                        const std::string& task);

// ---- transfer scenarios ----

enum class TransferScenario { CROSS_MODALITY, CROSS_DATASET, CROSS_TASK, CROSS_SITE };

const char* transfer_scenario_name(TransferScenario s);
TransferScenario transfer_scenario_from_name(const std::string& name);

struct TransferResult {
    TransferScenario scenario = TransferScenario::CROSS_MODALITY;
    MetricsReport pretrained;
    MetricsReport scratch;
    double auroc_delta = 0.0;
    double accuracy_delta = 0.0;
};

TransferResult universal_pretrain_transfer(const TrainingSet& pretrain_set,
                                           const TrainingSet& finetune_set,
                                           TransferScenario scenario, const RunConfig& cfg,
                                           const std::string& task);

// ---- cross-model distillation ----

// Trains a single-domain student against a frozen finetuned teacher with the
// blended soft/hard objective (lambda_soft = 0 reduces to plain supervised
// training of the student).
Checkpoint distill_student(const TrainingSet& train, const Checkpoint& teacher,
                           Domain student_domain, const RunConfig& cfg, const std::string& task);

std::map<std::string, double> score_subjects_single_domain(const TrainingSet& subjects,
                                                           const Checkpoint& student,
                                                           Domain student_domain);

FoldMetrics evaluate_single_domain(const TrainingSet& test, const Checkpoint& student,
                                   Domain student_domain, const std::string& task);

} // namespace mcsp
