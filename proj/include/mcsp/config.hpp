#pragma once

#include "mcsp/augmentation.hpp"
#include "mcsp/matrix.hpp"

#include <cstdint>
#include <string>

namespace mcsp {

enum class Domain { SPATIAL, TEMPORAL, FREQUENCY };

const char* domain_name(Domain d);
Domain domain_from_name(const std::string& name);

struct EncoderConfig {
    Eigen::Index d_model = 64;
    Eigen::Index n_heads = 4;
    Eigen::Index n_layers = 2;
    Eigen::Index d_enc = 64;
    Domain domain = Domain::SPATIAL;

    void validate(const std::string& where) const;
};

enum class InfoNceVariant { LITERAL, NTXENT };

struct LossConfig {
    double tau = 0.2;
    double alpha_cd = 0.5;
    double alpha_cm = 0.8;
    bool teacher_stopgrad = true;
    InfoNceVariant infonce_variant = InfoNceVariant::LITERAL;

    void validate() const;
};

struct ProjectorConfig {
    Eigen::Index hidden = 128;
    // Output width is pinned to 128 by the shared-space contract.
    static constexpr Eigen::Index kOut = 128;

    void validate() const;
};

enum class LrSchedule { CONSTANT, COSINE };

struct TrainConfig {
    int epochs = 50;
    // 0 = inherit `epochs`; separate budgets let desk runs shorten one stage.
    int pretrain_epochs = 0;
    int finetune_epochs = 0;
    int pretrain_batch = 128;
    int finetune_batch = 32;
    double learning_rate = 5e-4;
    double lr_min = 5e-6;
    LrSchedule lr_schedule = LrSchedule::COSINE;
    std::uint64_t seed = 0;
    int folds = 10;
    int repeats = 10;
    // 0 = use every cross-matched pair; otherwise cap per subject.
    int pairs_per_subject = 0;
    double weight_cd_ssl = 1.0;
    double weight_cm_ssl = 1.0;

    int effective_pretrain_epochs() const {
        return pretrain_epochs > 0 ? pretrain_epochs : epochs;
    }
    int effective_finetune_epochs() const {
        return finetune_epochs > 0 ? finetune_epochs : epochs;
    }

    void validate() const;
};

struct DistillConfig {
    double lambda_soft = 0.5;
    double temperature = 1.0;

    void validate() const;
};

struct DatasetConfig {
    Eigen::Index fmri_length = 200;
    Eigen::Index eeg_unified_length = 25000;
    Eigen::Index eeg_segment_length = 200;
    Eigen::Index frequency_length = 200;

    Eigen::Index eeg_segments() const { return eeg_unified_length / eeg_segment_length; }

    void validate() const;
};

struct RunConfig {
    std::uint64_t seed = 0;
    DatasetConfig dataset;
    AugmentationConfig augmentation;
    EncoderConfig encoder_spatial;
    EncoderConfig encoder_temporal;
    EncoderConfig encoder_frequency;
    ProjectorConfig projector;
    LossConfig loss;
    TrainConfig train;
    DistillConfig distill;

    const EncoderConfig& encoder(Domain d) const {
        switch (d) {
            case Domain::SPATIAL: return encoder_spatial;
            case Domain::TEMPORAL: return encoder_temporal;
            default: return encoder_frequency;
        }
    }

    void validate() const;
};

// Built-in defaults; spatial d_model is widened so the spatial sub-model
// lands on its parameter budget (see configs/default.cfg).
RunConfig default_config();

// `key = value` lines with '#' comments; unknown keys are errors.
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");
RunConfig parse_config_file(const std::string& path);

void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value);

// Full echo of every key in schema order; parse(serialize(c)) == c.
std::string serialize_config(const RunConfig& cfg);

} // namespace mcsp
