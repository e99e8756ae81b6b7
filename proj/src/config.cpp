#include "mcsp/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace mcsp {

const char* domain_name(Domain d) {
    switch (d) {
        case Domain::SPATIAL: return "spatial";
        case Domain::TEMPORAL: return "temporal";
        default: return "frequency";
    }
}

Domain domain_from_name(const std::string& name) {
    if (name == "spatial") return Domain::SPATIAL;
    if (name == "temporal") return Domain::TEMPORAL;
    if (name == "frequency") return Domain::FREQUENCY;
    throw ConfigError("unknown domain '" + name + "'");
}

void EncoderConfig::validate(const std::string& where) const {
    if (d_model <= 0 || n_heads <= 0 || n_layers <= 0 || d_enc <= 0) {
        throw ConfigError(where + ": encoder dimensions must be positive");
    }
    if (d_model % n_heads != 0) {
        throw ConfigError(where + ": d_model must be divisible by n_heads");
    }
}

void LossConfig::validate() const {
    if (!(tau > 0.0)) throw ConfigError("loss.tau: must be > 0");
    if (alpha_cd < 0.0 || alpha_cd > 1.0) throw ConfigError("loss.alpha_cd: must be in [0,1]");
    if (alpha_cm < 0.0 || alpha_cm > 1.0) throw ConfigError("loss.alpha_cm: must be in [0,1]");
}

void ProjectorConfig::validate() const {
    if (hidden <= 0) throw ConfigError("projector.hidden: must be > 0");
}

void TrainConfig::validate() const {
    if (epochs <= 0) throw ConfigError("train.epochs: must be > 0");
    if (pretrain_epochs < 0 || finetune_epochs < 0) {
        throw ConfigError("train.pretrain_epochs/finetune_epochs: must be >= 0");
    }
    if (pretrain_batch <= 0 || finetune_batch <= 0) {
        throw ConfigError("train batch sizes must be > 0");
    }
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate: must be > 0");
    if (lr_min < 0.0 || lr_min > learning_rate) {
        throw ConfigError("train.lr_min: must be in [0, learning_rate]");
    }
    if (folds < 2) throw ConfigError("train.folds: must be >= 2");
    if (repeats < 1) throw ConfigError("train.repeats: must be >= 1");
    if (pairs_per_subject < 0) throw ConfigError("train.pairs_per_subject: must be >= 0");
    if (weight_cd_ssl < 0.0 || weight_cm_ssl < 0.0) {
        throw ConfigError("train loss weights must be >= 0");
    }
}

void DistillConfig::validate() const {
    if (lambda_soft < 0.0 || lambda_soft > 1.0) {
        throw ConfigError("distill.lambda_soft: must be in [0,1]");
    }
    if (!(temperature > 0.0)) throw ConfigError("distill.temperature: must be > 0");
}

void DatasetConfig::validate() const {
    if (fmri_length < 2) throw ConfigError("dataset.fmri_length: must be >= 2");
    if (frequency_length < 2) throw ConfigError("dataset.frequency_length: must be >= 2");
    if (eeg_segment_length < 2) throw ConfigError("dataset.eeg_segment_length: must be >= 2");
    if (eeg_unified_length < 2 || eeg_unified_length % eeg_segment_length != 0) {
        throw ConfigError(
            "dataset.eeg_unified_length: must be a positive multiple of eeg_segment_length");
    }
}

void RunConfig::validate() const {
    dataset.validate();
    augmentation.validate();
    encoder_spatial.validate("encoder.spatial");
    encoder_temporal.validate("encoder.temporal");
    encoder_frequency.validate("encoder.frequency");
    projector.validate();
    loss.validate();
    train.validate();
    distill.validate();
}

RunConfig default_config() {
    RunConfig cfg;
    cfg.encoder_spatial.domain = Domain::SPATIAL;
    cfg.encoder_spatial.d_model = 216;
    cfg.encoder_temporal.domain = Domain::TEMPORAL;
    cfg.encoder_frequency.domain = Domain::FREQUENCY;
    return cfg;
}

namespace {

struct KeyDef {
    std::string key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

long long parse_int(const std::string& key, const std::string& value) {
    long long out = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || p != value.data() + value.size()) {
        throw ConfigError(key + ": expected integer, got '" + value + "'");
    }
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || p != value.data() + value.size()) {
        throw ConfigError(key + ": expected unsigned integer, got '" + value + "'");
    }
    return out;
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double out = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected real number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::string format_real(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::vector<KeyDef> build_schema() {
    std::vector<KeyDef> schema;
    auto add = [&](const std::string& key, auto set, auto get) {
        schema.push_back({key, set, get});
    };

    add(
        "seed", [](RunConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); },
        [](const RunConfig& c) { return std::to_string(c.seed); });

    auto add_index = [&](const std::string& key, Eigen::Index DatasetConfig::* f) {
        add(
            key,
            [key, f](RunConfig& c, const std::string& v) {
                c.dataset.*f = static_cast<Eigen::Index>(parse_int(key, v));
            },
            [f](const RunConfig& c) { return std::to_string(c.dataset.*f); });
    };
    add_index("dataset.fmri_length", &DatasetConfig::fmri_length);
    add_index("dataset.eeg_unified_length", &DatasetConfig::eeg_unified_length);
    add_index("dataset.eeg_segment_length", &DatasetConfig::eeg_segment_length);
    add_index("dataset.frequency_length", &DatasetConfig::frequency_length);

    auto add_aug_real = [&](const std::string& key, double AugmentationConfig::* f) {
        add(
            key,
            [key, f](RunConfig& c, const std::string& v) {
                c.augmentation.*f = parse_real(key, v);
            },
            [f](const RunConfig& c) { return format_real(c.augmentation.*f); });
    };
    add_aug_real("augmentation.edge_drop_min", &AugmentationConfig::edge_drop_min);
    add_aug_real("augmentation.edge_drop_max", &AugmentationConfig::edge_drop_max);
    add_aug_real("augmentation.edge_perturb_sigma", &AugmentationConfig::edge_perturb_sigma);
    add_aug_real("augmentation.noise_sigma", &AugmentationConfig::noise_sigma);
    add_aug_real("augmentation.point_drop_fraction", &AugmentationConfig::point_drop_fraction);
    add(
        "augmentation.mode",
        [](RunConfig& c, const std::string& v) {
            if (v == "remove") {
                c.augmentation.mode = GraphAugMode::REMOVE;
            } else if (v == "perturb") {
                c.augmentation.mode = GraphAugMode::PERTURB;
            } else {
                throw ConfigError("augmentation.mode: expected remove or perturb, got '" + v +
                                  "'");
            }
        },
        [](const RunConfig& c) {
            return std::string(c.augmentation.mode == GraphAugMode::REMOVE ? "remove"
                                                                           : "perturb");
        });
    add(
        "augmentation.seed",
        [](RunConfig& c, const std::string& v) {
            c.augmentation.seed = parse_u64("augmentation.seed", v);
        },
        [](const RunConfig& c) { return std::to_string(c.augmentation.seed); });

    auto add_encoder = [&](const std::string& prefix, EncoderConfig RunConfig::* enc) {
        auto add_dim = [&](const std::string& field, Eigen::Index EncoderConfig::* f) {
            const std::string key = prefix + "." + field;
            add(
                key,
                [key, enc, f](RunConfig& c, const std::string& v) {
                    c.*enc.*f = static_cast<Eigen::Index>(parse_int(key, v));
                },
                [enc, f](const RunConfig& c) { return std::to_string(c.*enc.*f); });
        };
        add_dim("d_model", &EncoderConfig::d_model);
        add_dim("n_heads", &EncoderConfig::n_heads);
        add_dim("n_layers", &EncoderConfig::n_layers);
        add_dim("d_enc", &EncoderConfig::d_enc);
    };
    add_encoder("encoder.spatial", &RunConfig::encoder_spatial);
    add_encoder("encoder.temporal", &RunConfig::encoder_temporal);
    add_encoder("encoder.frequency", &RunConfig::encoder_frequency);

    add(
        "projector.hidden",
        [](RunConfig& c, const std::string& v) {
            c.projector.hidden = static_cast<Eigen::Index>(parse_int("projector.hidden", v));
        },
        [](const RunConfig& c) { return std::to_string(c.projector.hidden); });

    auto add_loss_real = [&](const std::string& key, double LossConfig::* f) {
        add(
            key,
            [key, f](RunConfig& c, const std::string& v) { c.loss.*f = parse_real(key, v); },
            [f](const RunConfig& c) { return format_real(c.loss.*f); });
    };
    add_loss_real("loss.tau", &LossConfig::tau);
    add_loss_real("loss.alpha_cd", &LossConfig::alpha_cd);
    add_loss_real("loss.alpha_cm", &LossConfig::alpha_cm);
    add(
        "loss.teacher_stopgrad",
        [](RunConfig& c, const std::string& v) {
            c.loss.teacher_stopgrad = parse_bool("loss.teacher_stopgrad", v);
        },
        [](const RunConfig& c) {
            return std::string(c.loss.teacher_stopgrad ? "true" : "false");
        });
    add(
        "loss.infonce_variant",
        [](RunConfig& c, const std::string& v) {
            if (v == "literal") {
                c.loss.infonce_variant = InfoNceVariant::LITERAL;
            } else if (v == "ntxent") {
                c.loss.infonce_variant = InfoNceVariant::NTXENT;
            } else {
                throw ConfigError("loss.infonce_variant: expected literal or ntxent, got '" +
                                  v + "'");
            }
        },
        [](const RunConfig& c) {
            return std::string(c.loss.infonce_variant == InfoNceVariant::LITERAL ? "literal"
                                                                                 : "ntxent");
        });

    auto add_train_int = [&](const std::string& key, int TrainConfig::* f) {
        add(
            key,
            [key, f](RunConfig& c, const std::string& v) {
                c.train.*f = static_cast<int>(parse_int(key, v));
            },
            [f](const RunConfig& c) { return std::to_string(c.train.*f); });
    };
    auto add_train_real = [&](const std::string& key, double TrainConfig::* f) {
        add(
            key,
            [key, f](RunConfig& c, const std::string& v) { c.train.*f = parse_real(key, v); },
            [f](const RunConfig& c) { return format_real(c.train.*f); });
    };
    add_train_int("train.epochs", &TrainConfig::epochs);
    add_train_int("train.pretrain_epochs", &TrainConfig::pretrain_epochs);
    add_train_int("train.finetune_epochs", &TrainConfig::finetune_epochs);
    add_train_int("train.pretrain_batch", &TrainConfig::pretrain_batch);
    add_train_int("train.finetune_batch", &TrainConfig::finetune_batch);
    add_train_real("train.learning_rate", &TrainConfig::learning_rate);
    add_train_real("train.lr_min", &TrainConfig::lr_min);
    add(
        "train.lr_schedule",
        [](RunConfig& c, const std::string& v) {
            if (v == "constant") {
                c.train.lr_schedule = LrSchedule::CONSTANT;
            } else if (v == "cosine") {
                c.train.lr_schedule = LrSchedule::COSINE;
            } else {
                throw ConfigError("train.lr_schedule: expected constant or cosine, got '" + v +
                                  "'");
            }
        },
        [](const RunConfig& c) {
            return std::string(c.train.lr_schedule == LrSchedule::CONSTANT ? "constant"
                                                                           : "cosine");
        });
    add(
        "train.seed",
        [](RunConfig& c, const std::string& v) {
            c.train.seed = parse_u64("train.seed", v);
        },
        [](const RunConfig& c) { return std::to_string(c.train.seed); });
    add_train_int("train.folds", &TrainConfig::folds);
    add_train_int("train.repeats", &TrainConfig::repeats);
    add_train_int("train.pairs_per_subject", &TrainConfig::pairs_per_subject);
    add_train_real("train.weight_cd_ssl", &TrainConfig::weight_cd_ssl);
    add_train_real("train.weight_cm_ssl", &TrainConfig::weight_cm_ssl);

    add(
        "distill.lambda_soft",
        [](RunConfig& c, const std::string& v) {
            c.distill.lambda_soft = parse_real("distill.lambda_soft", v);
        },
        [](const RunConfig& c) { return format_real(c.distill.lambda_soft); });
    add(
        "distill.temperature",
        [](RunConfig& c, const std::string& v) {
            c.distill.temperature = parse_real("distill.temperature", v);
        },
        [](const RunConfig& c) { return format_real(c.distill.temperature); });

    return schema;
}

const std::vector<KeyDef>& schema() {
    static const std::vector<KeyDef> s = build_schema();
    return s;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

} // namespace

void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& def : schema()) {
        if (def.key == key) {
            def.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg = default_config();
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected 'key = value', got '" + stripped + "'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": empty key or value");
        }
        try {
            set_config_key(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    for (const auto& def : schema()) {
        out << def.key << " = " << def.get(cfg) << "\n";
    }
    return out.str();
}

} // namespace mcsp
