#include <CLI11.hpp>

#include "mcsp/array_io.hpp"
#include "mcsp/errors.hpp"
#include "mcsp/metrics.hpp"
#include "mcsp/model.hpp"
#include "mcsp/synthetic.hpp"
#include "mcsp/training.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace {

constexpr const char* kVersion = "mcsp 1.0.0";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

long long parse_integer(const std::string& value, const std::string& where) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw mcsp::ConfigError(where + ": expected an integer, got '" + value + "'");
    }
}

double parse_real(const std::string& value, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw mcsp::ConfigError(where + ": expected a real number, got '" + value + "'");
    }
}

void set_spec_key(mcsp::SyntheticSpec& spec, const std::string& key, const std::string& value,
                  const std::string& where) {
    if (key == "n_subjects") {
        spec.n_subjects = int(parse_integer(value, where));
    } else if (key == "n_classes") {
        spec.n_classes = int(parse_integer(value, where));
    } else if (key == "n_roi") {
        spec.n_roi = int(parse_integer(value, where));
    } else if (key == "class_effect") {
        spec.class_effect = parse_real(value, where);
    } else if (key == "shared_latent_dim") {
        spec.shared_latent_dim = int(parse_integer(value, where));
    } else if (key == "seed") {
        spec.seed = std::uint64_t(parse_integer(value, where));
    } else if (key == "runs_per_modality") {
        spec.runs_per_modality = int(parse_integer(value, where));
    } else if (key == "fmri_length_min") {
        spec.fmri_length_min = Eigen::Index(parse_integer(value, where));
    } else if (key == "fmri_length_max") {
        spec.fmri_length_max = Eigen::Index(parse_integer(value, where));
    } else if (key == "eeg_length") {
        spec.eeg_length = Eigen::Index(parse_integer(value, where));
    } else if (key == "noise_level") {
        spec.noise_level = parse_real(value, where);
    } else {
        throw mcsp::ConfigError(where + ": unknown key '" + key + "'");
    }
}

mcsp::SyntheticSpec parse_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw mcsp::IoError("cannot open spec file " + path);
    mcsp::SyntheticSpec spec;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw mcsp::ConfigError(where + ": expected key = value");
        set_spec_key(spec, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
    }
    spec.validate();
    return spec;
}

std::string spec_echo(const mcsp::SyntheticSpec& spec) {
    std::ostringstream out;
    out << "n_subjects = " << spec.n_subjects << "\n";
    out << "n_classes = " << spec.n_classes << "\n";
    out << "n_roi = " << spec.n_roi << "\n";
    out << "class_effect = " << spec.class_effect << "\n";
    out << "shared_latent_dim = " << spec.shared_latent_dim << "\n";
    out << "seed = " << spec.seed << "\n";
    out << "runs_per_modality = " << spec.runs_per_modality << "\n";
    out << "fmri_length_min = " << spec.fmri_length_min << "\n";
    out << "fmri_length_max = " << spec.fmri_length_max << "\n";
    out << "eeg_length = " << spec.eeg_length << "\n";
    out << "noise_level = " << spec.noise_level << "\n";
    return out.str();
}

void ensure_parent_dir(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

void write_text_file(const std::string& path, const std::string& text) {
    ensure_parent_dir(path);
    std::ofstream out(path);
    if (!out) throw mcsp::IoError("cannot write " + path);
    out << text;
}

// Reproducibility sidecars: effective config and a version/seed stamp next to
// the primary output.
void write_run_sidecars(const std::string& out_path, const std::string& subcommand,
                        const mcsp::RunConfig& cfg) {
    write_text_file(out_path + ".config.cfg", mcsp::serialize_config(cfg));
    std::ostringstream stamp;
    stamp << "version " << kVersion << "\n";
    stamp << "subcommand " << subcommand << "\n";
    stamp << "seed " << cfg.seed << "\n";
    write_text_file(out_path + ".stamp", stamp.str());
}

mcsp::RunConfig load_cli_config(const std::string& config_path, bool seed_set,
                                std::uint64_t seed) {
    mcsp::RunConfig cfg =
        config_path.empty() ? mcsp::default_config() : mcsp::parse_config_file(config_path);
    if (seed_set) cfg.seed = seed;
    cfg.validate();
    return cfg;
}

std::string resolve_data_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    const char* env = std::getenv("MCSP_DATA_DIR");
    if (env != nullptr && *env != '\0') return env;
    throw UsageError("--data is required (or set MCSP_DATA_DIR)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mcsp: multi-modal cross-domain self-supervised pretraining pipeline"};
    app.require_subcommand(0, 1);

    std::string config_path;
    std::uint64_t seed_override = 0;
    bool param_count = false;
    int param_n_roi = 100;
    app.add_option("--config", config_path, "Run config file (key = value)")
        ->check(CLI::ExistingFile);
    CLI::Option* seed_opt =
        app.add_option("--seed", seed_override, "Overrides the config's top-level seed");
    app.add_flag("--param-count", param_count,
                 "Print per-domain sub-model parameter counts and exit");
    app.add_option("--n-roi", param_n_roi, "ROI count used by --param-count (default 100)")
        ->check(CLI::PositiveNumber);
    app.fallthrough();

    // synth-gen
    auto* synth = app.add_subcommand("synth-gen", "Generate a synthetic cohort as a raw dataset");
    std::string spec_path, synth_out;
    synth->add_option("--spec", spec_path, "Synthetic cohort spec file")
        ->required()
        ->check(CLI::ExistingFile);
    synth->add_option("--out", synth_out, "Output dataset directory")->required();

    // build-data
    auto* build = app.add_subcommand("build-data", "Materialize a raw dataset as built tensors");
    std::string build_in, build_out;
    build->add_option("--in", build_in, "Raw dataset directory")->required();
    build->add_option("--out", build_out, "Built dataset directory")->required();

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "Self-supervised pretraining");
    std::string pre_data, pre_out;
    pre->add_option("--data", pre_data, "Dataset directory (default MCSP_DATA_DIR)");
    pre->add_option("--out", pre_out, "Output checkpoint path")->required();

    // finetune
    auto* fin = app.add_subcommand("finetune", "Supervised fine-tuning with cross-validation");
    std::string fin_data, fin_init, fin_task, fin_report, fin_out;
    bool fin_scratch = false;
    fin->add_option("--data", fin_data, "Dataset directory (default MCSP_DATA_DIR)");
    fin->add_option("--init", fin_init, "Pretrained checkpoint to start from");
    fin->add_flag("--scratch", fin_scratch, "Start from random initialization");
    fin->add_option("--task", fin_task, "Label column to train on")->required();
    fin->add_option("--report", fin_report, "Metrics report output path")->required();
    fin->add_option("--out", fin_out, "Optional final checkpoint trained on all subjects");

    // distill
    auto* dis = app.add_subcommand("distill", "Train a single-domain student from a teacher");
    std::string dis_teacher, dis_domain, dis_data, dis_task = "group", dis_out, dis_report;
    dis->add_option("--teacher", dis_teacher, "Finetuned teacher checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    dis->add_option("--student-domain", dis_domain, "spatial|temporal|frequency")
        ->required()
        ->check(CLI::IsMember({"spatial", "temporal", "frequency"}));
    dis->add_option("--data", dis_data, "Dataset directory (default MCSP_DATA_DIR)");
    dis->add_option("--task", dis_task, "Label column (default group)");
    dis->add_option("--out", dis_out, "Student checkpoint output path");
    dis->add_option("--report", dis_report, "In-sample student metrics output path");

    // evaluate
    auto* eva = app.add_subcommand("evaluate", "Print a saved metrics report as a table");
    std::string eva_report;
    eva->add_option("--report", eva_report, "Metrics report file")
        ->required()
        ->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);

        const bool seed_set = seed_opt->count() > 0;

        if (param_count) {
            const mcsp::RunConfig cfg = load_cli_config(config_path, seed_set, seed_override);
            const mcsp::McspModel model(cfg, param_n_roi);
            std::printf("spatial %zu\n", model.param_count(mcsp::Domain::SPATIAL));
            std::printf("temporal %zu\n", model.param_count(mcsp::Domain::TEMPORAL));
            std::printf("frequency %zu\n", model.param_count(mcsp::Domain::FREQUENCY));
            std::printf("total %zu\n", model.total_param_count());
            return 0;
        }

        if (app.got_subcommand(synth)) {
            mcsp::SyntheticSpec spec = parse_spec_file(spec_path);
            if (seed_set) spec.seed = seed_override;
            const std::vector<mcsp::SubjectRecord> cohort = mcsp::generate_synthetic_cohort(spec);
            mcsp::DatasetWriter writer(synth_out, {mcsp::kSyntheticPrimaryTask,
                                                   mcsp::kSyntheticSecondaryTask});
            for (const mcsp::SubjectRecord& rec : cohort) writer.add_subject(rec);
            writer.finalize(mcsp::DatasetMeta{});
            write_text_file((std::filesystem::path(synth_out) / "synthetic.spec.echo").string(),
                            spec_echo(spec));
            std::printf("synth-gen: wrote %d subjects to %s\n", spec.n_subjects,
                        synth_out.c_str());
            return 0;
        }

        if (app.got_subcommand(build)) {
            const mcsp::RunConfig cfg = load_cli_config(config_path, seed_set, seed_override);
            mcsp::write_built_dataset(build_in, build_out, cfg.dataset);
            write_run_sidecars((std::filesystem::path(build_out) / "build").string(),
                               "build-data", cfg);
            std::printf("build-data: materialized %s -> %s\n", build_in.c_str(),
                        build_out.c_str());
            return 0;
        }

        if (app.got_subcommand(pre)) {
            const mcsp::RunConfig cfg = load_cli_config(config_path, seed_set, seed_override);
            const std::string data_dir = resolve_data_dir(pre_data);
            const mcsp::TrainingSet data = mcsp::load_training_set(data_dir, cfg.dataset);
            const mcsp::PretrainResult res = mcsp::pretrain(data, cfg);
            ensure_parent_dir(pre_out);
            mcsp::save_checkpoint(pre_out, res.checkpoint);
            std::ostringstream losses;
            for (std::size_t e = 0; e < res.epoch_losses.size(); ++e) {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%.17g", res.epoch_losses[e]);
                losses << "epoch " << e << " loss " << buf << "\n";
            }
            write_text_file(pre_out + ".losses.txt", losses.str());
            write_run_sidecars(pre_out, "pretrain", cfg);
            std::printf("pretrain: %zu subjects, %zu epochs, cm_ssl %s; wrote %s\n", data.size(),
                        res.epoch_losses.size(), res.used_pairs ? "active" : "inactive",
                        pre_out.c_str());
            return 0;
        }

        if (app.got_subcommand(fin)) {
            if (fin_scratch == !fin_init.empty()) {
                throw UsageError("finetune needs exactly one of --init <ckpt> or --scratch");
            }
            const mcsp::RunConfig cfg = load_cli_config(config_path, seed_set, seed_override);
            const std::string data_dir = resolve_data_dir(fin_data);
            const mcsp::TrainingSet data = mcsp::load_training_set(data_dir, cfg.dataset);
            mcsp::Checkpoint init;
            const mcsp::Checkpoint* init_ptr = nullptr;
            if (!fin_init.empty()) {
                init = mcsp::load_checkpoint(fin_init);
                init_ptr = &init;
            }
            const mcsp::FinetuneResult res = mcsp::finetune(data, cfg, init_ptr, fin_task);
            ensure_parent_dir(fin_report);
            mcsp::write_metrics_file(fin_report, res.metrics);
            if (!fin_out.empty()) {
                ensure_parent_dir(fin_out);
                mcsp::save_checkpoint(fin_out, res.checkpoint);
            }
            write_run_sidecars(fin_report, "finetune", cfg);
            std::fputs(mcsp::format_metrics_table(res.metrics).c_str(), stdout);
            std::printf("finetune: wrote %s\n", fin_report.c_str());
            return 0;
        }

        if (app.got_subcommand(dis)) {
            const mcsp::RunConfig cfg = load_cli_config(config_path, seed_set, seed_override);
            const std::string data_dir = resolve_data_dir(dis_data);
            const mcsp::TrainingSet data = mcsp::load_training_set(data_dir, cfg.dataset);
            const mcsp::Checkpoint teacher = mcsp::load_checkpoint(dis_teacher);
            const mcsp::Domain domain = mcsp::domain_from_name(dis_domain);
            const mcsp::Checkpoint student =
                mcsp::distill_student(data, teacher, domain, cfg, dis_task);
            if (!dis_out.empty()) {
                ensure_parent_dir(dis_out);
                mcsp::save_checkpoint(dis_out, student);
                write_run_sidecars(dis_out, "distill", cfg);
            }
            if (!dis_report.empty()) {
                const mcsp::FoldMetrics fm =
                    mcsp::evaluate_single_domain(data, student, domain, dis_task);
                ensure_parent_dir(dis_report);
                mcsp::write_metrics_file(dis_report, mcsp::aggregate_metrics({fm}));
            }
            std::printf("distill: trained %s student on %zu subjects\n", dis_domain.c_str(),
                        data.size());
            return 0;
        }

        if (app.got_subcommand(eva)) {
            const mcsp::MetricsReport report = mcsp::read_metrics_file(eva_report);
            std::fputs(mcsp::format_metrics_table(report).c_str(), stdout);
            return 0;
        }

        throw UsageError("a subcommand is required");
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << "\n\n" << app.help();
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: usage: " << e.what() << "\n\n" << app.help();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << mcsp::error_category(e) << ": " << e.what() << "\n";
        return 1;
    }
}
