#pragma once

#include "mcsp/dataset.hpp"
#include "mcsp/matrix.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace mcsp {

// Raw array format: `<base>.bin` holds row-major little-endian float32,
// `<base>.hdr` is a text sidecar naming dtype and shape.
void write_array(const std::string& path_base, const Matrix& m);
Matrix read_array(const std::string& path_base);

struct ManifestRow {
    std::string subject_id;
    Modality modality = Modality::FMRI;
    int run = 0;
    // Array path base relative to the dataset directory, without extension.
    std::string path;
    double rate = 1.0;
    std::map<std::string, int> labels;
};

struct DatasetMeta {
    // "raw": per-run ROI series. "built": per-run spatial/temporal/frequency
    // tensors at <path>_spatial, <path>_temporal, <path>_frequency.
    std::string format = "raw";
    Eigen::Index fmri_length = 200;
    Eigen::Index eeg_unified_length = 25000;
    Eigen::Index eeg_segment_length = 200;
    Eigen::Index frequency_length = 200;
};

void write_meta(const std::string& dir, const DatasetMeta& meta);
DatasetMeta read_meta(const std::string& dir);

class DatasetWriter {
public:
    DatasetWriter(std::string dir, std::vector<std::string> label_tasks);

    // Writes the run array (raw format) under arrays/ and records a manifest
    // row. Labels are read from `labels` for this subject's tasks.
    void add_run(const std::string& subject_id, Modality modality, int run, double rate,
                 const Matrix& values, const std::map<std::string, int>& labels);
    void add_subject(const SubjectRecord& rec);

    // Records a manifest row without writing data (built-format writers
    // place their own files at the row's path base).
    void add_row(const ManifestRow& row);

    std::string array_base(const std::string& subject_id, Modality modality, int run) const;
    const std::string& dir() const { return dir_; }

    void finalize(const DatasetMeta& meta);

private:
    std::string dir_;
    std::vector<std::string> label_tasks_;
    std::vector<ManifestRow> rows_;
};

struct ManifestIndex {
    struct Subject {
        std::string subject_id;
        std::vector<ManifestRow> fmri_runs;
        std::vector<ManifestRow> eeg_runs;
        std::map<std::string, int> labels;
    };
    std::vector<Subject> subjects;
    std::vector<std::string> label_tasks;
    DatasetMeta meta;
};

ManifestIndex read_manifest(const std::string& dir);

// Loads one subject's raw runs (raw-format datasets only).
SubjectRecord load_subject(const std::string& dir, const ManifestIndex::Subject& subject);

} // namespace mcsp
