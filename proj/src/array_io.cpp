#include "mcsp/array_io.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace mcsp {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string::size_type start = 0;
    while (true) {
        auto tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

} // namespace

void write_array(const std::string& path_base, const Matrix& m) {
    require_finite(m, "write_array " + path_base);
    fs::create_directories(fs::path(path_base).parent_path());

    std::ofstream hdr(path_base + ".hdr");
    if (!hdr) throw IoError("cannot write " + path_base + ".hdr");
    hdr << "dtype float32le\n";
    hdr << "shape " << m.rows() << " " << m.cols() << "\n";
    hdr.close();

    std::ofstream bin(path_base + ".bin", std::ios::binary);
    if (!bin) throw IoError("cannot write " + path_base + ".bin");
    std::vector<float> row(m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = static_cast<float>(m(r, c));
        bin.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!bin) throw IoError("short write to " + path_base + ".bin");
}

Matrix read_array(const std::string& path_base) {
    std::ifstream hdr(path_base + ".hdr");
    if (!hdr) throw IoError("missing header " + path_base + ".hdr");
    std::string key, dtype;
    Eigen::Index rows = 0, cols = 0;
    hdr >> key >> dtype;
    if (key != "dtype" || dtype != "float32le") {
        throw IoError(path_base + ".hdr: unsupported dtype line");
    }
    hdr >> key >> rows >> cols;
    if (key != "shape" || rows <= 0 || cols <= 0) {
        throw IoError(path_base + ".hdr: bad shape line");
    }

    std::ifstream bin(path_base + ".bin", std::ios::binary);
    if (!bin) throw IoError("missing data " + path_base + ".bin");
    std::vector<float> buf(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    bin.read(reinterpret_cast<char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (bin.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float))) {
        throw IoError(path_base + ".bin: truncated payload");
    }

    Matrix m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = buf[k++];
    }
    return m;
}

void write_meta(const std::string& dir, const DatasetMeta& meta) {
    fs::create_directories(dir);
    std::ofstream out(fs::path(dir) / "dataset.meta");
    if (!out) throw IoError("cannot write dataset.meta in " + dir);
    out << "format " << meta.format << "\n";
    out << "fmri_length " << meta.fmri_length << "\n";
    out << "eeg_unified_length " << meta.eeg_unified_length << "\n";
    out << "eeg_segment_length " << meta.eeg_segment_length << "\n";
    out << "frequency_length " << meta.frequency_length << "\n";
}

DatasetMeta read_meta(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "dataset.meta");
    if (!in) throw IoError("missing dataset.meta in " + dir);
    DatasetMeta meta;
    std::string key;
    while (in >> key) {
        if (key == "format") {
            in >> meta.format;
        } else if (key == "fmri_length") {
            in >> meta.fmri_length;
        } else if (key == "eeg_unified_length") {
            in >> meta.eeg_unified_length;
        } else if (key == "eeg_segment_length") {
            in >> meta.eeg_segment_length;
        } else if (key == "frequency_length") {
            in >> meta.frequency_length;
        } else {
            throw IoError("dataset.meta: unknown key '" + key + "'");
        }
    }
    if (meta.format != "raw" && meta.format != "built") {
        throw IoError("dataset.meta: unknown format '" + meta.format + "'");
    }
    return meta;
}

DatasetWriter::DatasetWriter(std::string dir, std::vector<std::string> label_tasks)
    : dir_(std::move(dir)), label_tasks_(std::move(label_tasks)) {
    fs::create_directories(fs::path(dir_) / "arrays");
}

std::string DatasetWriter::array_base(const std::string& subject_id, Modality modality,
                                      int run) const {
    return "arrays/" + subject_id + "_" + modality_name(modality) + std::to_string(run);
}

void DatasetWriter::add_run(const std::string& subject_id, Modality modality, int run,
                            double rate, const Matrix& values,
                            const std::map<std::string, int>& labels) {
    ManifestRow row;
    row.subject_id = subject_id;
    row.modality = modality;
    row.run = run;
    row.rate = rate;
    row.path = array_base(subject_id, modality, run);
    row.labels = labels;
    write_array((fs::path(dir_) / row.path).string(), values);
    rows_.push_back(std::move(row));
}

void DatasetWriter::add_subject(const SubjectRecord& rec) {
    for (std::size_t r = 0; r < rec.fmri_runs.size(); ++r) {
        add_run(rec.subject_id, Modality::FMRI, static_cast<int>(r),
                rec.fmri_runs[r].sampling_rate, rec.fmri_runs[r].values, rec.labels);
    }
    for (std::size_t r = 0; r < rec.eeg_runs.size(); ++r) {
        add_run(rec.subject_id, Modality::EEG, static_cast<int>(r),
                rec.eeg_runs[r].sampling_rate, rec.eeg_runs[r].values, rec.labels);
    }
}

void DatasetWriter::add_row(const ManifestRow& row) { rows_.push_back(row); }

void DatasetWriter::finalize(const DatasetMeta& meta) {
    write_meta(dir_, meta);
    std::ofstream out(fs::path(dir_) / "manifest.tsv");
    if (!out) throw IoError("cannot write manifest.tsv in " + dir_);
    out << "subject_id\tmodality\trun\tpath\trate";
    for (const auto& t : label_tasks_) out << "\tlabel:" << t;
    out << "\n";
    for (const auto& row : rows_) {
        out << row.subject_id << "\t" << modality_name(row.modality) << "\t" << row.run
            << "\t" << row.path << "\t" << row.rate;
        for (const auto& t : label_tasks_) {
            out << "\t";
            auto it = row.labels.find(t);
            if (it != row.labels.end()) out << it->second;
        }
        out << "\n";
    }
}

ManifestIndex read_manifest(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "manifest.tsv");
    if (!in) throw IoError("missing manifest.tsv in " + dir);

    ManifestIndex index;
    index.meta = read_meta(dir);

    std::string line;
    if (!std::getline(in, line)) throw IoError("manifest.tsv is empty in " + dir);
    auto header = split_tabs(line);
    const std::vector<std::string> fixed = {"subject_id", "modality", "run", "path", "rate"};
    if (header.size() < fixed.size()) throw IoError("manifest.tsv: missing columns");
    for (std::size_t i = 0; i < fixed.size(); ++i) {
        if (header[i] != fixed[i]) {
            throw IoError("manifest.tsv: expected column '" + fixed[i] + "', found '" +
                          header[i] + "'");
        }
    }
    for (std::size_t i = fixed.size(); i < header.size(); ++i) {
        if (header[i].rfind("label:", 0) != 0) {
            throw IoError("manifest.tsv: unexpected column '" + header[i] + "'");
        }
        index.label_tasks.push_back(header[i].substr(6));
    }

    std::map<std::string, std::size_t> by_id;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_tabs(line);
        if (cells.size() != header.size()) {
            throw IoError("manifest.tsv line " + std::to_string(line_no) +
                          ": wrong column count");
        }
        ManifestRow row;
        row.subject_id = cells[0];
        row.modality = modality_from_name(cells[1]);
        row.run = std::stoi(cells[2]);
        row.path = cells[3];
        row.rate = std::stod(cells[4]);
        for (std::size_t i = 0; i < index.label_tasks.size(); ++i) {
            const std::string& cell = cells[5 + i];
            if (!cell.empty()) row.labels[index.label_tasks[i]] = std::stoi(cell);
        }

        auto it = by_id.find(row.subject_id);
        if (it == by_id.end()) {
            by_id.emplace(row.subject_id, index.subjects.size());
            index.subjects.push_back({row.subject_id, {}, {}, row.labels});
            it = by_id.find(row.subject_id);
        }
        auto& subject = index.subjects[it->second];
        for (const auto& [task, value] : row.labels) subject.labels[task] = value;
        if (row.modality == Modality::FMRI) {
            subject.fmri_runs.push_back(std::move(row));
        } else {
            subject.eeg_runs.push_back(std::move(row));
        }
    }
    return index;
}

SubjectRecord load_subject(const std::string& dir, const ManifestIndex::Subject& subject) {
    SubjectRecord rec;
    rec.subject_id = subject.subject_id;
    rec.labels = subject.labels;
    for (const auto& row : subject.fmri_runs) {
        RoiTimeSeries s;
        s.values = read_array((fs::path(dir) / row.path).string());
        s.sampling_rate = row.rate;
        s.modality = Modality::FMRI;
        rec.fmri_runs.push_back(std::move(s));
    }
    for (const auto& row : subject.eeg_runs) {
        RoiTimeSeries s;
        s.values = read_array((fs::path(dir) / row.path).string());
        s.sampling_rate = row.rate;
        s.modality = Modality::EEG;
        rec.eeg_runs.push_back(std::move(s));
    }
    return rec;
}

} // namespace mcsp
