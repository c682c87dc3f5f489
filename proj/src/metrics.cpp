#include "sce/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace sce {

const char* const kMetricsHeader =
    "step,epoch,loss,loss_infonce,loss_ressl,loss_ceil,decomposition_residual,lr,momentum,"
    "feature_std,clamp_count";

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string metrics_to_csv_row(const MetricsRecord& r) {
    std::ostringstream os;
    os << r.step << ',' << r.epoch << ',' << format_double(r.loss) << ','
       << format_double(r.loss_infonce) << ',' << format_double(r.loss_ressl) << ','
       << format_double(r.loss_ceil) << ',' << format_double(r.decomposition_residual) << ','
       << format_double(r.lr) << ',' << format_double(r.momentum) << ','
       << format_double(r.feature_std) << ',' << r.clamp_count;
    return os.str();
}

MetricsWriter::MetricsWriter(const std::string& path) : path_(path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open metrics file for writing: " + path);
    out << kMetricsHeader << "\n";
}

void MetricsWriter::write(const MetricsRecord& r) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot append to metrics file: " + path_);
    out << metrics_to_csv_row(r) << "\n";
}

namespace {
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    return out;
}
}  // namespace

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty metrics file: " + path);
    if (line != kMetricsHeader)
        throw IoError("metrics file " + path + " has unexpected header: " + line);
    std::vector<MetricsRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 11) throw IoError("metrics file " + path + " has a malformed row: " + line);
        MetricsRecord r;
        r.step = std::stol(f[0]);
        r.epoch = std::stoi(f[1]);
        r.loss = std::stod(f[2]);
        r.loss_infonce = std::stod(f[3]);
        r.loss_ressl = std::stod(f[4]);
        r.loss_ceil = std::stod(f[5]);
        r.decomposition_residual = std::stod(f[6]);
        r.lr = std::stod(f[7]);
        r.momentum = std::stod(f[8]);
        r.feature_std = std::stod(f[9]);
        r.clamp_count = std::stol(f[10]);
        out.push_back(r);
    }
    return out;
}

void write_csv(const std::string& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open CSV for writing: " + path);
    for (size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
    out << "\n";
    for (const auto& row : table.rows) {
        for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
    }
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV: " + path);
    CsvTable table;
    std::string line;
    if (std::getline(in, line)) table.header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (!line.empty()) table.rows.push_back(split_csv_line(line));
    }
    return table;
}

}  // namespace sce
