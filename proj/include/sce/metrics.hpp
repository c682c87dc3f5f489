#pragma once

#include <map>
#include <string>
#include <vector>

#include "sce/common.hpp"

namespace sce {

// One logged training step. Serialized to CSV with the fixed header below.
struct MetricsRecord {
    long step = 0;
    int epoch = 0;
    double loss = 0.0;
    double loss_infonce = 0.0;
    double loss_ressl = 0.0;
    double loss_ceil = 0.0;
    double decomposition_residual = 0.0;
    double lr = 0.0;
    double momentum = 0.0;
    double feature_std = 0.0;
    long clamp_count = 0;
};

extern const char* const kMetricsHeader;

std::string metrics_to_csv_row(const MetricsRecord& r);

class MetricsWriter {
public:
    explicit MetricsWriter(const std::string& path);
    void write(const MetricsRecord& r);
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

// Generic small CSV table (sweep summaries, eval results).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

std::string format_double(double v);  // %.17g, round-trip exact

}  // namespace sce
