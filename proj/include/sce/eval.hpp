#pragma once

#include <map>
#include <string>
#include <vector>

#include "sce/config.hpp"
#include "sce/data.hpp"
#include "sce/model.hpp"

namespace sce {

// Frozen encoder features (pre-projector), l2-normalized, one row per item.
struct FeatureBank {
    Tensor features;
    std::vector<int> labels;

    long size() const { return features.rows(); }
    void validate() const;
};

FeatureBank extract_features(const SiameseModel& model, const Dataset& ds, const TrainConfig& cfg,
                             Branch branch);

// Cosine k-nearest-neighbour majority vote; ties broken by summed
// similarity. `exclude_self` skips index i when banks alias each other
// (leave-one-out evaluation).
double knn_classify(const FeatureBank& train, const FeatureBank& test, int k,
                    bool exclude_self = false);

// Single linear layer + softmax cross-entropy on frozen features, SGD with
// cosine-decayed lr, minibatch 128. Returns test accuracy.
double linear_probe(const FeatureBank& train, const FeatureBank& test, int epochs, double lr,
                    uint64_t seed = 1);

// R@N = fraction of test items whose top-N cosine neighbours in train
// contain a same-label item.
std::map<int, double> retrieval_recall(const FeatureBank& train, const FeatureBank& test,
                                       const std::vector<int>& n_values);

// Mean over dimensions of the per-dimension standard deviation; ~0 means
// collapsed features.
double feature_std(const FeatureBank& bank);

enum class SweepAxis { lambda, tau_m, augmentation };
SweepAxis sweep_axis_from_string(const std::string& s);

struct SweepRow {
    std::string value;
    double knn_acc = 0.0;
    double probe_acc = 0.0;
    double feature_std = 0.0;
    std::string metrics_path;
};

// One full pretrain + probe per value, identical seed across values.
// Axis "augmentation" takes online/target preset pairs, e.g.
// "strong-alpha/strong-beta". Writes summary.csv plus per-run artifacts
// under out_dir.
std::vector<SweepRow> sweep(const TrainConfig& base, SweepAxis axis,
                            const std::vector<std::string>& values, const Dataset& train,
                            const Dataset& test, const std::string& out_dir);

}  // namespace sce
