#pragma once

#include <string>
#include <vector>

#include "sce/checkpoint.hpp"
#include "sce/config.hpp"
#include "sce/data.hpp"
#include "sce/metrics.hpp"
#include "sce/queue.hpp"

namespace sce {

struct ScheduleInfo {
    long total_steps = 1;
    long warmup_steps = 0;
    double peak_lr = 0.0;       // after the linear scaling rule
    double momentum_init = 0.996;
};

ScheduleInfo make_schedule(const TrainConfig& cfg, size_t dataset_size);

// Linear ramp 0 -> peak over the warmup steps, then cosine decay to 0 at
// the last step.
double lr_schedule(long step, const ScheduleInfo& s);

// m(step) = 1 - (1 - m0) * 0.5 * (1 + cos(pi * progress)); m(0) = m0 and
// m(last) = 1 exactly.
double momentum_schedule(long step, const ScheduleInfo& s);

// Augmented input rows for one batch and branch ("online" uses cfg.aug_online,
// "target" cfg.aug_target). Streams derive from (seed, "aug", step, branch,
// slot), so identical configs draw identical augmentations regardless of the
// loss hyperparameters.
Tensor augment_batch(const Dataset& ds, const std::vector<size_t>& batch, const TrainConfig& cfg,
                     long step, Branch branch);

// Deterministic evaluation view: the raw image, or the center clip with
// frames_per_clip evenly spaced frames; no augmentation.
Tensor eval_batch(const Dataset& ds, const std::vector<size_t>& batch, const TrainConfig& cfg);

MetricsRecord train_step(SiameseModel& model, std::vector<Tensor>& velocities, const Dataset& ds,
                         const std::vector<size_t>& batch, MemoryQueue& queue,
                         const TrainConfig& cfg, long step, int epoch, const ScheduleInfo& sched);

struct TrainResult {
    std::string out_dir;
    std::string metrics_path;
    std::string checkpoint_path;
    std::string manifest_path;
    std::vector<MetricsRecord> metrics;
};

// Full pretraining run: queue warm start, epochs * ceil(n/batch) steps,
// manifest + metrics CSV + checkpoint under out_dir. `resume_checkpoint`
// continues an earlier run; `stop_after_epochs` ends the run early (the
// checkpoint then carries the resume point).
TrainResult train_run(const TrainConfig& cfg, const Dataset& ds, const std::string& out_dir,
                      const std::string& resume_checkpoint = "", int stop_after_epochs = -1);

// Mean over dimensions of the per-dimension standard deviation across rows.
double embedding_std(const Tensor& rows);

}  // namespace sce
