#pragma once

#include <string>
#include <vector>

#include "sce/config.hpp"
#include "sce/model.hpp"
#include "sce/tensor.hpp"

namespace sce {

// Everything needed to continue (or evaluate) a run: config snapshot, both
// parameter branches, optimizer velocity buffers, queue ring, and the next
// step/epoch counters. Little-endian binary, header magic "SCE1"; exact
// layout in docs/formats.md.
struct TrainingState {
    std::string config_text;
    TrainConfig config;
    SiameseModel model;
    std::vector<Tensor> velocities;  // aligned with model.online params
    long next_step = 0;
    int next_epoch = 0;
    bool has_queue = false;
    Tensor queue_rows;
    long queue_fill = 0;
    long queue_cursor = 0;
};

void save_checkpoint(const std::string& path, const TrainingState& state);
TrainingState load_checkpoint(const std::string& path);

uint64_t fnv1a64(const std::string& bytes);

}  // namespace sce
