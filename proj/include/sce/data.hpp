#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sce/augment.hpp"
#include "sce/common.hpp"

namespace sce {

enum class DatasetKind { idx_images, synth_shapes, synth_video };

struct Dataset {
    DatasetKind kind = DatasetKind::synth_shapes;
    std::vector<Image> images;
    std::vector<VideoClip> clips;
    std::vector<int> labels;
    int class_count = 0;
    long height = 0, width = 0;
    uint64_t generator_seed = 0;

    bool is_video() const { return kind == DatasetKind::synth_video; }
    size_t size() const { return is_video() ? clips.size() : images.size(); }
    void validate() const;
};

// Big-endian IDX containers: magic 0x00000803 + count/rows/cols + raw bytes
// for images, 0x00000801 + count + bytes for labels. Bytes scale to [0,1];
// grayscale replicates to 3 channels.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// One of {disk, square, triangle, cross} at a random position/scale/color
// over a noise background. Labels cycle round-robin, so the class histogram
// is balanced within one.
Dataset synth_shapes(long n, long image_size, int classes, uint64_t seed);

// Clips of a sprite moving with a class-determined pattern (left, right,
// up, circular) over a static noise background. fps is frames/2.56 so the
// default clip duration covers a whole video.
Dataset synth_video(long n, long frames, long image_size, int classes, uint64_t seed);

// Dataset descriptors accepted on the command line:
//   synth-shapes:n=2000,size=24,classes=4,seed=1
//   synth-video:n=800,frames=8,size=16,classes=4,seed=1
//   idx:images=PATH,labels=PATH
Dataset load_data_spec(const std::string& spec);

// Flatten an image (or clip) into one feature row, values in [0,1].
std::vector<double> flatten_image(const Image& img);
std::vector<double> flatten_clip(const VideoClip& clip);

}  // namespace sce
