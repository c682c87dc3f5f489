#pragma once

#include <array>
#include <string>
#include <vector>

#include "sce/common.hpp"
#include "sce/rng.hpp"

namespace sce {

// Interleaved RGB image, values in [0,1]. data[(y*w + x)*3 + c].
struct Image {
    long h = 0, w = 0;
    std::vector<double> data;

    static Image filled(long h, long w, double v) {
        Image img;
        img.h = h;
        img.w = w;
        img.data.assign(static_cast<size_t>(h * w * 3), v);
        return img;
    }
    double& at(long y, long x, long c) { return data[static_cast<size_t>((y * w + x) * 3 + c)]; }
    double at(long y, long x, long c) const { return data[static_cast<size_t>((y * w + x) * 3 + c)]; }
    long pixels() const { return h * w; }
};

struct VideoClip {
    std::vector<Image> frames;
    double fps = 0.0;
    double span_start = 0.0;  // seconds into the source video
    double span_duration = 0.0;

    long frame_count() const { return static_cast<long>(frames.size()); }
    double duration() const { return fps > 0 ? static_cast<double>(frames.size()) / fps : 0.0; }
};

// One named augmentation distribution: probabilities and intensities for
// crop, flip, color jitter, color drop, blur, solarize, applied in that
// order.
struct AugmentationSpec {
    double crop_prob = 1.0;
    double flip_prob = 0.5;
    double color_jitter_prob = 0.0;
    double brightness = 0.0;
    double contrast = 0.0;
    double saturation = 0.0;
    double hue = 0.0;
    double color_drop_prob = 0.0;
    double blur_prob = 0.0;
    double solarize_prob = 0.0;
    double crop_scale_lo = 0.2;
    double crop_scale_hi = 1.0;

    void validate() const;
};

namespace presets {
AugmentationSpec weak();
AugmentationSpec strong();
AugmentationSpec strong_alpha();
AugmentationSpec strong_beta();
AugmentationSpec strong_gamma();
// Accepts: weak | strong | strong-alpha | strong-beta | strong-gamma
AugmentationSpec by_name(const std::string& name);
bool is_preset_name(const std::string& name);
}  // namespace presets

struct TemporalSpec {
    double jitter_factor = 0.0;
    double reverse_prob = 0.0;
    double rgb_diff_prob = 0.0;
    double clip_duration_s = 2.56;
    int frames_per_clip = 8;

    void validate() const;
};

// A fully sampled spatial transform. Sampling is separate from application
// so a video clip can reuse one plan for every frame.
struct ImageAugPlan {
    bool crop = false;
    long top = 0, left = 0, crop_h = 0, crop_w = 0;
    bool flip = false;
    bool jitter = false;
    std::array<int, 4> jitter_order{0, 1, 2, 3};  // 0=brightness 1=contrast 2=saturation 3=hue
    double f_brightness = 1.0, f_contrast = 1.0, f_saturation = 1.0, hue_shift = 0.0;
    bool drop = false;
    bool blur = false;
    double sigma = 0.0;
    bool solarize = false;
};

ImageAugPlan sample_plan(const AugmentationSpec& spec, long h, long w, Rng& rng);
Image apply_plan(const Image& img, const ImageAugPlan& plan, long out_h, long out_w);

// Crop-rectangle sampler used by random_resized_crop: up to 10 attempts of
// area ~ U[lo,hi]*h*w and aspect = exp(U[ln 3/4, ln 4/3]), sides rounded to
// the nearest integer, uniform top-left; falls back to the full image.
struct CropRect {
    long top = 0, left = 0, h = 0, w = 0;
};
CropRect sample_crop_rectangle(long h, long w, double scale_lo, double scale_hi, Rng& rng);

// Full pipeline at unchanged output size.
Image apply_image_pipeline(const Image& img, const AugmentationSpec& spec, Rng& rng);

Image random_resized_crop(const Image& img, double scale_lo, double scale_hi, long out_h,
                          long out_w, Rng& rng);
Image color_jitter(const Image& img, double brightness, double contrast, double saturation,
                   double hue, Rng& rng);
Image solarize(const Image& img, double threshold = 0.5);
Image gaussian_blur(const Image& img, double sigma_lo, double sigma_hi, Rng& rng);
Image blur_with_sigma(const Image& img, double sigma);
Image grayscale(const Image& img);  // luma 0.299/0.587/0.114 replicated
Image horizontal_flip(const Image& img);

VideoClip sample_clip(const VideoClip& video, const TemporalSpec& spec, Rng& rng);
VideoClip rgb_difference(const VideoClip& clip);
VideoClip reverse_frames(const VideoClip& clip);

// Temporal gates (reverse, then RGB difference) followed by one spatial
// plan applied identically to every frame.
VideoClip apply_clip_pipeline(const VideoClip& clip, const AugmentationSpec& spec,
                              const TemporalSpec& temporal, Rng& rng);

}  // namespace sce
