#include "sce/augment.hpp"

#include <algorithm>
#include <cmath>

namespace sce {

namespace {

constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

void clamp_image(Image& img) {
    for (double& v : img.data) v = clamp01(v);
}

double luma(const Image& img, long y, long x) {
    return kLumaR * img.at(y, x, 0) + kLumaG * img.at(y, x, 1) + kLumaB * img.at(y, x, 2);
}

double mean_luma(const Image& img) {
    double acc = 0.0;
    for (long y = 0; y < img.h; ++y)
        for (long x = 0; x < img.w; ++x) acc += luma(img, y, x);
    return acc / static_cast<double>(img.pixels());
}

// Half-sample symmetric reflection: ext(-1)=s(0), ext(n)=s(n-1). Keeps the
// total mass of a normalized kernel inside the image.
long reflect_index(long i, long n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
    return i;
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = mx - mn;
    v = mx;
    s = mx > 0.0 ? d / mx : 0.0;
    if (d <= 0.0) {
        h = 0.0;
        return;
    }
    if (mx == r)
        h = (g - b) / d;
    else if (mx == g)
        h = 2.0 + (b - r) / d;
    else
        h = 4.0 + (r - g) / d;
    h /= 6.0;
    if (h < 0.0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    if (s <= 0.0) {
        r = g = b = v;
        return;
    }
    h = h - std::floor(h);
    const double hh = h * 6.0;
    const int sector = std::min(5, static_cast<int>(hh));
    const double f = hh - sector;
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    switch (sector) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

void apply_jitter_sub_op(Image& img, int which, const ImageAugPlan& plan) {
    switch (which) {
        case 0:  // brightness: multiplicative
            if (plan.f_brightness == 1.0) return;
            for (double& v : img.data) v = clamp01(v * plan.f_brightness);
            break;
        case 1: {  // contrast: blend with the image's mean luma
            if (plan.f_contrast == 1.0) return;
            const double m = mean_luma(img);
            for (double& v : img.data) v = clamp01(plan.f_contrast * v + (1.0 - plan.f_contrast) * m);
            break;
        }
        case 2:  // saturation: blend with per-pixel luma
            if (plan.f_saturation == 1.0) return;
            for (long y = 0; y < img.h; ++y)
                for (long x = 0; x < img.w; ++x) {
                    const double l = luma(img, y, x);
                    for (long c = 0; c < 3; ++c)
                        img.at(y, x, c) = clamp01(plan.f_saturation * img.at(y, x, c) +
                                                  (1.0 - plan.f_saturation) * l);
                }
            break;
        case 3:  // hue: shift as a fraction of the hue circle
            if (plan.hue_shift == 0.0) return;
            for (long y = 0; y < img.h; ++y)
                for (long x = 0; x < img.w; ++x) {
                    double h, s, v;
                    rgb_to_hsv(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2), h, s, v);
                    double r, g, b;
                    hsv_to_rgb(h + plan.hue_shift, s, v, r, g, b);
                    img.at(y, x, 0) = clamp01(r);
                    img.at(y, x, 1) = clamp01(g);
                    img.at(y, x, 2) = clamp01(b);
                }
            break;
    }
}

// Bilinear resize of the crop rectangle to out_h x out_w, pixel-center
// aligned, sample coordinates clamped to the rectangle.
Image resize_crop(const Image& img, long top, long left, long ch, long cw, long out_h, long out_w) {
    Image out = Image::filled(out_h, out_w, 0.0);
    const double sy_scale = static_cast<double>(ch) / static_cast<double>(out_h);
    const double sx_scale = static_cast<double>(cw) / static_cast<double>(out_w);
    for (long i = 0; i < out_h; ++i) {
        double sy = (static_cast<double>(i) + 0.5) * sy_scale - 0.5;
        sy = std::min(std::max(sy, 0.0), static_cast<double>(ch - 1));
        const long y0 = static_cast<long>(sy);
        const long y1 = std::min(y0 + 1, ch - 1);
        const double fy = sy - static_cast<double>(y0);
        for (long j = 0; j < out_w; ++j) {
            double sx = (static_cast<double>(j) + 0.5) * sx_scale - 0.5;
            sx = std::min(std::max(sx, 0.0), static_cast<double>(cw - 1));
            const long x0 = static_cast<long>(sx);
            const long x1 = std::min(x0 + 1, cw - 1);
            const double fx = sx - static_cast<double>(x0);
            for (long c = 0; c < 3; ++c) {
                const double v00 = img.at(top + y0, left + x0, c);
                const double v01 = img.at(top + y0, left + x1, c);
                const double v10 = img.at(top + y1, left + x0, c);
                const double v11 = img.at(top + y1, left + x1, c);
                const double v0 = v00 + (v01 - v00) * fx;
                const double v1 = v10 + (v11 - v10) * fx;
                out.at(i, j, c) = clamp01(v0 + (v1 - v0) * fy);
            }
        }
    }
    return out;
}

}  // namespace

CropRect sample_crop_rectangle(long h, long w, double scale_lo, double scale_hi, Rng& rng) {
    const double area = static_cast<double>(h * w);
    for (int attempt = 0; attempt < 10; ++attempt) {
        const double target_area = rng.uniform(scale_lo, scale_hi) * area;
        const double log_ratio = rng.uniform(std::log(3.0 / 4.0), std::log(4.0 / 3.0));
        const double ratio = std::exp(log_ratio);
        const long cand_w = static_cast<long>(std::lround(std::sqrt(target_area * ratio)));
        const long cand_h = static_cast<long>(std::lround(std::sqrt(target_area / ratio)));
        if (cand_w >= 1 && cand_h >= 1 && cand_w <= w && cand_h <= h) {
            CropRect rect;
            rect.h = cand_h;
            rect.w = cand_w;
            rect.top = static_cast<long>(rng.uniform_index(static_cast<size_t>(h - cand_h + 1)));
            rect.left = static_cast<long>(rng.uniform_index(static_cast<size_t>(w - cand_w + 1)));
            return rect;
        }
    }
    return CropRect{0, 0, h, w};
}

void AugmentationSpec::validate() const {
    for (double p : {crop_prob, flip_prob, color_jitter_prob, color_drop_prob, blur_prob,
                     solarize_prob})
        SCE_CHECK(p >= 0.0 && p <= 1.0, "augmentation probability ", p, " outside [0,1]");
    for (double s : {brightness, contrast, saturation, hue})
        SCE_CHECK(s >= 0.0, "augmentation intensity must be non-negative");
    SCE_CHECK(crop_scale_lo > 0.0 && crop_scale_lo <= crop_scale_hi && crop_scale_hi <= 1.0,
              "crop scale range must satisfy 0 < lo <= hi <= 1");
}

void TemporalSpec::validate() const {
    SCE_CHECK(jitter_factor >= 0.0, "jitter factor must be non-negative");
    for (double p : {reverse_prob, rgb_diff_prob})
        SCE_CHECK(p >= 0.0 && p <= 1.0, "temporal probability ", p, " outside [0,1]");
    SCE_CHECK(clip_duration_s > 0.0, "clip duration must be positive");
    SCE_CHECK(frames_per_clip >= 1, "frames_per_clip must be at least 1");
}

namespace presets {

AugmentationSpec weak() {
    AugmentationSpec s;
    s.crop_prob = 1.0;
    s.flip_prob = 0.5;
    return s;
}

AugmentationSpec strong() {
    AugmentationSpec s = weak();
    s.color_jitter_prob = 0.8;
    s.brightness = 0.4;
    s.contrast = 0.4;
    s.saturation = 0.4;
    s.hue = 0.1;
    s.color_drop_prob = 0.2;
    s.blur_prob = 0.5;
    return s;
}

AugmentationSpec strong_alpha() {
    AugmentationSpec s = strong();
    s.saturation = 0.2;
    s.blur_prob = 1.0;
    return s;
}

AugmentationSpec strong_beta() {
    AugmentationSpec s = strong_alpha();
    s.blur_prob = 0.1;
    s.solarize_prob = 0.2;
    return s;
}

AugmentationSpec strong_gamma() {
    AugmentationSpec s = strong_alpha();
    s.blur_prob = 0.5;
    s.solarize_prob = 0.2;
    return s;
}

AugmentationSpec by_name(const std::string& name) {
    if (name == "weak") return weak();
    if (name == "strong") return strong();
    if (name == "strong-alpha") return strong_alpha();
    if (name == "strong-beta") return strong_beta();
    if (name == "strong-gamma") return strong_gamma();
    throw ContractViolation("unknown augmentation preset '" + name +
                            "' (weak|strong|strong-alpha|strong-beta|strong-gamma)");
}

bool is_preset_name(const std::string& name) {
    return name == "weak" || name == "strong" || name == "strong-alpha" ||
           name == "strong-beta" || name == "strong-gamma";
}

}  // namespace presets

ImageAugPlan sample_plan(const AugmentationSpec& spec, long h, long w, Rng& rng) {
    spec.validate();
    ImageAugPlan plan;
    // Every gate draws exactly once, so the stream layout does not depend
    // on the spec values.
    plan.crop = rng.bernoulli(spec.crop_prob);
    if (plan.crop) {
        CropRect rect = sample_crop_rectangle(h, w, spec.crop_scale_lo, spec.crop_scale_hi, rng);
        plan.top = rect.top;
        plan.left = rect.left;
        plan.crop_h = rect.h;
        plan.crop_w = rect.w;
    }
    plan.flip = rng.bernoulli(spec.flip_prob);
    plan.jitter = rng.bernoulli(spec.color_jitter_prob);
    if (plan.jitter) {
        plan.f_brightness = rng.uniform(std::max(0.0, 1.0 - spec.brightness), 1.0 + spec.brightness);
        plan.f_contrast = rng.uniform(std::max(0.0, 1.0 - spec.contrast), 1.0 + spec.contrast);
        plan.f_saturation = rng.uniform(std::max(0.0, 1.0 - spec.saturation), 1.0 + spec.saturation);
        plan.hue_shift = rng.uniform(-spec.hue, spec.hue);
        std::vector<int> order{0, 1, 2, 3};
        rng.shuffle(order);
        std::copy(order.begin(), order.end(), plan.jitter_order.begin());
    }
    plan.drop = rng.bernoulli(spec.color_drop_prob);
    plan.blur = rng.bernoulli(spec.blur_prob);
    if (plan.blur) plan.sigma = rng.uniform(0.1, 2.0);
    plan.solarize = rng.bernoulli(spec.solarize_prob);
    return plan;
}

Image apply_plan(const Image& img, const ImageAugPlan& plan, long out_h, long out_w) {
    Image cur =
        plan.crop ? resize_crop(img, plan.top, plan.left, plan.crop_h, plan.crop_w, out_h, out_w)
                  : resize_crop(img, 0, 0, img.h, img.w, out_h, out_w);
    if (plan.flip) cur = horizontal_flip(cur);
    if (plan.jitter)
        for (int which : plan.jitter_order) apply_jitter_sub_op(cur, which, plan);
    if (plan.drop) cur = grayscale(cur);
    if (plan.blur) cur = blur_with_sigma(cur, plan.sigma);
    if (plan.solarize) cur = solarize(cur);
    clamp_image(cur);
    return cur;
}

Image apply_image_pipeline(const Image& img, const AugmentationSpec& spec, Rng& rng) {
    ImageAugPlan plan = sample_plan(spec, img.h, img.w, rng);
    return apply_plan(img, plan, img.h, img.w);
}

Image random_resized_crop(const Image& img, double scale_lo, double scale_hi, long out_h,
                          long out_w, Rng& rng) {
    SCE_CHECK(img.h >= 1 && img.w >= 1, "random_resized_crop: image smaller than 1x1");
    SCE_CHECK(out_h >= 1 && out_w >= 1, "random_resized_crop: output size must be >= 1");
    SCE_CHECK(scale_lo > 0.0 && scale_lo <= scale_hi && scale_hi <= 1.0,
              "random_resized_crop: scale range must lie in (0,1]");
    CropRect rect = sample_crop_rectangle(img.h, img.w, scale_lo, scale_hi, rng);
    return resize_crop(img, rect.top, rect.left, rect.h, rect.w, out_h, out_w);
}

Image color_jitter(const Image& img, double brightness, double contrast, double saturation,
                   double hue, Rng& rng) {
    SCE_CHECK(brightness >= 0.0 && contrast >= 0.0 && saturation >= 0.0 && hue >= 0.0,
              "color_jitter: intensities must be non-negative");
    ImageAugPlan plan;
    plan.jitter = true;
    plan.f_brightness = rng.uniform(std::max(0.0, 1.0 - brightness), 1.0 + brightness);
    plan.f_contrast = rng.uniform(std::max(0.0, 1.0 - contrast), 1.0 + contrast);
    plan.f_saturation = rng.uniform(std::max(0.0, 1.0 - saturation), 1.0 + saturation);
    plan.hue_shift = rng.uniform(-hue, hue);
    std::vector<int> order{0, 1, 2, 3};
    rng.shuffle(order);
    Image out = img;
    for (int which : order) apply_jitter_sub_op(out, which, plan);
    return out;
}

Image solarize(const Image& img, double threshold) {
    Image out = img;
    for (double& v : out.data)
        if (v >= threshold) v = 1.0 - v;
    return out;
}

Image blur_with_sigma(const Image& img, double sigma) {
    SCE_CHECK(sigma > 0.0, "gaussian blur: sigma must be positive");
    long radius = static_cast<long>(std::ceil(2.0 * sigma));
    radius = std::min(radius, std::min(img.h, img.w));
    std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (long i = -radius; i <= radius; ++i) {
        const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
        kernel[static_cast<size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : kernel) v /= sum;

    Image tmp = img;
    // horizontal pass
    for (long y = 0; y < img.h; ++y)
        for (long x = 0; x < img.w; ++x)
            for (long c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (long i = -radius; i <= radius; ++i)
                    acc += kernel[static_cast<size_t>(i + radius)] *
                           img.at(y, reflect_index(x + i, img.w), c);
                tmp.at(y, x, c) = acc;
            }
    Image out = tmp;
    // vertical pass
    for (long y = 0; y < img.h; ++y)
        for (long x = 0; x < img.w; ++x)
            for (long c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (long i = -radius; i <= radius; ++i)
                    acc += kernel[static_cast<size_t>(i + radius)] *
                           tmp.at(reflect_index(y + i, img.h), x, c);
                out.at(y, x, c) = clamp01(acc);
            }
    return out;
}

Image gaussian_blur(const Image& img, double sigma_lo, double sigma_hi, Rng& rng) {
    return blur_with_sigma(img, rng.uniform(sigma_lo, sigma_hi));
}

Image grayscale(const Image& img) {
    Image out = img;
    for (long y = 0; y < img.h; ++y)
        for (long x = 0; x < img.w; ++x) {
            const double l = luma(img, y, x);
            for (long c = 0; c < 3; ++c) out.at(y, x, c) = l;
        }
    return out;
}

Image horizontal_flip(const Image& img) {
    Image out = img;
    for (long y = 0; y < img.h; ++y)
        for (long x = 0; x < img.w; ++x)
            for (long c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.w - 1 - x, c);
    return out;
}

VideoClip sample_clip(const VideoClip& video, const TemporalSpec& spec, Rng& rng) {
    spec.validate();
    SCE_CHECK(video.frame_count() >= 1 && video.fps > 0.0, "sample_clip: empty or rate-less video");
    const long total = video.frame_count();
    const double u = rng.uniform(1.0 - spec.jitter_factor, 1.0 + spec.jitter_factor);
    const double duration = spec.clip_duration_s * u;
    long span = static_cast<long>(std::lround(duration * video.fps));
    span = std::max<long>(span, 1);
    SCE_CHECK(span <= total, "sample_clip: video too short (needs ", span, " frames, has ", total,
              ")");
    const long start = static_cast<long>(rng.uniform_index(static_cast<size_t>(total - span + 1)));

    const long f = spec.frames_per_clip;
    VideoClip out;
    out.fps = video.fps;
    out.span_start = video.span_start + static_cast<double>(start) / video.fps;
    out.span_duration = static_cast<double>(span) / video.fps;
    out.frames.reserve(static_cast<size_t>(f));
    for (long k = 0; k < f; ++k) {
        // evenly spaced, endpoints included
        const long idx =
            f == 1 ? (span - 1) / 2
                   : static_cast<long>(std::lround(static_cast<double>(k) *
                                                   static_cast<double>(span - 1) /
                                                   static_cast<double>(f - 1)));
        out.frames.push_back(video.frames[static_cast<size_t>(start + idx)]);
    }
    return out;
}

VideoClip rgb_difference(const VideoClip& clip) {
    SCE_CHECK(clip.frame_count() >= 2, "rgb_difference: needs at least 2 frames");
    VideoClip out = clip;
    std::vector<Image> grays;
    grays.reserve(clip.frames.size());
    for (const Image& f : clip.frames) grays.push_back(grayscale(f));
    for (size_t t = 0; t + 1 < clip.frames.size(); ++t) {
        Image diff = clip.frames[t];
        for (size_t i = 0; i < diff.data.size(); ++i)
            diff.data[i] = clamp01(0.5 + 0.5 * (grays[t + 1].data[i] - grays[t].data[i]));
        out.frames[t] = std::move(diff);
    }
    out.frames.back() = out.frames[clip.frames.size() - 2];  // duplicate to preserve length
    return out;
}

VideoClip reverse_frames(const VideoClip& clip) {
    VideoClip out = clip;
    std::reverse(out.frames.begin(), out.frames.end());
    return out;
}

VideoClip apply_clip_pipeline(const VideoClip& clip, const AugmentationSpec& spec,
                              const TemporalSpec& temporal, Rng& rng) {
    temporal.validate();
    VideoClip cur = clip;
    if (rng.bernoulli(temporal.reverse_prob)) cur = reverse_frames(cur);
    if (rng.bernoulli(temporal.rgb_diff_prob) && cur.frame_count() >= 2) cur = rgb_difference(cur);
    SCE_CHECK(cur.frame_count() >= 1, "apply_clip_pipeline: empty clip");
    ImageAugPlan plan = sample_plan(spec, cur.frames[0].h, cur.frames[0].w, rng);
    for (Image& f : cur.frames) f = apply_plan(f, plan, f.h, f.w);
    return cur;
}

}  // namespace sce
