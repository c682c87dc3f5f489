#include "sce/data.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "sce/rng.hpp"

namespace sce {

void Dataset::validate() const {
    SCE_CHECK(size() > 0, "dataset is empty");
    SCE_CHECK(labels.size() == size(), "dataset: label count ", labels.size(),
              " does not match item count ", size());
    SCE_CHECK(class_count > 0, "dataset: class_count must be positive");
    for (int l : labels)
        SCE_CHECK(l >= 0 && l < class_count, "dataset: label ", l, " outside [0,", class_count, ")");
}

namespace {

uint32_t read_be32(std::ifstream& in, const std::string& path) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw IoError("truncated IDX header in " + path);
    return (static_cast<uint32_t>(buf[0]) << 24) | (static_cast<uint32_t>(buf[1]) << 16) |
           (static_cast<uint32_t>(buf[2]) << 8) | static_cast<uint32_t>(buf[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw IoError("cannot open IDX image file " + images_path);
    const uint32_t img_magic = read_be32(imgs, images_path);
    if (img_magic != 0x00000803u)
        throw IoError(format_msg("bad IDX image magic 0x", std::hex, img_magic, " in ", images_path));
    const uint32_t count = read_be32(imgs, images_path);
    const uint32_t rows = read_be32(imgs, images_path);
    const uint32_t cols = read_be32(imgs, images_path);

    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw IoError("cannot open IDX label file " + labels_path);
    const uint32_t lab_magic = read_be32(labs, labels_path);
    if (lab_magic != 0x00000801u)
        throw IoError(format_msg("bad IDX label magic 0x", std::hex, lab_magic, " in ", labels_path));
    const uint32_t lab_count = read_be32(labs, labels_path);
    if (lab_count != count)
        throw IoError(format_msg("IDX count mismatch: ", count, " images vs ", lab_count,
                                 " labels (", images_path, ", ", labels_path, ")"));

    Dataset ds;
    ds.kind = DatasetKind::idx_images;
    ds.height = rows;
    ds.width = cols;
    ds.images.reserve(count);
    std::vector<unsigned char> pixel_buf(static_cast<size_t>(rows) * cols);
    int max_label = 0;
    for (uint32_t i = 0; i < count; ++i) {
        imgs.read(reinterpret_cast<char*>(pixel_buf.data()), static_cast<std::streamsize>(pixel_buf.size()));
        if (!imgs) throw IoError(format_msg("truncated IDX image payload at item ", i, " in ", images_path));
        Image img = Image::filled(rows, cols, 0.0);
        for (size_t p = 0; p < pixel_buf.size(); ++p) {
            const double v = static_cast<double>(pixel_buf[p]) / 255.0;
            img.data[p * 3 + 0] = v;
            img.data[p * 3 + 1] = v;
            img.data[p * 3 + 2] = v;
        }
        ds.images.push_back(std::move(img));

        char lab;
        labs.read(&lab, 1);
        if (!labs) throw IoError(format_msg("truncated IDX label payload at item ", i, " in ", labels_path));
        const int label = static_cast<unsigned char>(lab);
        max_label = std::max(max_label, label);
        ds.labels.push_back(label);
    }
    ds.class_count = max_label + 1;
    ds.validate();
    return ds;
}

namespace {

void paint_shape(Image& img, int shape, double cx, double cy, double radius, const double color[3]) {
    const double third = radius / 3.0;
    for (long y = 0; y < img.h; ++y)
        for (long x = 0; x < img.w; ++x) {
            const double dx = static_cast<double>(x) - cx;
            const double dy = static_cast<double>(y) - cy;
            bool inside = false;
            switch (shape) {
                case 0:  // disk
                    inside = dx * dx + dy * dy <= radius * radius;
                    break;
                case 1:  // square
                    inside = std::abs(dx) <= radius && std::abs(dy) <= radius;
                    break;
                case 2:  // upward triangle
                    inside = dy >= -radius && dy <= radius &&
                             std::abs(dx) <= (dy + radius) / 2.0;
                    break;
                default:  // cross
                    inside = (std::abs(dx) <= third && std::abs(dy) <= radius) ||
                             (std::abs(dy) <= third && std::abs(dx) <= radius);
                    break;
            }
            if (inside)
                for (long c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
        }
}

}  // namespace

Dataset synth_shapes(long n, long image_size, int classes, uint64_t seed) {
    SCE_CHECK(classes >= 1 && classes <= 4, "synth_shapes supports 1..4 classes, got ", classes);
    SCE_CHECK(n >= classes, "synth_shapes: need at least one sample per class");
    SCE_CHECK(image_size >= 8, "synth_shapes: image_size must be at least 8");
    Dataset ds;
    ds.kind = DatasetKind::synth_shapes;
    ds.class_count = classes;
    ds.height = image_size;
    ds.width = image_size;
    ds.generator_seed = seed;
    Rng root = Rng(seed).child("synth-shapes");
    for (long i = 0; i < n; ++i) {
        Rng rng = root.child("item", i);
        Image img = Image::filled(image_size, image_size, 0.0);
        for (double& v : img.data) v = rng.uniform(0.0, 0.35);
        const int label = static_cast<int>(i % classes);
        const double radius = static_cast<double>(image_size) * rng.uniform(0.20, 0.30);
        const double span = static_cast<double>(image_size) / 8.0;
        const double cx = static_cast<double>(image_size) / 2.0 + rng.uniform(-span, span);
        const double cy = static_cast<double>(image_size) / 2.0 + rng.uniform(-span, span);
        double color[3];
        for (double& c : color) c = rng.uniform(0.6, 1.0);
        paint_shape(img, label, cx, cy, radius, color);
        ds.images.push_back(std::move(img));
        ds.labels.push_back(label);
    }
    ds.validate();
    return ds;
}

Dataset synth_video(long n, long frames, long image_size, int classes, uint64_t seed) {
    SCE_CHECK(frames >= 8, "synth_video: needs at least 8 frames, got ", frames);
    SCE_CHECK(classes >= 1 && classes <= 4, "synth_video supports 1..4 classes, got ", classes);
    SCE_CHECK(n >= classes, "synth_video: need at least one sample per class");
    SCE_CHECK(image_size >= 8, "synth_video: image_size must be at least 8");
    Dataset ds;
    ds.kind = DatasetKind::synth_video;
    ds.class_count = classes;
    ds.height = image_size;
    ds.width = image_size;
    ds.generator_seed = seed;
    Rng root = Rng(seed).child("synth-video");
    const double fps = static_cast<double>(frames) / 2.56;
    const long sprite = std::max<long>(2, image_size / 4);
    const double speed = static_cast<double>(image_size) / static_cast<double>(frames) * 0.75;
    for (long i = 0; i < n; ++i) {
        Rng rng = root.child("item", i);
        const int label = static_cast<int>(i % classes);
        Image background = Image::filled(image_size, image_size, 0.0);
        for (double& v : background.data) v = rng.uniform(0.0, 0.3);
        double color[3];
        for (double& c : color) c = rng.uniform(0.6, 1.0);
        double px = rng.uniform(0.0, static_cast<double>(image_size));
        double py = rng.uniform(0.0, static_cast<double>(image_size));
        const double orbit = static_cast<double>(image_size) / 4.0;
        const double phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);

        VideoClip clip;
        clip.fps = fps;
        clip.span_duration = static_cast<double>(frames) / fps;
        for (long t = 0; t < frames; ++t) {
            double x = px, y = py;
            switch (label) {
                case 0: x = px - speed * static_cast<double>(t); break;          // left
                case 1: x = px + speed * static_cast<double>(t); break;          // right
                case 2: y = py - speed * static_cast<double>(t); break;          // up
                default: {                                                       // circular
                    const double ang = phase + 2.0 * 3.14159265358979323846 *
                                                   static_cast<double>(t) / static_cast<double>(frames);
                    x = px + orbit * std::cos(ang);
                    y = py + orbit * std::sin(ang);
                    break;
                }
            }
            Image frame = background;
            const long bx = static_cast<long>(std::floor(x));
            const long by = static_cast<long>(std::floor(y));
            for (long dy = 0; dy < sprite; ++dy)
                for (long dx = 0; dx < sprite; ++dx) {
                    const long yy = ((by + dy) % image_size + image_size) % image_size;
                    const long xx = ((bx + dx) % image_size + image_size) % image_size;
                    for (long c = 0; c < 3; ++c) frame.at(yy, xx, c) = color[c];
                }
            clip.frames.push_back(std::move(frame));
        }
        ds.clips.push_back(std::move(clip));
        ds.labels.push_back(label);
    }
    ds.validate();
    return ds;
}

namespace {

std::map<std::string, std::string> parse_kv(const std::string& body, const std::string& spec) {
    std::map<std::string, std::string> kv;
    if (body.empty()) return kv;
    std::stringstream ss(body);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw ConfigError("bad dataset spec entry '" + tok + "' in '" + spec + "'");
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

long kv_long(const std::map<std::string, std::string>& kv, const std::string& key, long fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return std::stol(it->second);
    } catch (const std::exception&) {
        throw ConfigError("bad integer for '" + key + "' in dataset spec");
    }
}

}  // namespace

Dataset load_data_spec(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string body = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (kind == "synth-shapes") {
        auto kv = parse_kv(body, spec);
        for (const auto& [k, v] : kv)
            if (k != "n" && k != "size" && k != "classes" && k != "seed")
                throw ConfigError("unknown dataset spec key '" + k + "'");
        return synth_shapes(kv_long(kv, "n", 2000), kv_long(kv, "size", 24),
                            static_cast<int>(kv_long(kv, "classes", 4)),
                            static_cast<uint64_t>(kv_long(kv, "seed", 1)));
    }
    if (kind == "synth-video") {
        auto kv = parse_kv(body, spec);
        for (const auto& [k, v] : kv)
            if (k != "n" && k != "frames" && k != "size" && k != "classes" && k != "seed")
                throw ConfigError("unknown dataset spec key '" + k + "'");
        return synth_video(kv_long(kv, "n", 800), kv_long(kv, "frames", 8),
                           kv_long(kv, "size", 16), static_cast<int>(kv_long(kv, "classes", 4)),
                           static_cast<uint64_t>(kv_long(kv, "seed", 1)));
    }
    if (kind == "idx") {
        auto kv = parse_kv(body, spec);
        for (const auto& [k, v] : kv)
            if (k != "images" && k != "labels")
                throw ConfigError("unknown dataset spec key '" + k + "'");
        if (!kv.count("images") || !kv.count("labels"))
            throw ConfigError("idx dataset spec needs images=PATH,labels=PATH");
        return load_idx(kv.at("images"), kv.at("labels"));
    }
    throw ConfigError("unknown dataset kind '" + kind +
                      "' (synth-shapes|synth-video|idx) in '" + spec + "'");
}

std::vector<double> flatten_image(const Image& img) { return img.data; }

std::vector<double> flatten_clip(const VideoClip& clip) {
    std::vector<double> out;
    out.reserve(clip.frames.size() * (clip.frames.empty() ? 0 : clip.frames[0].data.size()));
    for (const Image& f : clip.frames) out.insert(out.end(), f.data.begin(), f.data.end());
    return out;
}

}  // namespace sce
