#include "sce/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "sce/kernels.hpp"
#include "sce/loss.hpp"
#include "sce/rng.hpp"

namespace sce {

ScheduleInfo make_schedule(const TrainConfig& cfg, size_t dataset_size) {
    SCE_CHECK(dataset_size > 0, "schedule: dataset is empty");
    const long spe = static_cast<long>((dataset_size + cfg.batch_size - 1) /
                                       static_cast<size_t>(cfg.batch_size));
    ScheduleInfo s;
    s.total_steps = spe * cfg.total_epochs;
    s.warmup_steps = spe * cfg.warmup_epochs;
    s.peak_lr = cfg.effective_lr();
    s.momentum_init = cfg.momentum_init;
    return s;
}

double lr_schedule(long step, const ScheduleInfo& s) {
    SCE_CHECK(step >= 0 && step < s.total_steps, "lr_schedule: step ", step, " outside run of ",
              s.total_steps);
    if (s.warmup_steps > 0 && step < s.warmup_steps)
        return s.peak_lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
    const long last = s.total_steps - 1;
    if (step >= last) return 0.0;
    if (last == s.warmup_steps) return s.peak_lr;
    const double progress = static_cast<double>(step - s.warmup_steps) /
                            static_cast<double>(last - s.warmup_steps);
    return s.peak_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

double momentum_schedule(long step, const ScheduleInfo& s) {
    SCE_CHECK(step >= 0 && step < s.total_steps, "momentum_schedule: step ", step,
              " outside run of ", s.total_steps);
    const long last = s.total_steps - 1;
    if (step == 0) return s.momentum_init;
    if (step >= last) return 1.0;
    const double progress = static_cast<double>(step) / static_cast<double>(last);
    return 1.0 - (1.0 - s.momentum_init) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

namespace {

Tensor rows_from(std::vector<std::vector<double>> rows) {
    SCE_CHECK(!rows.empty(), "batch assembly: no rows");
    const long cols = static_cast<long>(rows[0].size());
    Tensor out = Tensor::zeros({static_cast<long>(rows.size()), cols});
    for (size_t i = 0; i < rows.size(); ++i) {
        SCE_CHECK(static_cast<long>(rows[i].size()) == cols, "batch assembly: ragged rows");
        std::copy(rows[i].begin(), rows[i].end(),
                  out.data.begin() + static_cast<long>(i) * cols);
    }
    return out;
}

TemporalSpec temporal_from(const TrainConfig& cfg) {
    TemporalSpec t;
    t.jitter_factor = cfg.temporal_jitter;
    t.reverse_prob = cfg.reverse_prob;
    t.rgb_diff_prob = cfg.rgb_diff_prob;
    t.clip_duration_s = cfg.clip_duration_s;
    t.frames_per_clip = cfg.frames_per_clip;
    return t;
}

AugmentationSpec branch_spec(const TrainConfig& cfg, Branch branch) {
    AugmentationSpec spec =
        presets::by_name(branch == Branch::online ? cfg.aug_online : cfg.aug_target);
    spec.crop_scale_lo = cfg.crop_scale_lo;
    spec.crop_scale_hi = cfg.crop_scale_hi;
    return spec;
}

std::vector<double> augment_one(const Dataset& ds, size_t idx, const AugmentationSpec& spec,
                                const TemporalSpec& temporal, Rng rng) {
    if (ds.is_video()) {
        VideoClip clip = sample_clip(ds.clips[idx], temporal, rng);
        clip = apply_clip_pipeline(clip, spec, temporal, rng);
        return flatten_clip(clip);
    }
    return flatten_image(apply_image_pipeline(ds.images[idx], spec, rng));
}

long input_dim_of(const Dataset& ds, const TrainConfig& cfg) {
    const long per_image = ds.height * ds.width * 3;
    return ds.is_video() ? per_image * cfg.frames_per_clip : per_image;
}

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_manifest(const std::string& path, const TrainConfig& cfg, const Dataset& ds,
                    const TrainResult& result, const std::string& started_at, double wall_s) {
    nlohmann::json j;
    j["tool"] = "sce";
    j["version"] = "1.0.0";
    j["seed"] = cfg.seed;
    j["config"] = serialize_config(cfg);
    j["dataset"] = {{"kind", ds.is_video() ? "video" : "images"},
                    {"items", ds.size()},
                    {"classes", ds.class_count},
                    {"height", ds.height},
                    {"width", ds.width}};
    j["outputs"] = {{"metrics", result.metrics_path},
                    {"checkpoint", result.checkpoint_path}};
    j["started_at"] = started_at;
    if (wall_s >= 0.0) j["wall_clock_s"] = wall_s;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace

Tensor augment_batch(const Dataset& ds, const std::vector<size_t>& batch, const TrainConfig& cfg,
                     long step, Branch branch) {
    const AugmentationSpec spec = branch_spec(cfg, branch);
    const TemporalSpec temporal = temporal_from(cfg);
    const int branch_tag = branch == Branch::online ? 0 : 1;
    std::vector<std::vector<double>> rows(batch.size());
    const Rng root = Rng(cfg.seed);
    // Per-sample streams keyed by (step, branch, slot): parallel across
    // samples, identical across configs that share a seed.
    const int nthreads = kernels::threads();
#pragma omp parallel for schedule(static) num_threads(nthreads) if (nthreads > 1)
    for (size_t slot = 0; slot < batch.size(); ++slot) {
        Rng rng = root.child("aug", step, branch_tag, static_cast<long>(slot));
        rows[slot] = augment_one(ds, batch[slot], spec, temporal, rng);
    }
    return rows_from(std::move(rows));
}

Tensor eval_batch(const Dataset& ds, const std::vector<size_t>& batch, const TrainConfig& cfg) {
    std::vector<std::vector<double>> rows(batch.size());
    for (size_t slot = 0; slot < batch.size(); ++slot) {
        const size_t idx = batch[slot];
        if (ds.is_video()) {
            const VideoClip& v = ds.clips[idx];
            const long total = v.frame_count();
            const long f = cfg.frames_per_clip;
            VideoClip center;
            center.fps = v.fps;
            for (long k = 0; k < f; ++k) {
                const long pos =
                    f == 1 ? (total - 1) / 2
                           : static_cast<long>(std::lround(static_cast<double>(k) *
                                                           static_cast<double>(total - 1) /
                                                           static_cast<double>(f - 1)));
                center.frames.push_back(v.frames[static_cast<size_t>(pos)]);
            }
            rows[slot] = flatten_clip(center);
        } else {
            rows[slot] = flatten_image(ds.images[idx]);
        }
    }
    return rows_from(std::move(rows));
}

double embedding_std(const Tensor& rows) {
    const long r = rows.rows(), c = rows.cols();
    double acc = 0.0;
    for (long j = 0; j < c; ++j) {
        // shifted variance: exact zero for identical rows
        const double shift = rows.at(0, j);
        double s1 = 0.0, s2 = 0.0;
        for (long i = 0; i < r; ++i) {
            const double d = rows.at(i, j) - shift;
            s1 += d;
            s2 += d * d;
        }
        const double var = (s2 - s1 * s1 / static_cast<double>(r)) / static_cast<double>(r);
        acc += std::sqrt(var > 0.0 ? var : 0.0);
    }
    return acc / static_cast<double>(c);
}

MetricsRecord train_step(SiameseModel& model, std::vector<Tensor>& velocities, const Dataset& ds,
                         const std::vector<size_t>& batch, MemoryQueue& queue,
                         const TrainConfig& cfg, long step, int epoch,
                         const ScheduleInfo& sched) {
    SCE_CHECK(queue.full(), "train_step: queue must be warm-started before step 0");
    SCE_CHECK(velocities.size() == model.online.size(), "train_step: velocity buffers misaligned");

    Tensor view1 = augment_batch(ds, batch, cfg, step, Branch::online);
    Tensor view2 = augment_batch(ds, batch, cfg, step, Branch::target);

    LossConfig loss_cfg{cfg.lambda, cfg.tau, cfg.tau_m, cfg.mode(), cfg.symmetrize};
    Graph g;
    std::vector<Tensor> leaves;
    SymmetrizedResult res =
        symmetrized_sce(g, model, view1, view2, queue.storage(), loss_cfg, leaves);

    const double loss_value = res.loss.item();
    if (!std::isfinite(loss_value))
        throw ContractViolation(format_msg(
            "NaN/inf loss at step ", step, "; online logits min/max/mean = ", res.logits_min, "/",
            res.logits_max, "/", res.logits_mean, ", components infonce=", res.breakdown.infonce,
            " ressl=", res.breakdown.ressl, " ceil=", res.breakdown.ceil));

    g.backward(res.loss);

    // The optimizer must never move the target branch.
    std::vector<std::vector<double>> target_copy(model.target.size());
    for (size_t i = 0; i < model.target.size(); ++i) target_copy[i] = model.target[i].value.data;

    const double lr = lr_schedule(step, sched);
    for (size_t i = 0; i < model.online.size(); ++i) {
        Param& p = model.online[i];
        if (!p.trainable || leaves[i].node < 0 || !g.has_grad(leaves[i])) continue;
        const Tensor& grad = g.grad(leaves[i]);
        Tensor& vel = velocities[i];
        for (size_t j = 0; j < p.value.data.size(); ++j) {
            const double update = grad.data[j] + cfg.weight_decay * p.value.data[j];
            vel.data[j] = cfg.sgd_momentum * vel.data[j] + update;
            p.value.data[j] -= lr * vel.data[j];
        }
    }
    for (size_t i = 0; i < model.target.size(); ++i)
        SCE_CHECK(model.target[i].value.data == target_copy[i],
                  "optimizer touched target parameter ", model.target[i].name);

    ema_update(model, momentum_schedule(step, sched));

    queue.push(res.z2_t);
    if (cfg.symmetrize) queue.push(res.z1_t);

    MetricsRecord rec;
    rec.step = step;
    rec.epoch = epoch;
    rec.loss = loss_value;
    rec.loss_infonce = res.breakdown.infonce;
    rec.loss_ressl = res.breakdown.ressl;
    rec.loss_ceil = res.breakdown.ceil;
    rec.decomposition_residual = res.breakdown.residual;
    rec.lr = lr;
    rec.momentum = momentum_schedule(step, sched);
    rec.feature_std = embedding_std(res.z2_t);
    rec.clamp_count = res.clamp_count;
    return rec;
}

TrainResult train_run(const TrainConfig& cfg, const Dataset& ds, const std::string& out_dir,
                      const std::string& resume_checkpoint, int stop_after_epochs) {
    cfg.validate();
    ds.validate();
    kernels::set_threads(cfg.threads);

    std::filesystem::create_directories(out_dir);
    TrainResult result;
    result.out_dir = out_dir;
    result.metrics_path = out_dir + "/metrics.csv";
    result.checkpoint_path = out_dir + "/checkpoint.sce";
    result.manifest_path = out_dir + "/manifest.json";

    const long input_dim = input_dim_of(ds, cfg);
    const long channels = ds.is_video() ? 3 * cfg.frames_per_clip : 3;
    NetworkSpec spec = make_network_spec(cfg, input_dim, channels, ds.height, ds.width);

    SiameseModel model;
    std::vector<Tensor> velocities;
    MemoryQueue queue(cfg.queue_size, cfg.projector_out);
    long start_step = 0;
    int start_epoch = 0;

    if (!resume_checkpoint.empty()) {
        TrainingState st = load_checkpoint(resume_checkpoint);
        SCE_CHECK(serialize_config(st.config) == serialize_config(cfg),
                  "resume: checkpoint config does not match the requested config");
        model = std::move(st.model);
        velocities = std::move(st.velocities);
        SCE_CHECK(st.has_queue, "resume: checkpoint has no queue state");
        queue.restore(std::move(st.queue_rows), st.queue_fill, st.queue_cursor);
        start_step = st.next_step;
        start_epoch = st.next_epoch;
    } else {
        model = init_model(spec, cfg.seed);
        velocities.reserve(model.online.size());
        for (const Param& p : model.online.params) velocities.push_back(Tensor::zeros(p.value.shape));
    }

    const auto t0 = std::chrono::steady_clock::now();
    const std::string started_at = iso_timestamp();
    write_manifest(result.manifest_path, cfg, ds, result, started_at, -1.0);

    const size_t n = ds.size();
    const long spe = static_cast<long>((n + cfg.batch_size - 1) / static_cast<size_t>(cfg.batch_size));
    ScheduleInfo sched = make_schedule(cfg, n);

    // Queue warm start: target embeddings of randomly drawn, target-augmented
    // samples, so step 0 already sees a meaningful relational distribution.
    if (resume_checkpoint.empty()) {
        Rng warm = Rng(cfg.seed).child("queue-warmup");
        std::vector<size_t> picks;
        picks.reserve(static_cast<size_t>(cfg.queue_size));
        for (int i = 0; i < cfg.queue_size; ++i) picks.push_back(warm.uniform_index(n));
        for (size_t off = 0; off < picks.size(); off += static_cast<size_t>(cfg.batch_size)) {
            const size_t hi = std::min(picks.size(), off + static_cast<size_t>(cfg.batch_size));
            std::vector<size_t> chunk(picks.begin() + static_cast<long>(off),
                                      picks.begin() + static_cast<long>(hi));
            // warm-up draws use negative step ids so they never collide with
            // training streams
            Tensor x = augment_batch(ds, chunk, cfg, -1 - static_cast<long>(off), Branch::target);
            queue.push(forward_target(model, x));
        }
    }

    MetricsWriter writer(result.metrics_path);
    const int last_epoch = stop_after_epochs > 0
                               ? std::min(cfg.total_epochs, start_epoch + stop_after_epochs)
                               : cfg.total_epochs;
    long step = start_step;
    for (int epoch = start_epoch; epoch < last_epoch; ++epoch) {
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = Rng(cfg.seed).child("shuffle", epoch);
        shuffle_rng.shuffle(order);
        for (long b = 0; b < spe; ++b) {
            const size_t lo = static_cast<size_t>(b) * static_cast<size_t>(cfg.batch_size);
            const size_t hi = std::min(n, lo + static_cast<size_t>(cfg.batch_size));
            std::vector<size_t> batch(order.begin() + static_cast<long>(lo),
                                      order.begin() + static_cast<long>(hi));
            MetricsRecord rec = train_step(model, velocities, ds, batch, queue, cfg, step, epoch, sched);
            writer.write(rec);
            result.metrics.push_back(rec);
            ++step;
        }
    }

    TrainingState st;
    st.config = cfg;
    st.config_text = serialize_config(cfg);
    st.model = std::move(model);
    st.velocities = std::move(velocities);
    st.next_step = step;
    st.next_epoch = last_epoch;
    st.has_queue = true;
    st.queue_rows = queue.storage();
    st.queue_fill = queue.fill();
    st.queue_cursor = queue.cursor();
    save_checkpoint(result.checkpoint_path, st);

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(result.manifest_path, cfg, ds, result, started_at, wall);
    return result;
}

}  // namespace sce
