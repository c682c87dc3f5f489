#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "sce/checkpoint.hpp"
#include "sce/config.hpp"
#include "sce/metrics.hpp"
#include "sce/svg.hpp"

using namespace sce;

namespace {
std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("empty config yields the documented defaults") {
    TrainConfig cfg = parse_config_text("", "<empty>");
    CHECK(cfg.lambda == 0.5);
    CHECK(cfg.tau == 0.1);
    CHECK(cfg.tau_m == 0.07);
    CHECK(cfg.momentum_init == 0.996);
    CHECK(cfg.symmetrize);
    CHECK(cfg.aug_online == "strong-alpha");
    CHECK(cfg.aug_target == "strong-beta");
    CHECK(cfg.relational_mode == "strict");
    CHECK(cfg.warmup_epochs == 5);
    CHECK(cfg.sgd_momentum == 0.9);
    CHECK(cfg.crop_scale_lo == 0.2);
    CHECK(cfg.threads == 1);
}

TEST_CASE("single-key override touches only that key") {
    TrainConfig cfg = parse_config_text("tau_m = 0.05\n", "<test>");
    CHECK(cfg.tau_m == 0.05);
    CHECK(cfg.tau == 0.1);
    CHECK(cfg.lambda == 0.5);
}

TEST_CASE("range and syntax errors carry context") {
    CHECK_THROWS_WITH_AS(parse_config_text("lambda = 1.5\n", "<t>"),
                         doctest::Contains("lambda"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("pizza = 4\n", "<t>"),
                         doctest::Contains(":1: unknown key 'pizza'"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text("\n\nthis is not a kv line\n", "<t>"),
                         doctest::Contains(":3:"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("tau = -0.1\n", "<t>"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("batch_size = 64\nqueue_size = 32\n", "<t>"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("warmup_epochs = 9\ntotal_epochs = 5\n", "<t>"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("aug_online = mild\n", "<t>"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("lambda = banana\n", "<t>"), ConfigError);
}

TEST_CASE("comments and blank lines are ignored") {
    TrainConfig cfg = parse_config_text("# a comment\n\n  lambda = 0.25  \n", "<t>");
    CHECK(cfg.lambda == 0.25);
}

TEST_CASE("config round-trips through serialize/parse") {
    TrainConfig cfg;
    cfg.lambda = 0.37;
    cfg.tau_m = 0.0625;
    cfg.seed = 123456789;
    cfg.symmetrize = false;
    cfg.encoder = "cnn:4,12";
    cfg.projector_bn = "all";
    cfg.rgb_diff_prob = 0.2;
    cfg.lr_init = 1.7320508075688772;
    const std::string text = serialize_config(cfg);
    TrainConfig back = parse_config_text(text, "<round-trip>");
    CHECK(serialize_config(back) == text);
    CHECK(back.lambda == cfg.lambda);
    CHECK(back.lr_init == cfg.lr_init);
    CHECK(back.seed == cfg.seed);
    CHECK(back.encoder == cfg.encoder);
}

TEST_CASE("config file parsing and SCE_SEED override") {
    const std::string path = temp_path("sce_cfg_test.cfg");
    {
        std::ofstream out(path, std::ios::trunc);
        out << "lambda = 0.75\nseed = 7\n";
    }
    TrainConfig cfg = parse_config(path);
    CHECK(cfg.lambda == 0.75);
    CHECK(cfg.seed == 7);

    setenv("SCE_SEED", "99", 1);
    apply_env_overrides(cfg);
    CHECK(cfg.seed == 99);
    setenv("SCE_SEED", "not-a-number", 1);
    CHECK_THROWS_AS(apply_env_overrides(cfg), ConfigError);
    unsetenv("SCE_SEED");

    CHECK_THROWS_AS(parse_config(temp_path("missing.cfg")), IoError);
}

TEST_CASE("checkpoint round-trips model, velocities, and queue") {
    TrainConfig cfg;
    cfg.encoder = "mlp:10,8";
    cfg.projector_hidden = 8;
    cfg.projector_out = 6;
    cfg.batch_size = 4;
    cfg.queue_size = 8;
    NetworkSpec spec = make_network_spec(cfg, 12, 3, 2, 2);
    SiameseModel model = init_model(spec, cfg.seed);
    // make the branches differ so the round trip is non-trivial
    model.online[0].value.data[0] = 42.0;

    TrainingState st;
    st.config = cfg;
    st.config_text = serialize_config(cfg);
    st.model = model;
    for (const Param& p : model.online.params) st.velocities.push_back(Tensor::full(p.value.shape, 0.25));
    st.next_step = 17;
    st.next_epoch = 3;
    st.has_queue = true;
    st.queue_rows = Tensor::zeros({8, 6});
    for (long i = 0; i < 8; ++i) st.queue_rows.at(i, i % 6) = 1.0;
    st.queue_fill = 8;
    st.queue_cursor = 2;

    const std::string path = temp_path("sce_ckpt_test.sce");
    save_checkpoint(path, st);
    TrainingState back = load_checkpoint(path);

    CHECK(serialize_config(back.config) == st.config_text);
    CHECK(back.next_step == 17);
    CHECK(back.next_epoch == 3);
    REQUIRE(back.model.online.size() == model.online.size());
    for (size_t i = 0; i < model.online.size(); ++i) {
        CHECK(back.model.online[i].value.data == model.online[i].value.data);
        CHECK(back.model.target[i].value.data == model.target[i].value.data);
        CHECK(back.velocities[i].data == st.velocities[i].data);
    }
    CHECK(back.queue_rows.data == st.queue_rows.data);
    CHECK(back.queue_cursor == 2);

    // corrupt the magic
    {
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(0);
        f.write("XXXX", 4);
    }
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
    CHECK_THROWS_AS(load_checkpoint(temp_path("missing.sce")), IoError);
}

TEST_CASE("metrics CSV round trip") {
    const std::string path = temp_path("sce_metrics_test.csv");
    MetricsWriter writer(path);
    MetricsRecord r;
    r.step = 3;
    r.epoch = 1;
    r.loss = 2.5;
    r.loss_infonce = 2.25;
    r.loss_ressl = 0.125;
    r.loss_ceil = 0.0625;
    r.decomposition_residual = 1e-15;
    r.lr = 0.03;
    r.momentum = 0.997;
    r.feature_std = 0.11;
    r.clamp_count = 0;
    writer.write(r);

    auto rows = read_metrics_csv(path);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].step == 3);
    CHECK(rows[0].loss == 2.5);
    CHECK(rows[0].decomposition_residual == 1e-15);
    CHECK(rows[0].momentum == 0.997);

    // header check is strict
    {
        std::ofstream out(path, std::ios::trunc);
        out << "bogus,header\n1,2\n";
    }
    CHECK_THROWS_AS(read_metrics_csv(path), IoError);
}

TEST_CASE("svg plot emits well-formed markup") {
    const std::string csv = temp_path("sce_plot_test.csv");
    MetricsWriter writer(csv);
    for (int s = 0; s < 20; ++s) {
        MetricsRecord r;
        r.step = s;
        r.loss = 3.0 - 0.1 * s;
        r.loss_infonce = 2.0 - 0.05 * s;
        r.lr = 0.01 * s;
        writer.write(r);
    }
    const std::string svg = temp_path("sce_plot_test.svg");
    plot_metrics_svg(csv, svg, {"loss", "lr"});

    std::ifstream in(svg);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(content.rfind("<?xml", 0) == 0);
    CHECK(content.find("<svg") != std::string::npos);
    CHECK(content.find("<polyline") != std::string::npos);
    CHECK(content.find("</svg>") != std::string::npos);
    CHECK(content.find("loss") != std::string::npos);

    CHECK_THROWS_AS(plot_metrics_svg(csv, svg, {"not_a_column"}), IoError);
}

TEST_CASE("network spec from config") {
    TrainConfig cfg;
    cfg.encoder = "cnn:6,10";
    cfg.projector_bn = "all";
    NetworkSpec spec = make_network_spec(cfg, 3 * 8 * 8, 3, 8, 8);
    CHECK(spec.encoder.kind == EncoderKind::cnn);
    CHECK(spec.encoder_out_dim() == 10);
    CHECK(spec.projector.bn == BnPlacement::all);
    CHECK(spec.input_dim == 192);
}
