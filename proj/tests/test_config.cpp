#include "acm/config.hpp"

#include "acm/errors.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

using namespace acm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("acmcfg_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string write(const TempDir& dir, const std::string& name, const std::string& text) {
    const std::string p = dir.file(name);
    std::ofstream out(p);
    out << text;
    return p;
}

} // namespace

TEST_SUITE_BEGIN("config");

TEST_CASE("defaults mirror the module defaults") {
    const RunConfig c;
    CHECK(c.mser.delta == MserConfig{}.delta);
    CHECK(c.mser.min_area == MserConfig{}.min_area);
    CHECK(c.plan.conv_maps == LayerPlan{}.conv_maps);
    CHECK(c.plan.dense_units == LayerPlan{}.dense_units);
    CHECK(c.train.batch_size == TrainConfig{}.batch_size);
    CHECK(c.train.lr == TrainConfig{}.lr);
    CHECK(c.tau_cm == 0.3);
    CHECK(c.min_blob_area == 25);
    CHECK(c.iou_thresh == 0.7);
    CHECK(c.ap_interp == ApInterp::AllPoint);
    CHECK(c.detect_options().nms_iou == DetectOptions{}.nms_iou);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("empty config file reproduces the defaults") {
    TempDir dir;
    const RunConfig c = load_run_config(write(dir, "empty.json", "{}"));
    const RunConfig d;
    CHECK(config_echo(c) == config_echo(d));
}

TEST_CASE("round-trip preserves every field") {
    TempDir dir;
    RunConfig c;
    c.working_width = 640;
    c.working_height = 480;
    c.mser.delta = 7;
    c.mser.min_area = 40;
    c.mser.max_area = 0.5;
    c.mser.max_variation = 0.3;
    c.mser.both_polarities = false;
    c.seed = 99;
    c.plan.conv_maps = {4, 8, 8};
    c.plan.dense_units = 16;
    c.plan.dropout_rate = 0.25;
    c.train.batch_size = 32;
    c.train.epochs = 12;
    c.train.lr = 3e-3;
    c.train.seed = 7;
    c.tau_cm = 0.4;
    c.min_blob_area = 30;
    c.fuzzy_features = {"mean", "fill"};
    c.collect_tau = 0.002;
    c.iou_thresh = 0.5;
    c.ap_interp = ApInterp::ElevenPoint;
    c.threads = 2;
    c.model_path = "m.acm1";
    c.fuzzy_path = "f.json";
    c.dataset_dir = "data";
    c.out_dir = "out";

    const std::string p = dir.file("cfg.json");
    save_run_config(c, p);
    const RunConfig back = load_run_config(p);
    CHECK(config_echo(back) == config_echo(c));
    CHECK(back.ap_interp == ApInterp::ElevenPoint);
    CHECK(back.plan.conv_maps == std::array<int, 3>{4, 8, 8});
    CHECK(back.train.lr == 3e-3);
}

TEST_CASE("partial config keeps defaults for missing keys") {
    TempDir dir;
    const RunConfig c = load_run_config(
        write(dir, "p.json", R"({"tau_cm": 0.5, "mser": {"delta": 9}})"));
    CHECK(c.tau_cm == 0.5);
    CHECK(c.mser.delta == 9);
    CHECK(c.mser.min_area == 30);
    CHECK(c.min_blob_area == 25);
}

TEST_CASE("unknown keys are rejected with their path") {
    TempDir dir;
    CHECK_THROWS_WITH_AS(load_run_config(write(dir, "u.json", R"({"tau_mc": 0.5})")),
                         doctest::Contains("tau_mc"), FormatError);
    CHECK_THROWS_WITH_AS(load_run_config(write(dir, "n.json", R"({"mser": {"delat": 3}})")),
                         doctest::Contains("mser.delat"), FormatError);
}

TEST_CASE("malformed values are format or validation errors") {
    TempDir dir;
    CHECK_THROWS_AS(load_run_config(write(dir, "a.json", "not json")), FormatError);
    CHECK_THROWS_AS(load_run_config(write(dir, "b.json", "[1,2]")), FormatError);
    CHECK_THROWS_AS(load_run_config(write(dir, "c.json", R"({"ap_interp": "midpoint"})")),
                    FormatError);
    CHECK_THROWS_AS(load_run_config(write(dir, "d.json", R"({"tau_cm": 7.0})")), ParamError);
    CHECK_THROWS_AS(load_run_config(write(dir, "e.json", R"({"threads": 0})")), ParamError);
    CHECK_THROWS_AS(load_run_config(dir.file("missing.json")), ParamError);
}

TEST_CASE("echo is canonical json with the expected keys") {
    const std::string echo = config_echo(RunConfig{});
    CHECK(echo.find("\"tau_cm\"") != std::string::npos);
    CHECK(echo.find("\"mser\"") != std::string::npos);
    CHECK(echo.find("\"ap_interp\": \"all-point\"") != std::string::npos);
}

TEST_SUITE_END();
