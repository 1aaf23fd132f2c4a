#pragma once

#include "acm/detector.hpp"
#include "acm/evalpipe.hpp"
#include "acm/tinycnn.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace acm {

/// One run's knobs. Every default equals the owning module's default, so an
/// empty config file reproduces the library defaults exactly.
struct RunConfig {
    int working_width = 0; // recorded frame size; 0 keeps the native size
    int working_height = 0;
    MserConfig mser;
    std::uint64_t seed = 1; // corpus generation and patch augmentation
    LayerPlan plan;
    TrainConfig train;
    double tau_cm = 0.3;
    int min_blob_area = 25;
    std::vector<std::string> fuzzy_features{"mean", "std", "fill"};
    double collect_tau = 0.001; // blob-harvest threshold when fitting fuzzy sets
    double iou_thresh = 0.7;
    ApInterp ap_interp = ApInterp::AllPoint;
    int threads = 1;
    std::string model_path = "cnn.acm1";
    std::string fuzzy_path = "fuzzy.json";
    std::string dataset_dir;
    std::string out_dir = ".";

    DetectOptions detect_options() const;
    void validate() const; // throws ParamError
};

/// JSON object with any subset of the keys; missing keys keep defaults,
/// unknown keys raise FormatError. Values are validated on load.
RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

/// Canonical JSON text of the full config, embedded in produced artifacts.
std::string config_echo(const RunConfig& cfg);

} // namespace acm
