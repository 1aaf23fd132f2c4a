#include "acm/config.hpp"

#include "acm/errors.hpp"

#include <json.hpp>

#include <fstream>

namespace acm {

using nlohmann::json;

DetectOptions RunConfig::detect_options() const {
    DetectOptions opt;
    opt.mser = mser;
    opt.tau_cm = tau_cm;
    opt.min_blob_area = min_blob_area;
    return opt;
}

void RunConfig::validate() const {
    if (working_width < 0 || working_height < 0)
        throw ParamError("working resolution must be >= 0");
    mser.validate();
    plan.validate();
    train.validate();
    detect_options().validate();
    if (collect_tau < 0.0 || collect_tau > 1.0)
        throw ParamError("collect_tau must be in [0,1]");
    if (iou_thresh <= 0.0 || iou_thresh > 1.0) throw ParamError("iou_thresh must be in (0,1]");
    if (threads < 1) throw ParamError("threads must be >= 1");
    if (fuzzy_features.empty()) throw ParamError("fuzzy feature set is empty");
}

namespace {

json to_json(const RunConfig& c) {
    return json{
        {"working_width", c.working_width},
        {"working_height", c.working_height},
        {"mser",
         {{"delta", c.mser.delta},
          {"min_area", c.mser.min_area},
          {"max_area", c.mser.max_area},
          {"max_variation", c.mser.max_variation},
          {"both_polarities", c.mser.both_polarities}}},
        {"seed", c.seed},
        {"plan",
         {{"conv_maps", c.plan.conv_maps},
          {"dense_units", c.plan.dense_units},
          {"dropout_rate", c.plan.dropout_rate}}},
        {"train",
         {{"batch_size", c.train.batch_size},
          {"epochs", c.train.epochs},
          {"val_fraction", c.train.val_fraction},
          {"lr", c.train.lr},
          {"beta1", c.train.beta1},
          {"beta2", c.train.beta2},
          {"eps", c.train.eps},
          {"seed", c.train.seed}}},
        {"tau_cm", c.tau_cm},
        {"min_blob_area", c.min_blob_area},
        {"fuzzy_features", c.fuzzy_features},
        {"collect_tau", c.collect_tau},
        {"iou_thresh", c.iou_thresh},
        {"ap_interp", c.ap_interp == ApInterp::AllPoint ? "all-point" : "11-point"},
        {"threads", c.threads},
        {"model_path", c.model_path},
        {"fuzzy_path", c.fuzzy_path},
        {"dataset_dir", c.dataset_dir},
        {"out_dir", c.out_dir},
    };
}

template <typename T>
void pull(const json& j, const char* key, T& into) {
    if (j.contains(key)) into = j.at(key).template get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> known,
                const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw FormatError("unknown config key '" + where + key + "'");
    }
}

RunConfig from_json(const json& j) {
    RunConfig c;
    check_keys(j,
               {"working_width", "working_height", "mser", "seed", "plan", "train", "tau_cm",
                "min_blob_area", "fuzzy_features", "collect_tau", "iou_thresh", "ap_interp",
                "threads", "model_path", "fuzzy_path", "dataset_dir", "out_dir"},
               "");
    pull(j, "working_width", c.working_width);
    pull(j, "working_height", c.working_height);
    if (j.contains("mser")) {
        const json& m = j.at("mser");
        check_keys(m, {"delta", "min_area", "max_area", "max_variation", "both_polarities"},
                   "mser.");
        pull(m, "delta", c.mser.delta);
        pull(m, "min_area", c.mser.min_area);
        pull(m, "max_area", c.mser.max_area);
        pull(m, "max_variation", c.mser.max_variation);
        pull(m, "both_polarities", c.mser.both_polarities);
    }
    pull(j, "seed", c.seed);
    if (j.contains("plan")) {
        const json& p = j.at("plan");
        check_keys(p, {"conv_maps", "dense_units", "dropout_rate"}, "plan.");
        pull(p, "conv_maps", c.plan.conv_maps);
        pull(p, "dense_units", c.plan.dense_units);
        pull(p, "dropout_rate", c.plan.dropout_rate);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        check_keys(t, {"batch_size", "epochs", "val_fraction", "lr", "beta1", "beta2", "eps",
                       "seed"},
                   "train.");
        pull(t, "batch_size", c.train.batch_size);
        pull(t, "epochs", c.train.epochs);
        pull(t, "val_fraction", c.train.val_fraction);
        pull(t, "lr", c.train.lr);
        pull(t, "beta1", c.train.beta1);
        pull(t, "beta2", c.train.beta2);
        pull(t, "eps", c.train.eps);
        pull(t, "seed", c.train.seed);
    }
    pull(j, "tau_cm", c.tau_cm);
    pull(j, "min_blob_area", c.min_blob_area);
    pull(j, "fuzzy_features", c.fuzzy_features);
    pull(j, "collect_tau", c.collect_tau);
    pull(j, "iou_thresh", c.iou_thresh);
    if (j.contains("ap_interp")) {
        const std::string s = j.at("ap_interp").get<std::string>();
        if (s == "all-point")
            c.ap_interp = ApInterp::AllPoint;
        else if (s == "11-point")
            c.ap_interp = ApInterp::ElevenPoint;
        else
            throw FormatError("ap_interp must be 'all-point' or '11-point'");
    }
    pull(j, "threads", c.threads);
    pull(j, "model_path", c.model_path);
    pull(j, "fuzzy_path", c.fuzzy_path);
    pull(j, "dataset_dir", c.dataset_dir);
    pull(j, "out_dir", c.out_dir);
    c.validate();
    return c;
}

} // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParamError("cannot open config: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
    if (!j.is_object()) throw FormatError(path + ": config must be a JSON object");
    try {
        return from_json(j);
    } catch (const json::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParamError("cannot write config: " + path);
    out << to_json(cfg).dump(2) << "\n";
}

std::string config_echo(const RunConfig& cfg) { return to_json(cfg).dump(2); }

} // namespace acm
