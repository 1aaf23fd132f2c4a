#include "acm/config.hpp"
#include "acm/detector.hpp"
#include "acm/errors.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- configuration plumbing ------------------------------------------------

struct CommonOpts {
    std::string config_path;
    std::string out;
    std::string data;
    std::string model;
    std::string fuzzy;
    std::uint64_t seed = 0;
};

bool passed(const CLI::App* sub, const std::string& name) {
    const CLI::Option* opt = sub->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
}

void add_config_flags(CLI::App* sub, CommonOpts& o) {
    sub->add_option("--config", o.config_path,
                    "JSON run config; absent keys keep built-in defaults")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "override the config seed");
    sub->add_option("--out", o.out, "output directory, created when missing");
}

void add_data_flag(CLI::App* sub, CommonOpts& o) {
    sub->add_option("--data", o.data,
                    "dataset directory: <id>.pgm scenes plus annotations.jsonl "
                    "(or KITTI <id>.txt labels)");
}

void add_model_flag(CLI::App* sub, CommonOpts& o) {
    sub->add_option("--model", o.model, "CNN model file (ACM1 container)");
}

void add_fuzzy_flag(CLI::App* sub, CommonOpts& o) {
    sub->add_option("--fuzzy", o.fuzzy, "fuzzy blob classifier file (JSON)");
}

/// ACM_THREADS caps the worker pool below the configured thread count.
int env_thread_cap() {
    const char* s = std::getenv("ACM_THREADS");
    if (s == nullptr || *s == '\0') return 0;
    char* end = nullptr;
    const long v = std::strtol(s, &end, 10);
    if (*end != '\0' || v < 1)
        throw acm::ParamError(std::string("ACM_THREADS must be a positive integer, got '") +
                              s + "'");
    return static_cast<int>(v);
}

/// Precedence: built-in defaults < config file < command-line flags. The
/// returned config is what every artifact echoes.
acm::RunConfig resolve_config(const CLI::App* sub, const CommonOpts& o) {
    acm::RunConfig cfg;
    if (!o.config_path.empty()) cfg = acm::load_run_config(o.config_path);
    if (passed(sub, "--seed")) cfg.seed = o.seed;
    if (passed(sub, "--out")) cfg.out_dir = o.out;
    if (passed(sub, "--data")) cfg.dataset_dir = o.data;
    if (passed(sub, "--model")) cfg.model_path = o.model;
    if (passed(sub, "--fuzzy")) cfg.fuzzy_path = o.fuzzy;
    const int cap = env_thread_cap();
    if (cap > 0) cfg.threads = std::min(cfg.threads, cap);
    cfg.validate();
    return cfg;
}

fs::path ensure_out_dir(const acm::RunConfig& cfg) {
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    return out;
}

json echo_json(const acm::RunConfig& cfg) { return json::parse(acm::config_echo(cfg)); }

void write_json_file(const fs::path& path, const json& doc) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw acm::ParamError("cannot write " + path.string());
    f << doc.dump(2) << "\n";
}

// ---- worker pool -------------------------------------------------------

/// Deterministic fan-out: fn(i) may only write state owned by index i; the
/// caller aggregates the slots in index order afterwards, so results do not
/// depend on the thread count. The first exception wins and is rethrown.
void for_each_index(int n, int threads, const std::function<void(int)>& fn) {
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> bail{false};
    std::mutex mu;
    std::exception_ptr first;
    auto body = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n || bail.load()) return;
            try {
                fn(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(mu);
                if (!first) first = std::current_exception();
                bail.store(true);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(body);
    for (std::thread& th : pool) th.join();
    if (first) std::rethrow_exception(first);
}

// ---- inputs --------------------------------------------------------------

struct Corpus {
    std::vector<acm::Annotation> anns;
    std::vector<acm::GrayImage> images;
};

Corpus load_corpus(const std::string& dir) {
    if (dir.empty())
        throw acm::ParamError("no dataset directory: pass --data or set dataset_dir");
    if (!fs::is_directory(dir)) throw acm::ParamError("not a dataset directory: " + dir);
    Corpus c;
    const fs::path jsonl = fs::path(dir) / "annotations.jsonl";
    if (fs::exists(jsonl))
        c.anns = acm::read_annotations_jsonl(jsonl.string());
    else
        c.anns = acm::load_kitti_labels(dir);
    if (c.anns.empty())
        throw acm::ParamError("no annotations found in " + dir +
                              " (need annotations.jsonl or KITTI *.txt)");
    c.images.reserve(c.anns.size());
    for (const acm::Annotation& a : c.anns) {
        fs::path img = fs::path(dir) / (a.image_id + ".pgm");
        if (!fs::exists(img)) img = fs::path(dir) / (a.image_id + ".ppm");
        if (!fs::exists(img))
            throw acm::ParamError("missing image for annotation '" + a.image_id +
                                  "' in " + dir);
        c.images.push_back(acm::load_image(img.string()));
    }
    return c;
}

struct InputImage {
    std::string id; // filename stem
    std::string path;
};

/// Positional arguments are files or directories; directories expand to
/// their *.pgm / *.ppm members in name order. With no positionals the
/// dataset directory is scanned instead.
std::vector<InputImage> expand_inputs(const std::vector<std::string>& args,
                                      const std::string& fallback_dir) {
    std::vector<std::string> roots = args;
    if (roots.empty() && !fallback_dir.empty()) roots.push_back(fallback_dir);
    std::vector<InputImage> files;
    for (const std::string& r : roots) {
        if (fs::is_directory(r)) {
            std::vector<fs::path> here;
            for (const auto& e : fs::directory_iterator(r)) {
                const std::string ext = e.path().extension().string();
                if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm"))
                    here.push_back(e.path());
            }
            std::sort(here.begin(), here.end());
            for (const fs::path& p : here) files.push_back({p.stem().string(), p.string()});
        } else {
            files.push_back({fs::path(r).stem().string(), r});
        }
    }
    if (files.empty()) throw acm::ParamError("no input images given");
    return files;
}

acm::GrayImage compute_acm(const acm::GrayImage& img, const acm::CnnModel& cnn,
                           const acm::RunConfig& cfg) {
    const auto regions = acm::detect_mr_mser(acm::build_pyramid(img), cfg.mser);
    const auto props = acm::make_proposals(regions, img);
    std::vector<double> conf(props.size(), 0.0);
    for (std::size_t i = 0; i < props.size(); ++i) conf[i] = acm::forward(cnn, props[i].patch);
    return acm::to_gray(acm::stack(props, conf, img.width, img.height), cfg.tau_cm);
}

// ---- gen-synth -----------------------------------------------------------

struct GenOpts {
    std::string tier = "easy";
    int count = 100;
};

int cmd_gen_synth(const acm::RunConfig& cfg, const GenOpts& g) {
    const acm::SynthSpec spec = g.tier == "medium" ? acm::medium_spec()
                                : g.tier == "hard" ? acm::hard_spec()
                                                   : acm::easy_spec();
    const std::vector<acm::SynthScene> scenes = acm::gen_synthetic(g.count, cfg.seed, spec);
    const fs::path out = ensure_out_dir(cfg);
    std::vector<acm::Annotation> anns;
    anns.reserve(scenes.size());
    for (const acm::SynthScene& s : scenes) {
        acm::save_pgm(s.image, (out / (s.gt.image_id + ".pgm")).string());
        anns.push_back(s.gt);
    }
    acm::write_annotations_jsonl((out / "annotations.jsonl").string(), anns);
    write_json_file(out / "corpus.json", json{{"config", echo_json(cfg)},
                                              {"tier", g.tier},
                                              {"count", g.count},
                                              {"seed", cfg.seed}});
    acm::save_run_config(cfg, (out / "run_config.json").string());
    std::cout << "gen-synth: " << scenes.size() << " " << g.tier << " scenes -> "
              << out.string() << "\n";
    return 0;
}

// ---- train-cnn -------------------------------------------------------------

int cmd_train_cnn(const acm::RunConfig& cfg) {
    const Corpus corpus = load_corpus(cfg.dataset_dir);
    const int n = static_cast<int>(corpus.images.size());
    std::vector<std::vector<acm::TrainSample>> mined(static_cast<std::size_t>(n));
    std::vector<std::string> notes(static_cast<std::size_t>(n));
    for_each_index(n, cfg.threads, [&](int i) {
        const acm::GrayImage& img = corpus.images[static_cast<std::size_t>(i)];
        const acm::Annotation& ann = corpus.anns[static_cast<std::size_t>(i)];
        try {
            const auto regions = acm::detect_mr_mser(acm::build_pyramid(img), cfg.mser);
            const auto props = acm::make_proposals(regions, img);
            mined[static_cast<std::size_t>(i)] =
                acm::mine_training_set(img, i, props, ann.boxes, cfg.seed);
        } catch (const acm::MiningError& e) {
            notes[static_cast<std::size_t>(i)] = e.what();
        } catch (const std::exception& e) {
            throw acm::ParamError(ann.image_id + ": " + e.what());
        }
    });
    std::vector<acm::TrainSample> samples;
    int skipped = 0;
    for (int i = 0; i < n; ++i) {
        if (!notes[static_cast<std::size_t>(i)].empty()) {
            std::cerr << "note: no samples from " << corpus.anns[static_cast<std::size_t>(i)].image_id
                      << ": " << notes[static_cast<std::size_t>(i)] << "\n";
            ++skipped;
            continue;
        }
        const auto& m = mined[static_cast<std::size_t>(i)];
        samples.insert(samples.end(), m.begin(), m.end());
    }
    if (samples.empty())
        throw acm::TrainingError("no training samples mined from " + cfg.dataset_dir);

    acm::CnnModel model = acm::make_model(cfg.plan, cfg.train.seed);
    model = acm::train(model, samples, cfg.train);

    const fs::path out = ensure_out_dir(cfg);
    acm::save_model(model, cfg.model_path);
    acm::write_train_log(model, (out / "train_log.csv").string());
    acm::save_run_config(cfg, (out / "run_config.json").string());

    char acc[32];
    std::snprintf(acc, sizeof acc, "%.4f", model.meta.history.back().val_acc);
    std::cout << "train-cnn: " << samples.size() << " samples from " << n - skipped << "/" << n
              << " images, " << model.meta.epochs_run << " epochs, val_acc " << acc << " -> "
              << cfg.model_path << "\n";
    return 0;
}

// ---- train-fuzzy ---------------------------------------------------------

int cmd_train_fuzzy(const acm::RunConfig& cfg) {
    const Corpus corpus = load_corpus(cfg.dataset_dir);
    const acm::CnnModel cnn = acm::load_model(cfg.model_path);
    const acm::DetectOptions opt = cfg.detect_options();
    const int n = static_cast<int>(corpus.images.size());
    std::vector<std::vector<std::pair<acm::BlobFeatures, acm::BlobClass>>> per(
        static_cast<std::size_t>(n));
    for_each_index(n, cfg.threads, [&](int i) {
        per[static_cast<std::size_t>(i)] =
            acm::harvest_blob_samples(corpus.images[static_cast<std::size_t>(i)],
                                      corpus.anns[static_cast<std::size_t>(i)].boxes, cnn, opt,
                                      cfg.collect_tau);
    });
    std::vector<std::pair<acm::BlobFeatures, acm::BlobClass>> labeled;
    for (const auto& v : per) labeled.insert(labeled.end(), v.begin(), v.end());
    long vehicles = 0;
    for (const auto& [f, c] : labeled) vehicles += c == acm::BlobClass::Vehicle ? 1 : 0;

    const acm::FuzzyModel fm = acm::train_fuzzy(labeled, cfg.fuzzy_features);
    const fs::path out = ensure_out_dir(cfg);
    acm::save_fuzzy(fm, cfg.fuzzy_path);
    acm::save_run_config(cfg, (out / "run_config.json").string());
    std::cout << "train-fuzzy: " << vehicles << " vehicle / "
              << static_cast<long>(labeled.size()) - vehicles << " background blobs -> "
              << cfg.fuzzy_path << "\n";
    return 0;
}

// ---- detect ----------------------------------------------------------------

struct DetectOpts {
    std::vector<std::string> images;
    bool overlay = false;
    bool dump_acm = false;
    bool timing = false;
};

int cmd_detect(const acm::RunConfig& cfg, const DetectOpts& d) {
    const std::vector<InputImage> inputs = expand_inputs(d.images, cfg.dataset_dir);
    const acm::CnnModel cnn = acm::load_model(cfg.model_path);
    const acm::FuzzyModel fm = acm::load_fuzzy(cfg.fuzzy_path);
    const acm::DetectOptions opt = cfg.detect_options();
    const fs::path out = ensure_out_dir(cfg);
    const int n = static_cast<int>(inputs.size());
    const bool want_trace = d.overlay || d.dump_acm;

    struct Slot {
        std::vector<acm::Detection> dets;
        std::string error;
        double seconds = 0.0;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(n));
    for_each_index(n, cfg.threads, [&](int i) {
        Slot& slot = slots[static_cast<std::size_t>(i)];
        acm::GrayImage img;
        try {
            img = acm::load_image(inputs[static_cast<std::size_t>(i)].path);
        } catch (const std::exception& e) {
            slot.error = e.what();
            return;
        }
        const std::string& id = inputs[static_cast<std::size_t>(i)].id;
        acm::DetectTrace trace;
        const auto t0 = std::chrono::steady_clock::now();
        slot.dets = acm::detect_vehicles(img, id, cnn, fm, opt, want_trace ? &trace : nullptr);
        slot.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (d.overlay)
            acm::save_ppm(acm::annotate(img, trace.blobs, trace.labels),
                          (out / ("overlay_" + id + ".ppm")).string());
        if (d.dump_acm) acm::save_pgm(trace.acm, (out / ("acm_" + id + ".pgm")).string());
    });

    json dets = json::array();
    json errors = json::array();
    int total = 0;
    int failed = 0;
    double seconds = 0.0;
    for (int i = 0; i < n; ++i) {
        const Slot& s = slots[static_cast<std::size_t>(i)];
        if (!s.error.empty()) {
            std::cerr << "error: " << inputs[static_cast<std::size_t>(i)].path << ": " << s.error
                      << "\n";
            errors.push_back(json{{"image", inputs[static_cast<std::size_t>(i)].id},
                                  {"error", s.error}});
            ++failed;
            continue;
        }
        seconds += s.seconds;
        for (const acm::Detection& det : s.dets) {
            dets.push_back(json{{"image", det.image_id},
                                {"bbox", {det.bbox.x, det.bbox.y, det.bbox.w, det.bbox.h}},
                                {"score", det.score}});
            ++total;
        }
    }

    json doc{{"config", echo_json(cfg)}, {"images", n - failed}, {"detections", std::move(dets)}};
    if (!errors.empty()) doc["errors"] = std::move(errors);
    if (d.timing && n - failed > 0 && seconds > 0.0) {
        doc["seconds_per_frame"] = seconds / (n - failed);
        doc["fps"] = (n - failed) / seconds;
    }
    write_json_file(out / "detections.json", doc);
    acm::save_run_config(cfg, (out / "run_config.json").string());

    std::cout << "detect: " << total << " detections over " << n - failed << "/" << n
              << " images -> " << (out / "detections.json").string() << "\n";
    if (d.timing && n - failed > 0 && seconds > 0.0) {
        char line[96];
        std::snprintf(line, sizeof line, "detect: %.3f s/frame (%.2f fps)",
                      seconds / (n - failed), (n - failed) / seconds);
        std::cout << line << "\n";
    }
    return failed == n ? 1 : 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalOpts {
    std::vector<std::string> modes;
    std::string detections_file;
    bool timing = false;
};

std::vector<acm::Detection> read_detections_any(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw acm::ParamError("cannot open detections: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception&) {
        j = nullptr;
    }
    if (j.is_object() && j.contains("detections")) {
        // detect-command artifact; otherwise fall back to plain JSONL
        try {
            std::vector<acm::Detection> dets;
            for (const json& d : j.at("detections")) {
                acm::Detection det;
                det.image_id = d.at("image").get<std::string>();
                const json& b = d.at("bbox");
                det.bbox = acm::Rect{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(),
                                     b.at(3).get<int>()};
                det.score = d.at("score").get<double>();
                dets.push_back(std::move(det));
            }
            return dets;
        } catch (const json::exception& e) {
            throw acm::FormatError(path + ": " + e.what());
        }
    }
    return acm::read_detections_jsonl(path);
}

int cmd_eval(const acm::RunConfig& cfg, const EvalOpts& e) {
    const Corpus corpus = load_corpus(cfg.dataset_dir);
    const int n = static_cast<int>(corpus.images.size());

    const bool offline = !e.detections_file.empty();
    if (offline && !e.modes.empty())
        throw acm::ParamError("--detections and --proposals are mutually exclusive");
    std::vector<std::string> modes = e.modes;
    if (modes.empty()) modes.push_back(offline ? "offline" : "acm");

    acm::CnnModel cnn;
    acm::FuzzyModel fm;
    const bool needs_models =
        !offline && std::find(modes.begin(), modes.end(), "acm") != modes.end();
    if (needs_models) {
        cnn = acm::load_model(cfg.model_path);
        fm = acm::load_fuzzy(cfg.fuzzy_path);
    }
    const acm::DetectOptions opt = cfg.detect_options();

    json rows = json::array();
    std::vector<std::string> lines;
    for (const std::string& mode : modes) {
        std::vector<acm::Detection> dets;
        if (mode == "offline") {
            dets = read_detections_any(e.detections_file);
            std::set<std::string> known;
            for (const acm::Annotation& a : corpus.anns) known.insert(a.image_id);
            std::set<std::string> missing;
            for (const acm::Detection& det : dets)
                if (!known.count(det.image_id)) missing.insert(det.image_id);
            if (!missing.empty()) {
                std::string list;
                for (const std::string& id : missing) list += (list.empty() ? "" : ", ") + id;
                throw acm::EvalError("detections reference unknown image ids: " + list);
            }
        } else {
            std::vector<std::vector<acm::Detection>> per(static_cast<std::size_t>(n));
            for_each_index(n, cfg.threads, [&](int i) {
                const acm::GrayImage& img = corpus.images[static_cast<std::size_t>(i)];
                const std::string& id = corpus.anns[static_cast<std::size_t>(i)].image_id;
                if (mode == "acm")
                    per[static_cast<std::size_t>(i)] = acm::detect_vehicles(img, id, cnn, fm, opt);
                else
                    per[static_cast<std::size_t>(i)] = acm::proposal_detections(
                        img, id, cfg.mser,
                        mode == "mser" ? acm::ProposalSource::Mser : acm::ProposalSource::MrMser);
            });
            for (const auto& v : per) dets.insert(dets.end(), v.begin(), v.end());
        }

        acm::EvalReport rep = acm::average_precision(dets, corpus.anns, cfg.iou_thresh,
                                                     cfg.ap_interp);
        if (e.timing && mode == "acm") {
            const int warmup = std::min(5, n - 1);
            rep.fps = acm::measure_fps(
                [&](const acm::GrayImage& img) { acm::detect_vehicles(img, "fps", cnn, fm, opt); },
                corpus.images, warmup);
        }

        json pr = json::array();
        for (const acm::PrPoint& p : rep.pr_points) pr.push_back({p.recall, p.precision});
        rows.push_back(json{{"mode", mode},
                            {"ap", rep.ap},
                            {"tp", rep.tp},
                            {"fp", rep.fp},
                            {"fn", rep.fn},
                            {"fps", rep.fps},
                            {"pr", std::move(pr)}});
        char line[160];
        if (rep.fps > 0.0)
            std::snprintf(line, sizeof line, "%-8s AP@%.2f %.4f   tp %d fp %d fn %d   %.2f fps",
                          mode.c_str(), cfg.iou_thresh, rep.ap, rep.tp, rep.fp, rep.fn, rep.fps);
        else
            std::snprintf(line, sizeof line, "%-8s AP@%.2f %.4f   tp %d fp %d fn %d",
                          mode.c_str(), cfg.iou_thresh, rep.ap, rep.tp, rep.fp, rep.fn);
        lines.push_back(line);
    }

    const fs::path out = ensure_out_dir(cfg);
    write_json_file(out / "eval.json",
                    json{{"config", echo_json(cfg)},
                         {"iou_thresh", cfg.iou_thresh},
                         {"ap_interp",
                          cfg.ap_interp == acm::ApInterp::AllPoint ? "all-point" : "11-point"},
                         {"images", n},
                         {"rows", std::move(rows)}});
    acm::save_run_config(cfg, (out / "run_config.json").string());
    for (const std::string& line : lines) std::cout << line << "\n";
    std::cout << "eval: -> " << (out / "eval.json").string() << "\n";
    return 0;
}

// ---- proposals -------------------------------------------------------------

struct ProposalOpts {
    std::vector<std::string> images;
    std::string source = "mr-mser";
};

int cmd_proposals(const acm::RunConfig& cfg, const ProposalOpts& p) {
    const std::vector<InputImage> inputs = expand_inputs(p.images, cfg.dataset_dir);
    const fs::path out = ensure_out_dir(cfg);
    const int n = static_cast<int>(inputs.size());
    std::vector<std::size_t> counts(static_cast<std::size_t>(n), 0);
    for_each_index(n, cfg.threads, [&](int i) {
        const acm::GrayImage img = acm::load_image(inputs[static_cast<std::size_t>(i)].path);
        const std::vector<acm::ExtremalRegion> regions =
            p.source == "mser" ? acm::detect_mser(img, cfg.mser)
                               : acm::detect_mr_mser(acm::build_pyramid(img), cfg.mser);
        acm::write_regions_jsonl(
            regions,
            (out / ("proposals_" + inputs[static_cast<std::size_t>(i)].id + ".jsonl")).string());
        counts[static_cast<std::size_t>(i)] = regions.size();
    });
    acm::save_run_config(cfg, (out / "run_config.json").string());
    for (int i = 0; i < n; ++i)
        std::cout << inputs[static_cast<std::size_t>(i)].id << ": "
                  << counts[static_cast<std::size_t>(i)] << " regions\n";
    return 0;
}

// ---- acm-dump --------------------------------------------------------------

int cmd_acm_dump(const acm::RunConfig& cfg, const std::vector<std::string>& images) {
    const std::vector<InputImage> inputs = expand_inputs(images, cfg.dataset_dir);
    const acm::CnnModel cnn = acm::load_model(cfg.model_path);
    const fs::path out = ensure_out_dir(cfg);
    const int n = static_cast<int>(inputs.size());
    for_each_index(n, cfg.threads, [&](int i) {
        const InputImage& in = inputs[static_cast<std::size_t>(i)];
        acm::save_pgm(compute_acm(acm::load_image(in.path), cnn, cfg),
                      (out / ("acm_" + in.id + ".pgm")).string());
    });
    acm::save_run_config(cfg, (out / "run_config.json").string());
    std::cout << "acm-dump: " << n << " confidence maps -> " << out.string() << "\n";
    return 0;
}

// ---- roughseg-dump ---------------------------------------------------------

int cmd_roughseg_dump(const acm::RunConfig& cfg, const std::vector<std::string>& images) {
    const std::vector<InputImage> inputs = expand_inputs(images, cfg.dataset_dir);
    const fs::path out = ensure_out_dir(cfg);
    for (const InputImage& in : inputs) {
        const acm::GrayImage img = acm::load_image(in.path);
        const acm::RoughTable tab = acm::rough_entropy_threshold(acm::granulate(img));

        const fs::path csv = out / ("rough_" + in.id + ".csv");
        std::ofstream f(csv, std::ios::binary);
        if (!f) throw acm::ParamError("cannot write " + csv.string());
        f << "T,o_lower,o_upper,b_lower,b_upper,r_ot,r_bt,re_t\n";
        for (int T = 0; T < 256; ++T) {
            const acm::RoughRow& r = tab.rows[static_cast<std::size_t>(T)];
            char line[160];
            std::snprintf(line, sizeof line, "%d,%d,%d,%d,%d,%.17g,%.17g,%.17g\n", T, r.o_lower,
                          r.o_upper, r.b_lower, r.b_upper, r.r_ot, r.r_bt, r.re_t);
            f << line;
        }

        acm::save_pgm(acm::binarize(img, tab.t_star),
                      (out / ("mask_" + in.id + ".pgm")).string());
        std::cout << in.id << ": t_star " << tab.t_star << "\n";
    }
    acm::save_run_config(cfg, (out / "run_config.json").string());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"vehicle detector built on multi-resolution region proposals, a small patch "
                 "CNN, an aggregated confidence map, rough-set thresholding and fuzzy blob "
                 "scoring"};
    app.require_subcommand(1);
    int rc = 0;

    CommonOpts gen_c;
    GenOpts gen_o;
    CLI::App* gen = app.add_subcommand(
        "gen-synth", "write a synthetic corpus: <id>.pgm scenes plus annotations.jsonl");
    add_config_flags(gen, gen_c);
    gen->add_option("--count", gen_o.count, "number of scenes")->check(CLI::PositiveNumber);
    gen->add_option("--tier", gen_o.tier, "difficulty preset")
        ->check(CLI::IsMember({"easy", "medium", "hard"}));
    gen->callback([&] { rc = cmd_gen_synth(resolve_config(gen, gen_c), gen_o); });

    CommonOpts tcnn_c;
    CLI::App* tcnn = app.add_subcommand(
        "train-cnn", "mine proposal patches from an annotated corpus and train the CNN");
    add_config_flags(tcnn, tcnn_c);
    add_data_flag(tcnn, tcnn_c);
    add_model_flag(tcnn, tcnn_c);
    tcnn->callback([&] { rc = cmd_train_cnn(resolve_config(tcnn, tcnn_c)); });

    CommonOpts tfuz_c;
    CLI::App* tfuz = app.add_subcommand(
        "train-fuzzy", "harvest labeled blobs with a trained CNN and fit the fuzzy classifier");
    add_config_flags(tfuz, tfuz_c);
    add_data_flag(tfuz, tfuz_c);
    add_model_flag(tfuz, tfuz_c);
    add_fuzzy_flag(tfuz, tfuz_c);
    tfuz->callback([&] { rc = cmd_train_fuzzy(resolve_config(tfuz, tfuz_c)); });

    CommonOpts det_c;
    DetectOpts det_o;
    CLI::App* det = app.add_subcommand("detect", "run the full pipeline and write detections.json");
    add_config_flags(det, det_c);
    add_data_flag(det, det_c);
    add_model_flag(det, det_c);
    add_fuzzy_flag(det, det_c);
    det->add_option("images", det_o.images,
                    "image files or directories (defaults to the dataset dir)");
    det->add_flag("--overlay", det_o.overlay, "write overlay_<id>.ppm with labeled boxes");
    det->add_flag("--dump-acm", det_o.dump_acm, "write acm_<id>.pgm confidence maps");
    det->add_flag("--timing", det_o.timing, "record seconds per frame and fps");
    det->callback([&] { rc = cmd_detect(resolve_config(det, det_c), det_o); });

    CommonOpts eval_c;
    EvalOpts eval_o;
    CLI::App* eval = app.add_subcommand(
        "eval", "average precision on an annotated corpus (live pipeline or saved detections)");
    add_config_flags(eval, eval_c);
    add_data_flag(eval, eval_c);
    add_model_flag(eval, eval_c);
    add_fuzzy_flag(eval, eval_c);
    eval->add_option("--proposals", eval_o.modes,
                     "detector sources to score, comma separated: mser, mr-mser, acm")
        ->delimiter(',')
        ->check(CLI::IsMember({"mser", "mr-mser", "acm"}));
    eval->add_option("--detections", eval_o.detections_file,
                     "score a saved detections file instead of running the pipeline")
        ->check(CLI::ExistingFile);
    eval->add_flag("--timing", eval_o.timing, "measure pipeline fps over the corpus");
    eval->callback([&] { rc = cmd_eval(resolve_config(eval, eval_c), eval_o); });

    CommonOpts prop_c;
    ProposalOpts prop_o;
    CLI::App* prop = app.add_subcommand("proposals",
                                        "write stable extremal regions as proposals_<id>.jsonl");
    add_config_flags(prop, prop_c);
    add_data_flag(prop, prop_c);
    prop->add_option("images", prop_o.images,
                     "image files or directories (defaults to the dataset dir)");
    prop->add_option("--proposals", prop_o.source, "proposal source")
        ->check(CLI::IsMember({"mser", "mr-mser"}));
    prop->callback([&] { rc = cmd_proposals(resolve_config(prop, prop_c), prop_o); });

    CommonOpts adump_c;
    std::vector<std::string> adump_images;
    CLI::App* adump = app.add_subcommand("acm-dump",
                                         "write the aggregated confidence map as acm_<id>.pgm");
    add_config_flags(adump, adump_c);
    add_data_flag(adump, adump_c);
    add_model_flag(adump, adump_c);
    adump->add_option("images", adump_images,
                      "image files or directories (defaults to the dataset dir)");
    adump->callback([&] { rc = cmd_acm_dump(resolve_config(adump, adump_c), adump_images); });

    CommonOpts rdump_c;
    std::vector<std::string> rdump_images;
    CLI::App* rdump = app.add_subcommand(
        "roughseg-dump",
        "threshold an image by rough entropy: rough_<id>.csv table plus mask_<id>.pgm");
    add_config_flags(rdump, rdump_c);
    add_data_flag(rdump, rdump_c);
    rdump->add_option("images", rdump_images,
                      "image files or directories (defaults to the dataset dir)");
    rdump->callback([&] { rc = cmd_roughseg_dump(resolve_config(rdump, rdump_c), rdump_images); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
