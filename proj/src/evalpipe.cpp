#include "acm/evalpipe.hpp"

#include "acm/errors.hpp"
#include "acm/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace acm {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

bool bbox_less(const Rect& a, const Rect& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    if (a.w != b.w) return a.w < b.w;
    return a.h < b.h;
}

Rect rect_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 4) throw FormatError(where + ": box must be [x,y,w,h]");
    return Rect{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

json rect_to_json(const Rect& r) { return json::array({r.x, r.y, r.w, r.h}); }

} // namespace

std::vector<Annotation> load_kitti_labels(const std::string& dir) {
    if (!fs::is_directory(dir)) throw ParamError("not a label directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".txt")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::vector<Annotation> out;
    for (const auto& path : files) {
        Annotation ann;
        ann.image_id = path.stem().string();
        std::ifstream in(path);
        if (!in) throw FormatError("cannot open " + path.string());
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos)
                continue;
            std::istringstream ls(line);
            std::string type;
            double trunc, occl, alpha, left, top, right, bottom;
            if (!(ls >> type >> trunc >> occl >> alpha >> left >> top >> right >> bottom))
                throw FormatError(path.string() + ":" + std::to_string(line_no) +
                                  ": malformed label line");
            if (type != "Car" && type != "Van" && type != "Truck") continue;
            const int x = static_cast<int>(std::lround(left));
            const int y = static_cast<int>(std::lround(top));
            const int r = static_cast<int>(std::lround(right));
            const int b = static_cast<int>(std::lround(bottom));
            if (r <= x || b <= y)
                throw FormatError(path.string() + ":" + std::to_string(line_no) +
                                  ": degenerate box");
            ann.boxes.push_back(Rect{x, y, r - x, b - y});
        }
        out.push_back(std::move(ann));
    }
    return out;
}

void SynthSpec::validate() const {
    if (width < 32 || height < 32) throw ParamError("synthetic frames must be >= 32x32");
    if (min_vehicles < 0 || max_vehicles < min_vehicles)
        throw ParamError("vehicle count range is invalid");
    if (fg_low <= bg_level + noise)
        throw ParamError("vehicle intensities must clear the background band");
    if (fg_high < fg_low || fg_high > 255) throw ParamError("bad vehicle intensity range");
    if (min_w < 8 || max_w < min_w) throw ParamError("bad vehicle width range");
    if (min_aspect <= 0.0 || max_aspect < min_aspect) throw ParamError("bad aspect range");
    if (corner_cut < 0 || corner_cut * 3 > min_w) throw ParamError("corner cut too large");
    if (dither_fraction < 0.0 || dither_fraction > 1.0)
        throw ParamError("dither_fraction must be in [0,1]");
    if (noise < 0 || blur_passes < 0 || distractors < 0 || margin < 0 || streaks < 0 ||
        decoys < 0)
        throw ParamError("negative synth knob");
    if (decoys > 0 && (decoy_low <= bg_level + noise || decoy_high < decoy_low ||
                       decoy_high >= fg_low))
        throw ParamError("decoy band must sit between background and vehicles");
}

SynthSpec easy_spec() { return SynthSpec{}; }

SynthSpec medium_spec() {
    SynthSpec s;
    s.noise = 14;
    s.distractors = 10;
    s.decoys = 3;
    s.decoy_high = 130;
    s.blur_passes = 1;
    s.dither_fraction = 0.3;
    s.fg_low = 140;
    s.fg_high = 210;
    return s;
}

SynthSpec hard_spec() {
    SynthSpec s;
    s.noise = 18;
    s.distractors = 16;
    s.streaks = 4;
    // No decoys: dithered vehicles resample to the same mid-gray patches,
    // and the intensity collision would poison the patch labels.
    s.decoys = 0;
    // No blur: it would smear the dither lattice into a faint fine-scale
    // plateau and dilute the tier's multi-scale contrast.
    s.dither_fraction = 0.5;
    s.fg_low = 130;
    s.fg_high = 200;
    return s;
}

namespace {

void box_blur3(GrayImage& img) {
    const GrayImage src = img;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            int acc = 0, n = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int sx = x + dx, sy = y + dy;
                    if (sx < 0 || sy < 0 || sx >= src.width || sy >= src.height) continue;
                    acc += src.at(sx, sy);
                    ++n;
                }
            img.data[static_cast<std::size_t>(y) * img.width + x] =
                static_cast<std::uint8_t>((acc + n / 2) / n);
        }
    }
}

/// Rounded-rectangle membership relative to the box, corners cut by a
/// diagonal of `cut` pixels. The extreme rows/columns keep their middle
/// spans, so the tight pixel bbox equals the box itself.
bool in_rounded(int dx, int dy, int w, int h, int cut) {
    const int from_r = w - 1 - dx, from_b = h - 1 - dy;
    return dx + dy >= cut && from_r + dy >= cut && dx + from_b >= cut &&
           from_r + from_b >= cut;
}

} // namespace

std::vector<SynthScene> gen_synthetic(int n_images, std::uint64_t seed,
                                      const SynthSpec& spec) {
    spec.validate();
    if (n_images < 0) throw ParamError("n_images must be >= 0");
    std::vector<SynthScene> scenes;
    scenes.reserve(static_cast<std::size_t>(n_images));

    for (int idx = 0; idx < n_images; ++idx) {
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(idx)));
        SynthScene scene;
        scene.image = GrayImage(spec.width, spec.height);
        char buf[32];
        std::snprintf(buf, sizeof buf, "img_%06d", idx);
        scene.gt.image_id = buf;
        GrayImage& img = scene.image;

        for (auto& v : img.data) {
            const int n = spec.noise > 0
                              ? static_cast<int>(rng.below(2 * spec.noise + 1)) - spec.noise
                              : 0;
            v = static_cast<std::uint8_t>(std::clamp(spec.bg_level + n, 0, 255));
        }

        const int want = spec.min_vehicles +
                         (spec.max_vehicles > spec.min_vehicles
                              ? static_cast<int>(rng.below(
                                    spec.max_vehicles - spec.min_vehicles + 1))
                              : 0);
        struct DeferredVehicle {
            Rect box;
            int shade;
        };
        std::vector<DeferredVehicle> deferred;
        for (int v = 0; v < want; ++v) {
            const bool dither = rng.uniform() < spec.dither_fraction;
            Rect box;
            bool placed = false;
            for (int attempt = 0; attempt < 60 && !placed; ++attempt) {
                int w = spec.min_w + static_cast<int>(rng.below(spec.max_w - spec.min_w + 1));
                int h = std::max(8, static_cast<int>(std::lround(
                                        w * rng.uniform(spec.min_aspect, spec.max_aspect))));
                if (dither) {
                    w |= 1; // odd extent keeps the even lattice on every edge
                    h |= 1;
                }
                if (w > spec.width - 2 * spec.margin || h > spec.height - 2 * spec.margin)
                    continue;
                int x = spec.margin +
                        static_cast<int>(rng.below(spec.width - 2 * spec.margin - w + 1));
                int y = spec.margin +
                        static_cast<int>(rng.below(spec.height - 2 * spec.margin - h + 1));
                if (dither) {
                    x &= ~1; // even origin aligns with (2i,2j) decimation
                    y &= ~1;
                    if (x < spec.margin) x += 2;
                    if (y < spec.margin) y += 2;
                    if (x + w > spec.width - spec.margin ||
                        y + h > spec.height - spec.margin)
                        continue;
                }
                box = Rect{x, y, w, h};
                bool clear = true;
                for (const Rect& other : scene.gt.boxes) {
                    const Rect grown{other.x - 3, other.y - 3, other.w + 6, other.h + 6};
                    if (intersect(grown, box).area() > 0) {
                        clear = false;
                        break;
                    }
                }
                placed = clear;
            }
            if (!placed) continue;

            const int shade =
                spec.fg_low + static_cast<int>(rng.below(spec.fg_high - spec.fg_low + 1));
            if (dither) {
                // Painted after the blur pass: a blurred lattice would smear
                // into a solid plateau visible at the finest scale.
                deferred.push_back({box, shade});
            } else {
                for (int dy = 0; dy < box.h; ++dy)
                    for (int dx = 0; dx < box.w; ++dx) {
                        if (!in_rounded(dx, dy, box.w, box.h, spec.corner_cut)) continue;
                        const int px = box.x + dx, py = box.y + dy;
                        const int n =
                            spec.noise > 0
                                ? static_cast<int>(rng.below(spec.noise + 1)) - spec.noise / 2
                                : 0;
                        img.data[static_cast<std::size_t>(py) * img.width + px] =
                            static_cast<std::uint8_t>(std::clamp(shade + n, 0, 255));
                    }
            }
            scene.gt.boxes.push_back(box);
        }

        // Decoys reuse the vehicle painter at a dimmer band. Clearance of a
        // full max(w,h) from every vehicle keeps the proposal windows they
        // spawn at IoU 0 with the ground truth.
        std::vector<Rect> junk;
        for (int d = 0; d < spec.decoys; ++d) {
            for (int attempt = 0; attempt < 60; ++attempt) {
                const int w =
                    spec.min_w + static_cast<int>(rng.below(spec.max_w - spec.min_w + 1));
                const int h = std::max(8, static_cast<int>(std::lround(
                                              w * rng.uniform(spec.min_aspect, spec.max_aspect))));
                if (w > spec.width - 2 * spec.margin || h > spec.height - 2 * spec.margin)
                    continue;
                const int x = spec.margin +
                              static_cast<int>(rng.below(spec.width - 2 * spec.margin - w + 1));
                const int y = spec.margin +
                              static_cast<int>(rng.below(spec.height - 2 * spec.margin - h + 1));
                const Rect box{x, y, w, h};
                const int side = std::max(w, h);
                bool clear = true;
                for (const Rect& b : scene.gt.boxes) {
                    const Rect grown{b.x - side, b.y - side, b.w + 2 * side, b.h + 2 * side};
                    if (intersect(grown, box).area() > 0) clear = false;
                }
                for (const Rect& b : junk)
                    if (intersect(b, box).area() > 0) clear = false;
                if (!clear) continue;
                const int shade =
                    spec.decoy_low +
                    static_cast<int>(rng.below(spec.decoy_high - spec.decoy_low + 1));
                for (int dy = 0; dy < h; ++dy)
                    for (int dx = 0; dx < w; ++dx) {
                        if (!in_rounded(dx, dy, w, h, spec.corner_cut)) continue;
                        const int n = spec.noise > 0
                                          ? static_cast<int>(rng.below(spec.noise + 1)) -
                                                spec.noise / 2
                                          : 0;
                        img.data[static_cast<std::size_t>(y + dy) * img.width + (x + dx)] =
                            static_cast<std::uint8_t>(std::clamp(shade + n, 0, 255));
                    }
                junk.push_back(box);
                break;
            }
        }

        // Streaks stay a full streak-length away from every vehicle so that
        // even squarified proposal windows around them keep IoU 0 with the
        // ground truth: each scene then carries certified negatives.
        for (int s = 0; s < spec.streaks; ++s) {
            const int len = 20 + static_cast<int>(rng.below(21));
            const int dir = rng.below(2) == 0 ? 1 : -1;
            for (int attempt = 0; attempt < 60; ++attempt) {
                const int x0 = static_cast<int>(rng.below(spec.width - len));
                const int y0 = dir > 0
                                   ? static_cast<int>(rng.below(spec.height - len - 1))
                                   : len + static_cast<int>(rng.below(spec.height - len - 1));
                const Rect sbox{x0, dir > 0 ? y0 : y0 - len, len, len + 2};
                bool clear = true;
                for (const Rect& b : scene.gt.boxes) {
                    const Rect grown{b.x - len, b.y - len, b.w + 2 * len, b.h + 2 * len};
                    if (intersect(grown, sbox).area() > 0) {
                        clear = false;
                        break;
                    }
                }
                if (!clear) continue;
                const int shade = spec.fg_low +
                                  static_cast<int>(rng.below(spec.fg_high - spec.fg_low + 1));
                for (int t = 0; t < len; ++t) {
                    const int px = x0 + t, py = y0 + dir * t;
                    for (int k = 0; k <= 1; ++k) {
                        if (px < 0 || py + k < 0 || px >= spec.width || py + k >= spec.height)
                            continue;
                        img.data[static_cast<std::size_t>(py + k) * img.width + px] =
                            static_cast<std::uint8_t>(shade);
                    }
                }
                break;
            }
        }

        for (int d = 0; d < spec.distractors; ++d) {
            const int x = static_cast<int>(rng.below(spec.width));
            const int y = static_cast<int>(rng.below(spec.height));
            bool inside = false;
            for (const Rect& b : scene.gt.boxes) {
                const Rect grown{b.x - 4, b.y - 4, b.w + 8, b.h + 8};
                if (x >= grown.x && x < grown.right() && y >= grown.y && y < grown.bottom()) {
                    inside = true;
                    break;
                }
            }
            if (inside) continue;
            const int shade =
                spec.fg_low + static_cast<int>(rng.below(spec.fg_high - spec.fg_low + 1));
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    const int px = x + dx, py = y + dy;
                    if (px >= spec.width || py >= spec.height) continue;
                    img.data[static_cast<std::size_t>(py) * img.width + px] =
                        static_cast<std::uint8_t>(shade);
                }
        }

        for (int b = 0; b < spec.blur_passes; ++b) box_blur3(img);

        for (const auto& [box, shade] : deferred)
            for (int dy = 0; dy < box.h; ++dy)
                for (int dx = 0; dx < box.w; ++dx) {
                    if (!in_rounded(dx, dy, box.w, box.h, spec.corner_cut)) continue;
                    const int px = box.x + dx, py = box.y + dy;
                    if (px % 2 != 0 || py % 2 != 0) continue;
                    const int n = spec.noise > 0
                                      ? static_cast<int>(rng.below(spec.noise + 1)) -
                                            spec.noise / 2
                                      : 0;
                    img.data[static_cast<std::size_t>(py) * img.width + px] =
                        static_cast<std::uint8_t>(std::clamp(shade + n, 0, 255));
                }
        scenes.push_back(std::move(scene));
    }
    return scenes;
}

MatchResult match_detections(const std::vector<Detection>& dets,
                             const std::vector<Rect>& gts, double iou_thresh) {
    if (iou_thresh <= 0.0 || iou_thresh > 1.0) throw ParamError("iou_thresh must be in (0,1]");
    std::vector<std::size_t> order(dets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
        return bbox_less(dets[a].bbox, dets[b].bbox);
    });

    MatchResult res;
    res.tp.assign(dets.size(), 0);
    std::vector<char> taken(gts.size(), 0);
    for (const std::size_t di : order) {
        double best_iou = 0.0;
        int best_gt = -1;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (taken[g]) continue;
            const double v = iou(dets[di].bbox, gts[g]);
            if (v > best_iou) {
                best_iou = v;
                best_gt = static_cast<int>(g);
            }
        }
        if (best_gt >= 0 && best_iou >= iou_thresh) {
            taken[best_gt] = 1;
            res.tp[di] = 1;
        }
    }
    res.fn = static_cast<int>(std::count(taken.begin(), taken.end(), 0));
    return res;
}

EvalReport average_precision(const std::vector<Detection>& dets,
                             const std::vector<Annotation>& gts, double iou_thresh,
                             ApInterp interp) {
    std::map<std::string, const Annotation*> by_id;
    int total_gt = 0;
    for (const auto& ann : gts) {
        if (!by_id.emplace(ann.image_id, &ann).second)
            throw EvalError("duplicate annotation image id: " + ann.image_id);
        total_gt += static_cast<int>(ann.boxes.size());
    }
    if (total_gt == 0) throw EvalError("no ground-truth boxes: AP is undefined");

    std::set<std::string> missing;
    std::map<std::string, std::vector<std::size_t>> det_groups;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        if (!by_id.count(dets[i].image_id)) missing.insert(dets[i].image_id);
        det_groups[dets[i].image_id].push_back(i);
    }
    if (!missing.empty()) {
        std::string ids;
        for (const auto& id : missing) ids += (ids.empty() ? "" : ", ") + id;
        throw EvalError("detections reference unknown image ids: " + ids);
    }

    // Per-image greedy matching, then one global rank sweep.
    std::vector<char> flags(dets.size(), 0);
    for (const auto& [id, indices] : det_groups) {
        std::vector<Detection> group;
        group.reserve(indices.size());
        for (const std::size_t i : indices) group.push_back(dets[i]);
        const MatchResult m = match_detections(group, by_id.at(id)->boxes, iou_thresh);
        for (std::size_t k = 0; k < indices.size(); ++k) flags[indices[k]] = m.tp[k];
    }

    std::vector<std::size_t> order(dets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
        if (bbox_less(dets[a].bbox, dets[b].bbox)) return true;
        if (bbox_less(dets[b].bbox, dets[a].bbox)) return false;
        return dets[a].image_id < dets[b].image_id;
    });

    EvalReport rep;
    int tp_cum = 0;
    std::vector<double> recalls, precisions;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        tp_cum += flags[order[rank]] ? 1 : 0;
        const double recall = static_cast<double>(tp_cum) / total_gt;
        const double precision = static_cast<double>(tp_cum) / static_cast<double>(rank + 1);
        recalls.push_back(recall);
        precisions.push_back(precision);
        rep.pr_points.push_back(PrPoint{recall, precision});
    }
    rep.tp = tp_cum;
    rep.fp = static_cast<int>(dets.size()) - tp_cum;
    rep.fn = total_gt - tp_cum;

    // Precision envelope: best precision at any recall >= r.
    std::vector<double> envelope(precisions);
    for (int i = static_cast<int>(envelope.size()) - 2; i >= 0; --i)
        envelope[i] = std::max(envelope[i], envelope[i + 1]);

    double ap = 0.0;
    if (interp == ApInterp::AllPoint) {
        double prev_recall = 0.0;
        for (std::size_t i = 0; i < recalls.size(); ++i) {
            ap += (recalls[i] - prev_recall) * envelope[i];
            prev_recall = recalls[i];
        }
    } else {
        for (int k = 0; k <= 10; ++k) {
            const double r = k / 10.0;
            double best = 0.0;
            for (std::size_t i = 0; i < recalls.size(); ++i)
                if (recalls[i] >= r) {
                    best = envelope[i];
                    break;
                }
            ap += best / 11.0;
        }
    }
    rep.ap = ap;
    return rep;
}

double measure_fps(const std::function<void(const GrayImage&)>& fn,
                   const std::vector<GrayImage>& images, int warmup) {
    if (warmup < 0) throw ParamError("warmup must be >= 0");
    if (images.empty()) throw ParamError("measure_fps needs images");
    if (static_cast<int>(images.size()) <= warmup)
        throw ParamError("need more images than warmup frames");
    for (int i = 0; i < warmup; ++i) fn(images[static_cast<std::size_t>(i)]);
    const auto start = std::chrono::steady_clock::now();
    int timed = 0;
    for (std::size_t i = static_cast<std::size_t>(warmup); i < images.size(); ++i) {
        fn(images[i]);
        ++timed;
    }
    const std::chrono::duration<double> span = std::chrono::steady_clock::now() - start;
    if (span.count() <= 0.0) return 0.0;
    return timed / span.count();
}

void write_annotations_jsonl(const std::string& path, const std::vector<Annotation>& anns) {
    std::ofstream out(path);
    if (!out) throw ParamError("cannot write " + path);
    for (const auto& ann : anns) {
        json boxes = json::array();
        for (const Rect& r : ann.boxes) boxes.push_back(rect_to_json(r));
        out << json{{"image", ann.image_id}, {"boxes", boxes}}.dump() << "\n";
    }
}

std::vector<Annotation> read_annotations_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParamError("cannot open " + path);
    std::vector<Annotation> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            Annotation ann;
            ann.image_id = j.at("image").get<std::string>();
            for (const auto& b : j.at("boxes"))
                ann.boxes.push_back(rect_from_json(b, path));
            out.push_back(std::move(ann));
        } catch (const json::exception& e) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_detections_jsonl(const std::string& path, const std::vector<Detection>& dets) {
    std::ofstream out(path);
    if (!out) throw ParamError("cannot write " + path);
    for (const auto& d : dets)
        out << json{{"image", d.image_id}, {"bbox", rect_to_json(d.bbox)}, {"score", d.score}}
                   .dump()
            << "\n";
}

std::vector<Detection> read_detections_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParamError("cannot open " + path);
    std::vector<Detection> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            Detection d;
            d.image_id = j.at("image").get<std::string>();
            d.bbox = rect_from_json(j.at("bbox"), path);
            d.score = j.at("score").get<double>();
            out.push_back(std::move(d));
        } catch (const json::exception& e) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

} // namespace acm
