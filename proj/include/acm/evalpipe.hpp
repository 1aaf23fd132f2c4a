#pragma once

#include "acm/image.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace acm {

struct Annotation {
    std::string image_id;
    std::vector<Rect> boxes; // ground-truth vehicles
};

struct Detection {
    std::string image_id;
    Rect bbox;
    double score = 0.0; // [0,1]
};

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

struct EvalReport {
    double ap = 0.0;
    std::vector<PrPoint> pr_points; // after each detection in rank order
    int tp = 0;
    int fp = 0;
    int fn = 0;
    double fps = 0.0; // 0 when the run was not timed
};

/// Reads every *.txt in dir (sorted by name; stem becomes image_id). Lines
/// are KITTI layout: type appears first, bbox columns 5..8 hold left, top,
/// right, bottom. Car/Van/Truck are kept, everything else skipped.
std::vector<Annotation> load_kitti_labels(const std::string& dir);

/// Scene recipe for synthetic corpora. Vehicles are bright rounded
/// rectangles on a dark noisy background; boxes are exact render extents
/// (before any blur pass). Dithered vehicles paint only pixels at even
/// absolute coordinates, which a (2i,2j)-decimated pyramid sees as solid:
/// they are invisible to fine-scale proposals but trivial at coarse scale.
struct SynthSpec {
    int width = 320;
    int height = 240;
    int min_vehicles = 1;
    int max_vehicles = 3;
    int bg_level = 40;
    int noise = 6; // uniform in [-noise, noise], clamped
    int fg_low = 160;
    int fg_high = 230;
    int min_w = 20;
    int max_w = 64;
    // Floor 0.55: squarified proposals have IoU == aspect against their own
    // box, and the training miner labels positives strictly above 0.5.
    double min_aspect = 0.55; // h = round(w * aspect)
    double max_aspect = 0.9;
    int corner_cut = 3;
    int streaks = 2;              // thin bright diagonal lines: guaranteed
                                  // vehicle-free proposal sources
    int decoys = 2;               // vehicle-shaped dim rectangles; their
                                  // intensity band ends under fg_low, so
                                  // patch confidence stays mid-range
    int decoy_low = 70;
    int decoy_high = 150;
    int distractors = 0;          // small bright specks outside vehicles
    double dither_fraction = 0.0; // share of vehicles drawn as even lattice
    int blur_passes = 0;          // 3x3 box blur over the finished frame
    int margin = 4;

    void validate() const;
};

/// Progressively harder corpora for the ablation ladder.
SynthSpec easy_spec();
SynthSpec medium_spec();
SynthSpec hard_spec();

struct SynthScene {
    GrayImage image;
    Annotation gt;
};

/// Deterministic per (seed, image index); image_id is img_%06d.
std::vector<SynthScene> gen_synthetic(int n_images, std::uint64_t seed,
                                      const SynthSpec& spec);

struct MatchResult {
    std::vector<char> tp; // aligned with the input detection order
    int fn = 0;
};

/// Greedy per-image matching in descending score order (ties by bbox
/// lexicographic x,y,w,h): a detection takes the highest-IoU unmatched gt
/// when that IoU >= iou_thresh, each gt at most once.
MatchResult match_detections(const std::vector<Detection>& dets,
                             const std::vector<Rect>& gts, double iou_thresh = 0.7);

enum class ApInterp { AllPoint, ElevenPoint };

/// Corpus AP: global rank sweep over per-image greedy matches. All-point
/// interpolation integrates the precision envelope; the 11-point variant
/// averages the envelope at recalls 0.0, 0.1, ..., 1.0.
EvalReport average_precision(const std::vector<Detection>& dets,
                             const std::vector<Annotation>& gts, double iou_thresh = 0.7,
                             ApInterp interp = ApInterp::AllPoint);

/// Wall-clock frames per second of fn over images, excluding the first
/// `warmup` frames from the timed span. Needs more images than warmup.
double measure_fps(const std::function<void(const GrayImage&)>& fn,
                   const std::vector<GrayImage>& images, int warmup = 5);

/// One {"image": id, "boxes": [[x,y,w,h],...]} object per line.
void write_annotations_jsonl(const std::string& path, const std::vector<Annotation>& anns);
std::vector<Annotation> read_annotations_jsonl(const std::string& path);

/// One {"image": id, "bbox": [x,y,w,h], "score": s} object per line.
void write_detections_jsonl(const std::string& path, const std::vector<Detection>& dets);
std::vector<Detection> read_detections_jsonl(const std::string& path);

} // namespace acm
