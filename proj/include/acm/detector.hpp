#pragma once

#include "acm/confmap.hpp"
#include "acm/evalpipe.hpp"
#include "acm/fuzzyclass.hpp"
#include "acm/mser.hpp"
#include "acm/roughseg.hpp"
#include "acm/tinycnn.hpp"

#include <string>
#include <utility>
#include <vector>

namespace acm {

/// Which proposal pool a raw-proposal detector draws from.
enum class ProposalSource { Mser, MrMser };

struct DetectOptions {
    MserConfig mser;
    double tau_cm = 0.3;
    int min_blob_area = 25;
    double nms_iou = 0.5; // cross-hypothesis suppression within one frame

    void validate() const; // throws ParamError
};

/// Intermediate products of one detect_vehicles run, for dumps and tests.
struct DetectTrace {
    std::vector<ExtremalRegion> regions;
    std::vector<Proposal> proposals;
    std::vector<double> confidences;
    ConfidenceMap map;
    GrayImage acm;
    RoughTable table;
    GrayImage mask;
    std::vector<Blob> blobs;
    std::vector<SoftLabel> labels;
};

/// Full pipeline: multi-resolution region proposals -> per-patch CNN
/// confidence -> aggregated confidence map -> rough-entropy binarization ->
/// blobs -> fuzzy scoring. No hard gate drops candidates: every hypothesis
/// is emitted scored, and ranking decides precision.
///
/// A blob is the fused evidence of the region hypotheses whose proposal
/// centers fall on its pixels; adjacent objects can share one blob. Each
/// such region becomes a detection with the region's base bbox (the tight
/// object extent: blob bboxes are unions of padded squares) and
/// score = (mean map intensity over the blob pixels inside that bbox / 255)
/// * the blob's mu_vehicle. Blobs holding no center emit their own bbox,
/// tightened to uninflated-square pixels when any exist. Per-frame greedy
/// suppression then keeps the best of any two detections overlapping above
/// nms_iou.
std::vector<Detection> detect_vehicles(const GrayImage& img, const std::string& image_id,
                                       const CnnModel& cnn, const FuzzyModel& fuzzy,
                                       const DetectOptions& opt,
                                       DetectTrace* trace = nullptr);

/// Pipeline pass without the fuzzy stage, harvesting labeled blob features
/// to fit one. Runs at the permissive collect_tau and skips the
/// frame-adaptive threshold (both would strip exactly the weak blobs the
/// background class needs). A blob is labeled Vehicle when its bbox covers
/// at least cover_thresh of some ground-truth box's area.
std::vector<std::pair<BlobFeatures, BlobClass>> harvest_blob_samples(
    const GrayImage& img, const std::vector<Rect>& gt, const CnnModel& cnn,
    const DetectOptions& opt, double collect_tau, double cover_thresh = 0.5);

/// Ablation baseline: raw region bboxes as detections, no learned stages.
/// Score is 1 - variation clamped to [0,1] (stabler regions rank higher).
std::vector<Detection> proposal_detections(const GrayImage& img, const std::string& image_id,
                                           const MserConfig& cfg, ProposalSource source);

} // namespace acm
