#include "acm/detector.hpp"

#include "acm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace acm {

void DetectOptions::validate() const {
    mser.validate();
    if (tau_cm < 0.0 || tau_cm > 1.0) throw ParamError("tau_cm must be in [0,1]");
    if (min_blob_area < 1) throw ParamError("min_blob_area must be >= 1");
    if (nms_iou <= 0.0 || nms_iou > 1.0) throw ParamError("nms_iou must be in (0,1]");
}

namespace {

bool blob_contains(const Blob& blob, int width, int x, int y) {
    const int idx = y * width + x;
    return std::binary_search(blob.pixels.begin(), blob.pixels.end(), idx);
}

bool bbox_less(const Rect& a, const Rect& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    if (a.w != b.w) return a.w < b.w;
    return a.h < b.h;
}

/// Everything produced before the fuzzy stage.
struct PipelineState {
    std::vector<ExtremalRegion> regions;
    std::vector<Proposal> proposals;
    std::vector<double> confidences;
    ConfidenceMap map;
    GrayImage acm;
    RoughTable table;
    GrayImage mask;
    std::vector<Blob> blobs;
};

PipelineState run_to_blobs(const GrayImage& img, const CnnModel& cnn, const DetectOptions& opt,
                           bool rough_gate) {
    PipelineState s;
    s.regions = detect_mr_mser(build_pyramid(img), opt.mser);
    s.proposals = make_proposals(s.regions, img);
    s.confidences.resize(s.proposals.size());
    for (std::size_t p = 0; p < s.proposals.size(); ++p)
        s.confidences[p] = forward(cnn, s.proposals[p].patch);
    s.map = stack(s.proposals, s.confidences, img.width, img.height);
    s.acm = to_gray(s.map, opt.tau_cm);
    if (!rough_gate) {
        // Harvest pass: keep every tau survivor. Rounding to gray would
        // floor confidences under 1/510 back to zero, and the
        // frame-adaptive threshold would strip exactly the faint blobs the
        // background class needs, so both are bypassed.
        for (int y = 0; y < s.acm.height; ++y)
            for (int x = 0; x < s.acm.width; ++x) {
                const double v = s.map.mean_at(x, y);
                if (v < opt.tau_cm) continue;
                auto& g = s.acm.data[static_cast<std::size_t>(y) * s.acm.width + x];
                g = std::max<std::uint8_t>(g, 1);
            }
    }
    s.table = rough_entropy_threshold(granulate(s.acm));
    s.mask = binarize(s.acm, rough_gate ? s.table.t_star : 0);
    s.blobs = extract_blobs(s.mask, s.acm, opt.min_blob_area);
    return s;
}

double mean_over(const std::vector<int>& pixels, const GrayImage& acm) {
    if (pixels.empty()) return 0.0;
    double sum = 0.0;
    for (const int idx : pixels) sum += acm.data[static_cast<std::size_t>(idx)];
    return sum / static_cast<double>(pixels.size());
}

/// Fallback box for a blob that fused no hypothesis center: tighten to the
/// pixels under uninflated squares if any, else keep the blob bbox.
Rect core_bbox(const Blob& blob, const ConfidenceMap& map) {
    int min_x = map.width, min_y = map.height, max_x = -1, max_y = -1;
    for (const int idx : blob.pixels) {
        if (map.core_count[static_cast<std::size_t>(idx)] <= 0) continue;
        const int x = idx % map.width, y = idx / map.width;
        min_x = std::min(min_x, x);
        min_y = std::min(min_y, y);
        max_x = std::max(max_x, x);
        max_y = std::max(max_y, y);
    }
    if (max_x >= 0) return Rect{min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
    return blob.bbox;
}

} // namespace

std::vector<Detection> detect_vehicles(const GrayImage& img, const std::string& image_id,
                                       const CnnModel& cnn, const FuzzyModel& fuzzy,
                                       const DetectOptions& opt, DetectTrace* trace) {
    opt.validate();
    fuzzy.validate();

    PipelineState s = run_to_blobs(img, cnn, opt, true);

    std::vector<Detection> dets;
    std::vector<SoftLabel> labels;
    labels.reserve(s.blobs.size());
    for (const Blob& blob : s.blobs) {
        const SoftLabel label = classify(fuzzy, features(blob, s.acm));
        labels.push_back(label);

        // Region hypotheses fused into this blob: best confidence per region.
        std::map<int, double> hypotheses;
        for (std::size_t p = 0; p < s.proposals.size(); ++p) {
            const Proposal& prop = s.proposals[p];
            const int cx =
                std::clamp(static_cast<int>(std::lround(prop.center_x)), 0, s.map.width - 1);
            const int cy =
                std::clamp(static_cast<int>(std::lround(prop.center_y)), 0, s.map.height - 1);
            if (!blob_contains(blob, s.map.width, cx, cy)) continue;
            auto [it, fresh] = hypotheses.emplace(prop.region_ref, s.confidences[p]);
            if (!fresh) it->second = std::max(it->second, s.confidences[p]);
        }

        if (hypotheses.empty()) {
            Detection d;
            d.image_id = image_id;
            d.bbox = core_bbox(blob, s.map);
            d.score = blob.mean / 255.0 * label.mu_vehicle;
            dets.push_back(std::move(d));
            continue;
        }
        for (const auto& [region_ref, conf] : hypotheses) {
            const Rect box = s.regions[static_cast<std::size_t>(region_ref)].base_bbox;
            std::vector<int> support;
            for (const int idx : blob.pixels) {
                const int x = idx % s.map.width, y = idx / s.map.width;
                if (x >= box.x && x < box.right() && y >= box.y && y < box.bottom())
                    support.push_back(idx);
            }
            Detection d;
            d.image_id = image_id;
            d.bbox = box;
            d.score = mean_over(support, s.acm) / 255.0 * label.mu_vehicle;
            dets.push_back(std::move(d));
        }
    }

    // Greedy suppression: keep the best of any pair overlapping > nms_iou.
    std::sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
        if (a.score != b.score) return a.score > b.score;
        return bbox_less(a.bbox, b.bbox);
    });
    std::vector<Detection> kept;
    for (Detection& d : dets) {
        bool suppressed = false;
        for (const Detection& k : kept)
            if (iou(d.bbox, k.bbox) > opt.nms_iou) {
                suppressed = true;
                break;
            }
        if (!suppressed) kept.push_back(std::move(d));
    }

    if (trace) {
        trace->regions = std::move(s.regions);
        trace->proposals = std::move(s.proposals);
        trace->confidences = std::move(s.confidences);
        trace->map = std::move(s.map);
        trace->acm = std::move(s.acm);
        trace->table = s.table;
        trace->mask = std::move(s.mask);
        trace->blobs = std::move(s.blobs);
        trace->labels = std::move(labels);
    }
    return kept;
}

std::vector<std::pair<BlobFeatures, BlobClass>> harvest_blob_samples(
    const GrayImage& img, const std::vector<Rect>& gt, const CnnModel& cnn,
    const DetectOptions& opt, double collect_tau, double cover_thresh) {
    DetectOptions harvest_opt = opt;
    harvest_opt.tau_cm = collect_tau;
    harvest_opt.validate();
    if (cover_thresh <= 0.0 || cover_thresh > 1.0)
        throw ParamError("cover_thresh must be in (0,1]");

    const PipelineState s = run_to_blobs(img, cnn, harvest_opt, false);
    std::vector<std::pair<BlobFeatures, BlobClass>> out;
    out.reserve(s.blobs.size());
    for (const Blob& blob : s.blobs) {
        bool vehicle = false;
        for (const Rect& box : gt) {
            const long long inter = intersect(blob.bbox, box).area();
            if (static_cast<double>(inter) >=
                cover_thresh * static_cast<double>(box.area())) {
                vehicle = true;
                break;
            }
        }
        out.emplace_back(features(blob, s.acm),
                         vehicle ? BlobClass::Vehicle : BlobClass::Background);
    }
    return out;
}

std::vector<Detection> proposal_detections(const GrayImage& img, const std::string& image_id,
                                           const MserConfig& cfg, ProposalSource source) {
    const std::vector<ExtremalRegion> regions =
        source == ProposalSource::Mser ? detect_mser(img, cfg)
                                       : detect_mr_mser(build_pyramid(img), cfg);
    std::vector<Detection> dets;
    dets.reserve(regions.size());
    for (const ExtremalRegion& r : regions) {
        Detection d;
        d.image_id = image_id;
        d.bbox = r.base_bbox;
        d.score = std::clamp(1.0 - r.variation, 0.0, 1.0);
        dets.push_back(std::move(d));
    }
    return dets;
}

} // namespace acm
