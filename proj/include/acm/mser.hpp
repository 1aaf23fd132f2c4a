#pragma once

#include "acm/image.hpp"

#include <string>
#include <vector>

namespace acm {

enum class Polarity { Dark, Bright };

struct MserConfig {
    int delta = 5;              // intensity margin for the stability score
    int min_area = 30;          // pixels, at detection scale
    double max_area = 0.25;     // fraction of the detection-scale image area
    double max_variation = 0.5; // stability cap
    bool both_polarities = true;

    void validate() const; // throws ParamError on out-of-range values
};

/// A stable extremal region.
///
/// Stability contract (the reference enumerator in the tests implements the
/// same definition by direct threshold sweeping, sharing no code):
///  - Dark polarity thresholds S_t = {p : I(p) <= t}; bright polarity runs
///    the identical procedure on the inverted image.
///  - A tree node is a distinct connected pixel set appearing as a component
///    of some S_t; it lives on the interval [lo, hi] where its composition
///    is unchanged (hi = parent's lo - 1; 255 at the root).
///  - variation(t) = (|R_{t+delta}| - |R_{t-delta}|) / |R_t| where the upward
///    term follows the ancestor chain (saturating at 255), and the downward
///    term is the largest component of S_{t-delta} inside the node (0 when
///    t-delta < 0, the node's own area when t-delta >= lo).
///  - A node's score is the minimum of variation(t) over [lo, hi], attained
///    at the smallest such t (the reported level).
///  - Selected: score <= max_variation, area within [min_area,
///    max_area * image_area], and score <= the score of the parent and of
///    every child (a local minimum along the tree path).
///  - Nested suppression: visiting selected nodes ordered by (area asc,
///    level asc, smallest pixel index asc), a node whose area exceeds 0.95 of
///    its nearest selected proper ancestor's area eliminates whichever of the
///    pair has the larger score (ties keep the descendant); repeat to a fixed
///    point.
struct ExtremalRegion {
    int level = 0;       // dark: pixels satisfy I <= level; bright: I >= level
    long long area = 0;  // pixel count at detection scale
    Rect bbox;           // detection-scale coordinates
    Rect base_bbox;      // mapped to base-image coordinates, clamped
    double variation = 0.0;
    int scale_index = 0; // 0..2, pyramid level of origin
    Polarity polarity = Polarity::Dark;
    std::vector<int> pixels; // sorted linear indices at detection scale
};

/// Single-scale detection. Output is deterministically ordered by
/// (scale_index, bbox, level, polarity).
std::vector<ExtremalRegion> detect_mser(const GrayImage& img, const MserConfig& cfg);

/// Runs detect_mser on every pyramid level, maps bboxes to base coordinates
/// (scaled by the level factor, clamped), then drops any region whose
/// base_bbox has IoU > 0.8 with a kept region from a strictly finer scale.
std::vector<ExtremalRegion> detect_mr_mser(const Pyramid& pyr, const MserConfig& cfg);

/// One JSON object per line: {scale, level, area, bbox, base_bbox, variation,
/// polarity}. Pixel sets are not serialized.
void write_regions_jsonl(const std::vector<ExtremalRegion>& regions, const std::string& path);
std::vector<ExtremalRegion> read_regions_jsonl(const std::string& path);

} // namespace acm
