#pragma once

#include "acm/image.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace acm {

/// 2x2 pixel granules tiling the image. Odd edges replicate the last
/// row/column so every granule holds exactly 4 intensities and every image
/// pixel belongs to exactly one granule.
struct GranuleGrid {
    int cols = 0; // ceil(w/2)
    int rows = 0; // ceil(h/2)
    std::vector<std::array<std::uint8_t, 4>> cells;

    int total() const { return cols * rows; }
};

/// Counts and derived quantities for one threshold T. Object pixels are
/// those with intensity strictly greater than T, background the rest, so the
/// two sets partition the image at every T.
struct RoughRow {
    int o_lower = 0;
    int o_upper = 0;
    int b_lower = 0;
    int b_upper = 0;
    double r_ot = 0.0; // 1 - o_lower/o_upper, 0 when o_upper == 0
    double r_bt = 0.0;
    double re_t = 0.0; // rough entropy in [0,1]
};

struct RoughTable {
    std::array<RoughRow, 256> rows{};
    int t_star = 0; // smallest T maximizing re_t
};

/// The source text prints the roughness ratio upside down (upper/lower),
/// which would make roughness non-positive; Standard uses lower/upper.
/// Printed is retained behind this switch so the discrepancy is inspectable.
enum class RoughnessForm { Standard, Printed };

GranuleGrid granulate(const GrayImage& acm);

/// Direct per-granule counts for a single threshold: lower membership needs
/// all 4 pixels on the side, upper needs any. Cross-checks the sweep.
RoughRow approximations(const GranuleGrid& grid, int T);

/// Full 256-row table via cumulative histograms of per-granule min/max.
/// Rows where o_upper or b_upper is zero carry re_t = 0 (no evidence for
/// one of the sets). A table whose entropy is zero everywhere keeps
/// t_star = 0 unless the caller handles the degenerate case.
RoughTable rough_entropy_threshold(const GranuleGrid& grid,
                                   RoughnessForm form = RoughnessForm::Standard);

/// mask(p) = 1 iff acm(p) > t_star.
GrayImage binarize(const GrayImage& acm, int t_star);

struct Blob {
    Rect bbox;
    int area = 0;
    double mean = 0.0;   // ACM intensity over the blob's own pixels
    double stddev = 0.0; // population standard deviation
    double fill_ratio = 0.0;
    std::vector<int> pixels; // linear indices, sorted ascending
};

/// 8-connected components of mask != 0 with area >= min_blob_area, ordered
/// by first pixel in row-major scan. Intensity stats come from acm.
std::vector<Blob> extract_blobs(const GrayImage& mask, const GrayImage& acm,
                                int min_blob_area = 25);

} // namespace acm
