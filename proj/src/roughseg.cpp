#include "acm/roughseg.hpp"

#include "acm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace acm {

namespace {

constexpr double kHalfE = 1.3591409142295225; // e/2

double xlnx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

double roughness(int lower, int upper, RoughnessForm form) {
    if (form == RoughnessForm::Standard)
        return upper == 0 ? 0.0 : 1.0 - static_cast<double>(lower) / upper;
    return lower == 0 ? 0.0 : 1.0 - static_cast<double>(upper) / lower;
}

} // namespace

GranuleGrid granulate(const GrayImage& acm) {
    if (acm.width < 1 || acm.height < 1) throw ParamError("granulate needs a nonempty image");
    GranuleGrid g;
    g.cols = (acm.width + 1) / 2;
    g.rows = (acm.height + 1) / 2;
    g.cells.resize(static_cast<std::size_t>(g.cols) * g.rows);
    for (int gy = 0; gy < g.rows; ++gy) {
        for (int gx = 0; gx < g.cols; ++gx) {
            // Edge replication: clamp the odd last row/column inward.
            const int x0 = 2 * gx, y0 = 2 * gy;
            const int x1 = std::min(x0 + 1, acm.width - 1);
            const int y1 = std::min(y0 + 1, acm.height - 1);
            g.cells[static_cast<std::size_t>(gy) * g.cols + gx] = {
                acm.at(x0, y0), acm.at(x1, y0), acm.at(x0, y1), acm.at(x1, y1)};
        }
    }
    return g;
}

RoughRow approximations(const GranuleGrid& grid, int T) {
    if (T < 0 || T > 255) throw ParamError("threshold must be in 0..255");
    RoughRow r;
    for (const auto& c : grid.cells) {
        int above = 0;
        for (const std::uint8_t v : c) above += v > T ? 1 : 0;
        if (above == 4) ++r.o_lower;
        if (above > 0) ++r.o_upper;
        if (above == 0) ++r.b_lower;
        if (above < 4) ++r.b_upper;
    }
    return r;
}

RoughTable rough_entropy_threshold(const GranuleGrid& grid, RoughnessForm form) {
    if (grid.cells.empty()) throw ParamError("rough_entropy_threshold needs granules");
    const int n = grid.total();

    // A granule is all-object for T < min, any-object for T < max; the dual
    // counts follow from the partition. Histogram the per-granule extremes
    // once, then every threshold is a pair of suffix sums.
    std::array<int, 256> min_at{}, max_at{};
    for (const auto& c : grid.cells) {
        const auto [mn, mx] = std::minmax_element(c.begin(), c.end());
        ++min_at[*mn];
        ++max_at[*mx];
    }
    std::array<int, 256> min_gt{}, max_gt{}; // #{granules with extreme > T}
    for (int t = 254; t >= 0; --t) {
        min_gt[t] = min_gt[t + 1] + min_at[t + 1];
        max_gt[t] = max_gt[t + 1] + max_at[t + 1];
    }

    RoughTable table;
    double best = -1.0;
    for (int T = 0; T < 256; ++T) {
        RoughRow& row = table.rows[T];
        row.o_lower = min_gt[T]; // all four above T
        row.o_upper = max_gt[T]; // at least one above T
        row.b_lower = n - row.o_upper;
        row.b_upper = n - row.o_lower;
        row.r_ot = roughness(row.o_lower, row.o_upper, form);
        row.r_bt = roughness(row.b_lower, row.b_upper, form);
        row.re_t = row.o_upper == 0 || row.b_upper == 0
                       ? 0.0
                       : -kHalfE * (xlnx(row.r_ot) + xlnx(row.r_bt));
        if (row.re_t > best) {
            best = row.re_t;
            table.t_star = T;
        }
    }
    return table;
}

GrayImage binarize(const GrayImage& acm, int t_star) {
    if (t_star < 0 || t_star > 255) throw ParamError("t_star must be in 0..255");
    GrayImage mask(acm.width, acm.height);
    for (std::size_t i = 0; i < acm.data.size(); ++i)
        mask.data[i] = acm.data[i] > t_star ? 1 : 0;
    return mask;
}

std::vector<Blob> extract_blobs(const GrayImage& mask, const GrayImage& acm,
                                int min_blob_area) {
    if (mask.width != acm.width || mask.height != acm.height)
        throw ParamError("mask and map dims differ");
    if (min_blob_area < 1) throw ParamError("min_blob_area must be >= 1");
    const int w = mask.width, h = mask.height;
    std::vector<char> seen(static_cast<std::size_t>(w) * h, 0);
    std::vector<Blob> blobs;
    std::deque<int> queue;

    for (int sy = 0; sy < h; ++sy) {
        for (int sx = 0; sx < w; ++sx) {
            const int start = sy * w + sx;
            if (!mask.data[start] || seen[start]) continue;
            Blob b;
            seen[start] = 1;
            queue.push_back(start);
            int min_x = sx, max_x = sx, min_y = sy, max_y = sy;
            double sum = 0.0, sq = 0.0;
            while (!queue.empty()) {
                const int cur = queue.front();
                queue.pop_front();
                b.pixels.push_back(cur);
                const int cx = cur % w, cy = cur / w;
                min_x = std::min(min_x, cx);
                max_x = std::max(max_x, cx);
                min_y = std::min(min_y, cy);
                max_y = std::max(max_y, cy);
                const double v = acm.data[cur];
                sum += v;
                sq += v * v;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (!dx && !dy) continue;
                        const int nx = cx + dx, ny = cy + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        const int ni = ny * w + nx;
                        if (mask.data[ni] && !seen[ni]) {
                            seen[ni] = 1;
                            queue.push_back(ni);
                        }
                    }
                }
            }
            b.area = static_cast<int>(b.pixels.size());
            if (b.area < min_blob_area) continue;
            std::sort(b.pixels.begin(), b.pixels.end());
            b.bbox = Rect{min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
            b.mean = sum / b.area;
            const double var = std::max(0.0, sq / b.area - b.mean * b.mean);
            b.stddev = std::sqrt(var);
            b.fill_ratio = static_cast<double>(b.area) / b.bbox.area();
            blobs.push_back(std::move(b));
        }
    }
    return blobs;
}

} // namespace acm
