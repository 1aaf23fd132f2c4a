#include "rough_oracle.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace acm::testing {

namespace {

struct Cell {
    std::uint8_t px[4];
};

} // namespace

RoughTable rough_reference(const GrayImage& acm, RoughnessForm form) {
    // Independent granulation: walk 2x2 blocks, clamping coordinates for the
    // replicated odd edge.
    std::vector<Cell> cells;
    for (int y = 0; y < acm.height; y += 2) {
        for (int x = 0; x < acm.width; x += 2) {
            Cell c;
            int k = 0;
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    const int sx = std::min(x + dx, acm.width - 1);
                    const int sy = std::min(y + dy, acm.height - 1);
                    c.px[k++] = acm.at(sx, sy);
                }
            cells.push_back(c);
        }
    }

    RoughTable table;
    double best = -1.0;
    for (int T = 0; T < 256; ++T) {
        RoughRow& row = table.rows[T];
        for (const Cell& c : cells) {
            bool any_obj = false, all_obj = true, any_bg = false, all_bg = true;
            for (const std::uint8_t v : c.px) {
                if (v > T) {
                    any_obj = true;
                    all_bg = false;
                } else {
                    any_bg = true;
                    all_obj = false;
                }
            }
            if (all_obj) ++row.o_lower;
            if (any_obj) ++row.o_upper;
            if (all_bg) ++row.b_lower;
            if (any_bg) ++row.b_upper;
        }
        const auto rough = [form](int lower, int upper) {
            if (form == RoughnessForm::Standard)
                return upper == 0 ? 0.0 : 1.0 - static_cast<double>(lower) / upper;
            return lower == 0 ? 0.0 : 1.0 - static_cast<double>(upper) / lower;
        };
        row.r_ot = rough(row.o_lower, row.o_upper);
        row.r_bt = rough(row.b_lower, row.b_upper);
        const auto xlnx = [](double v) { return v > 0.0 ? v * std::log(v) : 0.0; };
        row.re_t = row.o_upper == 0 || row.b_upper == 0
                       ? 0.0
                       : -(1.3591409142295225) * (xlnx(row.r_ot) + xlnx(row.r_bt));
        if (row.re_t > best) {
            best = row.re_t;
            table.t_star = T;
        }
    }
    return table;
}

} // namespace acm::testing
