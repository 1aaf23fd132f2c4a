#pragma once

#include "acm/augment.hpp"
#include "acm/image.hpp"

#include <cstddef>
#include <vector>

namespace acm {

/// Per-pixel accumulation of proposal confidences over the base image.
/// Invariants: sum == 0 and peak == 0 wherever count == 0; the mean at a
/// covered pixel lies in [0,1] when all inputs do.
struct ConfidenceMap {
    int width = 0;
    int height = 0;
    std::vector<double> sum;     // accumulated confidence
    std::vector<int> count;      // number of covering proposals
    std::vector<double> peak;    // max confidence seen (ablation aggregation)
    std::vector<int> core_count; // coverage by inflation-1.0 squares only

    double mean_at(int x, int y) const {
        const std::size_t i =
            static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + x;
        return count[i] > 0 ? sum[i] / count[i] : 0.0;
    }
};

enum class Aggregation { Mean, Max };

/// Adds each proposal's square rect (clipped to the image) to the map:
/// confidence onto sum and peak, 1 onto count. Inflation-1.0 squares also
/// bump core_count; downstream bbox refinement uses it to discount the halo
/// the larger inflations paint around an object.
ConfidenceMap stack(const std::vector<Proposal>& proposals,
                    const std::vector<double>& confidences, int width, int height);

/// Grayscale map: round(255 * v) where v >= tau_cm, else 0. v is the
/// per-pixel mean (default) or the per-pixel max of stacked confidences.
GrayImage to_gray(const ConfidenceMap& map, double tau_cm = 0.3,
                  Aggregation agg = Aggregation::Mean);

} // namespace acm
