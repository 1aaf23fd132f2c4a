#include "acm/confmap.hpp"

#include "acm/errors.hpp"

#include <cmath>
#include <string>

namespace acm {

ConfidenceMap stack(const std::vector<Proposal>& proposals,
                    const std::vector<double>& confidences, int width, int height) {
    if (proposals.size() != confidences.size())
        throw ParamError("stack needs one confidence per proposal, got " +
                         std::to_string(confidences.size()) + " for " +
                         std::to_string(proposals.size()));
    if (width < 1 || height < 1) throw ParamError("stack needs positive base dims");

    ConfidenceMap map;
    map.width = width;
    map.height = height;
    const std::size_t n = static_cast<std::size_t>(width) * height;
    map.sum.assign(n, 0.0);
    map.count.assign(n, 0);
    map.peak.assign(n, 0.0);
    map.core_count.assign(n, 0);

    for (std::size_t p = 0; p < proposals.size(); ++p) {
        const double conf = confidences[p];
        if (conf < 0.0 || conf > 1.0)
            throw ParamError("confidence " + std::to_string(conf) + " outside [0,1]");
        const Rect r = clamp_rect(proposals[p].crop_rect, width, height);
        if (r.w <= 0 || r.h <= 0) continue;
        const bool core = proposals[p].inflation == 1.0;
        for (int y = r.y; y < r.y + r.h; ++y) {
            const std::size_t row = static_cast<std::size_t>(y) * width;
            for (int x = r.x; x < r.x + r.w; ++x) {
                const std::size_t i = row + x;
                map.sum[i] += conf;
                map.count[i] += 1;
                if (conf > map.peak[i]) map.peak[i] = conf;
                if (core) map.core_count[i] += 1;
            }
        }
    }
    return map;
}

GrayImage to_gray(const ConfidenceMap& map, double tau_cm, Aggregation agg) {
    if (tau_cm < 0.0 || tau_cm > 1.0) throw ParamError("tau_cm must be in [0,1]");
    GrayImage out(map.width, map.height);
    const std::size_t n = out.data.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double v =
            agg == Aggregation::Mean
                ? (map.count[i] > 0 ? map.sum[i] / map.count[i] : 0.0)
                : map.peak[i];
        out.data[i] = v >= tau_cm ? static_cast<std::uint8_t>(std::lround(255.0 * v)) : 0;
    }
    return out;
}

} // namespace acm
