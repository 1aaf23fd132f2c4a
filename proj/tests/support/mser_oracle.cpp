#include "mser_oracle.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <tuple>

namespace acm::testsupport {

namespace {

struct Comp {
    std::vector<int> px; // sorted linear indices
    long long area = 0;
    int min_px = 0;
    int node = -1;
};

struct Slice {
    std::vector<int> label; // component id per pixel, -1 above threshold
    std::vector<Comp> comps;
};

struct ONode {
    int lo = 0, hi = 0;
    long long area = 0;
    int min_px = 0;
    std::vector<int> pixels;
    int parent = -1;
    std::vector<int> children;
    double var = 0.0;
    int level = 0;
    bool selected = false;
    bool suppressed = false;
};

// Labels the threshold set {p : I(p) <= t} by BFS, 4-connected, components
// numbered in ascending order of their smallest pixel index.
Slice label_threshold(const GrayImage& img, int t) {
    const int w = img.width, h = img.height, n = w * h;
    Slice s;
    s.label.assign(n, -1);
    for (int start = 0; start < n; ++start) {
        if (img.data[start] > t || s.label[start] != -1) continue;
        const int id = static_cast<int>(s.comps.size());
        Comp c;
        c.min_px = start;
        std::deque<int> queue{start};
        s.label[start] = id;
        while (!queue.empty()) {
            const int p = queue.front();
            queue.pop_front();
            c.px.push_back(p);
            const int x = p % w, y = p / w;
            const int nb[4] = {x > 0 ? p - 1 : -1, x + 1 < w ? p + 1 : -1,
                               y > 0 ? p - w : -1, y + 1 < h ? p + w : -1};
            for (const int q : nb) {
                if (q < 0 || s.label[q] != -1 || img.data[q] > t) continue;
                s.label[q] = id;
                queue.push_back(q);
            }
        }
        std::sort(c.px.begin(), c.px.end());
        c.area = static_cast<long long>(c.px.size());
        s.comps.push_back(std::move(c));
    }
    return s;
}

std::vector<ExtremalRegion> reference_one_polarity(const GrayImage& img, const MserConfig& cfg,
                                                   Polarity pol) {
    GrayImage work = img;
    if (pol == Polarity::Bright)
        for (auto& p : work.data) p = static_cast<std::uint8_t>(255 - p);

    // Stage 1: full threshold stack.
    std::vector<Slice> stack;
    stack.reserve(256);
    for (int t = 0; t < 256; ++t) stack.push_back(label_threshold(work, t));

    // Stage 2: group identical component sets into nodes.
    std::vector<ONode> nodes;
    for (int t = 0; t < 256; ++t) {
        for (std::size_t ci = 0; ci < stack[t].comps.size(); ++ci) {
            Comp& c = stack[t].comps[ci];
            // The component at t-1 holding any pixel of c that already
            // existed there; equal area means the very same set.
            int same_node = -1;
            std::vector<int> sub_nodes;
            if (t > 0) {
                for (const auto& d : stack[t - 1].comps) {
                    if (stack[t].label[d.min_px] != static_cast<int>(ci)) continue;
                    if (d.area == c.area) same_node = d.node;
                    if (std::find(sub_nodes.begin(), sub_nodes.end(), d.node) == sub_nodes.end())
                        sub_nodes.push_back(d.node);
                }
            }
            if (same_node != -1) {
                c.node = same_node;
                nodes[same_node].hi = t;
            } else {
                const int id = static_cast<int>(nodes.size());
                ONode nd;
                nd.lo = nd.hi = t;
                nd.area = c.area;
                nd.min_px = c.min_px;
                nd.pixels = c.px;
                for (const int sn : sub_nodes) {
                    nodes[sn].parent = id;
                    nd.children.push_back(sn);
                }
                nodes.push_back(std::move(nd));
                c.node = id;
            }
        }
    }

    // Stage 3: stability score straight from the stack.
    for (auto& nd : nodes) {
        const int comp_at_lo = stack[nd.lo].label[nd.min_px];
        double best = std::numeric_limits<double>::infinity();
        int best_t = nd.lo;
        for (int t = nd.lo; t <= nd.hi; ++t) {
            const int tu = std::min(t + cfg.delta, 255);
            const long long up =
                stack[tu].comps[stack[tu].label[nd.min_px]].area;
            const int td = t - cfg.delta;
            long long down = 0;
            if (td >= nd.lo) {
                down = nd.area;
            } else if (td >= 0) {
                for (const auto& d : stack[td].comps)
                    if (stack[nd.lo].label[d.min_px] == comp_at_lo)
                        down = std::max(down, d.area);
            }
            const double v = static_cast<double>(up - down) / static_cast<double>(nd.area);
            if (v < best) {
                best = v;
                best_t = t;
            }
        }
        nd.var = best;
        nd.level = best_t;
    }

    // Stage 4: selection.
    const double area_cap = cfg.max_area * static_cast<double>(work.pixel_count());
    for (auto& nd : nodes) {
        if (nd.var > cfg.max_variation) continue;
        if (nd.area < cfg.min_area) continue;
        if (static_cast<double>(nd.area) > area_cap) continue;
        if (nd.parent != -1 && nd.var > nodes[nd.parent].var) continue;
        bool ok = true;
        for (const int c : nd.children)
            if (nd.var > nodes[c].var) {
                ok = false;
                break;
            }
        nd.selected = ok;
    }

    // Stage 5: nested suppression to a fixed point.
    std::vector<int> sel;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].selected) sel.push_back(static_cast<int>(i));
    std::sort(sel.begin(), sel.end(), [&](int a, int b) {
        return std::tuple(nodes[a].area, nodes[a].level, nodes[a].min_px) <
               std::tuple(nodes[b].area, nodes[b].level, nodes[b].min_px);
    });
    auto nearest_sel_anc = [&](int id) {
        for (int a = nodes[id].parent; a != -1; a = nodes[a].parent)
            if (nodes[a].selected && !nodes[a].suppressed) return a;
        return -1;
    };
    bool changed = true;
    while (changed) {
        changed = false;
        for (const int d : sel) {
            if (nodes[d].suppressed) continue;
            const int a = nearest_sel_anc(d);
            if (a == -1) continue;
            if (static_cast<double>(nodes[d].area) > 0.95 * static_cast<double>(nodes[a].area)) {
                if (nodes[d].var <= nodes[a].var)
                    nodes[a].suppressed = true;
                else
                    nodes[d].suppressed = true;
                changed = true;
                break;
            }
        }
    }

    std::vector<ExtremalRegion> out;
    for (const auto& nd : nodes) {
        if (!nd.selected || nd.suppressed) continue;
        ExtremalRegion r;
        r.level = pol == Polarity::Dark ? nd.level : 255 - nd.level;
        r.area = nd.area;
        int x0 = img.width, y0 = img.height, x1 = -1, y1 = -1;
        for (const int p : nd.pixels) {
            x0 = std::min(x0, p % img.width);
            x1 = std::max(x1, p % img.width);
            y0 = std::min(y0, p / img.width);
            y1 = std::max(y1, p / img.width);
        }
        r.bbox = Rect{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
        r.base_bbox = r.bbox;
        r.variation = nd.var;
        r.polarity = pol;
        r.pixels = nd.pixels;
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace

std::vector<ExtremalRegion> mser_reference(const GrayImage& img, const MserConfig& cfg) {
    std::vector<ExtremalRegion> out = reference_one_polarity(img, cfg, Polarity::Dark);
    if (cfg.both_polarities) {
        auto bright = reference_one_polarity(img, cfg, Polarity::Bright);
        out.insert(out.end(), std::make_move_iterator(bright.begin()),
                   std::make_move_iterator(bright.end()));
    }
    return out;
}

} // namespace acm::testsupport
