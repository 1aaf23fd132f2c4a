#include "acm/mser.hpp"

#include "acm/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <limits>
#include <tuple>

namespace acm {

void MserConfig::validate() const {
    if (delta < 1) throw ParamError("mser delta must be >= 1");
    if (min_area < 1) throw ParamError("mser min_area must be >= 1");
    if (max_area <= 0.0 || max_area > 1.0)
        throw ParamError("mser max_area must be a fraction in (0, 1]");
    if (max_variation < 0.0) throw ParamError("mser max_variation must be >= 0");
}

namespace {

struct Node {
    int lo = 0;
    long long area = 0;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0; // inclusive bbox
    int parent = -1;
    int min_px = std::numeric_limits<int>::max();
    bool alive = true;
    bool selected = false;
    bool suppressed = false;
    double var = 0.0;
    int level = 0;
    std::vector<int> children;
    std::vector<int> own_pixels;
};

struct Builder {
    const GrayImage& img;
    std::vector<Node> nodes;
    std::vector<int> ufp;       // union-find parent; -1 = unprocessed
    std::vector<int> uf_size;
    std::vector<int> root_node; // valid at union-find roots only

    explicit Builder(const GrayImage& im)
        : img(im),
          ufp(im.pixel_count(), -1),
          uf_size(im.pixel_count(), 1),
          root_node(im.pixel_count(), -1) {}

    int find(int p) {
        int r = p;
        while (ufp[r] != r) r = ufp[r];
        while (ufp[p] != r) {
            const int next = ufp[p];
            ufp[p] = r;
            p = next;
        }
        return r;
    }

    void absorb_bbox(Node& a, const Node& b) {
        a.x0 = std::min(a.x0, b.x0);
        a.y0 = std::min(a.y0, b.y0);
        a.x1 = std::max(a.x1, b.x1);
        a.y1 = std::max(a.y1, b.y1);
        a.min_px = std::min(a.min_px, b.min_px);
        a.area += b.area;
    }

    // Joins the components of two distinct union-find roots at level t.
    void merge_roots(int rp, int rq, int t) {
        int na = root_node[rp];
        int nb = root_node[rq];
        int keep;
        if (nodes[nb].lo == t) {
            // Both still forming at t: fuse into the earlier node.
            keep = std::min(na, nb);
            const int dead = std::max(na, nb);
            Node& k = nodes[keep];
            Node& d = nodes[dead];
            absorb_bbox(k, d);
            k.own_pixels.insert(k.own_pixels.end(), d.own_pixels.begin(), d.own_pixels.end());
            for (const int c : d.children) {
                nodes[c].parent = keep;
                k.children.push_back(c);
            }
            d.own_pixels.clear();
            d.children.clear();
            d.alive = false;
        } else {
            // Completed component becomes a child of the forming one.
            keep = na;
            nodes[nb].parent = na;
            nodes[na].children.push_back(nb);
            absorb_bbox(nodes[na], nodes[nb]);
        }
        // Union by size; either pixel may carry the root.
        if (uf_size[rp] < uf_size[rq]) std::swap(rp, rq);
        ufp[rq] = rp;
        uf_size[rp] += uf_size[rq];
        root_node[rp] = keep;
    }

    void build() {
        const int w = img.width, h = img.height;
        const int n = w * h;

        // Counting sort of pixel indices by intensity.
        int counts[257] = {0};
        for (int i = 0; i < n; ++i) ++counts[img.data[i] + 1];
        for (int v = 0; v < 256; ++v) counts[v + 1] += counts[v];
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[counts[img.data[i]]++] = i;

        nodes.reserve(256);
        for (const int p : order) {
            const int t = img.data[p];
            ufp[p] = p;
            const int id = static_cast<int>(nodes.size());
            Node nd;
            nd.lo = t;
            nd.area = 1;
            nd.x0 = nd.x1 = p % w;
            nd.y0 = nd.y1 = p / w;
            nd.min_px = p;
            nd.own_pixels.push_back(p);
            nodes.push_back(std::move(nd));
            root_node[p] = id;

            const int x = p % w, y = p / w;
            const int nb[4] = {x > 0 ? p - 1 : -1, x + 1 < w ? p + 1 : -1,
                               y > 0 ? p - w : -1, y + 1 < h ? p + w : -1};
            for (const int q : nb) {
                if (q < 0 || ufp[q] == -1) continue;
                const int rq = find(q);
                const int rp = find(p);
                if (rq != rp) merge_roots(rp, rq, t);
            }
        }
    }

    int hi_of(int id) const {
        return nodes[id].parent == -1 ? 255 : nodes[nodes[id].parent].lo - 1;
    }

    // Minimum variation over each node's threshold interval.
    void score(int delta) {
        // desc_max[id][k-1]: largest component of S_{lo-k} inside the node.
        std::vector<std::vector<long long>> desc_max(nodes.size());
        for (std::size_t id = 0; id < nodes.size(); ++id) {
            Node& nd = nodes[id];
            if (!nd.alive) continue;
            auto& dm = desc_max[id];
            dm.assign(delta, 0);
            for (const int c : nd.children) {
                const Node& ch = nodes[c];
                for (int k = 1; k <= delta; ++k) {
                    const int tau = nd.lo - k;
                    long long a = 0;
                    if (tau >= ch.lo)
                        a = ch.area;
                    else if (tau >= 0)
                        a = desc_max[c][ch.lo - tau - 1];
                    dm[k - 1] = std::max(dm[k - 1], a);
                }
            }

            const int hi = hi_of(static_cast<int>(id));
            int cur = static_cast<int>(id);
            double best = std::numeric_limits<double>::infinity();
            int best_t = nd.lo;
            for (int t = nd.lo; t <= hi; ++t) {
                const int tau_up = std::min(t + delta, 255);
                while (nodes[cur].parent != -1 && tau_up > hi_of(cur)) cur = nodes[cur].parent;
                const long long up = nodes[cur].area;
                const int tau_dn = t - delta;
                long long down;
                if (tau_dn >= nd.lo)
                    down = nd.area;
                else if (tau_dn < 0)
                    down = 0;
                else
                    down = dm[nd.lo - tau_dn - 1];
                const double v =
                    static_cast<double>(up - down) / static_cast<double>(nd.area);
                if (v < best) {
                    best = v;
                    best_t = t;
                }
            }
            nd.var = best;
            nd.level = best_t;
        }
    }

    void select(const MserConfig& cfg) {
        const double area_cap = cfg.max_area * static_cast<double>(img.pixel_count());
        for (auto& nd : nodes) {
            if (!nd.alive) continue;
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
    }

    int nearest_selected_ancestor(int id) const {
        for (int a = nodes[id].parent; a != -1; a = nodes[a].parent)
            if (nodes[a].selected && !nodes[a].suppressed) return a;
        return -1;
    }

    void suppress_nested() {
        std::vector<int> sel;
        for (std::size_t id = 0; id < nodes.size(); ++id)
            if (nodes[id].alive && nodes[id].selected) sel.push_back(static_cast<int>(id));
        std::sort(sel.begin(), sel.end(), [&](int a, int b) {
            return std::tuple(nodes[a].area, nodes[a].level, nodes[a].min_px) <
                   std::tuple(nodes[b].area, nodes[b].level, nodes[b].min_px);
        });
        bool changed = true;
        while (changed) {
            changed = false;
            for (const int d : sel) {
                if (nodes[d].suppressed) continue;
                const int a = nearest_selected_ancestor(d);
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
    }

    std::vector<int> collect_pixels(int id) const {
        std::vector<int> out;
        out.reserve(static_cast<std::size_t>(nodes[id].area));
        std::vector<int> stack{id};
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            out.insert(out.end(), nodes[u].own_pixels.begin(), nodes[u].own_pixels.end());
            for (const int c : nodes[u].children) stack.push_back(c);
        }
        std::sort(out.begin(), out.end());
        return out;
    }
};

std::vector<ExtremalRegion> detect_one_polarity(const GrayImage& img, const MserConfig& cfg,
                                                Polarity pol) {
    GrayImage work = img;
    if (pol == Polarity::Bright)
        for (auto& p : work.data) p = static_cast<std::uint8_t>(255 - p);

    Builder b(work);
    b.build();
    b.score(cfg.delta);
    b.select(cfg);
    b.suppress_nested();

    std::vector<ExtremalRegion> out;
    for (std::size_t id = 0; id < b.nodes.size(); ++id) {
        const Node& nd = b.nodes[id];
        if (!nd.alive || !nd.selected || nd.suppressed) continue;
        ExtremalRegion r;
        r.level = pol == Polarity::Dark ? nd.level : 255 - nd.level;
        r.area = nd.area;
        r.bbox = Rect{nd.x0, nd.y0, nd.x1 - nd.x0 + 1, nd.y1 - nd.y0 + 1};
        r.base_bbox = r.bbox;
        r.variation = nd.var;
        r.scale_index = 0;
        r.polarity = pol;
        r.pixels = b.collect_pixels(static_cast<int>(id));
        out.push_back(std::move(r));
    }
    return out;
}

auto region_order_key(const ExtremalRegion& r) {
    return std::tuple(r.scale_index, r.bbox.y, r.bbox.x, r.bbox.w, r.bbox.h, r.level,
                      static_cast<int>(r.polarity), r.area);
}

void sort_regions(std::vector<ExtremalRegion>& regions) {
    std::sort(regions.begin(), regions.end(),
              [](const ExtremalRegion& a, const ExtremalRegion& b) {
                  return region_order_key(a) < region_order_key(b);
              });
}

} // namespace

std::vector<ExtremalRegion> detect_mser(const GrayImage& img, const MserConfig& cfg) {
    cfg.validate();
    if (img.width <= 0 || img.height <= 0) throw ParamError("detect_mser: empty image");
    std::vector<ExtremalRegion> out = detect_one_polarity(img, cfg, Polarity::Dark);
    if (cfg.both_polarities) {
        auto bright = detect_one_polarity(img, cfg, Polarity::Bright);
        out.insert(out.end(), std::make_move_iterator(bright.begin()),
                   std::make_move_iterator(bright.end()));
    }
    sort_regions(out);
    return out;
}

std::vector<ExtremalRegion> detect_mr_mser(const Pyramid& pyr, const MserConfig& cfg) {
    cfg.validate();
    if (pyr.levels.size() != 3) throw ParamError("detect_mr_mser: pyramid must have 3 levels");
    const int base_w = pyr.levels[0].image.width;
    const int base_h = pyr.levels[0].image.height;

    std::vector<ExtremalRegion> all;
    for (int k = 0; k < 3; ++k) {
        const int scale = pyr.levels[k].scale;
        auto regs = detect_mser(pyr.levels[k].image, cfg);
        for (auto& r : regs) {
            r.scale_index = k;
            r.base_bbox = clamp_rect(
                Rect{r.bbox.x * scale, r.bbox.y * scale, r.bbox.w * scale, r.bbox.h * scale},
                base_w, base_h);
            all.push_back(std::move(r));
        }
    }
    sort_regions(all);

    // Finer scales win: a region falls only to an already-kept finer one.
    std::vector<ExtremalRegion> kept;
    for (auto& r : all) {
        bool duplicate = false;
        for (const auto& q : kept) {
            if (q.scale_index >= r.scale_index) continue;
            if (iou(q.base_bbox, r.base_bbox) > 0.8) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) kept.push_back(std::move(r));
    }
    return kept;
}

void write_regions_jsonl(const std::vector<ExtremalRegion>& regions, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError(path + ": cannot open for writing");
    for (const auto& r : regions) {
        nlohmann::json j{{"scale", r.scale_index},
                         {"level", r.level},
                         {"area", r.area},
                         {"bbox", {r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h}},
                         {"base_bbox",
                          {r.base_bbox.x, r.base_bbox.y, r.base_bbox.w, r.base_bbox.h}},
                         {"variation", r.variation},
                         {"polarity", r.polarity == Polarity::Dark ? "dark" : "bright"}};
        out << j.dump() << "\n";
    }
    if (!out) throw FormatError(path + ": write failed");
}

std::vector<ExtremalRegion> read_regions_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path + ": cannot open");
    std::vector<ExtremalRegion> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        try {
            ExtremalRegion r;
            r.scale_index = j.at("scale").get<int>();
            r.level = j.at("level").get<int>();
            r.area = j.at("area").get<long long>();
            const auto& bb = j.at("bbox");
            r.bbox = Rect{bb.at(0), bb.at(1), bb.at(2), bb.at(3)};
            const auto& bbb = j.at("base_bbox");
            r.base_bbox = Rect{bbb.at(0), bbb.at(1), bbb.at(2), bbb.at(3)};
            r.variation = j.at("variation").get<double>();
            r.polarity =
                j.at("polarity").get<std::string>() == "bright" ? Polarity::Bright : Polarity::Dark;
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

} // namespace acm
