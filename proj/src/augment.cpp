#include "acm/augment.hpp"

#include "acm/errors.hpp"
#include "acm/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

namespace acm {

SquareSpec squarify(const ExtremalRegion& region) {
    const Rect& b = region.base_bbox;
    return SquareSpec{b.cx(), b.cy(), std::max(b.w, b.h)};
}

std::array<SquareSpec, 3> inflate_set(const SquareSpec& base) {
    if (base.side < 4) throw ParamError("inflate_set requires base side >= 4");
    std::array<SquareSpec, 3> out;
    const double factors[3] = {1.0, 1.3, 1.6};
    for (int i = 0; i < 3; ++i) {
        const int side =
            std::max<long>(4, std::lround(base.side * std::sqrt(factors[i])));
        out[i] = SquareSpec{base.cx, base.cy, static_cast<int>(side)};
    }
    return out;
}

Rect square_rect(const SquareSpec& s) {
    const int x = static_cast<int>(std::lround(s.cx - s.side / 2.0));
    const int y = static_cast<int>(std::lround(s.cy - s.side / 2.0));
    return Rect{x, y, s.side, s.side};
}

std::vector<Proposal> make_proposals(const std::vector<ExtremalRegion>& regions,
                                     const GrayImage& img) {
    static constexpr double kFactors[3] = {1.0, 1.3, 1.6};
    std::vector<Proposal> out;
    for (std::size_t ri = 0; ri < regions.size(); ++ri) {
        SquareSpec base = squarify(regions[ri]);
        base.side = std::max(base.side, 4);
        const Rect base_rect = square_rect(base);
        const Rect visible = clamp_rect(base_rect, img.width, img.height);
        if (visible.w <= 0 || visible.h <= 0) continue; // square misses the image
        const auto crops = inflate_set(base);
        for (int k = 0; k < 3; ++k) {
            Proposal p;
            p.region_ref = static_cast<int>(ri);
            p.center_x = base.cx;
            p.center_y = base.cy;
            p.base_side = base.side;
            p.side = crops[k].side;
            p.inflation = kFactors[k];
            p.crop_rect = square_rect(crops[k]);
            p.label_rect = base_rect;
            p.patch = resize_patch(img, p.crop_rect, 28, 28);
            out.push_back(std::move(p));
        }
    }
    return out;
}

std::vector<TrainSample> mine_training_set(const GrayImage& img, int image_id,
                                           const std::vector<Proposal>& proposals,
                                           const std::vector<Rect>& gt, std::uint64_t seed) {
    std::vector<int> pos_pool, neg_pool;
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        double best = 0.0;
        for (const auto& g : gt) best = std::max(best, iou(proposals[i].label_rect, g));
        if (best > 0.5)
            pos_pool.push_back(static_cast<int>(i));
        else if (best == 0.0)
            neg_pool.push_back(static_cast<int>(i));
    }
    const std::string tag = "image " + std::to_string(image_id);
    if (pos_pool.empty()) throw MiningError("no positive proposals for " + tag);
    if (neg_pool.empty()) throw MiningError("no negative proposals for " + tag);

    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(image_id)));
    if (neg_pool.size() > pos_pool.size()) {
        rng.shuffle(neg_pool);
        neg_pool.resize(pos_pool.size());
        std::sort(neg_pool.begin(), neg_pool.end());
    } else if (pos_pool.size() > neg_pool.size()) {
        rng.shuffle(pos_pool);
        pos_pool.resize(neg_pool.size());
        std::sort(pos_pool.begin(), pos_pool.end());
    }

    constexpr double kMaxAngle = std::numbers::pi / 4.0;
    std::vector<TrainSample> out;
    auto emit = [&](int idx, int label) {
        const Proposal& p = proposals[idx];
        TrainSample s;
        s.patch = p.patch;
        s.label = label;
        s.rotation = 0.0;
        s.image_id = image_id;
        s.proposal_id = idx;
        out.push_back(std::move(s));
        for (int j = 0; j < 4; ++j) {
            const double angle = rng.uniform(-kMaxAngle, kMaxAngle);
            TrainSample r;
            r.patch = rotate_crop(img, p.center_x, p.center_y,
                                  static_cast<double>(p.side), angle, 28);
            r.label = label;
            r.rotation = angle;
            r.image_id = image_id;
            r.proposal_id = idx;
            out.push_back(std::move(r));
        }
    };
    for (const int i : pos_pool) emit(i, 1);
    for (const int i : neg_pool) emit(i, 0);
    return out;
}

void save_training_set(const std::vector<TrainSample>& samples, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream manifest(std::filesystem::path(dir) / "manifest.jsonl", std::ios::binary);
    if (!manifest) throw FormatError(dir + ": cannot write manifest");
    char name[32];
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::snprintf(name, sizeof(name), "%06zu.pgm", i);
        save_pgm(samples[i].patch, (std::filesystem::path(dir) / name).string());
        nlohmann::json j{{"path", name},
                         {"label", samples[i].label},
                         {"rotation", samples[i].rotation},
                         {"image", samples[i].image_id},
                         {"proposal", samples[i].proposal_id}};
        manifest << j.dump() << "\n";
    }
    if (!manifest) throw FormatError(dir + ": manifest write failed");
}

std::vector<TrainSample> load_training_set(const std::string& dir) {
    const auto manifest_path = std::filesystem::path(dir) / "manifest.jsonl";
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw FormatError(manifest_path.string() + ": cannot open");
    std::vector<TrainSample> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            TrainSample s;
            s.patch = load_image((std::filesystem::path(dir) / j.at("path").get<std::string>())
                                     .string());
            s.label = j.at("label").get<int>();
            s.rotation = j.at("rotation").get<double>();
            s.image_id = j.at("image").get<int>();
            s.proposal_id = j.at("proposal").get<int>();
            out.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(manifest_path.string() + ":" + std::to_string(lineno) + ": " +
                              e.what());
        }
    }
    return out;
}

} // namespace acm
