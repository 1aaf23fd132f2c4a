#include "acm/fuzzyclass.hpp"

#include "acm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace acm {

namespace {

using nlohmann::json;

int feature_index(const std::string& name) {
    for (std::size_t i = 0; i < FuzzyModel::kAllFeatures.size(); ++i)
        if (name == FuzzyModel::kAllFeatures[i]) return static_cast<int>(i);
    throw ParamError("unknown feature '" + name + "'");
}

double feature_value(const BlobFeatures& f, int index) {
    switch (index) {
    case 0: return f.mean_intensity;
    case 1: return f.std_intensity;
    default: return f.fill_ratio;
    }
}

/// Linear-interpolated percentile at rank p/100*(n-1) of a sorted vector.
double percentile(const std::vector<double>& sorted, double p) {
    const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(rank);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Triangle fit_triangle(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    Triangle t;
    t.a = percentile(values, 5.0);
    t.b = percentile(values, 50.0);
    t.c = percentile(values, 95.0);
    if (t.a == t.b && t.b == t.c) {
        t.a -= 1.0;
        t.c += 1.0;
    }
    return t;
}

json triangle_json(const Triangle& t) { return json::array({t.a, t.b, t.c}); }

Triangle triangle_from(const json& j) {
    if (!j.is_array() || j.size() != 3) throw FormatError("membership must be [a,b,c]");
    Triangle t{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
    if (!(t.a <= t.b && t.b <= t.c)) throw FormatError("membership points must be ordered");
    return t;
}

} // namespace

double Triangle::eval(double x) const {
    if (x == b) return 1.0;
    if (x <= a || x >= c) return 0.0;
    if (x < b) return (x - a) / (b - a); // b > a here, else x == b was taken
    return (c - x) / (c - b);
}

void FuzzyModel::validate() const {
    if (feature_names.empty()) throw ParamError("fuzzy model needs at least one feature");
    for (const auto& n : feature_names) feature_index(n);
    for (const auto& tris : {vehicle, background})
        for (const auto& t : tris)
            if (!(t.a <= t.b && t.b <= t.c))
                throw ParamError("fuzzy membership points out of order");
}

BlobFeatures features(const Blob& blob, const GrayImage& map) {
    if (blob.pixels.empty()) throw ParamError("features of an empty blob");
    double sum = 0.0, sq = 0.0;
    for (const int i : blob.pixels) {
        if (i < 0 || i >= static_cast<int>(map.data.size()))
            throw ParamError("blob pixel outside the map");
        const double v = map.data[i];
        sum += v;
        sq += v * v;
    }
    BlobFeatures f;
    const double n = static_cast<double>(blob.pixels.size());
    f.mean_intensity = sum / n;
    f.std_intensity = std::sqrt(std::max(0.0, sq / n - f.mean_intensity * f.mean_intensity));
    f.fill_ratio = blob.fill_ratio;
    return f;
}

FuzzyModel train_fuzzy(const std::vector<std::pair<BlobFeatures, BlobClass>>& labeled,
                       const std::vector<std::string>& feature_names) {
    FuzzyModel model;
    model.feature_names = feature_names;
    if (feature_names.empty()) throw ParamError("need at least one feature");
    for (const auto& n : feature_names) feature_index(n);

    for (const BlobClass cls : {BlobClass::Vehicle, BlobClass::Background}) {
        std::vector<const BlobFeatures*> members;
        for (const auto& [f, c] : labeled)
            if (c == cls) members.push_back(&f);
        if (members.size() < 5)
            throw TrainingError(std::string("class '") +
                                (cls == BlobClass::Vehicle ? "vehicle" : "background") +
                                "' has " + std::to_string(members.size()) +
                                " samples, need >= 5");
        auto& tris = cls == BlobClass::Vehicle ? model.vehicle : model.background;
        for (int fi = 0; fi < 3; ++fi) {
            std::vector<double> values;
            values.reserve(members.size());
            for (const auto* f : members) values.push_back(feature_value(*f, fi));
            tris[fi] = fit_triangle(std::move(values));
        }
    }
    return model;
}

SoftLabel classify(const FuzzyModel& model, const BlobFeatures& f) {
    model.validate();
    SoftLabel out;
    out.mu_vehicle = 1.0;
    out.mu_background = 1.0;
    for (const auto& name : model.feature_names) {
        const int fi = feature_index(name);
        const double x = feature_value(f, fi);
        out.mu_vehicle = std::min(out.mu_vehicle, model.vehicle[fi].eval(x));
        out.mu_background = std::min(out.mu_background, model.background[fi].eval(x));
    }
    out.hard = out.mu_vehicle > out.mu_background ? BlobClass::Vehicle : BlobClass::Background;
    return out;
}

RgbImage annotate(const GrayImage& img, const std::vector<Blob>& blobs,
                  const std::vector<SoftLabel>& labels) {
    if (blobs.size() != labels.size()) throw ParamError("one label per blob required");
    RgbImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const std::uint8_t v = img.at(x, y);
            out.set(x, y, v, v, v);
        }
    for (std::size_t i = 0; i < blobs.size(); ++i) {
        const Rect r = clamp_rect(blobs[i].bbox, img.width, img.height);
        if (r.w <= 0 || r.h <= 0) continue;
        const bool vehicle = labels[i].hard == BlobClass::Vehicle;
        const std::uint8_t cr = vehicle ? 0 : 255;
        const std::uint8_t cg = vehicle ? 255 : 0;
        for (int x = r.x; x < r.right(); ++x) {
            out.set(x, r.y, cr, cg, 0);
            out.set(x, r.bottom() - 1, cr, cg, 0);
        }
        for (int y = r.y; y < r.bottom(); ++y) {
            out.set(r.x, y, cr, cg, 0);
            out.set(r.right() - 1, y, cr, cg, 0);
        }
    }
    return out;
}

void save_fuzzy(const FuzzyModel& model, const std::string& path) {
    model.validate();
    json classes;
    for (const BlobClass cls : {BlobClass::Vehicle, BlobClass::Background}) {
        json per;
        const auto& tris = cls == BlobClass::Vehicle ? model.vehicle : model.background;
        for (int fi = 0; fi < 3; ++fi)
            per[FuzzyModel::kAllFeatures[fi]] = triangle_json(tris[fi]);
        classes[cls == BlobClass::Vehicle ? "vehicle" : "background"] = per;
    }
    const json doc{{"version", model.version},
                   {"features", model.feature_names},
                   {"classes", classes}};
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write fuzzy model to " + path);
    out << doc.dump(2) << "\n";
}

FuzzyModel load_fuzzy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open fuzzy model " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw FormatError("fuzzy model " + path + ": " + e.what());
    }
    try {
        FuzzyModel model;
        model.version = doc.at("version").get<int>();
        model.feature_names = doc.at("features").get<std::vector<std::string>>();
        const json& classes = doc.at("classes");
        for (const BlobClass cls : {BlobClass::Vehicle, BlobClass::Background}) {
            auto& tris = cls == BlobClass::Vehicle ? model.vehicle : model.background;
            const json& per = classes.at(cls == BlobClass::Vehicle ? "vehicle" : "background");
            for (int fi = 0; fi < 3; ++fi)
                tris[fi] = triangle_from(per.at(FuzzyModel::kAllFeatures[fi]));
        }
        model.validate();
        return model;
    } catch (const json::exception& e) {
        throw FormatError("fuzzy model " + path + ": " + e.what());
    }
}

} // namespace acm
