#include <doctest.h>

#include "acm/errors.hpp"
#include "acm/image.hpp"
#include "acm/mser.hpp"
#include "acm/rng.hpp"
#include "support/mser_oracle.hpp"

#include <algorithm>
#include <cstdio>
#include <string>
#include <tuple>
#include <vector>

using namespace acm;
using acm::testsupport::mser_reference;

namespace {

// Region list reduced to order-independent form for comparison.
struct Canon {
    int polarity;
    std::vector<int> pixels;
    int level;
    long long area;
    Rect bbox;
    double variation;
};

std::vector<Canon> canon(const std::vector<ExtremalRegion>& regions) {
    std::vector<Canon> out;
    for (const auto& r : regions)
        out.push_back({static_cast<int>(r.polarity), r.pixels, r.level, r.area, r.bbox,
                       r.variation});
    std::sort(out.begin(), out.end(), [](const Canon& a, const Canon& b) {
        return std::tie(a.polarity, a.pixels) < std::tie(b.polarity, b.pixels);
    });
    return out;
}

void check_equivalent(const std::vector<ExtremalRegion>& got,
                      const std::vector<ExtremalRegion>& want) {
    const auto g = canon(got);
    const auto w = canon(want);
    REQUIRE(g.size() == w.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(g[i].polarity == w[i].polarity);
        CHECK(g[i].pixels == w[i].pixels);
        CHECK(g[i].level == w[i].level);
        CHECK(g[i].area == w[i].area);
        CHECK(g[i].bbox == w[i].bbox);
        CHECK(g[i].variation == doctest::Approx(w[i].variation).epsilon(1e-12));
    }
}

GrayImage square_scene(int size, const Rect& sq, std::uint8_t bg, std::uint8_t fg) {
    GrayImage img(size, size, bg);
    for (int y = sq.y; y < sq.bottom(); ++y)
        for (int x = sq.x; x < sq.right(); ++x) img.at(x, y) = fg;
    return img;
}

} // namespace

TEST_SUITE("mser") {

TEST_CASE("config validation") {
    MserConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.delta = 0;
    CHECK_THROWS_AS(cfg.validate(), ParamError);
    cfg = MserConfig{};
    cfg.min_area = 0;
    CHECK_THROWS_AS(cfg.validate(), ParamError);
    cfg = MserConfig{};
    cfg.max_area = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ParamError);
    cfg.max_area = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ParamError);
}

TEST_CASE("white square on black yields exactly that region") {
    const GrayImage img = square_scene(64, Rect{24, 24, 16, 16}, 0, 255);
    const MserConfig cfg; // defaults
    const auto regions = detect_mser(img, cfg);
    REQUIRE(regions.size() == 1);
    CHECK(regions[0].polarity == Polarity::Bright);
    CHECK(regions[0].bbox == Rect{24, 24, 16, 16});
    CHECK(regions[0].area == 256);
    CHECK(regions[0].variation == doctest::Approx(0.0));
    check_equivalent(regions, mser_reference(img, cfg));
}

TEST_CASE("constant image yields nothing") {
    const GrayImage img(32, 32, 128);
    CHECK(detect_mser(img, MserConfig{}).empty());
}

TEST_CASE("two disjoint squares yield two regions") {
    GrayImage img = square_scene(64, Rect{8, 8, 16, 16}, 0, 255);
    for (int y = 40; y < 56; ++y)
        for (int x = 40; x < 56; ++x) img.at(x, y) = 255;
    const MserConfig cfg;
    const auto regions = detect_mser(img, cfg);
    REQUIRE(regions.size() == 2);
    CHECK(regions[0].bbox == Rect{8, 8, 16, 16});
    CHECK(regions[1].bbox == Rect{40, 40, 16, 16});
    check_equivalent(regions, mser_reference(img, cfg));
}

TEST_CASE("thin sliver is detected with its exact bbox") {
    const GrayImage img = square_scene(64, Rect{12, 30, 40, 1}, 10, 240);
    const MserConfig cfg;
    const auto regions = detect_mser(img, cfg);
    REQUIRE(regions.size() == 1);
    CHECK(regions[0].bbox == Rect{12, 30, 40, 1});
    CHECK(regions[0].area == 40);
    check_equivalent(regions, mser_reference(img, cfg));
}

TEST_CASE("matches the reference enumerator on random small images") {
    Rng rng(9001);
    MserConfig cfgs[3];
    cfgs[0] = MserConfig{1, 2, 0.9, 1.0, true};
    cfgs[1] = MserConfig{2, 4, 0.7, 0.5, true};
    cfgs[2] = MserConfig{5, 8, 0.5, 0.5, true};
    for (int trial = 0; trial < 200; ++trial) {
        const int w = 4 + static_cast<int>(rng.below(13));
        const int h = 4 + static_cast<int>(rng.below(13));
        GrayImage img(w, h);
        if (trial % 2 == 0) {
            for (auto& p : img.data) p = static_cast<std::uint8_t>(rng.below(256));
        } else {
            // Quantized intensities produce larger flat structures.
            for (auto& p : img.data) p = static_cast<std::uint8_t>(rng.below(4) * 80);
        }
        const MserConfig& cfg = cfgs[trial % 3];
        INFO("trial ", trial, " size ", w, "x", h);
        check_equivalent(detect_mser(img, cfg), mser_reference(img, cfg));
    }
}

TEST_CASE("dark region nesting follows level order") {
    GrayImage img(32, 32, 200);
    for (int y = 9; y < 23; ++y)
        for (int x = 9; x < 23; ++x) img.at(x, y) = 100;
    for (int y = 13; y < 19; ++y)
        for (int x = 13; x < 19; ++x) img.at(x, y) = 20;
    MserConfig cfg{2, 4, 0.9, 1.0, false};
    const auto regions = detect_mser(img, cfg);
    REQUIRE(regions.size() == 2);
    const auto& inner = regions[0].area < regions[1].area ? regions[0] : regions[1];
    const auto& outer = regions[0].area < regions[1].area ? regions[1] : regions[0];
    CHECK(inner.level < outer.level);
    CHECK(std::includes(outer.pixels.begin(), outer.pixels.end(), inner.pixels.begin(),
                        inner.pixels.end()));
    check_equivalent(regions, mser_reference(img, cfg));
}

TEST_CASE("mr-mser merges the cross-scale duplicates of one square") {
    const GrayImage img = square_scene(64, Rect{24, 24, 16, 16}, 0, 255);
    const MserConfig cfg{2, 4, 0.25, 0.5, true};
    const auto regions = detect_mr_mser(build_pyramid(img), cfg);
    REQUIRE(regions.size() == 1);
    CHECK(regions[0].scale_index == 0);
    CHECK(regions[0].base_bbox == Rect{24, 24, 16, 16});
}

TEST_CASE("structure visible only at the coarse scale is found there") {
    // Bright sites on a stride-4 lattice: isolated dust at fine scales,
    // a solid block after two rounds of (2i,2j) decimation.
    GrayImage img(64, 64, 0);
    for (int y = 12; y <= 48; y += 4)
        for (int x = 12; x <= 48; x += 4) img.at(x, y) = 255;
    const MserConfig cfg{2, 20, 0.5, 0.5, true};
    const auto regions = detect_mr_mser(build_pyramid(img), cfg);
    REQUIRE(regions.size() == 1);
    CHECK(regions[0].scale_index == 2);
    CHECK(regions[0].polarity == Polarity::Bright);
    CHECK(regions[0].bbox == Rect{3, 3, 10, 10});
    CHECK(regions[0].base_bbox == Rect{12, 12, 40, 40});
}

TEST_CASE("mr-mser of a constant pyramid is empty") {
    CHECK(detect_mr_mser(build_pyramid(GrayImage(64, 64, 9)), MserConfig{}).empty());
}

TEST_CASE("mr-mser count is bounded by per-level counts") {
    Rng rng(512);
    const MserConfig cfg{1, 4, 0.9, 1.0, true};
    for (int trial = 0; trial < 10; ++trial) {
        GrayImage img(32, 32);
        for (auto& p : img.data) p = static_cast<std::uint8_t>(rng.below(4) * 80);
        const Pyramid pyr = build_pyramid(img);
        const auto merged = detect_mr_mser(pyr, cfg);
        std::size_t per_level_total = 0;
        for (const auto& lvl : pyr.levels)
            per_level_total += detect_mser(lvl.image, cfg).size();
        const std::size_t base_count = detect_mser(pyr.levels[0].image, cfg).size();
        CHECK(merged.size() >= base_count);
        CHECK(merged.size() <= per_level_total);
        for (const auto& r : merged) {
            CHECK(r.base_bbox.x >= 0);
            CHECK(r.base_bbox.y >= 0);
            CHECK(r.base_bbox.right() <= 32);
            CHECK(r.base_bbox.bottom() <= 32);
        }
    }
}

TEST_CASE("region invariants hold on detected output") {
    Rng rng(77);
    GrayImage img(48, 48);
    for (auto& p : img.data) p = static_cast<std::uint8_t>(rng.below(8) * 36);
    const MserConfig cfg{2, 6, 0.5, 0.6, true};
    const auto regions = detect_mser(img, cfg);
    for (const auto& r : regions) {
        CHECK(r.area >= cfg.min_area);
        CHECK(static_cast<double>(r.area) <= cfg.max_area * 48 * 48);
        CHECK(r.variation <= cfg.max_variation);
        CHECK(static_cast<long long>(r.pixels.size()) == r.area);
        // Polarity relation at the reported level.
        for (const int p : r.pixels) {
            if (r.polarity == Polarity::Dark)
                CHECK(img.data[p] <= r.level);
            else
                CHECK(img.data[p] >= r.level);
        }
    }
}

TEST_CASE("jsonl round-trip preserves every serialized field") {
    const GrayImage img = square_scene(64, Rect{10, 20, 20, 12}, 30, 220);
    const MserConfig cfg{2, 8, 0.5, 0.5, true};
    const auto regions = detect_mr_mser(build_pyramid(img), cfg);
    REQUIRE(!regions.empty());
    const std::string path = "mser_regions.tmp";
    write_regions_jsonl(regions, path);
    const auto back = read_regions_jsonl(path);
    REQUIRE(back.size() == regions.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].scale_index == regions[i].scale_index);
        CHECK(back[i].level == regions[i].level);
        CHECK(back[i].area == regions[i].area);
        CHECK(back[i].bbox == regions[i].bbox);
        CHECK(back[i].base_bbox == regions[i].base_bbox);
        CHECK(back[i].variation == regions[i].variation);
        CHECK(back[i].polarity == regions[i].polarity);
    }
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_regions_jsonl("missing_regions.jsonl"), FormatError);
}

TEST_CASE("detection is deterministic") {
    Rng rng(31337);
    GrayImage img(40, 40);
    for (auto& p : img.data) p = static_cast<std::uint8_t>(rng.below(6) * 50);
    const MserConfig cfg{3, 5, 0.5, 0.8, true};
    const auto a = detect_mser(img, cfg);
    const auto b = detect_mser(img, cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].bbox == b[i].bbox);
        CHECK(a[i].level == b[i].level);
        CHECK(a[i].pixels == b[i].pixels);
    }
}

} // TEST_SUITE
