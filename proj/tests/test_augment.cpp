#include <doctest.h>

#include "acm/augment.hpp"
#include "acm/errors.hpp"
#include "acm/rng.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace acm;

namespace {

ExtremalRegion region_with_bbox(const Rect& b) {
    ExtremalRegion r;
    r.bbox = b;
    r.base_bbox = b;
    r.area = b.area();
    return r;
}

GrayImage gradient_image(int w, int h) {
    GrayImage img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(x, y) = static_cast<std::uint8_t>((x * 3 + y * 5) % 256);
    return img;
}

} // namespace

TEST_SUITE("augment") {

TEST_CASE("squarify uses the bbox center and the longer side") {
    const auto s = squarify(region_with_bbox(Rect{10, 12, 20, 10}));
    CHECK(s.cx == doctest::Approx(20.0));
    CHECK(s.cy == doctest::Approx(17.0));
    CHECK(s.side == 20);

    CHECK(squarify(region_with_bbox(Rect{3, 3, 15, 15})).side == 15);
    CHECK(squarify(region_with_bbox(Rect{5, 5, 1, 40})).side == 40);
}

TEST_CASE("inflate_set applies the area factors to the side") {
    const auto crops = inflate_set(SquareSpec{50, 50, 20});
    CHECK(crops[0].side == 20);
    CHECK(crops[1].side == 23); // 20 * sqrt(1.3) = 22.80
    CHECK(crops[2].side == 25); // 20 * sqrt(1.6) = 25.30
    for (const auto& c : crops) {
        CHECK(c.cx == doctest::Approx(50.0));
        CHECK(c.cy == doctest::Approx(50.0));
    }

    const auto tiny = inflate_set(SquareSpec{8, 8, 4});
    CHECK(tiny[0].side == 4);
    CHECK(tiny[1].side == 5);
    CHECK(tiny[2].side == 5);

    CHECK_THROWS_AS(inflate_set(SquareSpec{8, 8, 3}), ParamError);
}

TEST_CASE("square_rect stays centered within rounding") {
    const Rect r = square_rect(SquareSpec{20.0, 17.0, 23});
    CHECK(r.w == 23);
    CHECK(r.h == 23);
    CHECK(std::abs(r.cx() - 20.0) <= 0.5);
    CHECK(std::abs(r.cy() - 17.0) <= 0.5);
}

TEST_CASE("make_proposals yields three per region") {
    const GrayImage img = gradient_image(100, 80);
    std::vector<ExtremalRegion> regions;
    for (int i = 0; i < 10; ++i)
        regions.push_back(region_with_bbox(Rect{5 + i * 6, 10 + i * 4, 12, 8}));
    const auto props = make_proposals(regions, img);
    REQUIRE(props.size() == 30);
    for (std::size_t i = 0; i < props.size(); ++i) {
        const auto& p = props[i];
        CHECK(p.region_ref == static_cast<int>(i / 3));
        CHECK(p.patch.width == 28);
        CHECK(p.patch.height == 28);
        CHECK(p.inflation == doctest::Approx(i % 3 == 0 ? 1.0 : (i % 3 == 1 ? 1.3 : 1.6)));
        // Center preservation: re-projected crop center within 1 px.
        CHECK(std::abs(p.crop_rect.cx() - p.center_x) <= 1.0);
        CHECK(std::abs(p.crop_rect.cy() - p.center_y) <= 1.0);
        const auto& r = regions[p.region_ref].base_bbox;
        CHECK(p.center_x == doctest::Approx(r.cx()));
        CHECK(p.center_y == doctest::Approx(r.cy()));
    }
}

TEST_CASE("make_proposals drops regions fully outside and fills corners black") {
    const GrayImage img(60, 60, 255);
    std::vector<ExtremalRegion> regions;
    regions.push_back(region_with_bbox(Rect{-100, -100, 10, 10})); // fully outside
    regions.push_back(region_with_bbox(Rect{0, 0, 12, 12}));       // corner overlap
    const auto props = make_proposals(regions, img);
    REQUIRE(props.size() == 3); // first region dropped
    // The x1.6 crop extends past the top-left corner, so some fill is black.
    const auto& big = props[2];
    CHECK(big.crop_rect.x < 0);
    CHECK(big.patch.at(0, 0) < 255);
    CHECK(big.patch.at(27, 27) == 255);

    CHECK(make_proposals({}, img).empty());
}

TEST_CASE("mining counts follow the one-positive-one-negative example") {
    const GrayImage img = gradient_image(120, 120);
    std::vector<ExtremalRegion> regions;
    regions.push_back(region_with_bbox(Rect{20, 20, 20, 20}));
    regions.push_back(region_with_bbox(Rect{80, 80, 20, 20}));
    auto all = make_proposals(regions, img);
    // Keep only the inflation-1.0 proposal of each region.
    std::vector<Proposal> props;
    for (auto& p : all)
        if (p.inflation == 1.0) props.push_back(std::move(p));
    REQUIRE(props.size() == 2);

    const std::vector<Rect> gt{Rect{21, 21, 20, 20}}; // IoU ~0.82 with first
    const auto samples = mine_training_set(img, 7, props, gt, 99);
    REQUIRE(samples.size() == 10);
    int pos = 0, neg = 0, unrotated = 0;
    for (const auto& s : samples) {
        CHECK(s.patch.width == 28);
        CHECK(s.patch.height == 28);
        CHECK(std::abs(s.rotation) <= std::numbers::pi / 4.0);
        CHECK(s.image_id == 7);
        if (s.label == 1)
            ++pos;
        else
            ++neg;
        if (s.rotation == 0.0) ++unrotated;
    }
    CHECK(pos == 5);
    CHECK(neg == 5);
    CHECK(unrotated == 2);
}

TEST_CASE("mining errors on empty pools") {
    const GrayImage img = gradient_image(100, 100);
    std::vector<ExtremalRegion> regions{region_with_bbox(Rect{30, 30, 20, 20})};
    const auto props = make_proposals(regions, img);

    // Every proposal overlaps gt: no negatives.
    CHECK_THROWS_AS(mine_training_set(img, 1, props, {Rect{30, 30, 20, 20}}, 5), MiningError);
    // No proposal overlaps gt: no positives.
    CHECK_THROWS_AS(mine_training_set(img, 2, props, {Rect{80, 80, 10, 10}}, 5), MiningError);
    // Empty proposal list: both empty.
    CHECK_THROWS_AS(mine_training_set(img, 3, {}, {Rect{1, 1, 4, 4}}, 5), MiningError);
}

TEST_CASE("mining labels verify against iou recheck and counts balance") {
    const GrayImage img = gradient_image(200, 150);
    std::vector<ExtremalRegion> regions;
    Rng layout(4242);
    for (int i = 0; i < 25; ++i) {
        const int w = 10 + static_cast<int>(layout.below(15));
        const int h = 10 + static_cast<int>(layout.below(15));
        const int x = static_cast<int>(layout.below(200 - w));
        const int y = static_cast<int>(layout.below(150 - h));
        regions.push_back(region_with_bbox(Rect{x, y, w, h}));
    }
    const std::vector<Rect> gt{Rect{20, 20, 30, 30}, Rect{120, 80, 35, 30}};
    const auto props = make_proposals(regions, img);

    std::vector<TrainSample> samples;
    try {
        samples = mine_training_set(img, 0, props, gt, 77);
    } catch (const MiningError&) {
        return; // this layout produced an empty pool; nothing to verify
    }
    REQUIRE(!samples.empty());
    CHECK(samples.size() % 5 == 0);
    long long pos = 0, neg = 0;
    for (const auto& s : samples) {
        double best = 0.0;
        for (const auto& g : gt) best = std::max(best, iou(props[s.proposal_id].label_rect, g));
        if (s.label == 1) {
            CHECK(best > 0.5);
            ++pos;
        } else {
            CHECK(best == 0.0);
            ++neg;
        }
    }
    CHECK(pos == neg);
}

TEST_CASE("mining is deterministic per seed") {
    const GrayImage img = gradient_image(120, 120);
    std::vector<ExtremalRegion> regions;
    regions.push_back(region_with_bbox(Rect{20, 20, 20, 20}));
    regions.push_back(region_with_bbox(Rect{80, 20, 18, 22}));
    regions.push_back(region_with_bbox(Rect{20, 80, 22, 18}));
    regions.push_back(region_with_bbox(Rect{80, 80, 20, 20}));
    const auto props = make_proposals(regions, img);
    const std::vector<Rect> gt{Rect{20, 20, 20, 20}};

    const auto a = mine_training_set(img, 3, props, gt, 1234);
    const auto b = mine_training_set(img, 3, props, gt, 1234);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].patch == b[i].patch);
        CHECK(a[i].label == b[i].label);
        CHECK(a[i].rotation == b[i].rotation);
    }

    const auto c = mine_training_set(img, 3, props, gt, 1235);
    bool any_different = false;
    for (std::size_t i = 0; i < a.size() && i < c.size(); ++i)
        if (a[i].rotation != c[i].rotation) any_different = true;
    CHECK(any_different);
}

TEST_CASE("training set round-trips through the directory format") {
    const GrayImage img = gradient_image(120, 120);
    std::vector<ExtremalRegion> regions;
    regions.push_back(region_with_bbox(Rect{20, 20, 20, 20}));
    regions.push_back(region_with_bbox(Rect{80, 80, 20, 20}));
    const auto props = make_proposals(regions, img);
    const auto samples = mine_training_set(img, 1, props, {Rect{21, 21, 20, 20}}, 42);

    const std::string dir = "augment_set.tmp";
    save_training_set(samples, dir);
    const auto back = load_training_set(dir);
    REQUIRE(back.size() == samples.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].patch == samples[i].patch);
        CHECK(back[i].label == samples[i].label);
        CHECK(back[i].rotation == samples[i].rotation);
        CHECK(back[i].image_id == samples[i].image_id);
        CHECK(back[i].proposal_id == samples[i].proposal_id);
    }
    std::filesystem::remove_all(dir);

    CHECK_THROWS_AS(load_training_set("no_such_training_dir"), FormatError);
}

} // TEST_SUITE
