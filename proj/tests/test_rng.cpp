#include <doctest.h>

#include "acm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

using acm::Rng;

TEST_SUITE("rng") {

TEST_CASE("same seed gives identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds give different streams") {
    Rng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++same;
    CHECK(same == 0);
}

TEST_CASE("below stays in range and covers small domains") {
    Rng r(7);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto v = r.below(5);
        CHECK(v < 5);
        seen.insert(v);
    }
    CHECK(seen.size() == 5);
}

TEST_CASE("uniform lies in [0,1) with sane mean") {
    Rng r(11);
    double sum = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("uniform(lo,hi) respects bounds") {
    Rng r(13);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform(-2.5, 3.5);
        CHECK(u >= -2.5);
        CHECK(u < 3.5);
    }
}

TEST_CASE("normal has near-zero mean and unit variance") {
    Rng r(17);
    const int n = 40000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("shuffle permutes and is seed-reproducible") {
    std::vector<int> v(50), w(50);
    std::iota(v.begin(), v.end(), 0);
    std::iota(w.begin(), w.end(), 0);
    Rng a(23), b(23);
    a.shuffle(v);
    b.shuffle(w);
    CHECK(v == w);
    CHECK(v != std::vector<int>(v.size()) /* not all-zero */);
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expect(50);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(sorted == expect);
}

TEST_CASE("derive decorrelates substreams") {
    const auto s1 = Rng::derive(100, 0);
    const auto s2 = Rng::derive(100, 1);
    const auto s3 = Rng::derive(101, 0);
    CHECK(s1 != s2);
    CHECK(s1 != s3);
    CHECK(Rng::derive(100, 0) == s1);
}

} // TEST_SUITE
