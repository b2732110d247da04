#include <doctest.h>

#include "dreamkit/rng.hpp"
#include "dreamkit/tensor.hpp"

using namespace dreamkit;

TEST_SUITE_BEGIN("rng_tensor");

TEST_CASE("identical seeds give identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    Rng c(42), d(43);
    bool differs = false;
    for (int i = 0; i < 16; ++i)
        if (c.next_u64() != d.next_u64()) differs = true;
    CHECK(differs);
}

TEST_CASE("uniform stays in [0,1) and covers both halves") {
    Rng rng(7);
    int low = 0, high = 0;
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        (u < 0.5 ? low : high)++;
    }
    CHECK(low > 4000);
    CHECK(high > 4000);
}

TEST_CASE("normal moments are roughly standard") {
    Rng rng(11);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal();
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("below produces full range without escapes") {
    Rng rng(3);
    std::vector<int> seen(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto v = rng.below(7);
        REQUIRE(v < 7);
        seen[static_cast<std::size_t>(v)]++;
    }
    for (int count : seen) CHECK(count > 500);
}

TEST_CASE("mix_seed separates ids") {
    CHECK(mix_seed(1, 0) != mix_seed(1, 1));
    CHECK(mix_seed(1, 0) != mix_seed(2, 0));
    CHECK(mix_seed(5, 1, 2) != mix_seed(5, 2, 1));
}

TEST_CASE("sample_without_replacement is a prefix of a permutation") {
    Rng rng(9);
    auto idx = rng.sample_without_replacement(10, 10);
    std::vector<bool> seen(10, false);
    for (auto i : idx) {
        REQUIRE(i < 10);
        CHECK(!seen[i]);
        seen[i] = true;
    }
}

TEST_CASE("tensor shape bookkeeping") {
    Tensor t = Tensor::zeros({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.finite());
    t.data[3] = std::numeric_limits<double>::infinity();
    CHECK(!t.finite());
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), ValidationError);
}

TEST_SUITE_END();
