#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "doctest.h"

#include "phenoscreen/error.hpp"
#include "phenoscreen/rng.hpp"

using namespace phenoscreen;

// Golden values computed externally from the documented stream definition
// (splitmix64 finalizer, key = mix(seed + GAMMA), output(i) = mix(key + i*GAMMA)).
TEST_CASE("counter stream is pinned platform-independently") {
    CounterRng rng(42);
    CHECK(rng.next_u64() == 0x57e1faba65107204ull);
    CHECK(rng.next_u64() == 0xf4abd143feb24055ull);
    CHECK(rng.next_u64() == 0x7c816738c12903b2ull);

    CounterRng again(42);
    CHECK(again.next_double() == doctest::Approx(0.34329192209867343).epsilon(1e-16));

    CounterRng named = CounterRng(42).substream("consistency");
    CHECK(named.next_u64() == 0xa9e0839cfa12a49cull);
    CounterRng salted = CounterRng(42).substream(std::uint64_t{7});
    CHECK(salted.next_u64() == 0xe76420f7ebf78f71ull);

    CounterRng bound(42);
    CHECK(bound.bounded(10) == 3);
}

TEST_CASE("substreams decouple from the parent draw position") {
    CounterRng parent(9);
    const CounterRng child_before = parent.substream("x");
    parent.next_u64();
    parent.next_u64();
    CounterRng child_after = parent.substream("x");
    CounterRng fresh = child_before;
    CHECK(fresh.next_u64() == child_after.next_u64());
}

TEST_CASE("bounded stays in range and covers values") {
    CounterRng rng(3);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const std::uint64_t v = rng.bounded(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
    CHECK_THROWS_AS(rng.bounded(0), Error);
}

TEST_CASE("shuffle is a permutation") {
    CounterRng rng(17);
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[i] = i;
    std::vector<int> shuffled = v;
    rng.shuffle(shuffled);
    CHECK(shuffled != v);  // astronomically unlikely to be identity
    std::sort(shuffled.begin(), shuffled.end());
    CHECK(shuffled == v);
}

TEST_CASE("sample_without_replacement returns distinct ascending indices") {
    CounterRng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 10 + rng.bounded(100);
        const std::size_t k = 1 + rng.bounded(n);
        const std::vector<std::size_t> s = rng.sample_without_replacement(n, k);
        CHECK(s.size() == k);
        CHECK(std::is_sorted(s.begin(), s.end()));
        CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
        CHECK(s.back() < n);
    }
    // k = n yields every index
    const std::vector<std::size_t> all = rng.sample_without_replacement(5, 5);
    CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK_THROWS_AS(rng.sample_without_replacement(3, 4), Error);
}

TEST_CASE("normal draws have the right first two moments") {
    CounterRng rng(31);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.next_normal();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::fabs(mean) < 0.01);       // se ~ 0.0022
    CHECK(std::fabs(var - 1.0) < 0.02);  // se ~ 0.0032
}

TEST_CASE("uniform doubles live in the documented intervals") {
    CounterRng rng(37);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.next_double();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double v = rng.next_double_open();
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
    }
}
