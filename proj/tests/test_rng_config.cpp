#include <doctest.h>

#include <cmath>
#include <set>

#include "cplab/config.hpp"
#include "cplab/errors.hpp"
#include "cplab/rng.hpp"

using namespace cplab;

TEST_CASE("rng: same seed gives the same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: forked streams differ from parent and from each other") {
    Rng root(7);
    Rng f1 = root.fork(1);
    Rng f2 = root.fork(2);
    std::set<uint64_t> seen;
    for (int i = 0; i < 100; ++i) {
        seen.insert(f1.next_u64());
        seen.insert(f2.next_u64());
    }
    CHECK(seen.size() == 200);
}

TEST_CASE("rng: uniform stays in range and covers it") {
    Rng r(3);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("rng: uniform_int hits every value of a small range") {
    Rng r(5);
    std::set<int64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const int64_t v = r.uniform_int(-2, 3);
        CHECK(v >= -2);
        CHECK(v <= 3);
        seen.insert(v);
    }
    CHECK(seen.size() == 6);
}

TEST_CASE("rng: normal has roughly standard moments") {
    Rng r(11);
    const int n = 20000;
    double mean = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = r.normal();
        mean += v;
        m2 += v * v;
    }
    mean /= n;
    m2 /= n;
    CHECK(std::abs(mean) < 0.03);
    CHECK(std::abs(m2 - 1.0) < 0.05);
}

TEST_CASE("config: parses keys, comments, lists") {
    const auto cfg = Config::parse_string(
        "# a comment\n"
        "corpus.n_videos = 8\n"
        "corpus.fps= 10.5\n"
        "  ratios =0, 0.5, 1.0\n"
        "name = desk run\n"
        "flag = true\n");
    CHECK(cfg.get_int("corpus.n_videos") == 8);
    CHECK(cfg.get_double("corpus.fps") == doctest::Approx(10.5));
    CHECK(cfg.get_string("name") == "desk run");
    CHECK(cfg.get_bool("flag"));
    const auto ratios = cfg.get_double_list("ratios");
    REQUIRE(ratios.size() == 3);
    CHECK(ratios[0] == 0.0);
    CHECK(ratios[2] == 1.0);
}

TEST_CASE("config: fallbacks and errors") {
    const auto cfg = Config::parse_string("a = 1\n");
    CHECK(cfg.get_int("missing", 7) == 7);
    CHECK_THROWS_AS(cfg.get_int("missing"), ConfigError);
    CHECK_THROWS_AS(Config::parse_string("just a line without equals\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse_string("a = not_a_number\n").get_double("a"), ConfigError);
    CHECK_THROWS_AS(Config::parse_string("a = 1.5\n").get_int("a"), ConfigError);
}
