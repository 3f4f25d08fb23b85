#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "powertrace/facility.hpp"
#include "powertrace/rng.hpp"
#include "test_support.hpp"

using namespace powertrace;
using testsupport::constant_trace;

namespace {

std::vector<PowerTrace> random_servers(int n, std::size_t len, std::uint64_t seed) {
    RandomStream rng(seed);
    std::vector<PowerTrace> out;
    for (int i = 0; i < n; ++i) {
        PowerTrace t;
        t.dt = 0.25;
        for (std::size_t j = 0; j < len; ++j)
            t.samples.push_back(500.0 + 3000.0 * rng.uniform01());
        out.push_back(std::move(t));
    }
    return out;
}

} // namespace

TEST_CASE("a single constant server aggregates to the textbook facility trace") {
    const FacilityTopology topo{1, 1, 1};
    const SiteAssumptions site{1000.0, 1.3};
    const auto h = aggregate({constant_trace(5000.0, 8)}, topo, site);
    REQUIRE(h.site_it.samples.size() == 8);
    for (double v : h.site_it.samples) CHECK(v == 6000.0);
    for (std::size_t i = 0; i < 8; ++i) {
        CHECK(h.facility.samples[i] == 1.3 * h.site_it.samples[i]); // exact
        CHECK(h.facility.samples[i] == doctest::Approx(7800.0).epsilon(1e-12));
    }
    REQUIRE(h.racks.size() == 1);
    REQUIRE(h.rows.size() == 1);
    CHECK(h.racks[0].samples[0] == 6000.0);
}

TEST_CASE("hierarchy levels are consistent partial sums") {
    const FacilityTopology topo{2, 3, 4};
    const SiteAssumptions site{750.0, 1.25};
    const auto servers = random_servers(24, 64, 42);
    const auto h = aggregate(servers, topo, site);

    REQUIRE(h.racks.size() == 6);
    REQUIRE(h.rows.size() == 2);
    REQUIRE(h.site_it.samples.size() == 64);

    for (std::size_t t = 0; t < 64; ++t) {
        // site == sum of rows == sum of racks
        double row_sum = 0.0;
        for (const auto& r : h.rows) row_sum += r.samples[t];
        CHECK(std::abs(row_sum - h.site_it.samples[t]) <=
              1e-6 * h.site_it.samples[t]);

        double rack_sum = 0.0;
        for (const auto& r : h.racks) rack_sum += r.samples[t];
        CHECK(std::abs(rack_sum - h.site_it.samples[t]) <=
              1e-6 * h.site_it.samples[t]);

        // direct server sum + N * p_base
        double direct = 24.0 * 750.0;
        for (const auto& s : servers) direct += s.samples[t];
        CHECK(std::abs(direct - h.site_it.samples[t]) <=
              1e-6 * h.site_it.samples[t]);

        // PUE linearity is exact
        CHECK(h.facility.samples[t] == 1.25 * h.site_it.samples[t]);
    }

    // rack 0 covers servers 0..3 of row 0
    for (std::size_t t = 0; t < 64; ++t) {
        double want = 4.0 * 750.0;
        for (int j = 0; j < 4; ++j) want += servers[std::size_t(j)].samples[t];
        CHECK(h.racks[0].samples[t] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("aggregation rejects mismatched traces") {
    const FacilityTopology topo{1, 1, 2};
    const SiteAssumptions site;
    auto a = constant_trace(100.0, 10);
    auto b = constant_trace(100.0, 9);
    CHECK_THROWS_AS(aggregate({a, b}, topo, site), AggregationError);
    b = constant_trace(100.0, 10, 0.5);
    CHECK_THROWS_WITH_AS(aggregate({a, b}, topo, site),
                         doctest::Contains("resample"), AggregationError);
    CHECK_THROWS_AS(aggregate({a}, topo, site), AggregationError); // count
}

TEST_CASE("resampling averages whole windows") {
    PowerTrace t;
    t.dt = 0.25;
    t.samples = {100.0, 200.0, 300.0, 400.0};

    SUBCASE("identity at the native interval") {
        const PowerTrace r = resample(t, 0.25);
        CHECK(r.samples == t.samples);
        CHECK(r.dt == 0.25);
    }
    SUBCASE("2x window means") {
        const PowerTrace r = resample(t, 0.5);
        REQUIRE(r.samples.size() == 2);
        CHECK(r.samples[0] == 150.0);
        CHECK(r.samples[1] == 350.0);
        CHECK(r.dt == 0.5);
    }
    SUBCASE("non-multiple intervals are rejected") {
        CHECK_THROWS_AS(resample(t, 0.3), AggregationError);
        CHECK_THROWS_AS(resample(t, 0.125), AggregationError);
    }
    SUBCASE("trailing partial window is dropped, whole windows conserve energy") {
        PowerTrace odd;
        odd.dt = 0.25;
        odd.samples = {100.0, 200.0, 300.0, 400.0, 999.0};
        const PowerTrace r = resample(odd, 0.5);
        REQUIRE(r.samples.size() == 2);
        const double kept_energy = (100.0 + 200.0 + 300.0 + 400.0) * 0.25;
        CHECK(r.energy_joules() == doctest::Approx(kept_energy).epsilon(1e-12));
    }
    SUBCASE("mean power is conserved over whole windows") {
        RandomStream rng(3);
        PowerTrace x;
        x.dt = 0.25;
        for (int i = 0; i < 240; ++i) x.samples.push_back(1000.0 * rng.uniform01());
        const PowerTrace r = resample(x, 3.0);
        CHECK(r.mean() == doctest::Approx(x.mean()).epsilon(1e-12));
    }
}

TEST_CASE("planning metrics cover the textbook cases") {
    SUBCASE("constant trace") {
        const auto m = planning_metrics(constant_trace(2000.0, 400), 10.0);
        CHECK(m.peak_to_average == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(m.load_factor == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(m.max_ramp_w == 0.0);
        CHECK(m.p95_w == 2000.0);
        CHECK(m.cv == 0.0);
        CHECK(m.peak_w == 2000.0);
        CHECK(m.average_w == doctest::Approx(2000.0).epsilon(1e-12));
    }
    SUBCASE("alternating windows give the full swing as ramp") {
        PowerTrace t;
        t.dt = 0.25;
        for (int w = 0; w < 8; ++w)
            for (int i = 0; i < 4; ++i) t.samples.push_back(w % 2 ? 100.0 : 0.0);
        const auto m = planning_metrics(t, 1.0);
        CHECK(m.max_ramp_w == doctest::Approx(100.0).epsilon(1e-12));
    }
    SUBCASE("sinusoid has the analytic peak-to-average ratio") {
        const double a = 1000.0, b = 300.0, two_pi = 6.283185307179586;
        PowerTrace t;
        t.dt = 0.25;
        const int period = 360, cycles = 40;
        for (int i = 0; i < period * cycles; ++i)
            t.samples.push_back(a + b * std::sin(two_pi * i / period));
        const auto m = planning_metrics(t, 0.25 * 90);
        CHECK(std::abs(m.peak_to_average - (a + b) / a) < 1e-3);
    }
    SUBCASE("degenerate traces are rejected") {
        CHECK_THROWS_AS(planning_metrics(constant_trace(0.0, 100), 1.0),
                        MetricError);
        // shorter than two ramp windows
        CHECK_THROWS_AS(planning_metrics(constant_trace(1.0, 10), 100.0),
                        MetricError);
    }
}

TEST_CASE("quantile uses the nearest-rank convention") {
    std::vector<double> v;
    for (int i = 1; i <= 100; ++i) v.push_back(double(i));
    CHECK(quantile(v, 0.95) == 95.0);
    CHECK(quantile(v, 1.0) == 100.0);
    CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
    CHECK(quantile({3.0, 1.0, 2.0}, 0.34) == 2.0); // ceil(1.02) = 2nd
    CHECK(quantile({7.0}, 0.95) == 7.0);
}

TEST_CASE("oversubscription search reproduces the analytic cases") {
    SUBCASE("constant racks fill to the exact quotient") {
        auto source = [](int, std::uint64_t) { return constant_trace(10000.0, 64); };
        const auto r =
            oversubscription_search(source, 600000.0, 26000.0, 0.95, 3, 100);
        CHECK(r.max_racks == 60);
        CHECK(r.nameplate_racks == 23);
        REQUIRE(r.curve.size() >= 60);
        CHECK(r.curve[0].racks == 1);
        CHECK(r.curve[0].worst_quantile_w == 10000.0);
        CHECK(r.curve[59].worst_quantile_w == doctest::Approx(600000.0));
    }
    SUBCASE("anti-phase rack pairs pack by their combined profile") {
        auto source = [](int rack, std::uint64_t) {
            PowerTrace t;
            t.dt = 0.25;
            for (int i = 0; i < 200; ++i)
                t.samples.push_back((i + rack) % 2 ? 20000.0 : 0.0);
            return t;
        };
        const auto r =
            oversubscription_search(source, 600000.0, 20000.0, 0.95, 2, 200);
        CHECK(r.max_racks == 60); // 30 anti-phase pairs
        CHECK(r.nameplate_racks == 30);
    }
    SUBCASE("an infeasible first rack reports zero") {
        auto source = [](int, std::uint64_t) { return constant_trace(9000.0, 16); };
        const auto r = oversubscription_search(source, 8000.0, 2000.0, 0.95, 2, 10);
        CHECK(r.max_racks == 0);
    }
    SUBCASE("the cap bounds the search") {
        auto source = [](int, std::uint64_t) { return constant_trace(1.0, 8); };
        const auto r = oversubscription_search(source, 1e9, 10.0, 0.95, 1, 5);
        CHECK(r.max_racks == 5);
        CHECK(r.curve.size() == 5);
    }
}

TEST_CASE("topology and site assumptions validate") {
    CHECK_THROWS_AS((FacilityTopology{0, 1, 1}.validate()), ConfigError);
    CHECK_THROWS_AS((SiteAssumptions{-1.0, 1.3}.validate()), ConfigError);
    CHECK_THROWS_AS((SiteAssumptions{0.0, 0.9}.validate()), ConfigError);
    FacilityTopology t{2, 3, 4};
    CHECK(t.total_servers() == 24);
}
