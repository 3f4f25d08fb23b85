#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "powertrace/generator.hpp"
#include "powertrace/metrics.hpp"
#include "powertrace/rng.hpp"
#include "test_support.hpp"

using namespace powertrace;

namespace {

Eigen::MatrixXd one_hot_rows(const std::vector<int>& states, int k) {
    Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(Eigen::Index(states.size()), k);
    for (std::size_t t = 0; t < states.size(); ++t) probs(Eigen::Index(t), states[t]) = 1.0;
    return probs;
}

double lag1_autocorr(const std::vector<double>& y) {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= double(y.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - mean;
        den += d * d;
        if (i) num += d * (y[i - 1] - mean);
    }
    return num / den;
}

} // namespace

TEST_CASE("trajectory sampling honors the probability rows") {
    SUBCASE("one-hot rows reduce to argmax") {
        const std::vector<int> want{0, 2, 1, 2, 0, 1, 1, 2};
        const auto got = sample_trajectory(one_hot_rows(want, 3), 5);
        CHECK(got == StateLabels(want.begin(), want.end()));
    }
    SUBCASE("uniform rows visit states uniformly") {
        const int n = 100000, k = 4;
        const Eigen::MatrixXd probs = Eigen::MatrixXd::Constant(n, k, 0.25);
        const auto states = sample_trajectory(probs, 11);
        std::vector<int> counts(k, 0);
        for (int s : states) counts[std::size_t(s)]++;
        for (int j = 0; j < k; ++j)
            CHECK(std::abs(double(counts[std::size_t(j)]) / n - 0.25) < 0.01);
    }
    SUBCASE("deterministic in the seed") {
        const Eigen::MatrixXd probs = Eigen::MatrixXd::Constant(500, 3, 1.0 / 3.0);
        CHECK(sample_trajectory(probs, 9) == sample_trajectory(probs, 9));
        CHECK(sample_trajectory(probs, 9) != sample_trajectory(probs, 10));
    }
    SUBCASE("invalid rows are rejected") {
        Eigen::MatrixXd probs = Eigen::MatrixXd::Constant(4, 2, 0.6);
        CHECK_THROWS_AS(sample_trajectory(probs, 0), ConfigError);
    }
}

TEST_CASE("iid power sampling follows the per-state components") {
    SUBCASE("zero variance reproduces the mean sequence") {
        const StateCatalog c = testsupport::make_catalog(
            {100.0, 300.0}, {0.0, 0.0}, {0.0, 0.0}, 50.0, 350.0);
        const StateLabels states{0, 1, 1, 0, 1};
        const PowerTrace t = sample_power_iid(states, c, 0.25, 3);
        const std::vector<double> want{100.0, 300.0, 300.0, 100.0, 300.0};
        CHECK(t.samples == want);
    }
    SUBCASE("clipping binds when a mean exceeds the observed range") {
        const StateCatalog c = testsupport::make_catalog(
            {100.0, 500.0}, {0.0, 0.0}, {0.0, 0.0}, 50.0, 350.0);
        const PowerTrace t = sample_power_iid(StateLabels(10, 1), c, 0.25, 3);
        for (double v : t.samples) CHECK(v == 350.0);
    }
    SUBCASE("long-run mean matches the component mean") {
        const int n = 100000;
        const double mu = 200.0, sigma = 12.0;
        const StateCatalog c =
            testsupport::make_catalog({mu}, {sigma}, {0.0}, 0.0, 400.0);
        const PowerTrace t = sample_power_iid(StateLabels(n, 0), c, 0.25, 4);
        CHECK(std::abs(t.mean() - mu) < 3.0 * sigma / std::sqrt(double(n)));
    }
    SUBCASE("every sample is inside the catalog range") {
        const StateCatalog c = testsupport::make_catalog(
            {100.0, 110.0}, {40.0, 60.0}, {0.0, 0.0}, 90.0, 130.0);
        StateLabels states;
        RandomStream rng(5);
        for (int i = 0; i < 5000; ++i) states.push_back(int(rng.next_u64() % 2));
        const PowerTrace t = sample_power_iid(states, c, 0.25, 6);
        for (double v : t.samples) {
            CHECK(v >= 90.0);
            CHECK(v <= 130.0);
        }
    }
}

TEST_CASE("AR(1) power sampling has the stated moments") {
    const double mu = 250.0, sigma = 10.0, phi = 0.9;
    const StateCatalog c =
        testsupport::make_catalog({mu}, {sigma}, {phi}, mu - 8 * sigma, mu + 8 * sigma);
    const int n = 100000;
    const PowerTrace t = sample_power_ar1(StateLabels(n, 0), c, 0.25, 8);

    CHECK(std::abs(lag1_autocorr(t.samples) - phi) < 0.05);

    double mean = t.mean(), var = 0.0;
    for (double v : t.samples) var += (v - mean) * (v - mean);
    var /= double(n);
    CHECK(std::abs(var - sigma * sigma) < 0.1 * sigma * sigma);
}

TEST_CASE("AR(1) with zero phi is sample-identical to iid") {
    const StateCatalog c = testsupport::make_catalog(
        {120.0, 220.0, 320.0}, {5.0, 7.0, 9.0}, {0.0, 0.0, 0.0}, 80.0, 360.0);
    StateLabels states;
    RandomStream rng(12);
    for (int i = 0; i < 20000; ++i) states.push_back(int(rng.next_u64() % 3));
    const PowerTrace iid = sample_power_iid(states, c, 0.25, 77);
    const PowerTrace ar = sample_power_ar1(states, c, 0.25, 77);
    REQUIRE(iid.samples.size() == ar.samples.size());
    for (std::size_t i = 0; i < iid.samples.size(); ++i)
        REQUIRE(iid.samples[i] == ar.samples[i]);
}

TEST_CASE("AR(1) with zero sigma is constant at the state mean") {
    const StateCatalog c =
        testsupport::make_catalog({150.0}, {0.0}, {0.7}, 100.0, 200.0);
    const PowerTrace t = sample_power_ar1(StateLabels(100, 0), c, 0.25, 1);
    for (double v : t.samples) CHECK(v == 150.0);
}

namespace {

ModelBundle test_bundle(bool is_moe = false, double phi = 0.0) {
    const StateCatalog catalog = testsupport::make_catalog(
        {120.0, 260.0}, {4.0, 6.0}, {phi, phi}, 100.0, 290.0);
    const LatencySurrogate surrogate{-1.0, 0.3, 0.0, std::log(0.04), 0.0};
    return testsupport::make_threshold_bundle({0.5}, catalog, surrogate, is_moe);
}

ArrivalSchedule burst_schedule() {
    ArrivalSchedule s;
    for (int i = 0; i < 30; ++i) s.requests.push_back({5.0 + 0.1 * i, 128, 32});
    return s;
}

} // namespace

TEST_CASE("server trace generation composes the full pipeline") {
    const ModelBundle bundle = test_bundle();

    SUBCASE("an empty schedule yields the idle state") {
        GenerationRequest req;
        req.horizon_s = 500.0;
        req.seed = 3;
        const PowerTrace t = generate_server_trace(bundle, req);
        REQUIRE(t.samples.size() == 2000);
        CHECK(std::abs(t.mean() - 120.0) < 3.0 * 4.0 / std::sqrt(2000.0));
    }
    SUBCASE("an empty schedule without a horizon is rejected") {
        GenerationRequest req;
        CHECK_THROWS_AS(generate_server_trace(bundle, req), ConfigError);
    }
    SUBCASE("busy periods move power to the active state") {
        GenerationRequest req;
        req.schedule = burst_schedule();
        req.horizon_s = 60.0;
        const PowerTrace t = generate_server_trace(bundle, req);
        // the first 5 s are idle, the burst drives the active state
        CHECK(t.samples[0] < 200.0);
        double peak = 0.0;
        for (double v : t.samples) peak = std::max(peak, v);
        CHECK(peak > 200.0);
    }
    SUBCASE("identical requests give identical traces, seeds separate") {
        GenerationRequest req;
        req.schedule = burst_schedule();
        req.horizon_s = 60.0;
        req.seed = 21;
        const PowerTrace a = generate_server_trace(bundle, req);
        const PowerTrace b = generate_server_trace(bundle, req);
        REQUIRE(a.samples.size() == b.samples.size());
        for (std::size_t i = 0; i < a.samples.size(); ++i)
            REQUIRE(a.samples[i] == b.samples[i]);
        req.seed = 22;
        const PowerTrace d = generate_server_trace(bundle, req);
        bool differ = false;
        for (std::size_t i = 0; i < a.samples.size() && !differ; ++i)
            differ = a.samples[i] != d.samples[i];
        CHECK(differ);
    }
    SUBCASE("generated samples respect the catalog range") {
        GenerationRequest req;
        req.schedule = burst_schedule();
        req.horizon_s = 60.0;
        const PowerTrace t = generate_server_trace(bundle, req);
        for (double v : t.samples) {
            CHECK(v >= bundle.catalog.y_min);
            CHECK(v <= bundle.catalog.y_max);
        }
    }
}

TEST_CASE("generation mode defaults follow the serving config") {
    // MoE bundles default to AR(1): with phi = 0.95 the output is strongly
    // autocorrelated; forcing iid on the same bundle kills the correlation.
    const ModelBundle moe = test_bundle(true, 0.95);
    GenerationRequest req;
    req.horizon_s = 2000.0;
    req.seed = 5;
    const PowerTrace auto_mode = generate_server_trace(moe, req);
    req.mode = GenerationMode::kIid;
    const PowerTrace forced_iid = generate_server_trace(moe, req);

    CHECK(lag1_autocorr(auto_mode.samples) > 0.8);
    CHECK(std::abs(lag1_autocorr(forced_iid.samples)) < 0.1);

    const ModelBundle dense = test_bundle(false, 0.95);
    GenerationRequest dreq;
    dreq.horizon_s = 2000.0;
    dreq.seed = 5;
    const PowerTrace dense_auto = generate_server_trace(dense, dreq);
    CHECK(std::abs(lag1_autocorr(dense_auto.samples)) < 0.1);
}

TEST_CASE("generation mode strings parse") {
    CHECK(parse_generation_mode("iid") == GenerationMode::kIid);
    CHECK(parse_generation_mode("ar1") == GenerationMode::kAr1);
    CHECK(to_string(GenerationMode::kAr1) == "ar1");
    CHECK_THROWS_AS(parse_generation_mode("bogus"), ConfigError);
}
