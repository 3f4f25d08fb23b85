#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "powertrace/rng.hpp"
#include "powertrace/workload.hpp"
#include "test_support.hpp"

using namespace powertrace;

namespace {

std::vector<RequestLogRecord> surrogate_records(double a0, double a1,
                                                double noise_sigma, int n,
                                                std::uint64_t seed) {
    RandomStream rng(seed);
    std::vector<RequestLogRecord> records;
    for (int i = 0; i < n; ++i) {
        RequestLogRecord r;
        r.arrival_s = i;
        r.n_in = 16 + static_cast<std::int64_t>(rng.next_u64() % 2048);
        r.n_out = 32;
        r.ttft_s = std::exp(a0 + a1 * std::log(double(r.n_in) + 1.0) +
                            noise_sigma * rng.normal());
        r.tbt_s = 0.02;
        records.push_back(r);
    }
    return records;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

} // namespace

TEST_CASE("surrogate fit recovers a noiseless log-linear law exactly") {
    const auto records = surrogate_records(-2.0, 1.0, 0.0, 64, 3);
    const LatencySurrogate s = fit_latency_surrogate(records);
    CHECK(s.alpha0 == doctest::Approx(-2.0).epsilon(1e-9));
    CHECK(s.alpha1 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(s.sigma_ttft <= 1e-9);
    CHECK(s.mu_log_tbt == doctest::Approx(std::log(0.02)).epsilon(1e-9));
    CHECK(s.sigma_log_tbt <= 1e-9);
}

TEST_CASE("surrogate fit recovers noisy coefficients within tolerance") {
    const auto records = surrogate_records(-1.5, 0.7, 0.1, 500, 4);
    const LatencySurrogate s = fit_latency_surrogate(records);
    CHECK(std::abs(s.alpha0 + 1.5) < 0.05);
    CHECK(std::abs(s.alpha1 - 0.7) < 0.05);
    CHECK(std::abs(s.sigma_ttft - 0.1) < 0.02);
}

TEST_CASE("surrogate fit rejects degenerate data") {
    auto records = surrogate_records(-2.0, 1.0, 0.0, 12, 5);
    for (auto& r : records) r.n_in = 128; // rank-deficient
    CHECK_THROWS_AS(fit_latency_surrogate(records), FitError);

    const auto few = surrogate_records(-2.0, 1.0, 0.0, 3, 6);
    CHECK_THROWS_AS(fit_latency_surrogate(few), FitError);
}

TEST_CASE("lifetime sampling is exact at zero variance") {
    const LatencySurrogate s{-2.0, 1.0, 0.0, std::log(0.05), 0.0};
    ArrivalSchedule sched;
    sched.requests.push_back({0.0, 0, 10});
    sched.requests.push_back({1.0, 127, 4});
    const auto lifetimes = sample_lifetimes(sched, s, 9);
    REQUIRE(lifetimes.size() == 2);
    CHECK(lifetimes[0].ttft_s == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
    CHECK(lifetimes[0].tbt_s == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(lifetimes[1].ttft_s ==
          doctest::Approx(std::exp(-2.0 + std::log(128.0))).epsilon(1e-12));
}

TEST_CASE("sampled log-TBT matches its normal law distributionally") {
    const double mu = std::log(0.03), sg = 0.25;
    const LatencySurrogate s{-2.0, 0.5, 0.1, mu, sg};
    ArrivalSchedule sched;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sched.requests.push_back({double(i), 64, 8});
    const auto lifetimes = sample_lifetimes(sched, s, 123);

    std::vector<double> z;
    z.reserve(n);
    for (const auto& l : lifetimes) z.push_back((std::log(l.tbt_s) - mu) / sg);
    std::sort(z.begin(), z.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
        const double f = normal_cdf(z[i]);
        ks = std::max(ks, std::abs(f - double(i + 1) / n));
        ks = std::max(ks, std::abs(f - double(i) / n));
    }
    CHECK(ks < 0.01);
}

TEST_CASE("queue handles the contention-free case") {
    ArrivalSchedule sched;
    sched.requests.push_back({0.0, 100, 10});
    const std::vector<RequestLifetime> lifetimes{{0.5, 0.1}};
    const auto intervals = simulate_queue(sched, lifetimes, {});
    REQUIRE(intervals.size() == 1);
    CHECK(intervals[0].t_start == 0.0);
    CHECK(intervals[0].t_end == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("queue defers the 65th simultaneous arrival") {
    const double d = 2.0;
    ArrivalSchedule sched;
    std::vector<RequestLifetime> lifetimes;
    for (int i = 0; i < 65; ++i) {
        sched.requests.push_back({0.0, 10, 0});
        lifetimes.push_back({d, 0.0});
    }
    const auto intervals = simulate_queue(sched, lifetimes, {});
    for (int i = 0; i < 64; ++i) {
        CHECK(intervals[i].t_start == 0.0);
        CHECK(intervals[i].t_end == d);
    }
    CHECK(intervals[64].t_start == d);
    CHECK(intervals[64].t_end == 2 * d);
}

TEST_CASE("prefill-only requests occupy exactly their TTFT") {
    ArrivalSchedule sched;
    sched.requests.push_back({0.0, 10, 0});
    const std::vector<RequestLifetime> lifetimes{{0.37, 0.5}};
    const auto intervals = simulate_queue(sched, lifetimes, {});
    CHECK(intervals[0].t_end - intervals[0].t_start == 0.37);
}

TEST_CASE("queue matches the event-driven oracle on random instances") {
    RandomStream rng(77);
    for (int batch : {1, 2, 64}) {
        QueueConfig q;
        q.batch_size = batch;
        for (int rep = 0; rep < 200; ++rep) {
            const auto inst = testsupport::random_queue_instance(rng, 10);
            const auto got = simulate_queue(inst.schedule, inst.lifetimes, q);
            const auto want =
                testsupport::brute_force_queue(inst.schedule, inst.lifetimes, batch);
            REQUIRE(got.size() == want.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].t_start == want[i].t_start);
                CHECK(got[i].t_end == want[i].t_end);
            }
        }
    }
}

TEST_CASE("queue invariants hold on a random crowded instance") {
    RandomStream rng(5);
    ArrivalSchedule sched;
    std::vector<RequestLifetime> lifetimes;
    double t = 0.0;
    for (int i = 0; i < 400; ++i) {
        t += rng.exponential(4.0);
        sched.requests.push_back({t, 64, 16});
        lifetimes.push_back({0.2 + rng.uniform01(), 0.02});
    }
    QueueConfig q;
    q.batch_size = 8;
    const auto intervals = simulate_queue(sched, lifetimes, q);

    // FIFO: starts non-decreasing in arrival order
    for (std::size_t i = 1; i < intervals.size(); ++i)
        CHECK(intervals[i].t_start >= intervals[i - 1].t_start);

    double horizon = 0.0;
    for (const auto& iv : intervals) horizon = std::max(horizon, iv.t_end);
    const auto f = compute_features(intervals, 0.25, horizon + 0.25);

    // concurrency bound
    CHECK(*std::max_element(f.a.begin(), f.a.end()) <= q.batch_size);

    // work conservation within one dt per request
    double occupancy = 0.0;
    for (auto c : f.a) occupancy += double(c) * 0.25;
    double busy = 0.0;
    for (const auto& iv : intervals) busy += iv.t_end - iv.t_start;
    CHECK(std::abs(occupancy - busy) <= 0.25 * double(intervals.size()));
}

TEST_CASE("features follow the half-open membership rule") {
    SUBCASE("empty interval set") {
        const auto f = compute_features({}, 0.25, 1.0);
        REQUIRE(f.a.size() == 4);
        for (auto v : f.a) CHECK(v == 0);
        for (auto v : f.da) CHECK(v == 0);
    }
    SUBCASE("two overlapping intervals") {
        const ActiveIntervalSet intervals{{0.0, 1.0}, {0.5, 2.0}};
        const auto f = compute_features(intervals, 0.25, 2.25);
        const std::vector<std::int64_t> want{1, 1, 2, 2, 1, 1, 1, 1, 0};
        CHECK(f.a == want);
    }
    SUBCASE("t_end is exclusive and da tracks first differences") {
        const ActiveIntervalSet intervals{{0.0, 0.5}};
        const auto f = compute_features(intervals, 0.25, 1.0);
        const std::vector<std::int64_t> want_a{1, 1, 0, 0};
        const std::vector<std::int64_t> want_da{1, 0, -1, 0};
        CHECK(f.a == want_a);
        CHECK(f.da == want_da);
    }
    SUBCASE("brute-force membership scan agrees") {
        RandomStream rng(13);
        ActiveIntervalSet intervals;
        for (int i = 0; i < 50; ++i) {
            const double s = 10.0 * rng.uniform01();
            intervals.push_back({s, s + 3.0 * rng.uniform01() + 1e-3});
        }
        const double dt = 0.25, horizon = 14.0;
        const auto f = compute_features(intervals, dt, horizon);
        for (std::size_t t = 0; t < f.a.size(); ++t) {
            std::int64_t count = 0;
            const double at = double(t) * dt;
            for (const auto& iv : intervals)
                count += iv.t_start <= at && at < iv.t_end;
            CHECK(f.a[t] == count);
        }
    }
}

TEST_CASE("homogeneous arrivals hit the requested count and rate") {
    ArrivalSpec spec;
    spec.rate = 1.0;
    const auto sched = generate_arrivals(spec, 600, 0.0, 21);
    REQUIRE(sched.size() == 600);
    const double mean_gap = sched.requests.back().arrival_s / 599.0;
    CHECK(std::abs(mean_gap - 1.0) < 0.15);
    CHECK(std::is_sorted(sched.requests.begin(), sched.requests.end(),
                         [](const Request& a, const Request& b) {
                             return a.arrival_s < b.arrival_s;
                         }));

    ArrivalSpec slow = spec;
    slow.rate = 0.125;
    const auto sparse = generate_arrivals(slow, 75, 0.0, 22);
    CHECK(sparse.size() == 75); // 600 * 0.125 requests at the lowest studied rate
    CHECK(std::abs(sparse.requests.back().arrival_s / 74.0 - 8.0) < 8.0 * 0.35);
}

TEST_CASE("explicit arrival specs pass through verbatim") {
    ArrivalSpec spec;
    spec.kind = ArrivalSpec::Kind::kExplicit;
    spec.explicit_schedule.requests.push_back({0.25, 7, 9});
    const auto sched = generate_arrivals(spec, 0, 0.0, 99);
    REQUIRE(sched.size() == 1);
    CHECK(sched.requests[0].arrival_s == 0.25);
    CHECK(sched.requests[0].n_in == 7);
    CHECK(sched.requests[0].n_out == 9);
}

TEST_CASE("piecewise intensity arrivals track the rate integral") {
    ArrivalSpec spec;
    spec.kind = ArrivalSpec::Kind::kIntensityFunction;
    spec.intensity.t = {0.0, 500.0};
    spec.intensity.rate = {1.0, 2.0};
    spec.intensity.horizon_s = 1000.0;
    const auto sched = generate_arrivals(spec, 0, 1000.0, 31);

    std::size_t first = 0, second = 0;
    for (const auto& r : sched.requests) (r.arrival_s < 500.0 ? first : second)++;
    CHECK(std::abs(double(first) - 500.0) < 4.0 * std::sqrt(500.0));
    CHECK(std::abs(double(second) - 1000.0) < 4.0 * std::sqrt(1000.0));
}

TEST_CASE("token lengths honor distribution bounds") {
    ArrivalSpec spec;
    spec.rate = 10.0;
    spec.input_tokens = {LengthDistribution::Kind::kLognormal, std::log(256.0), 2.0,
                         1024, {}};
    spec.output_tokens = {LengthDistribution::Kind::kEmpirical, 0, 0, 1 << 20,
                          {{11, 3}, {22, 5}, {33, 7}}};
    const auto sched = generate_arrivals(spec, 2000, 0.0, 17);
    for (const auto& r : sched.requests) {
        CHECK(r.n_in >= 1);
        CHECK(r.n_in <= 1024);
        CHECK((r.n_out == 3 || r.n_out == 5 || r.n_out == 7));
    }
}

TEST_CASE("arrival generation is a pure function of the seed") {
    ArrivalSpec spec;
    spec.rate = 2.0;
    const auto a = generate_arrivals(spec, 100, 0.0, 5);
    const auto b = generate_arrivals(spec, 100, 0.0, 5);
    const auto c = generate_arrivals(spec, 100, 0.0, 6);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.requests[i].arrival_s == b.requests[i].arrival_s);
        CHECK(a.requests[i].n_in == b.requests[i].n_in);
    }
    bool differ = c.size() != a.size();
    for (std::size_t i = 0; !differ && i < a.size(); ++i)
        differ = a.requests[i].arrival_s != c.requests[i].arrival_s;
    CHECK(differ);
}
