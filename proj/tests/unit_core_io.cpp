#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "powertrace/bundle.hpp"
#include "powertrace/io.hpp"
#include "powertrace/rng.hpp"
#include "test_support.hpp"

using namespace powertrace;
using testsupport::TempDir;

TEST_CASE("power trace CSV parses timestamps and infers dt") {
    TempDir dir("trace");
    const auto path = dir.file("t.csv");
    testsupport::spit(path, "timestamp_s,power_w\n0.0,100\n0.25,200\n0.5,150\n");
    const PowerTrace t = read_power_trace(path);
    CHECK(t.dt == doctest::Approx(0.25));
    REQUIRE(t.samples.size() == 3);
    CHECK(t.samples[0] == 100.0);
    CHECK(t.samples[1] == 200.0);
    CHECK(t.samples[2] == 150.0);
    CHECK(t.start_time == 0.0);
}

TEST_CASE("power trace CSV rejects malformed input by row") {
    TempDir dir("trace_bad");
    const auto header_only = dir.file("empty.csv");
    testsupport::spit(header_only, "timestamp_s,power_w\n");
    CHECK_THROWS_WITH_AS(read_power_trace(header_only),
                         doctest::Contains("no samples"), FormatError);

    const auto unsorted = dir.file("unsorted.csv");
    testsupport::spit(unsorted, "timestamp_s,power_w\n0.0,1\n0.5,2\n0.25,3\n");
    CHECK_THROWS_WITH_AS(read_power_trace(unsorted), doctest::Contains("row 3"),
                         FormatError);

    const auto negative = dir.file("neg.csv");
    testsupport::spit(negative, "timestamp_s,power_w\n0.0,1\n0.25,-2\n");
    CHECK_THROWS_AS(read_power_trace(negative), FormatError);

    const auto bad_header = dir.file("hdr.csv");
    testsupport::spit(bad_header, "time,watts\n0.0,1\n");
    CHECK_THROWS_AS(read_power_trace(bad_header), FormatError);

    CHECK_THROWS_AS(read_power_trace(dir.file("missing.csv")), FormatError);
}

TEST_CASE("power trace round-trip is bit-identical") {
    TempDir dir("trace_rt");
    RandomStream rng(7);
    PowerTrace t;
    t.dt = 0.25;
    for (int i = 0; i < 200; ++i)
        t.samples.push_back(1000.0 * rng.uniform01() + 0.1);
    const auto path = dir.file("rt.csv");
    write_power_trace(path, t);
    const PowerTrace back = read_power_trace(path);
    REQUIRE(back.samples.size() == t.samples.size());
    for (std::size_t i = 0; i < t.samples.size(); ++i)
        CHECK(std::memcmp(&back.samples[i], &t.samples[i], sizeof(double)) == 0);
    CHECK(back.dt == t.dt);
}

TEST_CASE("request log parses and validates records") {
    TempDir dir("req");
    const auto path = dir.file("r.csv");
    testsupport::spit(path,
                      "arrival_s,n_in,n_out,ttft_s,tbt_s\n"
                      "0.0,128,64,0.42,0.031\n"
                      "1.5,200,0,0.5,\n");
    const auto records = read_request_log(path);
    REQUIRE(records.size() == 2);
    CHECK(records[0].n_in == 128);
    CHECK(records[0].tbt_s.has_value());
    CHECK(*records[0].tbt_s == doctest::Approx(0.031));
    CHECK(records[1].n_out == 0);
    CHECK(!records[1].tbt_s.has_value());

    const auto bad = dir.file("bad.csv");
    testsupport::spit(bad, "arrival_s,n_in,n_out,ttft_s,tbt_s\n1.0,-5,3,0.1,0.01\n");
    CHECK_THROWS_AS(read_request_log(bad), FormatError);

    const auto bad_lat = dir.file("bad_lat.csv");
    testsupport::spit(bad_lat,
                      "arrival_s,n_in,n_out,ttft_s,tbt_s\n1.0,5,3,-0.1,0.01\n");
    CHECK_THROWS_AS(read_request_log(bad_lat), FormatError);
}

TEST_CASE("request log round-trips and sorts by arrival") {
    TempDir dir("req_rt");
    std::vector<RequestLogRecord> records;
    records.push_back({2.0, 10, 5, 0.3, 0.02});
    records.push_back({1.0, 20, 0, 0.4, std::nullopt});
    const auto path = dir.file("r.csv");
    write_request_log(path, records);
    const auto back = read_request_log(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].arrival_s == 1.0); // sorted on read
    CHECK(back[1].arrival_s == 2.0);
    CHECK(!back[0].tbt_s.has_value());
}

TEST_CASE("arrival schedule round-trips") {
    TempDir dir("sched");
    ArrivalSchedule s;
    s.requests.push_back({0.5, 128, 64});
    s.requests.push_back({0.125, 16, 0});
    const auto path = dir.file("s.csv");
    write_arrival_schedule(path, s);
    const ArrivalSchedule back = read_arrival_schedule(path);
    REQUIRE(back.size() == 2);
    CHECK(back.requests[0].arrival_s == 0.125);
    CHECK(back.requests[1].n_in == 128);
}

TEST_CASE("format_double round-trips arbitrary doubles") {
    RandomStream rng(11);
    for (int i = 0; i < 1000; ++i) {
        const double v = (rng.uniform01() - 0.5) * std::pow(10.0, int(i % 17) - 8);
        const double back = std::stod(format_double(v));
        CHECK(std::memcmp(&back, &v, sizeof(double)) == 0);
    }
    CHECK(format_double(0.1) == "0.1");
}

namespace {

ModelBundle small_bundle() {
    ModelBundle b;
    b.config = {"A100", "llama3.1-70b", 4, false};
    b.surrogate = {-2.0, 1.0, 0.1, std::log(0.02), 0.2};
    b.catalog = testsupport::make_catalog({100.0, 300.0}, {5.0, 8.0}, {0.0, 0.5},
                                          80.0, 340.0);
    b.classifier = init_classifier(2, 8, 2, 42);
    return b;
}

} // namespace

TEST_CASE("bundle round-trip reproduces every numeric field bit-identically") {
    TempDir dir("bundle");
    const ModelBundle b = small_bundle();
    const auto path = dir.file("b.json");
    save_bundle(b, path);
    const ModelBundle back = load_bundle(path);

    CHECK(back.config.hardware == b.config.hardware);
    CHECK(back.config.model == b.config.model);
    CHECK(back.config.tensor_parallel == b.config.tensor_parallel);
    CHECK(back.config.is_moe == b.config.is_moe);
    CHECK(back.format_version == ModelBundle::kFormatVersion);

    CHECK(back.surrogate.alpha0 == b.surrogate.alpha0);
    CHECK(back.surrogate.alpha1 == b.surrogate.alpha1);
    CHECK(back.surrogate.sigma_ttft == b.surrogate.sigma_ttft);
    CHECK(back.surrogate.mu_log_tbt == b.surrogate.mu_log_tbt);
    CHECK(back.surrogate.sigma_log_tbt == b.surrogate.sigma_log_tbt);

    REQUIRE(back.catalog.k == b.catalog.k);
    for (int i = 0; i < b.catalog.k; ++i) {
        CHECK(back.catalog.pi[i] == b.catalog.pi[i]);
        CHECK(back.catalog.mu[i] == b.catalog.mu[i]);
        CHECK(back.catalog.sigma[i] == b.catalog.sigma[i]);
        CHECK(back.catalog.phi[i] == b.catalog.phi[i]);
    }
    CHECK(back.catalog.y_min == b.catalog.y_min);
    CHECK(back.catalog.y_max == b.catalog.y_max);

    ClassifierModel lhs = b.classifier, rhs = back.classifier;
    auto lv = param_views(lhs), rv = param_views(rhs);
    REQUIRE(lv.size() == rv.size());
    for (std::size_t p = 0; p < lv.size(); ++p) {
        REQUIRE(lv[p].size == rv[p].size);
        CHECK(std::memcmp(lv[p].data, rv[p].data,
                          sizeof(double) * static_cast<std::size_t>(lv[p].size)) ==
              0);
    }
    for (int i = 0; i < 2; ++i) {
        CHECK(back.classifier.feat_mean(i) == b.classifier.feat_mean(i));
        CHECK(back.classifier.feat_std(i) == b.classifier.feat_std(i));
    }
}

TEST_CASE("bundle load rejects corrupted and incompatible files") {
    TempDir dir("bundle_bad");
    const ModelBundle b = small_bundle();
    const auto path = dir.file("b.json");
    save_bundle(b, path);

    const std::string text = testsupport::slurp(path);
    const auto truncated = dir.file("trunc.json");
    testsupport::spit(truncated, text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(load_bundle(truncated), BundleError);

    const auto versioned = dir.file("ver.json");
    std::string bumped = text;
    const std::string needle = "\"format_version\": 1";
    const auto pos = bumped.find(needle);
    REQUIRE(pos != std::string::npos);
    bumped.replace(pos, needle.size(), "\"format_version\": 2");
    testsupport::spit(versioned, bumped);
    CHECK_THROWS_WITH_AS(load_bundle(versioned), doctest::Contains("version"),
                         BundleError);

    CHECK_THROWS_AS(load_bundle(dir.file("absent.json")), BundleError);
}

TEST_CASE("standalone artifacts round-trip") {
    TempDir dir("parts");
    const ModelBundle b = small_bundle();

    save_surrogate(b.surrogate, dir.file("s.json"));
    const LatencySurrogate s = load_surrogate(dir.file("s.json"));
    CHECK(s.alpha0 == b.surrogate.alpha0);
    CHECK(s.sigma_log_tbt == b.surrogate.sigma_log_tbt);

    save_catalog(b.catalog, dir.file("c.json"));
    const StateCatalog c = load_catalog(dir.file("c.json"));
    REQUIRE(c.k == 2);
    CHECK(c.mu[1] == 300.0);
    CHECK(c.phi[1] == 0.5);

    save_classifier(b.classifier, dir.file("m.json"));
    const ClassifierModel m = load_classifier(dir.file("m.json"));
    CHECK(m.k == 2);
    CHECK(m.hidden == 8);
    CHECK(m.w_out(0, 0) == b.classifier.w_out(0, 0));
}

TEST_CASE("serving config keys are case-normalized") {
    ServingConfig a{"A100", "Llama3.1-70B", 4, false};
    ServingConfig b{"a100", "llama3.1-70b", 4, true};
    CHECK(a.key() == b.key());
    CHECK(a.key() == "a100|llama3.1-70b|tp4");
    ServingConfig bad{"", "m", 1, false};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("bundle validation ties catalog and classifier state counts") {
    ModelBundle b = small_bundle();
    b.classifier = init_classifier(3, 8, 2, 1);
    CHECK_THROWS_AS(b.validate(), BundleError);
}
