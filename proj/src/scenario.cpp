#include "powertrace/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>

#include "powertrace/errors.hpp"
#include "powertrace/io.hpp"
#include "powertrace/rng.hpp"

namespace powertrace {

namespace {

using nlohmann::json;

const std::set<std::string> kLevels = {"server", "rack", "row", "site", "facility"};

} // namespace

void TrafficSpec::validate(std::int64_t n_servers) const {
    switch (mode) {
    case Mode::kIndependent:
        if (!has_intensity && rate <= 0.0)
            throw ConfigError("traffic: independent mode needs rate_per_server > 0 "
                              "or an intensity function");
        break;
    case Mode::kSharedIntensity: {
        if (!has_intensity && rate <= 0.0)
            throw ConfigError("traffic: shared_intensity needs rate_total > 0 or an "
                              "intensity function");
        if (!weights.empty()) {
            if (static_cast<std::int64_t>(weights.size()) != n_servers)
                throw ConfigError("traffic: weights must have one entry per server");
            double sum = 0.0;
            for (double w : weights) {
                if (w <= 0.0 || w > 1.0)
                    throw ConfigError("traffic: weights must lie in (0, 1]");
                sum += w;
            }
            if (sum > 1.0 + 1e-9)
                throw ConfigError("traffic: weights sum to more than 1");
        }
        break;
    }
    case Mode::kOffsetReplay:
        if (!has_base_schedule && base_rate <= 0.0)
            throw ConfigError("traffic: offset_replay needs a base schedule or "
                              "base_rate > 0");
        if (t_offset_s < 0.0) throw ConfigError("traffic: t_offset_s must be >= 0");
        break;
    }
}

std::vector<ArrivalSchedule> build_schedules(const FacilityTopology& topology,
                                             const TrafficSpec& traffic,
                                             double horizon_s, std::uint64_t seed) {
    topology.validate();
    const std::int64_t n = topology.total_servers();
    traffic.validate(n);
    if (horizon_s <= 0.0) throw ConfigError("build_schedules: horizon must be > 0");

    std::vector<ArrivalSchedule> schedules(static_cast<std::size_t>(n));

    switch (traffic.mode) {
    case TrafficSpec::Mode::kIndependent: {
        for (std::int64_t i = 0; i < n; ++i) {
            ArrivalSpec spec;
            if (traffic.has_intensity) {
                spec.kind = ArrivalSpec::Kind::kIntensityFunction;
                spec.intensity = traffic.intensity;
                spec.intensity.horizon_s = horizon_s;
            } else {
                spec.kind = ArrivalSpec::Kind::kPoissonHomogeneous;
                spec.rate = traffic.rate;
            }
            spec.input_tokens = traffic.input_tokens;
            spec.output_tokens = traffic.output_tokens;
            schedules[static_cast<std::size_t>(i)] = generate_arrivals(
                spec, 0, horizon_s,
                derive_seed(seed, {streams::kServer, static_cast<std::uint64_t>(i)}));
        }
        break;
    }
    case TrafficSpec::Mode::kSharedIntensity: {
        ArrivalSpec master;
        if (traffic.has_intensity) {
            master.kind = ArrivalSpec::Kind::kIntensityFunction;
            master.intensity = traffic.intensity;
            master.intensity.horizon_s = horizon_s;
        } else {
            master.kind = ArrivalSpec::Kind::kPoissonHomogeneous;
            master.rate = traffic.rate;
        }
        master.input_tokens = traffic.input_tokens;
        master.output_tokens = traffic.output_tokens;
        const ArrivalSchedule pooled = generate_arrivals(master, 0, horizon_s, seed);

        std::vector<double> weights = traffic.weights;
        if (weights.empty())
            weights.assign(static_cast<std::size_t>(n),
                           1.0 / static_cast<double>(n));
        double wsum = 0.0;
        for (double w : weights) wsum += w;
        weights.push_back(std::max(0.0, 1.0 - wsum)); // dropped arrivals

        RandomStream assign(derive_seed(seed, {streams::kThinning}));
        for (const Request& req : pooled.requests) {
            const std::size_t pick = assign.categorical(weights);
            if (pick < static_cast<std::size_t>(n))
                schedules[pick].requests.push_back(req);
        }
        break;
    }
    case TrafficSpec::Mode::kOffsetReplay: {
        ArrivalSchedule base;
        if (traffic.has_base_schedule) {
            base = traffic.base_schedule;
        } else {
            ArrivalSpec spec;
            spec.kind = ArrivalSpec::Kind::kPoissonHomogeneous;
            spec.rate = traffic.base_rate;
            spec.input_tokens = traffic.input_tokens;
            spec.output_tokens = traffic.output_tokens;
            base = generate_arrivals(spec, 0, horizon_s, seed);
        }
        for (std::int64_t i = 0; i < n; ++i) {
            RandomStream off_rng(derive_seed(
                seed, {streams::kOffsets, static_cast<std::uint64_t>(i)}));
            const double offset =
                traffic.t_offset_s > 0.0 ? off_rng.uniform01() * traffic.t_offset_s
                                         : 0.0;
            ArrivalSchedule& out = schedules[static_cast<std::size_t>(i)];
            out.requests.reserve(base.requests.size());
            for (Request req : base.requests) {
                req.arrival_s = std::fmod(req.arrival_s + offset, horizon_s);
                out.requests.push_back(req);
            }
            std::stable_sort(out.requests.begin(), out.requests.end(),
                             [](const Request& a, const Request& b) {
                                 return a.arrival_s < b.arrival_s;
                             });
        }
        break;
    }
    }
    return schedules;
}

void Scenario::validate() const {
    topology.validate();
    site.validate();
    traffic.validate(topology.total_servers());
    if (dt <= 0.0) throw ConfigError("scenario: generation.dt_s must be > 0");
    if (horizon_s <= 0.0) throw ConfigError("scenario: generation.horizon_s must be > 0");
    if (batch_size < 1) throw ConfigError("scenario: generation.batch_size must be >= 1");
    if (resolution_s != 0.0 && resolution_s < dt)
        throw ConfigError("scenario: output.resolution_s must be >= dt");
    if (ramp_window_s <= 0.0)
        throw ConfigError("scenario: output.ramp_window_s must be > 0");
    for (const auto& level : levels)
        if (!kLevels.count(level))
            throw ConfigError("scenario: unknown output level '" + level + "'");
    if (!server_bundle.empty()) {
        if (static_cast<std::int64_t>(server_bundle.size()) != topology.total_servers())
            throw ConfigError("scenario: server_bundle must list every server");
        for (int b : server_bundle)
            if (b < 0 || static_cast<std::size_t>(b) >= std::max<std::size_t>(
                                                            1, bundle_paths.size()))
                throw ConfigError("scenario: server_bundle index out of range");
    }
    if (lut) lut->validate();
}

namespace {

LengthDistribution parse_length(const json& j, const char* which,
                                const std::filesystem::path& base_dir) {
    LengthDistribution d;
    if (j.contains("empirical_csv")) {
        const auto csv =
            (base_dir / j.at("empirical_csv").get<std::string>()).string();
        const auto records = read_request_log(csv);
        if (records.empty())
            throw ConfigError(std::string("scenario tokens.") + which +
                              ": empirical log is empty");
        d.kind = LengthDistribution::Kind::kEmpirical;
        for (const auto& r : records) d.pool.emplace_back(r.n_in, r.n_out);
        return d;
    }
    d.kind = LengthDistribution::Kind::kLognormal;
    d.mu = j.at("log_mean").get<double>();
    d.sigma = j.at("log_std").get<double>();
    d.cap = j.value("cap", std::int64_t{1} << 20);
    if (d.sigma < 0.0)
        throw ConfigError(std::string("scenario tokens.") + which +
                          ": log_std must be >= 0");
    return d;
}

PiecewiseRate parse_intensity(const json& j) {
    PiecewiseRate r;
    r.t = j.at("t").get<std::vector<double>>();
    r.rate = j.at("rate").get<std::vector<double>>();
    return r;
}

} // namespace

ScenarioOutputs run_scenario(const Scenario& scenario,
                             const std::vector<ModelBundle>& bundles,
                             std::uint64_t seed, unsigned threads) {
    scenario.validate();
    if (bundles.empty()) throw ConfigError("run_scenario: no bundles");
    const auto n = static_cast<std::size_t>(scenario.topology.total_servers());
    std::vector<const ModelBundle*> per_server(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int b = scenario.server_bundle.empty() ? 0 : scenario.server_bundle[i];
        if (static_cast<std::size_t>(b) >= bundles.size())
            throw ConfigError("run_scenario: server_bundle index " +
                              std::to_string(b) + " out of range");
        per_server[i] = &bundles[static_cast<std::size_t>(b)];
    }

    const std::uint64_t master =
        scenario.traffic_seed ? *scenario.traffic_seed : seed;
    const std::vector<ArrivalSchedule> schedules =
        build_schedules(scenario.topology, scenario.traffic, scenario.horizon_s,
                        master);

    ScenarioOutputs out;
    out.servers.resize(n);
    if (threads < 1) threads = 1;
    threads = std::min<unsigned>(threads, static_cast<unsigned>(n));

    std::atomic<std::size_t> cursor{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= n) return;
            try {
                GenerationRequest req;
                req.schedule = schedules[i];
                req.mode = scenario.mode;
                req.seed = derive_seed(
                    master, {streams::kServer, static_cast<std::uint64_t>(i)});
                req.dt = scenario.dt;
                req.horizon_s = scenario.horizon_s;
                req.batch_size = scenario.batch_size;
                out.servers[i] = generate_server_trace(*per_server[i], req);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    out.hierarchy = aggregate(out.servers, scenario.topology, scenario.site);
    return out;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("scenario: cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("scenario: invalid JSON in " + path + ": " + e.what());
    }
    const std::filesystem::path base_dir =
        std::filesystem::path(path).parent_path();

    try {
        Scenario sc;
        const json& topo = j.at("topology");
        sc.topology.rows = topo.at("rows").get<int>();
        sc.topology.racks_per_row = topo.at("racks_per_row").get<int>();
        sc.topology.servers_per_rack = topo.at("servers_per_rack").get<int>();

        if (j.contains("site")) {
            sc.site.p_base_w = j["site"].value("p_base_w", 1000.0);
            sc.site.pue = j["site"].value("pue", 1.3);
        }

        const json& tr = j.at("traffic");
        const std::string mode = tr.at("mode").get<std::string>();
        if (mode == "independent") sc.traffic.mode = TrafficSpec::Mode::kIndependent;
        else if (mode == "shared_intensity")
            sc.traffic.mode = TrafficSpec::Mode::kSharedIntensity;
        else if (mode == "offset_replay")
            sc.traffic.mode = TrafficSpec::Mode::kOffsetReplay;
        else
            throw ConfigError("scenario: unknown traffic.mode '" + mode + "'");

        if (tr.contains("seed")) sc.traffic_seed = tr["seed"].get<std::uint64_t>();
        sc.traffic.rate = tr.value("rate_per_server", tr.value("rate_total", 0.0));
        if (tr.contains("intensity")) {
            sc.traffic.intensity = parse_intensity(tr["intensity"]);
            sc.traffic.has_intensity = true;
        }
        if (tr.contains("weights"))
            sc.traffic.weights = tr["weights"].get<std::vector<double>>();
        if (tr.contains("schedule_csv")) {
            sc.traffic.base_schedule = read_arrival_schedule(
                (base_dir / tr["schedule_csv"].get<std::string>()).string());
            sc.traffic.has_base_schedule = true;
        }
        sc.traffic.base_rate = tr.value("base_rate", 0.0);
        sc.traffic.t_offset_s = tr.value("t_offset_s", 0.0);

        // token length defaults: ~256-token prompts, ~64-token outputs
        sc.traffic.input_tokens.mu = std::log(256.0);
        sc.traffic.input_tokens.sigma = 0.5;
        sc.traffic.output_tokens.mu = std::log(64.0);
        sc.traffic.output_tokens.sigma = 0.5;
        if (tr.contains("tokens")) {
            const json& tok = tr["tokens"];
            if (tok.contains("n_in"))
                sc.traffic.input_tokens = parse_length(tok["n_in"], "n_in", base_dir);
            if (tok.contains("n_out"))
                sc.traffic.output_tokens =
                    parse_length(tok["n_out"], "n_out", base_dir);
        }

        const json& gen = j.at("generation");
        const std::string gmode = gen.value("mode", "auto");
        if (gmode != "auto") sc.mode = parse_generation_mode(gmode);
        sc.dt = gen.value("dt_s", 0.25);
        sc.horizon_s = gen.at("horizon_s").get<double>();
        sc.batch_size = gen.value("batch_size", 64);

        if (j.contains("output")) {
            sc.resolution_s = j["output"].value("resolution_s", 0.0);
            sc.ramp_window_s = j["output"].value("ramp_window_s", 900.0);
            if (j["output"].contains("levels"))
                sc.levels = j["output"]["levels"].get<std::vector<std::string>>();
        }
        if (sc.levels.empty()) sc.levels = {"site", "facility"};

        if (j.contains("assignments")) {
            const json& as = j["assignments"];
            if (as.contains("bundles"))
                for (const auto& b : as["bundles"])
                    sc.bundle_paths.push_back(
                        (base_dir / b.get<std::string>()).string());
            if (as.contains("server_bundle"))
                sc.server_bundle = as["server_bundle"].get<std::vector<int>>();
        }

        if (j.contains("baseline")) {
            const json& bl = j["baseline"];
            sc.tdp_nameplate_w = bl.value("tdp_nameplate_w", 0.0);
            if (bl.contains("lut")) {
                const json& lj = bl["lut"];
                LutSpec lut;
                lut.nameplate_w = lj.at("nameplate_w").get<double>();
                if (lj.contains("ratios")) {
                    const json& rj = lj["ratios"];
                    lut.prompt_ratio = rj.value("prompt", lut.prompt_ratio);
                    lut.decode_ratio = rj.value("decode", lut.decode_ratio);
                    lut.mixed_ratio = rj.value("mixed", lut.mixed_ratio);
                    lut.idle_ratio = rj.value("idle", lut.idle_ratio);
                }
                lut.overhead_w = lj.value("overhead_w", 0.0);
                lut.mixed_penalty = lj.value("mixed_penalty", 1.1);
                sc.lut = lut;
            }
        }

        sc.validate();
        return sc;
    } catch (const json::exception& e) {
        throw ConfigError("scenario: missing or mistyped field in " + path + ": " +
                          e.what());
    }
}

} // namespace powertrace
