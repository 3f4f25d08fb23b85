#include "powertrace/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "powertrace/baselines.hpp"
#include "powertrace/bundle.hpp"
#include "powertrace/errors.hpp"
#include "powertrace/facility.hpp"
#include "powertrace/generator.hpp"
#include "powertrace/io.hpp"
#include "powertrace/log.hpp"
#include "powertrace/metrics.hpp"
#include "powertrace/rng.hpp"
#include "powertrace/scenario.hpp"

namespace powertrace {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json metrics_to_json(const PlanningMetrics& m) {
    return {{"peak_w", m.peak_w},
            {"average_w", m.average_w},
            {"peak_to_average", m.peak_to_average},
            {"max_ramp_w", m.max_ramp_w},
            {"load_factor", m.load_factor},
            {"p95_w", m.p95_w},
            {"cv", m.cv}};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw ConfigError("write failed for " + path);
}

void write_tidy_csv(const std::string& path, const json& flat) {
    std::string text = "metric,value\n";
    for (auto it = flat.begin(); it != flat.end(); ++it)
        text += it.key() + "," + format_double(it.value().get<double>()) + "\n";
    write_text(path, text);
}

// Ramp metrics need two whole windows; shrink the window for short traces
// rather than failing a scenario run.
std::optional<PlanningMetrics> metrics_with_fallback(const PowerTrace& trace,
                                                     double window_s) {
    if (trace.samples.size() < 2) return std::nullopt;
    const double duration = trace.duration();
    if (2.0 * window_s > duration) {
        const double shrunk = trace.dt * static_cast<double>(trace.samples.size() / 2);
        log_warn("ramp window " + format_double(window_s) +
                 " s does not fit twice in " + format_double(duration) +
                 " s; using " + format_double(shrunk) + " s");
        window_s = shrunk;
    }
    return planning_metrics(trace, window_s);
}

std::string indexed_name(const char* prefix, std::size_t i, std::size_t count) {
    const int width = count > 999 ? 4 : 3;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%0*zu.csv", prefix, width, i);
    return buf;
}

ArrivalSchedule schedule_from_records(const std::vector<RequestLogRecord>& records) {
    ArrivalSchedule s;
    s.requests.reserve(records.size());
    for (const auto& r : records) s.requests.push_back({r.arrival_s, r.n_in, r.n_out});
    return s;
}

std::vector<RequestLifetime> lifetimes_from_records(
    const std::vector<RequestLogRecord>& records) {
    std::vector<RequestLifetime> l;
    l.reserve(records.size());
    for (const auto& r : records) l.push_back({r.ttft_s, r.tbt_s.value_or(0.0)});
    return l;
}

struct FitSurrogateOpts {
    std::string requests, out;
};

void cmd_fit_surrogate(const FitSurrogateOpts& o) {
    const auto records = read_request_log(o.requests);
    const LatencySurrogate s = fit_latency_surrogate(records);
    save_surrogate(s, o.out);
    std::cout << "fit " << records.size() << " records: alpha0="
              << format_double(s.alpha0) << " alpha1=" << format_double(s.alpha1)
              << " sigma_ttft=" << format_double(s.sigma_ttft) << "\n";
}

struct FitStatesOpts {
    std::vector<std::string> traces;
    int k_min = 2, k_max = 16;
    std::uint64_t seed = 0;
    std::string out;
};

void cmd_fit_states(const FitStatesOpts& o) {
    std::vector<PowerTrace> traces;
    for (const auto& path : o.traces) traces.push_back(read_power_trace(path));
    const StateCatalog catalog = build_catalog(traces, o.k_min, o.k_max, o.seed);
    save_catalog(catalog, o.out);
    std::cout << "selected k=" << catalog.k << " states, mu=[";
    for (int i = 0; i < catalog.k; ++i)
        std::cout << (i ? ", " : "") << format_double(catalog.mu[i]);
    std::cout << "] W\n";
}

struct TrainOpts {
    std::vector<std::string> traces, requests;
    std::string catalog, out;
    TrainingConfig config;
    int batch_size = 64;
    std::uint64_t seed = 0;
};

void cmd_train_classifier(const TrainOpts& o) {
    if (o.traces.size() != o.requests.size() || o.traces.empty())
        throw ConfigError("train-classifier: need matching --trace/--requests pairs");
    const StateCatalog catalog = load_catalog(o.catalog);

    std::vector<FeatureSeries> features;
    std::vector<StateLabels> labels;
    for (std::size_t i = 0; i < o.traces.size(); ++i) {
        const PowerTrace trace = read_power_trace(o.traces[i]);
        const auto records = read_request_log(o.requests[i]);
        QueueConfig queue;
        queue.batch_size = o.batch_size;
        queue.dt = trace.dt;
        const ActiveIntervalSet intervals = simulate_queue(
            schedule_from_records(records), lifetimes_from_records(records), queue);
        features.push_back(compute_features(intervals, trace.dt, trace.duration()));
        labels.push_back(assign_states(trace, catalog));
        if (features.back().size() != labels.back().size())
            throw ConfigError("train-classifier: feature/label length mismatch for " +
                              o.traces[i]);
    }

    ClassifierModel model;
    const TrainingReport report =
        train_classifier(model, features, labels, catalog.k, o.config, o.seed);
    save_classifier(model, o.out);
    std::cout << "trained " << report.epochs_run << " epochs, best epoch "
              << report.best_epoch << ", val accuracy "
              << format_double(report.val_accuracy) << ", final loss "
              << format_double(report.final_train_loss) << "\n";
}

struct BuildBundleOpts {
    std::string hardware, model;
    int tensor_parallel = 1;
    bool moe = false;
    std::string surrogate, catalog, classifier, out;
};

void cmd_build_bundle(const BuildBundleOpts& o) {
    ModelBundle b;
    b.config = {o.hardware, o.model, o.tensor_parallel, o.moe};
    b.surrogate = load_surrogate(o.surrogate);
    b.catalog = load_catalog(o.catalog);
    b.classifier = load_classifier(o.classifier);
    save_bundle(b, o.out);
    std::cout << "bundle " << b.config.key() << " -> " << o.out << "\n";
}

struct GenerateOpts {
    std::vector<std::string> bundles;
    std::string scenario, schedule, out;
    std::string mode = "auto";
    double dt = 0.25;
    double horizon = 0.0;
    int batch_size = 64;
    std::uint64_t seed = 0;
    unsigned threads = 0;
};

void write_level_outputs(const Scenario& sc, const ScenarioOutputs& outputs,
                         const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto has_level = [&sc](const char* level) {
        return std::find(sc.levels.begin(), sc.levels.end(), level) !=
               sc.levels.end();
    };
    auto finalize = [&sc](const PowerTrace& t) {
        return sc.resolution_s > 0.0 ? resample(t, sc.resolution_s) : t;
    };
    json all_metrics;
    auto emit = [&](const std::string& name, const PowerTrace& raw, json& slot) {
        const PowerTrace t = finalize(raw);
        write_power_trace((fs::path(out_dir) / (name + ".csv")).string(), t);
        if (auto m = metrics_with_fallback(t, sc.ramp_window_s))
            slot = metrics_to_json(*m);
    };

    if (has_level("server")) {
        json arr = json::array();
        for (std::size_t i = 0; i < outputs.servers.size(); ++i) {
            json slot;
            const std::string name =
                indexed_name("server", i, outputs.servers.size());
            emit(name.substr(0, name.size() - 4), outputs.servers[i], slot);
            arr.push_back(std::move(slot));
        }
        all_metrics["server"] = std::move(arr);
    }
    if (has_level("rack")) {
        json arr = json::array();
        for (std::size_t i = 0; i < outputs.hierarchy.racks.size(); ++i) {
            json slot;
            const std::string name =
                indexed_name("rack", i, outputs.hierarchy.racks.size());
            emit(name.substr(0, name.size() - 4), outputs.hierarchy.racks[i], slot);
            arr.push_back(std::move(slot));
        }
        all_metrics["rack"] = std::move(arr);
    }
    if (has_level("row")) {
        json arr = json::array();
        for (std::size_t i = 0; i < outputs.hierarchy.rows.size(); ++i) {
            json slot;
            const std::string name =
                indexed_name("row", i, outputs.hierarchy.rows.size());
            emit(name.substr(0, name.size() - 4), outputs.hierarchy.rows[i], slot);
            arr.push_back(std::move(slot));
        }
        all_metrics["row"] = std::move(arr);
    }
    if (has_level("site")) {
        json slot;
        emit("site_it", outputs.hierarchy.site_it, slot);
        all_metrics["site"] = std::move(slot);
    }
    if (has_level("facility")) {
        json slot;
        emit("facility", outputs.hierarchy.facility, slot);
        all_metrics["facility"] = std::move(slot);
    }
    write_text((fs::path(out_dir) / "metrics.json").string(),
               all_metrics.dump(2) + "\n");
}

void cmd_generate(const GenerateOpts& o) {
    if (!o.scenario.empty()) {
        const Scenario sc = load_scenario(o.scenario);
        std::vector<ModelBundle> bundles;
        const auto& paths = sc.bundle_paths.empty() ? o.bundles : sc.bundle_paths;
        if (paths.empty())
            throw ConfigError("generate: need --bundle or scenario assignments");
        for (const auto& p : paths) bundles.push_back(load_bundle(p));
        const unsigned threads =
            o.threads ? o.threads : std::max(1u, std::thread::hardware_concurrency());
        const ScenarioOutputs outputs = run_scenario(sc, bundles, o.seed, threads);
        write_level_outputs(sc, outputs, o.out);
        std::cout << "scenario with " << outputs.servers.size() << " servers -> "
                  << o.out << "\n";
        return;
    }
    if (o.schedule.empty())
        throw ConfigError("generate: need --scenario or --schedule");
    if (o.bundles.size() != 1)
        throw ConfigError("generate: single-server mode takes exactly one --bundle");
    const ModelBundle bundle = load_bundle(o.bundles[0]);
    GenerationRequest req;
    req.schedule = read_arrival_schedule(o.schedule);
    if (o.mode != "auto") req.mode = parse_generation_mode(o.mode);
    req.seed = o.seed;
    req.dt = o.dt;
    if (o.horizon > 0.0) req.horizon_s = o.horizon;
    req.batch_size = o.batch_size;
    const PowerTrace trace = generate_server_trace(bundle, req);
    write_power_trace(o.out, trace);
    std::cout << trace.samples.size() << " samples at dt=" << format_double(trace.dt)
              << " -> " << o.out << "\n";
}

struct AggregateOpts {
    std::vector<std::string> traces;
    int rows = 1, racks_per_row = 1, servers_per_rack = 1;
    double p_base_w = 1000.0, pue = 1.3;
    double resolution = 0.0, ramp_window = 900.0;
    std::vector<std::string> levels = {"site", "facility"};
    std::string out;
};

void cmd_aggregate(const AggregateOpts& o) {
    std::vector<PowerTrace> servers;
    for (const auto& p : o.traces) servers.push_back(read_power_trace(p));
    Scenario sc; // reuse the level/resolution writer
    sc.topology = {o.rows, o.racks_per_row, o.servers_per_rack};
    sc.site = {o.p_base_w, o.pue};
    sc.resolution_s = o.resolution;
    sc.ramp_window_s = o.ramp_window;
    sc.levels = o.levels;
    for (const auto& level : sc.levels)
        if (level != "server" && level != "rack" && level != "row" &&
            level != "site" && level != "facility")
            throw ConfigError("aggregate: unknown level '" + level + "'");
    ScenarioOutputs outputs;
    outputs.servers = servers;
    outputs.hierarchy = aggregate(servers, sc.topology, sc.site);
    write_level_outputs(sc, outputs, o.out);
    std::cout << "aggregated " << servers.size() << " servers -> " << o.out << "\n";
}

struct EvaluateOpts {
    std::string syn, meas, out, csv;
    int max_lag = 120;
};

void cmd_evaluate(const EvaluateOpts& o) {
    const PowerTrace syn = read_power_trace(o.syn);
    const PowerTrace meas = read_power_trace(o.meas);
    json j = {{"delta_energy", delta_energy(syn, meas)},
              {"ks", ks_statistic(syn.samples, meas.samples)},
              {"acf_r2", acf_r2(syn, meas, o.max_lag)},
              {"nrmse", nrmse(syn, meas)}};
    std::cout << j.dump(2) << "\n";
    if (!o.out.empty()) write_text(o.out, j.dump(2) + "\n");
    if (!o.csv.empty()) write_tidy_csv(o.csv, j);
}

struct BaselineOpts {
    std::string type, out, schedule, surrogate;
    std::vector<std::string> traces;
    double nameplate_w = 0.0, horizon = 0.0, dt = 0.25;
    double prompt_ratio = 0.9, decode_ratio = 0.5, mixed_ratio = 0.92,
           idle_ratio = 0.12, overhead_w = 0.0, mixed_penalty = 1.1;
    int batch_size = 64;
    std::uint64_t seed = 0;
};

void cmd_baseline(const BaselineOpts& o) {
    if (o.horizon <= 0.0) throw ConfigError("baseline: --horizon must be > 0");
    if (o.dt <= 0.0) throw ConfigError("baseline: --dt must be > 0");
    const auto length = static_cast<std::size_t>(
        std::ceil(o.horizon / o.dt - 1e-9));
    PowerTrace trace;
    if (o.type == "tdp") {
        trace = tdp_trace(o.nameplate_w, length, o.dt);
    } else if (o.type == "mean") {
        std::vector<PowerTrace> training;
        for (const auto& p : o.traces) training.push_back(read_power_trace(p));
        trace = mean_trace(training, length, o.dt);
    } else if (o.type == "lut") {
        if (o.schedule.empty() || o.surrogate.empty())
            throw ConfigError("baseline lut: need --schedule and --surrogate");
        const ArrivalSchedule schedule = read_arrival_schedule(o.schedule);
        const LatencySurrogate surrogate = load_surrogate(o.surrogate);
        const auto lifetimes = sample_lifetimes(
            schedule, surrogate, derive_seed(o.seed, {streams::kLifetimes}));
        QueueConfig queue;
        queue.batch_size = o.batch_size;
        queue.dt = o.dt;
        LutSpec lut;
        lut.nameplate_w = o.nameplate_w;
        lut.prompt_ratio = o.prompt_ratio;
        lut.decode_ratio = o.decode_ratio;
        lut.mixed_ratio = o.mixed_ratio;
        lut.idle_ratio = o.idle_ratio;
        lut.overhead_w = o.overhead_w;
        lut.mixed_penalty = o.mixed_penalty;
        trace = lut_trace(schedule, lifetimes, queue, lut, o.dt, o.horizon);
    } else {
        throw ConfigError("baseline: unknown --type '" + o.type +
                          "' (expected tdp|mean|lut)");
    }
    write_power_trace(o.out, trace);
    std::cout << o.type << " baseline, " << trace.samples.size() << " samples -> "
              << o.out << "\n";
}

struct PlanOversubOpts {
    std::string scenario, out;
    std::vector<std::string> bundles;
    double row_limit_w = 0.0, quantile = 0.95, rack_nameplate_w = 0.0;
    int seeds = 5, max_racks = 4096;
    std::uint64_t seed = 0;
};

void cmd_plan_oversub(const PlanOversubOpts& o) {
    const Scenario sc = load_scenario(o.scenario);
    const auto& paths = sc.bundle_paths.empty() ? o.bundles : sc.bundle_paths;
    if (paths.empty())
        throw ConfigError("plan-oversub: need --bundle or scenario assignments");
    const ModelBundle bundle = load_bundle(paths.front());
    if (o.rack_nameplate_w <= 0.0)
        throw ConfigError("plan-oversub: --rack-nameplate-w must be > 0");

    FacilityTopology rack_topo{1, 1, sc.topology.servers_per_rack};
    auto rack_source = [&](int rack, std::uint64_t eval_seed) {
        const std::uint64_t rack_seed =
            derive_seed(o.seed, {streams::kRack, static_cast<std::uint64_t>(rack),
                                 eval_seed});
        const auto schedules =
            build_schedules(rack_topo, sc.traffic, sc.horizon_s, rack_seed);
        std::vector<PowerTrace> servers(schedules.size());
        for (std::size_t j = 0; j < schedules.size(); ++j) {
            GenerationRequest req;
            req.schedule = schedules[j];
            req.mode = sc.mode;
            req.seed = derive_seed(rack_seed,
                                   {streams::kServer, static_cast<std::uint64_t>(j)});
            req.dt = sc.dt;
            req.horizon_s = sc.horizon_s;
            req.batch_size = sc.batch_size;
            servers[j] = generate_server_trace(bundle, req);
        }
        return aggregate(servers, rack_topo, sc.site).racks.front();
    };

    const OversubscriptionResult result = oversubscription_search(
        rack_source, o.row_limit_w, o.rack_nameplate_w, o.quantile, o.seeds,
        o.max_racks);

    fs::create_directories(o.out);
    std::string curve = "racks,worst_quantile_w\n";
    for (const auto& pt : result.curve)
        curve += std::to_string(pt.racks) + "," +
                 format_double(pt.worst_quantile_w) + "\n";
    write_text((fs::path(o.out) / "oversub_curve.csv").string(), curve);
    json j = {{"max_racks", result.max_racks},
              {"nameplate_racks", result.nameplate_racks},
              {"row_limit_w", o.row_limit_w},
              {"quantile", o.quantile},
              {"seeds", o.seeds}};
    write_text((fs::path(o.out) / "plan.json").string(), j.dump(2) + "\n");
    std::cout << "quantile-feasible racks: " << result.max_racks
              << " (nameplate: " << result.nameplate_racks << ") -> " << o.out
              << "\n";
}

struct MetricsOpts {
    std::string trace, out, csv;
    double ramp_window = 900.0, resolution = 0.0;
};

void cmd_metrics(const MetricsOpts& o) {
    PowerTrace trace = read_power_trace(o.trace);
    if (o.resolution > 0.0) trace = resample(trace, o.resolution);
    const PlanningMetrics m = planning_metrics(trace, o.ramp_window);
    const json j = metrics_to_json(m);
    std::cout << j.dump(2) << "\n";
    if (!o.out.empty()) write_text(o.out, j.dump(2) + "\n");
    if (!o.csv.empty()) write_tidy_csv(o.csv, j);
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"power-state trace modeling and facility planning toolkit"};
    app.require_subcommand(1);

    FitSurrogateOpts fs_opts;
    auto* fit_sur = app.add_subcommand(
        "fit-surrogate", "Fit the request latency surrogate from a request log");
    fit_sur->add_option("--requests", fs_opts.requests,
                        "requests.csv (arrival_s,n_in,n_out,ttft_s,tbt_s)")
        ->required();
    fit_sur->add_option("--out", fs_opts.out, "output surrogate JSON")->required();
    fit_sur->callback([&] { cmd_fit_surrogate(fs_opts); });

    FitStatesOpts st_opts;
    auto* fit_states = app.add_subcommand(
        "fit-states", "Fit the power state catalog from measured traces");
    fit_states->add_option("--trace", st_opts.traces, "trace.csv (repeatable)")
        ->required();
    fit_states->add_option("--k-min", st_opts.k_min, "smallest state count tried");
    fit_states->add_option("--k-max", st_opts.k_max, "largest state count tried");
    fit_states->add_option("--seed", st_opts.seed, "random seed");
    fit_states->add_option("--out", st_opts.out, "output catalog JSON")->required();
    fit_states->callback([&] { cmd_fit_states(st_opts); });

    TrainOpts tr_opts;
    auto* train = app.add_subcommand(
        "train-classifier",
        "Train the workload-to-state classifier against catalog labels");
    train->add_option("--trace", tr_opts.traces, "measured trace.csv (repeatable)")
        ->required();
    train
        ->add_option("--requests", tr_opts.requests,
                     "matching requests.csv (repeatable, same order)")
        ->required();
    train->add_option("--catalog", tr_opts.catalog, "catalog JSON")->required();
    train->add_option("--epochs", tr_opts.config.epochs, "training epochs");
    train->add_option("--learning-rate", tr_opts.config.learning_rate, "step size");
    train->add_option("--chunk-len", tr_opts.config.chunk_len,
                      "training window length in steps");
    train->add_option("--hidden", tr_opts.config.hidden, "hidden units per direction");
    train->add_option("--batch-chunks", tr_opts.config.batch_chunks,
                      "chunks per optimizer step");
    train->add_option("--patience", tr_opts.config.patience,
                      "epochs without improvement before stopping");
    train->add_option("--batch-size", tr_opts.batch_size, "serving batch slots");
    train->add_option("--seed", tr_opts.seed, "random seed");
    train->add_option("--out", tr_opts.out, "output classifier JSON")->required();
    train->callback([&] { cmd_train_classifier(tr_opts); });

    BuildBundleOpts bb_opts;
    auto* build = app.add_subcommand(
        "build-bundle", "Combine surrogate, catalog and classifier into one bundle");
    build->add_option("--hardware", bb_opts.hardware, "accelerator name")->required();
    build->add_option("--model", bb_opts.model, "serving model name")->required();
    build->add_option("--tensor-parallel", bb_opts.tensor_parallel, "TP degree");
    build->add_flag("--moe", bb_opts.moe, "mixture-of-experts model (ar1 default)");
    build->add_option("--surrogate", bb_opts.surrogate, "surrogate JSON")->required();
    build->add_option("--catalog", bb_opts.catalog, "catalog JSON")->required();
    build->add_option("--classifier", bb_opts.classifier, "classifier JSON")
        ->required();
    build->add_option("--out", bb_opts.out, "output bundle.json")->required();
    build->callback([&] { cmd_build_bundle(bb_opts); });

    GenerateOpts gen_opts;
    auto* gen = app.add_subcommand(
        "generate", "Generate synthetic traces for a scenario or one schedule");
    gen->add_option("--bundle", gen_opts.bundles, "bundle.json (repeatable)");
    gen->add_option("--scenario", gen_opts.scenario, "scenario.json");
    gen->add_option("--schedule", gen_opts.schedule,
                    "schedule.csv for single-server generation");
    gen->add_option("--mode", gen_opts.mode, "iid|ar1|auto (single-server mode)");
    gen->add_option("--dt", gen_opts.dt, "sample interval, seconds");
    gen->add_option("--horizon", gen_opts.horizon, "trace length, seconds");
    gen->add_option("--batch-size", gen_opts.batch_size, "serving batch slots");
    gen->add_option("--seed", gen_opts.seed, "random seed");
    gen->add_option("--threads", gen_opts.threads,
                    "worker threads (default: hardware parallelism)");
    gen->add_option("--out", gen_opts.out, "output directory (scenario) or file")
        ->required();
    gen->callback([&] { cmd_generate(gen_opts); });

    AggregateOpts ag_opts;
    auto* agg = app.add_subcommand(
        "aggregate", "Aggregate measured/synthetic server traces to site level");
    agg->add_option("--trace", ag_opts.traces, "server trace.csv (repeatable)")
        ->required();
    agg->add_option("--rows", ag_opts.rows, "rows");
    agg->add_option("--racks-per-row", ag_opts.racks_per_row, "racks per row");
    agg->add_option("--servers-per-rack", ag_opts.servers_per_rack,
                    "servers per rack");
    agg->add_option("--p-base-w", ag_opts.p_base_w, "non-GPU watts per server");
    agg->add_option("--pue", ag_opts.pue, "power usage effectiveness");
    agg->add_option("--resolution", ag_opts.resolution,
                    "output resolution, seconds (0 = native)");
    agg->add_option("--ramp-window", ag_opts.ramp_window, "ramp window, seconds");
    agg->add_option("--levels", ag_opts.levels,
                    "levels to write: server rack row site facility");
    agg->add_option("--out", ag_opts.out, "output directory")->required();
    agg->callback([&] { cmd_aggregate(ag_opts); });

    EvaluateOpts ev_opts;
    auto* eval = app.add_subcommand(
        "evaluate", "Fidelity metrics between a synthetic and a measured trace");
    eval->add_option("--syn", ev_opts.syn, "synthetic trace.csv")->required();
    eval->add_option("--meas", ev_opts.meas, "measured trace.csv")->required();
    eval->add_option("--max-lag", ev_opts.max_lag, "ACF lag horizon");
    eval->add_option("--out", ev_opts.out, "write metrics JSON here too");
    eval->add_option("--csv", ev_opts.csv, "write tidy metric,value CSV");
    eval->callback([&] { cmd_evaluate(ev_opts); });

    BaselineOpts bl_opts;
    auto* base = app.add_subcommand("baseline",
                                    "Generate a tdp/mean/lut baseline trace");
    base->add_option("--type", bl_opts.type, "tdp|mean|lut")->required();
    base->add_option("--nameplate-w", bl_opts.nameplate_w, "per-server nameplate");
    base->add_option("--trace", bl_opts.traces,
                     "training trace.csv (mean baseline, repeatable)");
    base->add_option("--schedule", bl_opts.schedule, "schedule.csv (lut baseline)");
    base->add_option("--surrogate", bl_opts.surrogate, "surrogate JSON (lut)");
    base->add_option("--horizon", bl_opts.horizon, "trace length, seconds")
        ->required();
    base->add_option("--dt", bl_opts.dt, "sample interval, seconds");
    base->add_option("--prompt-ratio", bl_opts.prompt_ratio, "prompt phase ratio");
    base->add_option("--decode-ratio", bl_opts.decode_ratio, "decode phase ratio");
    base->add_option("--mixed-ratio", bl_opts.mixed_ratio, "mixed phase ratio");
    base->add_option("--idle-ratio", bl_opts.idle_ratio, "idle phase ratio");
    base->add_option("--overhead-w", bl_opts.overhead_w, "fixed non-GPU watts");
    base->add_option("--mixed-penalty", bl_opts.mixed_penalty,
                     "prefill slowdown in mixed steps");
    base->add_option("--batch-size", bl_opts.batch_size, "serving batch slots");
    base->add_option("--seed", bl_opts.seed, "random seed (lut lifetimes)");
    base->add_option("--out", bl_opts.out, "output trace.csv")->required();
    base->callback([&] { cmd_baseline(bl_opts); });

    PlanOversubOpts po_opts;
    auto* plan = app.add_subcommand(
        "plan-oversub", "Quantile-based rack oversubscription search per row");
    plan->add_option("--scenario", po_opts.scenario, "scenario.json")->required();
    plan->add_option("--bundle", po_opts.bundles, "bundle.json (repeatable)");
    plan->add_option("--row-limit-w", po_opts.row_limit_w, "row power limit, watts")
        ->required();
    plan->add_option("--quantile", po_opts.quantile, "feasibility quantile");
    plan->add_option("--seeds", po_opts.seeds, "seeds per rack count");
    plan->add_option("--rack-nameplate-w", po_opts.rack_nameplate_w,
                     "rack nameplate for the static comparator")
        ->required();
    plan->add_option("--max-racks", po_opts.max_racks, "search cap");
    plan->add_option("--seed", po_opts.seed, "master random seed");
    plan->add_option("--out", po_opts.out, "output directory")->required();
    plan->callback([&] { cmd_plan_oversub(po_opts); });

    MetricsOpts mt_opts;
    auto* met = app.add_subcommand("metrics",
                                   "Planning metrics for a single trace");
    met->add_option("--trace", mt_opts.trace, "trace.csv")->required();
    met->add_option("--ramp-window", mt_opts.ramp_window, "ramp window, seconds");
    met->add_option("--resolution", mt_opts.resolution,
                    "resample before computing (0 = native)");
    met->add_option("--out", mt_opts.out, "write metrics JSON here too");
    met->add_option("--csv", mt_opts.csv, "write tidy metric,value CSV");
    met->callback([&] { cmd_metrics(mt_opts); });

    std::vector<const char*> argv;
    argv.push_back("powertrace");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

} // namespace powertrace
