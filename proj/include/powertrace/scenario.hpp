#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "powertrace/baselines.hpp"
#include "powertrace/facility.hpp"
#include "powertrace/generator.hpp"
#include "powertrace/workload.hpp"

namespace powertrace {

// How request streams are spread across servers:
//   independent      each server draws its own Poisson process
//   shared_intensity one master process from a common rate function,
//                    arrivals assigned to servers by thinning weights
//   offset_replay    one base schedule replayed per server with a random
//                    time offset, wrapped at the horizon
struct TrafficSpec {
    enum class Mode { kIndependent, kSharedIntensity, kOffsetReplay };
    Mode mode = Mode::kIndependent;

    double rate = 0.0;       // per-server (independent) or total (shared)
    PiecewiseRate intensity; // piecewise alternative to a flat rate
    bool has_intensity = false;

    std::vector<double> weights; // shared mode; empty = uniform 1/N

    ArrivalSchedule base_schedule; // offset_replay
    bool has_base_schedule = false;
    double base_rate = 0.0; // offset_replay without explicit schedule
    double t_offset_s = 0.0;

    LengthDistribution input_tokens;
    LengthDistribution output_tokens;

    void validate(std::int64_t n_servers) const;
};

std::vector<ArrivalSchedule> build_schedules(const FacilityTopology& topology,
                                             const TrafficSpec& traffic,
                                             double horizon_s, std::uint64_t seed);

// Parsed scenario.json. Bundle paths are resolved relative to the
// scenario file's directory.
struct Scenario {
    FacilityTopology topology;
    SiteAssumptions site;
    TrafficSpec traffic;
    std::optional<std::uint64_t> traffic_seed; // overrides the CLI seed if set

    std::optional<GenerationMode> mode; // nullopt: per-config default
    double dt = 0.25;
    double horizon_s = 0.0;
    int batch_size = 64;

    double resolution_s = 0.0; // 0 = native dt
    double ramp_window_s = 900.0;
    std::vector<std::string> levels;

    std::vector<std::string> bundle_paths; // optional; CLI may supply one
    std::vector<int> server_bundle;        // per-server index, default all 0

    std::optional<LutSpec> lut;
    double tdp_nameplate_w = 0.0;

    void validate() const;
};

Scenario load_scenario(const std::string& path);

struct ScenarioOutputs {
    std::vector<PowerTrace> servers; // modeled server draw, no p_base
    HierarchyTraces hierarchy;
};

// Builds schedules, generates every server trace (fanning out over
// `threads`), and aggregates. Per-server seeds are derived from the
// server index, so results do not depend on the thread count.
ScenarioOutputs run_scenario(const Scenario& scenario,
                             const std::vector<ModelBundle>& bundles,
                             std::uint64_t seed, unsigned threads = 1);

} // namespace powertrace
