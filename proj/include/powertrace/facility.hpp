#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "powertrace/types.hpp"

namespace powertrace {

// Row / rack / server hierarchy. Servers are indexed in (row, rack,
// server) order; that order also fixes the floating-point summation
// order, so aggregates are reproducible.
struct FacilityTopology {
    int rows = 1;
    int racks_per_row = 1;
    int servers_per_rack = 1;

    std::int64_t total_servers() const {
        return static_cast<std::int64_t>(rows) * racks_per_row * servers_per_rack;
    }
    void validate() const;
};

struct SiteAssumptions {
    double p_base_w = 1000.0; // non-GPU draw per server
    double pue = 1.3;

    void validate() const;
};

// IT power at each level includes p_base per server; facility applies the
// constant PUE factor on top of site IT power.
struct HierarchyTraces {
    std::vector<PowerTrace> racks; // rows * racks_per_row, row-major
    std::vector<PowerTrace> rows;
    PowerTrace site_it;
    PowerTrace facility;
};

HierarchyTraces aggregate(const std::vector<PowerTrace>& server_traces,
                          const FacilityTopology& topology,
                          const SiteAssumptions& site);

// Mean over non-overlapping windows of interval/dt input samples; energy
// conserving. Trailing partial window dropped with a warning.
PowerTrace resample(const PowerTrace& trace, double interval_s);

struct PlanningMetrics {
    double peak_w = 0.0;
    double average_w = 0.0;
    double peak_to_average = 0.0;
    double max_ramp_w = 0.0; // |mean(window j) - mean(window j-1)| max
    double load_factor = 0.0;
    double p95_w = 0.0;
    double cv = 0.0;
};

PlanningMetrics planning_metrics(const PowerTrace& trace, double ramp_window_s);

// Nearest-rank sample quantile, q in (0, 1].
double quantile(std::vector<double> samples, double q);

struct OversubscriptionPoint {
    int racks = 0;
    double worst_quantile_w = 0.0; // max over seeds
};

struct OversubscriptionResult {
    int max_racks = 0;       // largest count feasible across every seed
    int nameplate_racks = 0; // floor(limit / rack nameplate)
    std::vector<OversubscriptionPoint> curve;
};

// Adds racks one at a time, keeping per-seed running row sums, until the
// row-power quantile exceeds the limit for some seed. rack_source(i, seed)
// must return same-shape traces for a fixed seed.
OversubscriptionResult oversubscription_search(
    const std::function<PowerTrace(int, std::uint64_t)>& rack_source,
    double row_limit_w, double rack_nameplate_w, double q = 0.95, int n_seeds = 5,
    int max_racks = 4096);

} // namespace powertrace
