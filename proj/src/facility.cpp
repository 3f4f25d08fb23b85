#include "powertrace/facility.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "powertrace/errors.hpp"
#include "powertrace/log.hpp"

namespace powertrace {

namespace {

struct Kahan {
    double sum = 0.0, comp = 0.0;
    void add(double v) {
        const double y = v - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
};

// Elementwise compensated sum of the given traces (+ offset per trace).
PowerTrace sum_traces(const std::vector<const PowerTrace*>& parts,
                      double per_trace_offset) {
    PowerTrace out;
    out.dt = parts.front()->dt;
    out.start_time = parts.front()->start_time;
    const std::size_t n = parts.front()->samples.size();
    out.samples.assign(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        Kahan acc;
        for (const PowerTrace* p : parts) acc.add(p->samples[t] + per_trace_offset);
        out.samples[t] = acc.sum;
    }
    return out;
}

} // namespace

void FacilityTopology::validate() const {
    if (rows < 1 || racks_per_row < 1 || servers_per_rack < 1)
        throw ConfigError("topology: rows, racks_per_row, servers_per_rack must be >= 1");
}

void SiteAssumptions::validate() const {
    if (p_base_w < 0.0) throw ConfigError("site: p_base_w must be >= 0");
    if (pue < 1.0) throw ConfigError("site: pue must be >= 1");
}

HierarchyTraces aggregate(const std::vector<PowerTrace>& server_traces,
                          const FacilityTopology& topology,
                          const SiteAssumptions& site) {
    topology.validate();
    site.validate();
    const auto n_servers = static_cast<std::size_t>(topology.total_servers());
    if (server_traces.size() != n_servers)
        throw AggregationError("aggregate: expected " + std::to_string(n_servers) +
                               " server traces, got " +
                               std::to_string(server_traces.size()));
    const double dt = server_traces.front().dt;
    const std::size_t len = server_traces.front().samples.size();
    for (std::size_t i = 0; i < server_traces.size(); ++i) {
        if (server_traces[i].dt != dt)
            throw AggregationError("aggregate: server " + std::to_string(i) +
                                   " has dt " + std::to_string(server_traces[i].dt) +
                                   " != " + std::to_string(dt) + "; resample first");
        if (server_traces[i].samples.size() != len)
            throw AggregationError("aggregate: server " + std::to_string(i) +
                                   " has length " +
                                   std::to_string(server_traces[i].samples.size()) +
                                   " != " + std::to_string(len));
    }

    HierarchyTraces h;
    std::size_t server_idx = 0;
    for (int r = 0; r < topology.rows; ++r) {
        std::vector<const PowerTrace*> rack_parts;
        for (int k = 0; k < topology.racks_per_row; ++k) {
            std::vector<const PowerTrace*> servers;
            for (int s = 0; s < topology.servers_per_rack; ++s)
                servers.push_back(&server_traces[server_idx++]);
            h.racks.push_back(sum_traces(servers, site.p_base_w));
        }
        const std::size_t rack_base = h.racks.size() - topology.racks_per_row;
        for (int k = 0; k < topology.racks_per_row; ++k)
            rack_parts.push_back(&h.racks[rack_base + k]);
        h.rows.push_back(sum_traces(rack_parts, 0.0));
    }
    std::vector<const PowerTrace*> row_parts;
    for (const auto& row : h.rows) row_parts.push_back(&row);
    h.site_it = sum_traces(row_parts, 0.0);

    h.facility = h.site_it;
    for (double& v : h.facility.samples) v *= site.pue;
    return h;
}

PowerTrace resample(const PowerTrace& trace, double interval_s) {
    if (trace.samples.empty()) throw AggregationError("resample: empty trace");
    if (interval_s < trace.dt)
        throw AggregationError("resample: interval " + std::to_string(interval_s) +
                               " is finer than dt " + std::to_string(trace.dt));
    const double ratio = interval_s / trace.dt;
    const auto k = static_cast<std::int64_t>(std::llround(ratio));
    if (k < 1 || std::abs(ratio - static_cast<double>(k)) > 1e-6 * ratio)
        throw AggregationError("resample: interval " + std::to_string(interval_s) +
                               " is not an integer multiple of dt " +
                               std::to_string(trace.dt));
    if (k == 1) return trace;

    const std::size_t n_out = trace.samples.size() / static_cast<std::size_t>(k);
    const std::size_t dropped =
        trace.samples.size() - n_out * static_cast<std::size_t>(k);
    if (dropped > 0)
        log_warn("resample: dropping trailing partial window of " +
                 std::to_string(dropped) + " samples");
    if (n_out == 0) throw AggregationError("resample: trace shorter than interval");

    PowerTrace out;
    out.start_time = trace.start_time;
    out.dt = trace.dt * static_cast<double>(k);
    out.samples.resize(n_out);
    for (std::size_t w = 0; w < n_out; ++w) {
        Kahan acc;
        for (std::int64_t j = 0; j < k; ++j)
            acc.add(trace.samples[w * static_cast<std::size_t>(k) +
                                  static_cast<std::size_t>(j)]);
        out.samples[w] = acc.sum / static_cast<double>(k);
    }
    return out;
}

double quantile(std::vector<double> samples, double q) {
    if (samples.empty()) throw MetricError("quantile: empty sample set");
    if (q <= 0.0 || q > 1.0) throw MetricError("quantile: q must be in (0, 1]");
    std::sort(samples.begin(), samples.end());
    // nearest-rank: the ceil(q*n)-th smallest sample
    const auto rank = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(samples.size()) - 1e-9));
    return samples[std::min(samples.size() - 1, rank == 0 ? 0 : rank - 1)];
}

PlanningMetrics planning_metrics(const PowerTrace& trace, double ramp_window_s) {
    if (trace.samples.empty()) throw MetricError("planning_metrics: empty trace");
    const auto window = static_cast<std::size_t>(
        std::llround(ramp_window_s / trace.dt));
    if (window < 1)
        throw MetricError("planning_metrics: ramp window shorter than dt");
    if (trace.samples.size() < 2 * window)
        throw MetricError("planning_metrics: trace must cover >= 2 ramp windows");

    PlanningMetrics m;
    m.peak_w = *std::max_element(trace.samples.begin(), trace.samples.end());
    m.average_w = trace.mean();
    if (m.average_w <= 0.0)
        throw MetricError("planning_metrics: zero-mean trace, CV undefined");
    m.peak_to_average = m.peak_w / m.average_w;
    m.load_factor = m.average_w / m.peak_w;

    const std::size_t n_windows = trace.samples.size() / window;
    double prev_mean = 0.0;
    for (std::size_t w = 0; w < n_windows; ++w) {
        Kahan acc;
        for (std::size_t j = 0; j < window; ++j) acc.add(trace.samples[w * window + j]);
        const double mean_w = acc.sum / static_cast<double>(window);
        if (w > 0) m.max_ramp_w = std::max(m.max_ramp_w, std::abs(mean_w - prev_mean));
        prev_mean = mean_w;
    }

    m.p95_w = quantile(trace.samples, 0.95);

    Kahan var;
    for (double v : trace.samples) var.add((v - m.average_w) * (v - m.average_w));
    m.cv = std::sqrt(var.sum / static_cast<double>(trace.samples.size())) / m.average_w;
    return m;
}

OversubscriptionResult oversubscription_search(
    const std::function<PowerTrace(int, std::uint64_t)>& rack_source,
    double row_limit_w, double rack_nameplate_w, double q, int n_seeds,
    int max_racks) {
    if (row_limit_w <= 0.0)
        throw ConfigError("oversubscription_search: row limit must be > 0");
    if (rack_nameplate_w <= 0.0)
        throw ConfigError("oversubscription_search: rack nameplate must be > 0");
    if (n_seeds < 1) throw ConfigError("oversubscription_search: n_seeds must be >= 1");

    OversubscriptionResult result;
    result.nameplate_racks =
        static_cast<int>(std::floor(row_limit_w / rack_nameplate_w + 1e-9));

    std::vector<std::vector<double>> row_sum(n_seeds); // running per-seed row power
    for (int count = 1; count <= max_racks; ++count) {
        double worst = 0.0;
        for (int s = 0; s < n_seeds; ++s) {
            const PowerTrace rack =
                rack_source(count - 1, static_cast<std::uint64_t>(s));
            if (rack.samples.empty())
                throw AggregationError("oversubscription_search: empty rack trace");
            auto& sums = row_sum[s];
            if (sums.empty()) sums.assign(rack.samples.size(), 0.0);
            if (sums.size() != rack.samples.size())
                throw AggregationError(
                    "oversubscription_search: rack trace length changed at rack " +
                    std::to_string(count - 1));
            for (std::size_t t = 0; t < sums.size(); ++t) sums[t] += rack.samples[t];
            worst = std::max(worst, quantile(sums, q));
        }
        result.curve.push_back({count, worst});
        if (worst > row_limit_w) {
            result.max_racks = count - 1;
            if (result.max_racks == 0)
                log_warn("oversubscription_search: first rack already exceeds the limit");
            return result;
        }
    }
    result.max_racks = max_racks;
    log_warn("oversubscription_search: hit the search cap of " +
             std::to_string(max_racks) + " racks before exceeding the limit");
    return result;
}

} // namespace powertrace
