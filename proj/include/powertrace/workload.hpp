#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "powertrace/types.hpp"

namespace powertrace {

// Per-configuration request lifetime model. Prefill latency is log-linear
// in prompt length, decode latency is one lognormal inter-token draw per
// request:
//   log(ttft) = alpha0 + alpha1 * log(n_in + 1) + eps,  eps ~ N(0, sigma_ttft^2)
//   log(tbt)  ~ N(mu_log_tbt, sigma_log_tbt^2)
struct LatencySurrogate {
    double alpha0 = 0.0;
    double alpha1 = 0.0;
    double sigma_ttft = 0.0;
    double mu_log_tbt = 0.0;
    double sigma_log_tbt = 0.0;

    void validate() const {
        if (sigma_ttft < 0.0 || sigma_log_tbt < 0.0)
            throw ConfigError("latency surrogate: sigmas must be non-negative");
    }
};

struct QueueConfig {
    int batch_size = 64;
    double dt = 0.25;

    void validate() const {
        if (batch_size < 1) throw ConfigError("queue config: batch_size must be >= 1");
        if (dt <= 0.0) throw ConfigError("queue config: dt must be > 0");
    }
};

// Sampled prefill/decode latencies, index-aligned with a schedule.
struct RequestLifetime {
    double ttft_s = 0.0;
    double tbt_s = 0.0;
};

// [t_start, t_end) occupancy of one batch slot per request.
struct ActiveInterval {
    double t_start = 0.0;
    double t_end = 0.0;
};

using ActiveIntervalSet = std::vector<ActiveInterval>;

// Workload features at a fixed timestep: a[t] is the number of requests
// active at sample time t*dt, da its first difference with da[0] = a[0].
struct FeatureSeries {
    double dt = 0.25;
    std::vector<std::int64_t> a;
    std::vector<std::int64_t> da;

    std::size_t size() const { return a.size(); }
};

// Token-length distribution: either lognormal rounded and clamped to
// [1, cap], or empirical resampling of rows from a request log.
struct LengthDistribution {
    enum class Kind { kLognormal, kEmpirical };
    Kind kind = Kind::kLognormal;
    double mu = 0.0;        // log-tokens
    double sigma = 0.0;     // log-tokens
    std::int64_t cap = 1 << 20;
    // Empirical pool; sampled jointly (one row gives both n_in and n_out)
    // to preserve prompt/output correlation.
    std::vector<std::pair<std::int64_t, std::int64_t>> pool;
};

struct PiecewiseRate {
    // Rate r[i] applies on [t[i], t[i+1]); the last segment ends at horizon.
    std::vector<double> t;
    std::vector<double> rate;
    double horizon_s = 0.0;

    double max_rate() const;
    double rate_at(double time) const;
};

struct ArrivalSpec {
    enum class Kind { kPoissonHomogeneous, kIntensityFunction, kExplicit };
    Kind kind = Kind::kPoissonHomogeneous;
    double rate = 1.0;               // requests/s (homogeneous)
    PiecewiseRate intensity;         // intensity-function mode
    ArrivalSchedule explicit_schedule;
    LengthDistribution input_tokens;
    LengthDistribution output_tokens;

    void validate() const;
};

// Least-squares fit of the surrogate from measured request records.
// Needs >= 8 records, >= 2 distinct prompt lengths, >= 2 TBT observations.
// sigma_ttft uses the n-2 residual normalization, TBT stats are the
// sample mean/std (n-1) of log(tbt).
LatencySurrogate fit_latency_surrogate(const std::vector<RequestLogRecord>& records);

// One (ttft, tbt) draw per request; two normals per request, consumed in
// schedule order.
std::vector<RequestLifetime> sample_lifetimes(const ArrivalSchedule& schedule,
                                              const LatencySurrogate& surrogate,
                                              std::uint64_t seed);

// FIFO queue with batch_size identical slots. A request holds one slot
// for ttft + n_out*tbt seconds starting at max(arrival, earliest slot
// release). Admission order is arrival order.
ActiveIntervalSet simulate_queue(const ArrivalSchedule& schedule,
                                 const std::vector<RequestLifetime>& lifetimes,
                                 const QueueConfig& queue);

// Active-request counts on the grid t = 0, dt, 2*dt, ... < horizon using
// the half-open membership rule t_start <= t < t_end. Intervals past the
// horizon are truncated with a warning.
FeatureSeries compute_features(const ActiveIntervalSet& intervals, double dt,
                               double horizon_s);

// Draws a schedule from the spec. Exactly one of n_requests / horizon_s
// bounds the process: pass n_requests > 0 to stop after that many
// arrivals, otherwise arrivals fill [0, horizon_s). Explicit specs are
// returned verbatim.
ArrivalSchedule generate_arrivals(const ArrivalSpec& spec, std::int64_t n_requests,
                                  double horizon_s, std::uint64_t seed);

} // namespace powertrace
