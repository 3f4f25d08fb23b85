#include "powertrace/workload.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

#include "powertrace/log.hpp"
#include "powertrace/rng.hpp"

namespace powertrace {

double PiecewiseRate::max_rate() const {
    double m = 0.0;
    for (double r : rate) m = std::max(m, r);
    return m;
}

double PiecewiseRate::rate_at(double time) const {
    if (t.empty() || time < t.front() || time >= horizon_s) return 0.0;
    // last segment whose start is <= time
    auto it = std::upper_bound(t.begin(), t.end(), time);
    std::size_t idx = static_cast<std::size_t>(it - t.begin()) - 1;
    return rate[idx];
}

void ArrivalSpec::validate() const {
    switch (kind) {
    case Kind::kPoissonHomogeneous:
        if (rate <= 0.0) throw ConfigError("arrival spec: poisson rate must be > 0");
        break;
    case Kind::kIntensityFunction: {
        if (intensity.t.size() != intensity.rate.size() || intensity.t.empty())
            throw ConfigError("arrival spec: intensity needs matching t/rate lists");
        for (double r : intensity.rate)
            if (r < 0.0) throw ConfigError("arrival spec: intensity rates must be >= 0");
        for (std::size_t i = 1; i < intensity.t.size(); ++i)
            if (intensity.t[i] <= intensity.t[i - 1])
                throw ConfigError("arrival spec: intensity breakpoints must increase");
        if (intensity.horizon_s <= intensity.t.back())
            throw ConfigError("arrival spec: intensity horizon must exceed last breakpoint");
        break;
    }
    case Kind::kExplicit:
        for (std::size_t i = 1; i < explicit_schedule.requests.size(); ++i)
            if (explicit_schedule.requests[i].arrival_s <
                explicit_schedule.requests[i - 1].arrival_s)
                throw ConfigError("arrival spec: explicit schedule not sorted");
        break;
    }
    if (input_tokens.cap < 1 || output_tokens.cap < 1)
        throw ConfigError("arrival spec: length cap must be >= 1");
}

LatencySurrogate fit_latency_surrogate(const std::vector<RequestLogRecord>& records) {
    std::vector<double> x, y; // log(n_in + 1), log(ttft)
    std::vector<double> log_tbt;
    for (const auto& rec : records) {
        if (rec.ttft_s <= 0.0) continue;
        x.push_back(std::log(static_cast<double>(rec.n_in) + 1.0));
        y.push_back(std::log(rec.ttft_s));
        if (rec.tbt_s) log_tbt.push_back(std::log(*rec.tbt_s));
    }
    if (x.size() < 8)
        throw FitError("latency surrogate: need at least 8 records with ttft > 0, got " +
                       std::to_string(x.size()));
    std::set<double> distinct(x.begin(), x.end());
    if (distinct.size() < 2)
        throw FitError("latency surrogate: need at least 2 distinct prompt lengths");
    if (log_tbt.size() < 2)
        throw FitError("latency surrogate: need at least 2 records with tbt");

    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0)
        throw FitError("latency surrogate: degenerate regression (constant n_in)");

    LatencySurrogate s;
    s.alpha1 = sxy / sxx;
    s.alpha0 = my - s.alpha1 * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = y[i] - (s.alpha0 + s.alpha1 * x[i]);
        ss_res += r * r;
    }
    s.sigma_ttft = std::sqrt(std::max(0.0, ss_res / (n - 2.0)));

    double mt = 0.0;
    for (double v : log_tbt) mt += v;
    mt /= static_cast<double>(log_tbt.size());
    double st = 0.0;
    for (double v : log_tbt) st += (v - mt) * (v - mt);
    s.mu_log_tbt = mt;
    s.sigma_log_tbt =
        std::sqrt(st / (static_cast<double>(log_tbt.size()) - 1.0));
    return s;
}

std::vector<RequestLifetime> sample_lifetimes(const ArrivalSchedule& schedule,
                                              const LatencySurrogate& surrogate,
                                              std::uint64_t seed) {
    surrogate.validate();
    RandomStream rng(seed);
    std::vector<RequestLifetime> out;
    out.reserve(schedule.size());
    for (const auto& req : schedule.requests) {
        double eps = surrogate.sigma_ttft * rng.normal();
        double z = surrogate.mu_log_tbt + surrogate.sigma_log_tbt * rng.normal();
        RequestLifetime life;
        life.ttft_s = std::exp(surrogate.alpha0 +
                               surrogate.alpha1 *
                                   std::log(static_cast<double>(req.n_in) + 1.0) +
                               eps);
        life.tbt_s = std::exp(z);
        out.push_back(life);
    }
    return out;
}

ActiveIntervalSet simulate_queue(const ArrivalSchedule& schedule,
                                 const std::vector<RequestLifetime>& lifetimes,
                                 const QueueConfig& queue) {
    queue.validate();
    if (lifetimes.size() != schedule.size())
        throw ConfigError("simulate_queue: lifetimes not aligned with schedule");

    // Min-heap of slot release times; all slots free at t = 0.
    std::priority_queue<double, std::vector<double>, std::greater<double>> releases;
    for (int i = 0; i < queue.batch_size; ++i) releases.push(0.0);

    ActiveIntervalSet intervals;
    intervals.reserve(schedule.size());
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        const auto& req = schedule.requests[i];
        double slot_free = releases.top();
        releases.pop();
        double t_start = std::max(req.arrival_s, slot_free);
        double duration = lifetimes[i].ttft_s +
                          static_cast<double>(req.n_out) * lifetimes[i].tbt_s;
        double t_end = t_start + duration;
        releases.push(t_end);
        intervals.push_back({t_start, t_end});
    }
    return intervals;
}

namespace {
// Grid index epsilon: sample time i*dt counts as inside [t_start, t_end)
// when the ratio lands within 1e-9 of the boundary integer.
constexpr double kGridEps = 1e-9;
} // namespace

FeatureSeries compute_features(const ActiveIntervalSet& intervals, double dt,
                               double horizon_s) {
    if (dt <= 0.0) throw ConfigError("compute_features: dt must be > 0");
    if (horizon_s < 0.0) throw ConfigError("compute_features: negative horizon");

    auto n = static_cast<std::size_t>(std::ceil(horizon_s / dt - kGridEps));
    FeatureSeries fs;
    fs.dt = dt;
    fs.a.assign(n, 0);
    fs.da.assign(n, 0);
    if (n == 0) return fs;

    bool truncated = false;
    std::vector<std::int64_t> delta(n + 1, 0);
    for (const auto& iv : intervals) {
        if (iv.t_end > horizon_s + kGridEps) truncated = true;
        auto lo_f = std::ceil(iv.t_start / dt - kGridEps);
        auto hi_f = std::ceil(iv.t_end / dt - kGridEps);
        auto lo = static_cast<std::size_t>(std::max(0.0, lo_f));
        auto hi = static_cast<std::size_t>(std::max(0.0, hi_f));
        lo = std::min(lo, n);
        hi = std::min(hi, n);
        if (lo >= hi) continue;
        delta[lo] += 1;
        delta[hi] -= 1;
    }
    if (truncated)
        log_warn("compute_features: intervals extend past the horizon, truncating");

    std::int64_t acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += delta[i];
        fs.a[i] = acc;
        fs.da[i] = i == 0 ? acc : fs.a[i] - fs.a[i - 1];
    }
    return fs;
}

namespace {

std::int64_t sample_length(const LengthDistribution& dist, RandomStream& rng) {
    if (dist.kind == LengthDistribution::Kind::kEmpirical)
        throw ConfigError("sample_length: empirical lengths are drawn jointly");
    double z = rng.normal();
    double v = std::exp(dist.mu + dist.sigma * z);
    auto n = static_cast<std::int64_t>(std::llround(v));
    return std::clamp<std::int64_t>(n, 1, dist.cap);
}

// Draws (n_in, n_out) for one request. Empirical pools are sampled jointly
// when both sides point at a pool; otherwise each side draws independently.
std::pair<std::int64_t, std::int64_t> sample_token_counts(const ArrivalSpec& spec,
                                                          RandomStream& rng) {
    const bool in_emp = spec.input_tokens.kind == LengthDistribution::Kind::kEmpirical;
    const bool out_emp = spec.output_tokens.kind == LengthDistribution::Kind::kEmpirical;
    if (in_emp || out_emp) {
        const auto& pool = in_emp ? spec.input_tokens.pool : spec.output_tokens.pool;
        if (pool.empty()) throw ConfigError("arrival spec: empty empirical length pool");
        auto idx = static_cast<std::size_t>(rng.uniform01() *
                                            static_cast<double>(pool.size()));
        idx = std::min(idx, pool.size() - 1);
        std::int64_t n_in = in_emp ? pool[idx].first : sample_length(spec.input_tokens, rng);
        std::int64_t n_out =
            out_emp ? pool[idx].second : sample_length(spec.output_tokens, rng);
        return {n_in, n_out};
    }
    std::int64_t n_in = sample_length(spec.input_tokens, rng);
    std::int64_t n_out = sample_length(spec.output_tokens, rng);
    return {n_in, n_out};
}

} // namespace

ArrivalSchedule generate_arrivals(const ArrivalSpec& spec, std::int64_t n_requests,
                                  double horizon_s, std::uint64_t seed) {
    spec.validate();
    if (spec.kind == ArrivalSpec::Kind::kExplicit) return spec.explicit_schedule;

    RandomStream arrival_rng(derive_seed(seed, {streams::kArrivals}));
    RandomStream length_rng(derive_seed(seed, {streams::kLengths}));

    std::vector<double> times;
    if (spec.kind == ArrivalSpec::Kind::kPoissonHomogeneous) {
        if (n_requests <= 0 && horizon_s <= 0.0)
            throw ConfigError("generate_arrivals: need n_requests or horizon");
        double t = 0.0;
        if (n_requests > 0) {
            for (std::int64_t i = 0; i < n_requests; ++i) {
                t += arrival_rng.exponential(spec.rate);
                times.push_back(t);
            }
        } else {
            while (true) {
                t += arrival_rng.exponential(spec.rate);
                if (t >= horizon_s) break;
                times.push_back(t);
            }
        }
    } else {
        // Non-homogeneous Poisson by thinning against the max rate.
        const double lam_max = spec.intensity.max_rate();
        const double end = spec.intensity.horizon_s;
        if (lam_max <= 0.0) return {};
        double t = 0.0;
        while (true) {
            t += arrival_rng.exponential(lam_max);
            if (t >= end) break;
            double u = arrival_rng.uniform01();
            if (u * lam_max < spec.intensity.rate_at(t)) {
                times.push_back(t);
                if (n_requests > 0 &&
                    static_cast<std::int64_t>(times.size()) >= n_requests)
                    break;
            }
        }
    }

    ArrivalSchedule schedule;
    schedule.requests.reserve(times.size());
    for (double t : times) {
        auto [n_in, n_out] = sample_token_counts(spec, length_rng);
        schedule.requests.push_back({t, n_in, n_out});
    }
    return schedule;
}

} // namespace powertrace
