#include "powertrace/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "powertrace/errors.hpp"

namespace powertrace {

void LutSpec::validate() const {
    if (nameplate_w <= 0.0) throw ConfigError("lut: nameplate_w must be > 0");
    for (double r : {prompt_ratio, decode_ratio, mixed_ratio, idle_ratio})
        if (r < 0.0 || r > 1.0)
            throw ConfigError("lut: phase ratios must lie in [0, 1]");
    if (overhead_w < 0.0) throw ConfigError("lut: overhead_w must be >= 0");
    if (mixed_penalty < 1.0) throw ConfigError("lut: mixed_penalty must be >= 1");
}

PowerTrace tdp_trace(double nameplate_w, std::size_t length, double dt) {
    if (nameplate_w <= 0.0) throw ConfigError("tdp_trace: nameplate_w must be > 0");
    if (dt <= 0.0) throw ConfigError("tdp_trace: dt must be > 0");
    PowerTrace t;
    t.dt = dt;
    t.samples.assign(length, nameplate_w);
    return t;
}

PowerTrace mean_trace(const std::vector<PowerTrace>& training, std::size_t length,
                      double dt) {
    if (dt <= 0.0) throw ConfigError("mean_trace: dt must be > 0");
    double sum = 0.0, comp = 0.0;
    std::int64_t n = 0;
    for (const auto& trace : training) {
        for (double s : trace.samples) {
            const double y = s - comp;
            const double t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        n += static_cast<std::int64_t>(trace.samples.size());
    }
    if (n == 0) throw ConfigError("mean_trace: empty training set");
    PowerTrace t;
    t.dt = dt;
    t.samples.assign(length, sum / static_cast<double>(n));
    return t;
}

PowerTrace lut_trace(const ArrivalSchedule& schedule,
                     const std::vector<RequestLifetime>& lifetimes,
                     const QueueConfig& queue, const LutSpec& lut, double dt,
                     double horizon_s) {
    lut.validate();
    if (dt <= 0.0 || horizon_s <= 0.0)
        throw ConfigError("lut_trace: dt and horizon must be > 0");
    const ActiveIntervalSet intervals = simulate_queue(schedule, lifetimes, queue);

    constexpr double kGridEps = 1e-9;
    const auto n = static_cast<std::int64_t>(std::ceil(horizon_s / dt - kGridEps));

    struct Slot {
        std::int64_t lo, hi;
        double prefill_left;
    };
    std::vector<Slot> slots;
    slots.reserve(intervals.size());
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        auto lo = static_cast<std::int64_t>(
            std::ceil(intervals[i].t_start / dt - kGridEps));
        auto hi =
            static_cast<std::int64_t>(std::ceil(intervals[i].t_end / dt - kGridEps));
        lo = std::clamp<std::int64_t>(lo, 0, n);
        hi = std::clamp<std::int64_t>(hi, 0, n);
        if (lo < hi) slots.push_back({lo, hi, lifetimes[i].ttft_s});
    }
    std::sort(slots.begin(), slots.end(),
              [](const Slot& a, const Slot& b) { return a.lo < b.lo; });

    const double idle_w = lut.nameplate_w * lut.idle_ratio + lut.overhead_w;
    const double prompt_w = lut.nameplate_w * lut.prompt_ratio + lut.overhead_w;
    const double decode_w = lut.nameplate_w * lut.decode_ratio + lut.overhead_w;
    const double mixed_w = lut.nameplate_w * lut.mixed_ratio + lut.overhead_w;

    PowerTrace trace;
    trace.dt = dt;
    trace.samples.assign(static_cast<std::size_t>(n), idle_w);

    std::vector<Slot*> active;
    std::size_t next = 0;
    for (std::int64_t j = 0; j < n; ++j) {
        while (next < slots.size() && slots[next].lo == j)
            active.push_back(&slots[next++]);
        std::erase_if(active, [j](const Slot* s) { return s->hi <= j; });
        if (active.empty()) continue;

        bool any_prompt = false, any_decode = false;
        for (const Slot* s : active)
            (s->prefill_left > 1e-12 ? any_prompt : any_decode) = true;

        double level, rate = 0.0;
        if (any_prompt && any_decode) {
            level = mixed_w;
            rate = 1.0 / lut.mixed_penalty;
        } else if (any_prompt) {
            level = prompt_w;
            rate = 1.0;
        } else {
            level = decode_w;
        }
        trace.samples[static_cast<std::size_t>(j)] = level;
        if (rate > 0.0)
            for (Slot* s : active)
                if (s->prefill_left > 1e-12) s->prefill_left -= dt * rate;
    }
    return trace;
}

} // namespace powertrace
