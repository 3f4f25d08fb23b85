#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "powertrace/errors.hpp"

namespace powertrace {

// One serving setup: (hardware, model, tensor parallelism). The triple is
// the lookup key for every fitted artifact. Identifiers are free-form but
// compared lowercase. is_moe selects the default power sampling mode.
struct ServingConfig {
    std::string hardware;
    std::string model;
    int tensor_parallel = 1;
    bool is_moe = false;

    std::string key() const {
        auto lower = [](std::string s) {
            std::transform(s.begin(), s.end(), s.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            return s;
        };
        return lower(hardware) + "|" + lower(model) + "|tp" +
               std::to_string(tensor_parallel);
    }

    void validate() const {
        if (tensor_parallel < 1)
            throw ConfigError("serving config: tensor_parallel must be >= 1");
        if (hardware.empty() || model.empty())
            throw ConfigError("serving config: hardware and model must be non-empty");
    }
};

// Uniformly sampled wattage series. dt defaults to the 250 ms collection
// interval; samples are watts and never negative.
struct PowerTrace {
    double start_time = 0.0;
    double dt = 0.25;
    std::vector<double> samples;

    std::size_t size() const { return samples.size(); }
    double duration() const { return dt * static_cast<double>(samples.size()); }

    double energy_joules() const {
        double e = 0.0, c = 0.0;
        for (double s : samples) { // Kahan
            double y = s * dt - c;
            double t = e + y;
            c = (t - e) - y;
            e = t;
        }
        return e;
    }

    double mean() const {
        if (samples.empty()) return 0.0;
        double sum = 0.0, c = 0.0;
        for (double s : samples) {
            double y = s - c;
            double t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        return sum / static_cast<double>(samples.size());
    }
};

struct Request {
    double arrival_s = 0.0;
    std::int64_t n_in = 0;
    std::int64_t n_out = 0;
};

// Timestamped requests with token counts, sorted by arrival time.
struct ArrivalSchedule {
    std::vector<Request> requests;

    std::size_t size() const { return requests.size(); }
    bool empty() const { return requests.empty(); }
};

// One measured request: arrival, token counts and observed latencies.
// tbt_s is absent for prefill-only requests (n_out == 0).
struct RequestLogRecord {
    double arrival_s = 0.0;
    std::int64_t n_in = 0;
    std::int64_t n_out = 0;
    double ttft_s = 0.0;
    std::optional<double> tbt_s;
};

} // namespace powertrace
