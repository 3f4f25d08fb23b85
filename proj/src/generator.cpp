#include "powertrace/generator.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "powertrace/classifier.hpp"
#include "powertrace/errors.hpp"
#include "powertrace/rng.hpp"

namespace powertrace {

GenerationMode parse_generation_mode(const std::string& name) {
    if (name == "iid") return GenerationMode::kIid;
    if (name == "ar1") return GenerationMode::kAr1;
    throw ConfigError("unknown generation mode '" + name + "' (expected iid|ar1)");
}

std::string to_string(GenerationMode mode) {
    return mode == GenerationMode::kIid ? "iid" : "ar1";
}

StateLabels sample_trajectory(const Eigen::MatrixXd& probs, std::uint64_t seed) {
    const Eigen::Index t_len = probs.rows();
    const Eigen::Index k = probs.cols();
    if (k < 1) throw ConfigError("sample_trajectory: empty probability rows");
    RandomStream rng(seed);
    StateLabels states(t_len);
    std::vector<double> row(k);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            const double p = probs(t, j);
            if (p < 0.0)
                throw ConfigError("sample_trajectory: negative probability at step " +
                                  std::to_string(t));
            row[j] = p;
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw ConfigError("sample_trajectory: row " + std::to_string(t) +
                              " sums to " + std::to_string(sum));
        states[t] = static_cast<int>(rng.categorical(row));
    }
    return states;
}

namespace {

PowerTrace sample_power(const StateLabels& states, const StateCatalog& catalog,
                        double dt, std::uint64_t seed, bool ar1) {
    catalog.validate();
    if (dt <= 0.0) throw ConfigError("sample_power: dt must be > 0");
    for (int s : states)
        if (s < 0 || s >= catalog.k)
            throw ConfigError("sample_power: state " + std::to_string(s) +
                              " outside catalog of size " + std::to_string(catalog.k));
    RandomStream rng(seed);
    PowerTrace trace;
    trace.dt = dt;
    trace.samples.resize(states.size());
    double prev = 0.0;
    for (std::size_t t = 0; t < states.size(); ++t) {
        const int z = states[t];
        const double eps = rng.normal();
        double y;
        if (!ar1 || t == 0) {
            y = catalog.mu[z] + catalog.sigma[z] * eps;
        } else {
            const double phi = catalog.phi[z];
            y = catalog.mu[z] + phi * (prev - catalog.mu[z]) +
                catalog.sigma[z] * std::sqrt(1.0 - phi * phi) * eps;
        }
        y = std::clamp(y, catalog.y_min, catalog.y_max);
        trace.samples[t] = y;
        prev = y;
    }
    return trace;
}

} // namespace

PowerTrace sample_power_iid(const StateLabels& states, const StateCatalog& catalog,
                            double dt, std::uint64_t seed) {
    return sample_power(states, catalog, dt, seed, false);
}

PowerTrace sample_power_ar1(const StateLabels& states, const StateCatalog& catalog,
                            double dt, std::uint64_t seed) {
    return sample_power(states, catalog, dt, seed, true);
}

PowerTrace generate_server_trace(const ModelBundle& bundle,
                                 const GenerationRequest& req) {
    bundle.validate();
    if (req.dt <= 0.0) throw ConfigError("generate: dt must be > 0");

    const auto lifetimes = sample_lifetimes(
        req.schedule, bundle.surrogate, derive_seed(req.seed, {streams::kLifetimes}));
    QueueConfig queue;
    queue.batch_size = req.batch_size;
    queue.dt = req.dt;
    const ActiveIntervalSet intervals = simulate_queue(req.schedule, lifetimes, queue);

    double horizon;
    if (req.horizon_s) {
        horizon = *req.horizon_s;
    } else {
        if (intervals.empty())
            throw ConfigError("generate: empty schedule requires an explicit horizon");
        horizon = 0.0;
        for (const auto& iv : intervals) horizon = std::max(horizon, iv.t_end);
    }

    const FeatureSeries features = compute_features(intervals, req.dt, horizon);
    const Eigen::MatrixXd probs = predict_state_probs(bundle.classifier, features);
    const StateLabels states =
        sample_trajectory(probs, derive_seed(req.seed, {streams::kTrajectory}));

    const GenerationMode mode = req.mode.value_or(
        bundle.config.is_moe ? GenerationMode::kAr1 : GenerationMode::kIid);
    const std::uint64_t power_seed = derive_seed(req.seed, {streams::kPower});
    PowerTrace trace = mode == GenerationMode::kAr1
                           ? sample_power_ar1(states, bundle.catalog, req.dt, power_seed)
                           : sample_power_iid(states, bundle.catalog, req.dt, power_seed);
    trace.start_time = 0.0;
    return trace;
}

} // namespace powertrace
