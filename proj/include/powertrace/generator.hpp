#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "powertrace/bundle.hpp"
#include "powertrace/gmm.hpp"
#include "powertrace/types.hpp"
#include "powertrace/workload.hpp"

namespace powertrace {

enum class GenerationMode { kIid, kAr1 };

GenerationMode parse_generation_mode(const std::string& name);
std::string to_string(GenerationMode mode);

struct GenerationRequest {
    ArrivalSchedule schedule;
    std::optional<GenerationMode> mode; // default: ar1 for MoE configs, else iid
    std::uint64_t seed = 0;
    double dt = 0.25;
    std::optional<double> horizon_s; // default: end of the last active interval
    int batch_size = 64;
};

// One state per timestep, drawn independently from each probability row.
StateLabels sample_trajectory(const Eigen::MatrixXd& probs, std::uint64_t seed);

// Independent per-step draw y_t ~ N(mu_z, sigma_z^2), clipped to the
// catalog range. Exactly one normal per timestep.
PowerTrace sample_power_iid(const StateLabels& states, const StateCatalog& catalog,
                            double dt, std::uint64_t seed);

// y_t = mu_z + phi_z (y_{t-1} - mu_z) + sigma_z sqrt(1 - phi_z^2) eps_t,
// seeded by an i.i.d. draw at t=0; the clipped value feeds the next step.
// Consumes the same one-normal-per-step stream as sample_power_iid, so
// phi = 0 reproduces it sample for sample.
PowerTrace sample_power_ar1(const StateLabels& states, const StateCatalog& catalog,
                            double dt, std::uint64_t seed);

// Full pipeline: lifetimes -> queue -> features -> state probabilities ->
// trajectory -> power samples. Sub-streams are derived from req.seed, so
// the result is a pure function of (bundle, request).
PowerTrace generate_server_trace(const ModelBundle& bundle,
                                 const GenerationRequest& req);

} // namespace powertrace
