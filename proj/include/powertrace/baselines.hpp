#pragma once

#include <cstddef>
#include <vector>

#include "powertrace/types.hpp"
#include "powertrace/workload.hpp"

namespace powertrace {

// Phase-based look-up-table power model: per-timestep phase in
// {idle, prompt, decode, mixed}, emitting nameplate_w * ratio + overhead_w.
struct LutSpec {
    double nameplate_w = 0.0;
    double prompt_ratio = 0.9;
    double decode_ratio = 0.5;
    double mixed_ratio = 0.92;
    double idle_ratio = 0.12;
    double overhead_w = 0.0;
    double mixed_penalty = 1.1; // slowdown of prefill progress in mixed steps

    void validate() const;
};

// Constant nameplate draw.
PowerTrace tdp_trace(double nameplate_w, std::size_t length, double dt);

// Constant draw at the pooled mean of the training traces.
PowerTrace mean_trace(const std::vector<PowerTrace>& training, std::size_t length,
                      double dt);

// Runs the same FIFO queue as the main pipeline, then classifies each
// timestep: idle (no active requests), prompt (some request still in its
// prefill span, none decoding), decode (all active past prefill), or
// mixed. Prefill progress advances at rate 1/mixed_penalty during mixed
// steps, so shared batches stretch the prompt phase.
PowerTrace lut_trace(const ArrivalSchedule& schedule,
                     const std::vector<RequestLifetime>& lifetimes,
                     const QueueConfig& queue, const LutSpec& lut, double dt,
                     double horizon_s);

} // namespace powertrace
