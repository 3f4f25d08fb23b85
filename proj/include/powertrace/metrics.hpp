#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "powertrace/types.hpp"

namespace powertrace {

// Per-comparison (or median-over-seeds) fidelity numbers. In multi-seed
// reports delta_energy carries the median of |dE| per the evaluation
// protocol; single-pair reports keep the sign.
struct FidelityReport {
    double delta_energy = 0.0;
    double ks = 0.0;
    double acf_r2 = 0.0;
    double nrmse = 0.0;
    int n_seeds = 1;
    std::string aggregation = "none"; // "median" for multi-seed reports
};

// (E_syn - E_meas) / E_meas with E = sum(samples) * dt.
double delta_energy(const PowerTrace& syn, const PowerTrace& meas);

// Two-sample Kolmogorov-Smirnov statistic: sup over the pooled sample
// points of |ECDF_a - ECDF_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

// Sample autocorrelation, biased (1/n) normalization, lags 1..max_lag.
std::vector<double> autocorrelation(const std::vector<double>& x, int max_lag);

// R^2 of the synthetic ACF against the measured ACF over lags 1..max_lag.
// Unequal lengths are truncated to the shorter trace with a warning.
double acf_r2(const PowerTrace& syn, const PowerTrace& meas, int max_lag);

// RMSE normalized by the measured range. Unequal lengths truncate with a
// warning.
double nrmse(const PowerTrace& syn, const PowerTrace& meas);

double median(std::vector<double> values);

// Runs generator(seed) for seed = 0..n_seeds-1 against the reference and
// reports the per-metric median (median of |dE| for energy).
FidelityReport evaluate_multi_seed(const PowerTrace& reference,
                                   const std::function<PowerTrace(std::uint64_t)>& generator,
                                   int n_seeds = 5, int max_lag = 120);

} // namespace powertrace
