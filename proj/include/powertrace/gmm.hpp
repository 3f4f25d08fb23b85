#pragma once

#include <cstdint>
#include <vector>

#include "powertrace/types.hpp"

namespace powertrace {

// Ordered set of Gaussian operating states for one serving configuration:
// mixing weight, mean and std in watts, AR(1) coefficient, plus the
// observed power range used to clip generated samples. States are sorted
// ascending by mean power.
struct StateCatalog {
    int k = 0;
    std::vector<double> pi;
    std::vector<double> mu;
    std::vector<double> sigma;
    std::vector<double> phi;
    double y_min = 0.0;
    double y_max = 0.0;

    void validate() const;
};

// Per-sample hard state labels aligned with a PowerTrace.
using StateLabels = std::vector<int>;

// Result of one EM fit; components sorted ascending by mean.
// loglik_curve holds the per-iteration log-likelihood of the winning
// restart (non-decreasing up to the variance floor).
struct GmmFit {
    std::vector<double> pi;
    std::vector<double> mu;
    std::vector<double> sigma;
    double log_likelihood = 0.0;
    std::vector<double> loglik_curve;
};

// Lower bound on component std: max(0.5 W, 1e-3 * sample range).
double gmm_variance_floor(double y_min, double y_max);

// EM fit with K components, best of 5 k-means++-seeded restarts by final
// log-likelihood (ties to the lowest restart index). Converges on relative
// log-likelihood change < 1e-6 or 500 iterations. Requires >= 10*K samples
// and >= K distinct values.
GmmFit fit_gmm(const std::vector<double>& samples, int k, std::uint64_t seed);

// argmin over K of BIC = -2 logL + (3K - 1) ln n, ties toward smaller K.
// Ks whose fit fails are skipped with a warning; if no K is feasible
// because the data has fewer distinct values than k_min, k_min is
// returned (the penalty argument degenerates, smallest candidate wins).
int select_k_bic(const std::vector<double>& samples, int k_min, int k_max,
                 std::uint64_t seed);

// Hard assignment: argmax_k pi_k N(y | mu_k, sigma_k^2) per sample,
// ties toward the lower state index.
StateLabels assign_states(const PowerTrace& trace, const StateCatalog& catalog);

// Pools lag-1 products of (y - mu_k) over maximal same-state runs of
// length >= 3; states with fewer than 30 pairs get phi = 0. Estimates are
// clamped to [-0.99, 0.99].
class Ar1Accumulator {
public:
    explicit Ar1Accumulator(int k) : cross_(k, 0.0), var_(k, 0.0), pairs_(k, 0) {}

    void add_trace(const PowerTrace& trace, const StateLabels& labels,
                   const std::vector<double>& state_means);
    std::vector<double> finalize() const;

private:
    std::vector<double> cross_;
    std::vector<double> var_;
    std::vector<std::int64_t> pairs_;
};

std::vector<double> estimate_ar1(const PowerTrace& trace, const StateLabels& labels,
                                 const StateCatalog& catalog);

// Full catalog build: pool all traces, select K by BIC, fit, then estimate
// per-state AR(1) coefficients from hard-labeled runs of each trace.
StateCatalog build_catalog(const std::vector<PowerTrace>& traces, int k_min,
                           int k_max, std::uint64_t seed);

} // namespace powertrace
