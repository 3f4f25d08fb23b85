#include "powertrace/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "powertrace/errors.hpp"
#include "powertrace/log.hpp"
#include "powertrace/rng.hpp"

namespace powertrace {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727; // 0.5 * log(2*pi)
constexpr int kEmRestarts = 5;
constexpr int kEmMaxIters = 500;
constexpr double kEmRelTol = 1e-6;

std::size_t count_distinct(const std::vector<double>& samples) {
    std::set<double> uniq(samples.begin(), samples.end());
    return uniq.size();
}

struct Component {
    double pi, mu, sigma;
};

// k-means++ style seeding: first center uniform, subsequent centers drawn
// with probability proportional to squared distance from the nearest
// chosen center. One hard assignment pass then initializes pi/mu/sigma.
std::vector<Component> init_components(const std::vector<double>& y, int k,
                                       double floor, RandomStream& rng) {
    const std::size_t n = y.size();
    std::vector<double> centers;
    centers.reserve(k);
    centers.push_back(y[static_cast<std::size_t>(rng.uniform01() * n) % n]);

    std::vector<double> d2(n);
    for (int j = 1; j < k; ++j) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (double c : centers) {
                const double d = y[i] - c;
                best = std::min(best, d * d);
            }
            d2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            // all points coincide with a center; spread on the remaining mass
            centers.push_back(centers.back());
            continue;
        }
        double u = rng.uniform01() * total;
        std::size_t pick = n - 1;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += d2[i];
            if (u < acc) {
                pick = i;
                break;
            }
        }
        centers.push_back(y[pick]);
    }

    std::vector<double> sum(k, 0.0), sumsq(k, 0.0);
    std::vector<std::int64_t> cnt(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (int j = 0; j < k; ++j) {
            const double d = std::abs(y[i] - centers[j]);
            if (d < bd) {
                bd = d;
                best = j;
            }
        }
        sum[best] += y[i];
        sumsq[best] += y[i] * y[i];
        ++cnt[best];
    }

    std::vector<Component> comps(k);
    for (int j = 0; j < k; ++j) {
        if (cnt[j] == 0) {
            comps[j] = {1.0 / n, centers[j], floor};
            continue;
        }
        const double m = sum[j] / cnt[j];
        const double var = std::max(0.0, sumsq[j] / cnt[j] - m * m);
        comps[j] = {static_cast<double>(cnt[j]) / n, m, std::max(floor, std::sqrt(var))};
    }
    double pi_sum = 0.0;
    for (const auto& c : comps) pi_sum += c.pi;
    for (auto& c : comps) c.pi /= pi_sum;
    return comps;
}

struct EmResult {
    std::vector<Component> comps;
    double loglik = -std::numeric_limits<double>::infinity();
    std::vector<double> curve;
};

EmResult run_em(const std::vector<double>& y, std::vector<Component> comps,
                double floor) {
    const std::size_t n = y.size();
    const int k = static_cast<int>(comps.size());
    std::vector<double> resp(n * k);
    std::vector<double> lp(k);

    EmResult out;
    double prev = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < kEmMaxIters; ++iter) {
        // E-step in log space
        double loglik = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double m = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < k; ++j) {
                const double z = (y[i] - comps[j].mu) / comps[j].sigma;
                lp[j] = std::log(comps[j].pi) - std::log(comps[j].sigma) -
                        0.5 * z * z - kHalfLog2Pi;
                m = std::max(m, lp[j]);
            }
            double s = 0.0;
            for (int j = 0; j < k; ++j) s += std::exp(lp[j] - m);
            const double lse = m + std::log(s);
            loglik += lse;
            for (int j = 0; j < k; ++j) resp[i * k + j] = std::exp(lp[j] - lse);
        }
        out.curve.push_back(loglik);
        out.loglik = loglik;

        if (iter > 0 && std::abs(loglik - prev) <= kEmRelTol * std::abs(prev)) break;
        prev = loglik;

        // M-step
        for (int j = 0; j < k; ++j) {
            double nk = 0.0, sy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                nk += resp[i * k + j];
                sy += resp[i * k + j] * y[i];
            }
            if (nk <= 1e-12) {
                comps[j].pi = nk / n;
                continue;
            }
            const double mu = sy / nk;
            double sv = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = y[i] - mu;
                sv += resp[i * k + j] * d * d;
            }
            comps[j].pi = nk / n;
            comps[j].mu = mu;
            comps[j].sigma = std::max(floor, std::sqrt(sv / nk));
        }
    }
    out.comps = std::move(comps);
    return out;
}

} // namespace

double gmm_variance_floor(double y_min, double y_max) {
    return std::max(0.5, 1e-3 * (y_max - y_min));
}

GmmFit fit_gmm(const std::vector<double>& samples, int k, std::uint64_t seed) {
    if (k < 1) throw FitError("fit_gmm: k must be >= 1");
    if (samples.size() < static_cast<std::size_t>(10 * k))
        throw FitError("fit_gmm: need at least " + std::to_string(10 * k) +
                       " samples for k=" + std::to_string(k) + ", got " +
                       std::to_string(samples.size()));
    const std::size_t distinct = count_distinct(samples);
    if (distinct < static_cast<std::size_t>(k))
        throw FitError("fit_gmm: degenerate fit, only " + std::to_string(distinct) +
                       " distinct sample values for k=" + std::to_string(k));

    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    const double floor = gmm_variance_floor(*lo_it, *hi_it);

    EmResult best;
    for (int r = 0; r < kEmRestarts; ++r) {
        RandomStream rng(derive_seed(
            seed, {streams::kRestart, static_cast<std::uint64_t>(k),
                   static_cast<std::uint64_t>(r)}));
        auto comps = init_components(samples, k, floor, rng);
        EmResult res = run_em(samples, std::move(comps), floor);
        if (res.loglik > best.loglik) best = std::move(res);
    }

    std::sort(best.comps.begin(), best.comps.end(),
              [](const Component& a, const Component& b) { return a.mu < b.mu; });

    GmmFit fit;
    fit.log_likelihood = best.loglik;
    fit.loglik_curve = std::move(best.curve);
    for (const auto& c : best.comps) {
        fit.pi.push_back(c.pi);
        fit.mu.push_back(c.mu);
        fit.sigma.push_back(c.sigma);
    }
    return fit;
}

int select_k_bic(const std::vector<double>& samples, int k_min, int k_max,
                 std::uint64_t seed) {
    if (k_min < 1 || k_max < k_min)
        throw FitError("select_k_bic: invalid k range [" + std::to_string(k_min) +
                       ", " + std::to_string(k_max) + "]");
    const double log_n = std::log(static_cast<double>(samples.size()));
    int best_k = -1;
    double best_bic = std::numeric_limits<double>::infinity();
    bool any_feasible = false;
    for (int k = k_min; k <= k_max; ++k) {
        double bic;
        try {
            const GmmFit fit = fit_gmm(samples, k, seed);
            bic = -2.0 * fit.log_likelihood + (3.0 * k - 1.0) * log_n;
        } catch (const FitError& e) {
            log_warn(std::string("select_k_bic: skipping k=") + std::to_string(k) +
                     ": " + e.what());
            continue;
        }
        any_feasible = true;
        if (bic < best_bic) {
            best_bic = bic;
            best_k = k;
        }
    }
    if (!any_feasible) {
        if (count_distinct(samples) < static_cast<std::size_t>(k_min)) {
            log_warn("select_k_bic: data nearly constant, falling back to k_min=" +
                     std::to_string(k_min));
            return k_min;
        }
        throw FitError("select_k_bic: no candidate k produced a valid fit");
    }
    return best_k;
}

StateLabels assign_states(const PowerTrace& trace, const StateCatalog& catalog) {
    catalog.validate();
    StateLabels labels(trace.samples.size());
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        int best = 0;
        double best_lp = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < catalog.k; ++j) {
            const double sg = std::max(catalog.sigma[j], 1e-12);
            const double z = (trace.samples[i] - catalog.mu[j]) / sg;
            const double lp = std::log(std::max(catalog.pi[j], 1e-300)) -
                              std::log(sg) - 0.5 * z * z;
            if (lp > best_lp) {
                best_lp = lp;
                best = j;
            }
        }
        labels[i] = best;
    }
    return labels;
}

void Ar1Accumulator::add_trace(const PowerTrace& trace, const StateLabels& labels,
                               const std::vector<double>& state_means) {
    if (labels.size() != trace.samples.size())
        throw FitError("ar1: labels do not match trace length");
    const std::size_t n = labels.size();
    std::size_t start = 0;
    while (start < n) {
        std::size_t end = start + 1;
        while (end < n && labels[end] == labels[start]) ++end;
        const std::size_t len = end - start;
        const int s = labels[start];
        if (len >= 3) {
            const double mu = state_means[s];
            for (std::size_t i = start; i + 1 < end; ++i) {
                const double a = trace.samples[i] - mu;
                const double b = trace.samples[i + 1] - mu;
                cross_[s] += a * b;
                var_[s] += a * a;
                ++pairs_[s];
            }
        }
        start = end;
    }
}

std::vector<double> Ar1Accumulator::finalize() const {
    std::vector<double> phi(cross_.size(), 0.0);
    for (std::size_t s = 0; s < cross_.size(); ++s) {
        if (pairs_[s] < 30 || var_[s] <= 0.0) continue;
        phi[s] = std::clamp(cross_[s] / var_[s], -0.99, 0.99);
    }
    return phi;
}

std::vector<double> estimate_ar1(const PowerTrace& trace, const StateLabels& labels,
                                 const StateCatalog& catalog) {
    Ar1Accumulator acc(catalog.k);
    acc.add_trace(trace, labels, catalog.mu);
    return acc.finalize();
}

void StateCatalog::validate() const {
    if (k < 1) throw ConfigError("state catalog: k must be >= 1");
    if (pi.size() != static_cast<std::size_t>(k) ||
        mu.size() != static_cast<std::size_t>(k) ||
        sigma.size() != static_cast<std::size_t>(k) ||
        phi.size() != static_cast<std::size_t>(k))
        throw ConfigError("state catalog: parameter vectors must have k entries");
    double pi_sum = 0.0;
    for (int j = 0; j < k; ++j) {
        if (!(pi[j] >= 0.0)) throw ConfigError("state catalog: pi must be >= 0");
        pi_sum += pi[j];
        if (!(sigma[j] >= 0.0)) throw ConfigError("state catalog: sigma must be >= 0");
        if (!(std::abs(phi[j]) < 1.0))
            throw ConfigError("state catalog: |phi| must be < 1");
        if (j > 0 && mu[j] < mu[j - 1])
            throw ConfigError("state catalog: means must be sorted ascending");
    }
    if (std::abs(pi_sum - 1.0) > 1e-9)
        throw ConfigError("state catalog: pi must sum to 1");
    if (!(y_min <= y_max)) throw ConfigError("state catalog: y_min must be <= y_max");
}

StateCatalog build_catalog(const std::vector<PowerTrace>& traces, int k_min,
                           int k_max, std::uint64_t seed) {
    std::vector<double> pooled;
    for (const auto& t : traces)
        pooled.insert(pooled.end(), t.samples.begin(), t.samples.end());
    if (pooled.empty()) throw FitError("build_catalog: no samples");

    const int k = select_k_bic(pooled, k_min, k_max, seed);
    const GmmFit fit = fit_gmm(pooled, k, seed);

    StateCatalog cat;
    cat.k = k;
    cat.pi = fit.pi;
    cat.mu = fit.mu;
    cat.sigma = fit.sigma;
    cat.phi.assign(k, 0.0);
    const auto [lo_it, hi_it] = std::minmax_element(pooled.begin(), pooled.end());
    cat.y_min = *lo_it;
    cat.y_max = *hi_it;

    Ar1Accumulator acc(k);
    for (const auto& t : traces) {
        const StateLabels labels = assign_states(t, cat);
        acc.add_trace(t, labels, cat.mu);
    }
    cat.phi = acc.finalize();
    return cat;
}

} // namespace powertrace
