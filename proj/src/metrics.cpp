#include "powertrace/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "powertrace/errors.hpp"
#include "powertrace/log.hpp"

namespace powertrace {

double delta_energy(const PowerTrace& syn, const PowerTrace& meas) {
    if (syn.samples.empty() || meas.samples.empty())
        throw MetricError("delta_energy: empty trace");
    const double e_meas = meas.energy_joules();
    if (e_meas <= 0.0) throw MetricError("delta_energy: measured energy is zero");
    return (syn.energy_joules() - e_meas) / e_meas;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw MetricError("ks_statistic: empty sample set");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() || j < b.size()) {
        double x;
        if (i == a.size()) x = b[j];
        else if (j == b.size()) x = a[i];
        else x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na -
                                 static_cast<double>(j) / nb));
    }
    return d;
}

std::vector<double> autocorrelation(const std::vector<double>& x, int max_lag) {
    const std::size_t n = x.size();
    if (n <= static_cast<std::size_t>(max_lag))
        throw MetricError("autocorrelation: trace shorter than max_lag");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double c0 = 0.0;
    for (double v : x) c0 += (v - mean) * (v - mean);
    c0 /= static_cast<double>(n);
    if (c0 <= 0.0) throw MetricError("autocorrelation: zero-variance trace");
    std::vector<double> acf(max_lag);
    for (int lag = 1; lag <= max_lag; ++lag) {
        double c = 0.0;
        for (std::size_t t = 0; t + lag < n; ++t)
            c += (x[t] - mean) * (x[t + lag] - mean);
        acf[lag - 1] = c / static_cast<double>(n) / c0;
    }
    return acf;
}

namespace {

std::pair<std::vector<double>, std::vector<double>> truncate_pair(
    const PowerTrace& syn, const PowerTrace& meas, const char* metric) {
    std::size_t n = std::min(syn.samples.size(), meas.samples.size());
    if (syn.samples.size() != meas.samples.size())
        log_warn(std::string(metric) + ": length mismatch (" +
                 std::to_string(syn.samples.size()) + " vs " +
                 std::to_string(meas.samples.size()) + "), truncating to " +
                 std::to_string(n));
    return {{syn.samples.begin(), syn.samples.begin() + n},
            {meas.samples.begin(), meas.samples.begin() + n}};
}

} // namespace

double acf_r2(const PowerTrace& syn, const PowerTrace& meas, int max_lag) {
    if (max_lag < 1) throw MetricError("acf_r2: max_lag must be >= 1");
    auto [s, m] = truncate_pair(syn, meas, "acf_r2");
    const std::vector<double> acf_s = autocorrelation(s, max_lag);
    const std::vector<double> acf_m = autocorrelation(m, max_lag);
    double mean_m = 0.0;
    for (double v : acf_m) mean_m += v;
    mean_m /= static_cast<double>(acf_m.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t l = 0; l < acf_m.size(); ++l) {
        ss_res += (acf_s[l] - acf_m[l]) * (acf_s[l] - acf_m[l]);
        ss_tot += (acf_m[l] - mean_m) * (acf_m[l] - mean_m);
    }
    if (ss_tot <= 0.0) {
        if (ss_res == 0.0) return 1.0;
        throw MetricError("acf_r2: measured ACF is constant over the lag range");
    }
    return 1.0 - ss_res / ss_tot;
}

double nrmse(const PowerTrace& syn, const PowerTrace& meas) {
    auto [s, m] = truncate_pair(syn, meas, "nrmse");
    if (m.empty()) throw MetricError("nrmse: empty trace");
    const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
    const double range = *hi - *lo;
    if (range <= 0.0) throw MetricError("nrmse: measured trace is constant");
    double se = 0.0;
    for (std::size_t t = 0; t < m.size(); ++t) se += (s[t] - m[t]) * (s[t] - m[t]);
    return std::sqrt(se / static_cast<double>(m.size())) / range;
}

double median(std::vector<double> values) {
    if (values.empty()) throw MetricError("median: empty input");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

FidelityReport evaluate_multi_seed(
    const PowerTrace& reference,
    const std::function<PowerTrace(std::uint64_t)>& generator, int n_seeds,
    int max_lag) {
    if (n_seeds < 1) throw MetricError("evaluate_multi_seed: n_seeds must be >= 1");
    std::vector<double> abs_de, ks, r2, nr;
    for (int s = 0; s < n_seeds; ++s) {
        const PowerTrace trace = generator(static_cast<std::uint64_t>(s));
        abs_de.push_back(std::abs(delta_energy(trace, reference)));
        ks.push_back(ks_statistic(trace.samples, reference.samples));
        r2.push_back(acf_r2(trace, reference, max_lag));
        nr.push_back(nrmse(trace, reference));
    }
    FidelityReport report;
    report.delta_energy = median(abs_de);
    report.ks = median(ks);
    report.acf_r2 = median(r2);
    report.nrmse = median(nr);
    report.n_seeds = n_seeds;
    report.aggregation = "median";
    return report;
}

} // namespace powertrace
