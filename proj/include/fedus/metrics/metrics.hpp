#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fedus/error.hpp"
#include "fedus/parallel.hpp"
#include "fedus/signal/spectral.hpp"

namespace fedus::metrics {

using Signal = std::span<const double>;

/// Welch settings shared by every spectral metric.
struct SpectralConfig {
    double fs = 2000.0;
    std::size_t seg_len = 256;
    double overlap = 0.5;
};

inline constexpr std::size_t kld_bins = 50;
inline constexpr double kld_epsilon = 1e-10;
inline constexpr double kld_range_tolerance = 1e-6;
inline constexpr double psd_db_floor = 1e-12;

namespace detail {

inline void require_same_length(Signal x, Signal y, const char* what) {
    if (x.size() != y.size())
        throw DataError(std::string(what) + ": length mismatch (" + std::to_string(x.size()) + " vs " +
                        std::to_string(y.size()) + ")");
    if (x.empty()) throw DataError(std::string(what) + ": empty signal");
}

inline signal::PsdEstimate psd(Signal x, const SpectralConfig& cfg) {
    if (x.size() < cfg.seg_len)
        throw DataError("spectral metric: signal of " + std::to_string(x.size()) + " samples is shorter than the " +
                        std::to_string(cfg.seg_len) + "-sample Welch segment");
    return signal::welch_psd(x, cfg.fs, cfg.seg_len, cfg.overlap);
}

inline double total_power(const std::vector<double>& p, const char* what) {
    double s = 0.0;
    for (double v : p) s += v;
    if (!(s > 0.0) || !std::isfinite(s)) throw DataError(std::string(what) + ": signal has zero power");
    return s;
}

} // namespace detail

inline double rmse(Signal x, Signal y) {
    detail::require_same_length(x, y, "rmse");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(acc / static_cast<double>(x.size()));
}

inline double mae(Signal x, Signal y) {
    detail::require_same_length(x, y, "mae");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - y[i]);
    return acc / static_cast<double>(x.size());
}

/// Smoothed amplitude histogram on [-1, 1]; sums to 1.
inline std::vector<double> amplitude_distribution(Signal x, std::size_t bins = kld_bins) {
    if (bins == 0) throw std::invalid_argument("amplitude_distribution: bins must be >= 1");
    if (x.empty()) throw DataError("kld: empty signal");
    std::vector<double> count(bins, 0.0);
    for (double v : x) {
        if (!(std::abs(v) <= 1.0 + kld_range_tolerance)) throw DataError("kld: value outside [-1, 1]");
        const double u = (std::clamp(v, -1.0, 1.0) + 1.0) / 2.0 * static_cast<double>(bins);
        count[std::min(bins - 1, static_cast<std::size_t>(u))] += 1.0;
    }
    double total = 0.0;
    for (auto& c : count) total += c = c / static_cast<double>(x.size()) + kld_epsilon;
    for (auto& c : count) c /= total;
    return count;
}

/// KL(P_x || P_y) of the amplitude distributions, natural log. x is the reference.
inline double kld(Signal x, Signal y, std::size_t bins = kld_bins) {
    const auto p = amplitude_distribution(x, bins);
    const auto q = amplitude_distribution(y, bins);
    double d = 0.0;
    for (std::size_t i = 0; i < bins; ++i) d += p[i] * std::log(p[i] / q[i]);
    return std::max(0.0, d);
}

/// Shannon entropy (nats) of a power spectrum normalized to sum 1.
inline double power_entropy(const std::vector<double>& power) {
    const double total = detail::total_power(power, "spectral entropy");
    double h = 0.0;
    for (double v : power) {
        const double p = v / total;
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

inline double spectral_entropy(Signal x, const SpectralConfig& cfg = {}) {
    return power_entropy(detail::psd(x, cfg).power);
}

inline double spectral_entropy_diff(Signal x, Signal y, const SpectralConfig& cfg = {}) {
    return std::abs(spectral_entropy(x, cfg) - spectral_entropy(y, cfg));
}

inline double spectral_centroid(const signal::PsdEstimate& psd) {
    const double total = detail::total_power(psd.power, "spectral centroid");
    double m = 0.0;
    for (std::size_t k = 0; k < psd.power.size(); ++k) m += psd.freqs[k] * psd.power[k];
    return m / total;
}

inline double spectral_centroid(Signal x, const SpectralConfig& cfg = {}) {
    return spectral_centroid(detail::psd(x, cfg));
}

inline double centroid_diff(Signal x, Signal y, const SpectralConfig& cfg = {}) {
    return std::abs(spectral_centroid(x, cfg) - spectral_centroid(y, cfg));
}

/// Geometric over arithmetic mean of the PSD bins, in [0, 1].
inline double power_flatness(const std::vector<double>& power) {
    const double total = detail::total_power(power, "spectral flatness");
    double log_sum = 0.0;
    for (double v : power) log_sum += std::log(std::max(v, std::numeric_limits<double>::min()));
    const double n = static_cast<double>(power.size());
    return std::clamp(std::exp(log_sum / n) / (total / n), 0.0, 1.0);
}

inline double spectral_flatness(Signal x, const SpectralConfig& cfg = {}) {
    return power_flatness(detail::psd(x, cfg).power);
}

inline double spectral_flatness_diff(Signal x, Signal y, const SpectralConfig& cfg = {}) {
    return std::abs(spectral_flatness(x, cfg) - spectral_flatness(y, cfg));
}

/// Mean linear Welch PSD over a list of signals.
inline signal::PsdEstimate mean_psd(const std::vector<std::vector<double>>& signals, const SpectralConfig& cfg = {}) {
    if (signals.empty()) throw DataError("mean_psd: empty signal list");
    signal::PsdEstimate acc;
    for (const auto& s : signals) {
        auto p = detail::psd(s, cfg);
        if (acc.power.empty()) {
            acc = std::move(p);
            continue;
        }
        if (p.power.size() != acc.power.size()) throw DataError("mean_psd: inconsistent spectra");
        for (std::size_t k = 0; k < p.power.size(); ++k) acc.power[k] += p.power[k];
    }
    for (auto& v : acc.power) v /= static_cast<double>(signals.size());
    return acc;
}

inline std::vector<double> to_db(const std::vector<double>& power) {
    std::vector<double> out(power.size());
    for (std::size_t k = 0; k < power.size(); ++k) out[k] = 10.0 * std::log10(power[k] + psd_db_floor);
    return out;
}

/// RMS difference in dB between the mean spectra of two signal lists.
inline double psd_difference(const signal::PsdEstimate& a, const signal::PsdEstimate& b) {
    if (a.power.size() != b.power.size() || a.power.empty()) throw DataError("psd_difference: spectra differ in size");
    const auto da = to_db(a.power), db = to_db(b.power);
    double acc = 0.0;
    for (std::size_t k = 0; k < da.size(); ++k) acc += (da[k] - db[k]) * (da[k] - db[k]);
    return std::sqrt(acc / static_cast<double>(da.size()));
}

inline double psd_difference(const std::vector<std::vector<double>>& reals, const std::vector<std::vector<double>>& gens,
                             const SpectralConfig& cfg = {}) {
    if (reals.empty() || gens.empty()) throw DataError("psd_difference: empty signal list");
    return psd_difference(mean_psd(reals, cfg), mean_psd(gens, cfg));
}

/// Discrete Frechet distance between the curves (i/(n-1)*time_scale, x_i) and
/// (j/(m-1)*time_scale, y_j). A single-point curve sits at time 0.
inline double frechet_distance(Signal x, Signal y, double time_scale = 1.0) {
    if (x.empty() || y.empty()) throw DataError("frechet_distance: empty signal");
    const std::size_t n = x.size(), m = y.size();
    auto t = [time_scale](std::size_t i, std::size_t len) {
        return len > 1 ? time_scale * static_cast<double>(i) / static_cast<double>(len - 1) : 0.0;
    };
    auto dist = [&](std::size_t i, std::size_t j) {
        const double dt = t(i, n) - t(j, m), dx = x[i] - y[j];
        return std::sqrt(dt * dt + dx * dx);
    };
    std::vector<double> prev(m), cur(m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double d = dist(i, j);
            double reach;
            if (i == 0 && j == 0)
                reach = d;
            else if (i == 0)
                reach = cur[j - 1];
            else if (j == 0)
                reach = prev[0];
            else
                reach = std::min({prev[j], prev[j - 1], cur[j - 1]});
            cur[j] = std::max(reach, d);
        }
        std::swap(prev, cur);
    }
    return prev[m - 1];
}

// ------------------------------------------------------------------ reports

enum Metric : std::size_t { RMSE, MAE, KLD, SE, PSDD, CD, SF, FD, metric_count };

inline constexpr std::array<const char*, metric_count> metric_names{"RMSE", "MAE", "KLD", "SE", "PSDD", "CD", "SF", "FD"};

struct EvalConfig {
    SpectralConfig spectral;
    std::size_t kld_bins = metrics::kld_bins;
    double frechet_scale = 1.0;
};

using PairMetrics = std::array<double, metric_count>;

/// All eight indicators for one (real, generated) pair.
inline PairMetrics pair_metrics(Signal real, Signal gen, const EvalConfig& cfg = {}) {
    detail::require_same_length(real, gen, "pair_metrics");
    const auto pr = detail::psd(real, cfg.spectral), pg = detail::psd(gen, cfg.spectral);
    PairMetrics m{};
    m[RMSE] = rmse(real, gen);
    m[MAE] = mae(real, gen);
    m[KLD] = kld(real, gen, cfg.kld_bins);
    m[SE] = std::abs(power_entropy(pr.power) - power_entropy(pg.power));
    m[PSDD] = psd_difference(pr, pg);
    m[CD] = std::abs(spectral_centroid(pr) - spectral_centroid(pg));
    m[SF] = std::abs(power_flatness(pr.power) - power_flatness(pg.power));
    m[FD] = frechet_distance(real, gen, cfg.frechet_scale);
    return m;
}

inline std::vector<PairMetrics> evaluate_pairs(const std::vector<std::vector<double>>& reals,
                                               const std::vector<std::vector<double>>& gens, const EvalConfig& cfg = {},
                                               unsigned jobs = 1) {
    if (reals.size() != gens.size()) throw DataError("evaluate_pairs: list sizes differ");
    std::vector<PairMetrics> out(reals.size());
    parallel_for(reals.size(), jobs, [&](std::size_t i) { out[i] = pair_metrics(reals[i], gens[i], cfg); });
    return out;
}

struct Summary {
    double mean = 0.0;
    double std = 0.0;
};

struct MetricsReport {
    std::array<Summary, metric_count> metric{};
    std::size_t n_pairs = 0;
};

/// Mean and population std of a sample, with Neumaier-compensated sums.
inline Summary summarize(std::span<const double> v) {
    if (v.empty()) throw DataError("summarize: no values");
    auto sum = [&](auto f) {
        double s = 0.0, c = 0.0;
        for (double x : v) {
            const double y = f(x), t = s + y;
            c += std::abs(s) >= std::abs(y) ? (s - t) + y : (y - t) + s;
            s = t;
        }
        return s + c;
    };
    const double n = static_cast<double>(v.size());
    const double mean = sum([](double x) { return x; }) / n;
    const double var = sum([mean](double x) { return (x - mean) * (x - mean); }) / n;
    return {mean, std::sqrt(std::max(0.0, var))};
}

inline MetricsReport aggregate(const std::vector<PairMetrics>& pairs) {
    if (pairs.empty()) throw DataError("aggregate: no pairs");
    MetricsReport r;
    r.n_pairs = pairs.size();
    std::vector<double> col(pairs.size());
    for (std::size_t k = 0; k < metric_count; ++k) {
        for (std::size_t i = 0; i < pairs.size(); ++i) col[i] = pairs[i][k];
        r.metric[k] = summarize(col);
    }
    return r;
}

inline std::string report_csv_header() {
    std::string s = "label,n_pairs";
    for (auto name : metric_names) s += std::string(",") + name + "_mean," + name + "_std";
    return s + "\n";
}

inline std::string report_csv_row(const std::string& label, const MetricsReport& r) {
    std::string s = label + "," + std::to_string(r.n_pairs);
    char buf[64];
    for (const auto& m : r.metric) {
        std::snprintf(buf, sizeof buf, ",%.9g,%.9g", m.mean, m.std);
        s += buf;
    }
    return s + "\n";
}

inline void write_report_csv(const std::string& path, const std::vector<std::pair<std::string, MetricsReport>>& rows) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw DataError("cannot open for writing: " + path);
    std::string text = report_csv_header();
    for (const auto& [label, r] : rows) text += report_csv_row(label, r);
    std::fwrite(text.data(), 1, text.size(), f);
    if (std::fclose(f) != 0) throw DataError("write failed: " + path);
}

} // namespace fedus::metrics
