#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include "fedus/metrics/metrics.hpp"
#include "fedus/metrics/svg.hpp"
#include "fedus/random.hpp"
#include "support.hpp"

using namespace fedus::metrics;
using fedus::test::uniform_vector;

namespace {

std::vector<double> tone(double f, double fs, std::size_t n, double amp = 0.8) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs);
    return x;
}

std::vector<double> noise(std::size_t n, std::uint64_t seed, double sd = 0.3) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sd);
    std::vector<double> x(n);
    for (auto& v : x) v = std::clamp(g(rng), -1.0, 1.0);
    return x;
}

// Independent histogram: explicit bin edges, last bin closed.
double kld_oracle(const std::vector<double>& x, const std::vector<double>& y, int bins) {
    auto hist = [bins](const std::vector<double>& v) {
        std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
        for (double s : v) {
            for (int b = 0; b < bins; ++b) {
                const double lo = -1.0 + 2.0 * b / bins, hi = -1.0 + 2.0 * (b + 1) / bins;
                if ((s >= lo && s < hi) || (b == bins - 1 && s >= lo)) {
                    h[static_cast<std::size_t>(b)] += 1.0;
                    break;
                }
            }
        }
        double z = 0.0;
        for (auto& c : h) {
            c = c / static_cast<double>(v.size()) + 1e-10;
            z += c;
        }
        for (auto& c : h) c /= z;
        return h;
    };
    const auto p = hist(x), q = hist(y);
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) d += p[i] * std::log(p[i] / q[i]);
    return d;
}

// Minimum over all monotone couplings of the maximal point distance.
double frechet_oracle(const std::vector<double>& x, const std::vector<double>& y, double scale) {
    const std::size_t n = x.size(), m = y.size();
    auto t = [scale](std::size_t i, std::size_t len) { return len > 1 ? scale * double(i) / double(len - 1) : 0.0; };
    auto d = [&](std::size_t i, std::size_t j) {
        const double dt = t(i, n) - t(j, m), dx = x[i] - y[j];
        return std::sqrt(dt * dt + dx * dx);
    };
    double best = INFINITY;
    std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double worst) {
        worst = std::max(worst, d(i, j));
        if (i == n - 1 && j == m - 1) {
            best = std::min(best, worst);
            return;
        }
        if (i + 1 < n) walk(i + 1, j, worst);
        if (j + 1 < m) walk(i, j + 1, worst);
        if (i + 1 < n && j + 1 < m) walk(i + 1, j + 1, worst);
    };
    walk(0, 0, 0.0);
    return best;
}

} // namespace

TEST(Pointwise, Examples) {
    const std::vector<double> z(4, 0.0), a{1, -1, 1, -1}, b{3, 0, 0, 0};
    EXPECT_DOUBLE_EQ(rmse(a, z), 1.0);
    EXPECT_DOUBLE_EQ(mae(a, z), 1.0);
    EXPECT_DOUBLE_EQ(rmse(b, z), 1.5);
    EXPECT_DOUBLE_EQ(mae(b, z), 0.75);
    EXPECT_EQ(rmse(a, a), 0.0);
    EXPECT_EQ(mae(a, a), 0.0);
}

TEST(Pointwise, LengthMismatchThrows) {
    const std::vector<double> a(4), b(5);
    EXPECT_THROW(rmse(a, b), fedus::DataError);
    EXPECT_THROW(mae(a, b), fedus::DataError);
}

TEST(Pointwise, RmseAtLeastMae) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto x = uniform_vector(64, rng), y = uniform_vector(64, rng);
        EXPECT_GE(rmse(x, y), mae(x, y));
    }
}

TEST(Kld, TwoBinCase) {
    // -0.99 and 0.99 fall in the first and last of the 50 bins.
    std::vector<double> real, gen;
    for (int i = 0; i < 200; ++i) real.push_back(i % 2 ? 0.99 : -0.99);
    for (int i = 0; i < 200; ++i) gen.push_back(i % 4 == 0 ? -0.99 : 0.99);
    EXPECT_NEAR(kld(real, gen), 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), 1e-6);
    EXPECT_NEAR(kld(gen, real), 0.25 * std::log(0.5) + 0.75 * std::log(1.5), 1e-6);
    EXPECT_NEAR(kld(real, gen), 0.1438, 1e-4);
    EXPECT_NEAR(kld(gen, real), 0.1308, 1e-4);
}

TEST(Kld, MatchesBruteForceHistogram) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto x = uniform_vector(97, rng), y = uniform_vector(131, rng, -0.5, 1.0);
        EXPECT_NEAR(kld(x, y), kld_oracle(x, y, 50), 1e-9);
        EXPECT_GE(kld(x, y), 0.0);
    }
    const std::vector<double> edges{-1.0, 1.0, 0.0, -0.96, 0.96};
    EXPECT_NEAR(kld(edges, noise(300, 2)), kld_oracle(edges, noise(300, 2), 50), 1e-9);
}

TEST(Kld, RangeChecked) {
    const std::vector<double> ok{1.0000005, -1.0000005}, bad{1.01, 0.0};
    EXPECT_NO_THROW(kld(ok, ok));
    EXPECT_THROW(kld(bad, ok), fedus::DataError);
    EXPECT_THROW(kld(ok, bad), fedus::DataError);
}

TEST(Spectral, EntropyKernelFlatSpectrum) {
    for (std::size_t m : {1u, 2u, 17u, 129u}) {
        const std::vector<double> flat(m, 3.7);
        EXPECT_NEAR(power_entropy(flat), std::log(static_cast<double>(m)), 1e-6);
    }
}

TEST(Spectral, EntropyOrdering) {
    const auto w = noise(4096, 5), t = tone(200.0, 2000.0, 4096);
    EXPECT_GT(spectral_entropy(w), spectral_entropy(t));
    EXPECT_GT(spectral_entropy_diff(w, t), 0.0);
}

TEST(Spectral, ZeroPowerThrows) {
    const std::vector<double> zero(1024, 0.0), x = noise(1024, 1);
    EXPECT_THROW(spectral_entropy_diff(zero, x), fedus::DataError);
    EXPECT_THROW(centroid_diff(x, zero), fedus::DataError);
    EXPECT_THROW(spectral_flatness_diff(zero, zero), fedus::DataError);
}

TEST(Spectral, ToneCentroid) {
    const SpectralConfig cfg;
    const double bin = cfg.fs / static_cast<double>(cfg.seg_len);
    EXPECT_NEAR(spectral_centroid(tone(200.0, cfg.fs, 2000)), 200.0, bin);
}

TEST(Spectral, Flatness) {
    // 64 half-overlapping segments of 256 samples.
    const std::size_t n = 63 * 128 + 256;
    EXPECT_GT(spectral_flatness(noise(n, 9)), 0.5);
    EXPECT_LT(spectral_flatness(tone(200.0, 2000.0, n)), 0.05);
    EXPECT_LE(spectral_flatness(noise(n, 9)), 1.0);
}

TEST(Spectral, ShortSignalThrows) {
    const std::vector<double> x(100, 0.1);
    EXPECT_THROW(spectral_entropy(x), fedus::DataError);
}

TEST(Psdd, ScaledPowerGivesTenDb) {
    std::vector<std::vector<double>> reals, gens;
    for (std::uint64_t s = 0; s < 4; ++s) {
        reals.push_back(noise(1280, 100 + s, 0.2));
        gens.push_back(reals.back());
        for (auto& v : gens.back()) v *= std::sqrt(10.0);
    }
    EXPECT_EQ(psd_difference(reals, reals), 0.0);
    EXPECT_NEAR(psd_difference(reals, gens), 10.0, 1e-6);
}

TEST(Psdd, DisjointTonesMatchHandComputation) {
    const std::vector<std::vector<double>> a{tone(150.0, 2000.0, 1280)}, b{tone(400.0, 2000.0, 1280)};
    const auto pa = fedus::signal::welch_psd(a[0], 2000.0, 256, 0.5), pb = fedus::signal::welch_psd(b[0], 2000.0, 256, 0.5);
    double acc = 0.0;
    for (std::size_t k = 0; k < pa.power.size(); ++k) {
        const double d = 10.0 * std::log10(pa.power[k] + 1e-12) - 10.0 * std::log10(pb.power[k] + 1e-12);
        acc += d * d;
    }
    const double expected = std::sqrt(acc / static_cast<double>(pa.power.size()));
    EXPECT_GT(expected, 0.0);
    EXPECT_NEAR(psd_difference(a, b), expected, 1e-9);
}

TEST(Psdd, EmptyListThrows) {
    const std::vector<std::vector<double>> none, one{noise(512, 1)};
    EXPECT_THROW(psd_difference(none, one), fedus::DataError);
    EXPECT_THROW(psd_difference(one, none), fedus::DataError);
}

TEST(Frechet, MatchesExhaustiveCouplings) {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<std::size_t> len(1, 6);
    for (int trial = 0; trial < 500; ++trial) {
        const auto x = uniform_vector(len(rng), rng), y = uniform_vector(len(rng), rng);
        const double scale = trial % 3 == 0 ? 0.0 : 1.0;
        EXPECT_NEAR(frechet_distance(x, y, scale), frechet_oracle(x, y, scale), 1e-12);
    }
}

TEST(Frechet, ConstantCurves) {
    const std::vector<double> zero(7, 0.0), c(7, -0.35);
    EXPECT_DOUBLE_EQ(frechet_distance(zero, c, 0.0), 0.35);
    EXPECT_EQ(frechet_distance(c, c), 0.0);
}

TEST(Frechet, SymmetricAndBoundedByAlignedCoupling) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const auto x = uniform_vector(40, rng), y = uniform_vector(40, rng);
        double aligned = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) aligned = std::max(aligned, std::abs(x[i] - y[i]));
        EXPECT_DOUBLE_EQ(frechet_distance(x, y), frechet_distance(y, x));
        EXPECT_LE(frechet_distance(x, y, 0.0), aligned);
        EXPECT_LE(frechet_distance(x, y, 1.0), aligned);
        EXPECT_GE(frechet_distance(x, y, 0.0), std::max(std::abs(x.front() - y.front()), std::abs(x.back() - y.back())));
    }
}

TEST(Frechet, EmptyThrows) {
    const std::vector<double> e, x{0.1};
    EXPECT_THROW(frechet_distance(e, x), fedus::DataError);
}

TEST(PairMetrics, IdentityIsZero) {
    const auto x = noise(1280, 4);
    const auto m = pair_metrics(x, x);
    for (std::size_t k = 0; k < metric_count; ++k) EXPECT_EQ(m[k], 0.0) << metric_names[k];
}

TEST(PairMetrics, NonNegative) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto m = pair_metrics(noise(1280, s), tone(180.0 + s, 2000.0, 1280));
        for (std::size_t k = 0; k < metric_count; ++k) EXPECT_GE(m[k], 0.0) << metric_names[k];
    }
}

TEST(PairMetrics, ParallelMatchesSerial) {
    std::vector<std::vector<double>> r, g;
    for (std::uint64_t s = 0; s < 8; ++s) r.push_back(noise(1280, s)), g.push_back(noise(1280, s + 50));
    const auto a = evaluate_pairs(r, g, {}, 1), b = evaluate_pairs(r, g, {}, 4);
    EXPECT_EQ(a, b);
}

TEST(Aggregate, Examples) {
    PairMetrics one{}, three{};
    one.fill(1.0);
    three.fill(3.0);
    const auto single = aggregate({one});
    EXPECT_EQ(single.n_pairs, 1u);
    for (const auto& s : single.metric) EXPECT_EQ(s.std, 0.0);
    const auto r = aggregate({one, three});
    for (const auto& s : r.metric) {
        EXPECT_DOUBLE_EQ(s.mean, 2.0);
        EXPECT_DOUBLE_EQ(s.std, 1.0);
    }
    EXPECT_THROW(aggregate({}), fedus::DataError);
}

TEST(Aggregate, CompensatedMean) {
    std::vector<double> v(100000, 0.1);
    v.push_back(1e8);
    v.push_back(-1e8);
    EXPECT_NEAR(summarize(v).mean * static_cast<double>(v.size()), 10000.0, 1e-6);
}

TEST(Aggregate, CsvColumnOrder) {
    EXPECT_EQ(report_csv_header(),
              "label,n_pairs,RMSE_mean,RMSE_std,MAE_mean,MAE_std,KLD_mean,KLD_std,SE_mean,SE_std,PSDD_mean,PSDD_std,"
              "CD_mean,CD_std,SF_mean,SF_std,FD_mean,FD_std\n");
    PairMetrics p{};
    for (std::size_t k = 0; k < metric_count; ++k) p[k] = static_cast<double>(k) + 0.5;
    EXPECT_EQ(report_csv_row("S01", aggregate({p})), "S01,1,0.5,0,1.5,0,2.5,0,3.5,0,4.5,0,5.5,0,6.5,0,7.5,0\n");
}

TEST(Svg, PsdOverlayWritten) {
    const auto dir = fedus::test::scratch_dir("metrics_svg");
    const auto p = fedus::signal::welch_psd(tone(200.0, 2000.0, 2048), 2000.0, 256, 0.5);
    write_psd_svg((dir / "psd.svg").string(), p, p);
    std::ifstream in(dir / "psd.svg");
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_NE(ss.str().find("<svg"), std::string::npos);
    EXPECT_NE(ss.str().find("generated DUS"), std::string::npos);
    EXPECT_NE(ss.str().find("</svg>"), std::string::npos);
}
