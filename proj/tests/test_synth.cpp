#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fedus/preprocess/envelopes.hpp"
#include "fedus/preprocess/prepare.hpp"
#include "fedus/synth/synthgen.hpp"

using namespace fedus;
using namespace fedus::synth;

namespace {

SynthConfig one_subject(double duration, double bpm = 140.0) {
    SynthConfig cfg;
    cfg.n_subjects = 1;
    cfg.duration_s = duration;
    cfg.fhr_base = bpm;
    return cfg;
}

} // namespace

TEST(GenFecg, ConstantRateGivesExactIntervals) {
    auto cfg = one_subject(60.0);
    cfg.fhr_variability = 0.0;
    cfg.peak_grid_hz = 0.0;
    auto rng = substream(cfg.seed, "x");
    const auto beats = gen_fecg(cfg, rng);
    ASSERT_GT(beats.peaks.size(), 100u);
    for (std::size_t i = 1; i < beats.peaks.size(); ++i)
        EXPECT_NEAR(beats.peaks[i] - beats.peaks[i - 1], 60.0 / 140.0, 1e-9);
}

TEST(GenFecg, PeaksOnGridByDefault) {
    auto cfg = one_subject(30.0);
    auto rng = substream(cfg.seed, "x");
    for (double p : gen_fecg(cfg, rng).peaks) EXPECT_NEAR(p * 250.0, std::round(p * 250.0), 1e-9);
}

TEST(GenFecg, MeanRateMatchesTrajectory) {
    auto cfg = one_subject(300.0);
    auto rng = substream(cfg.seed, "x");
    const auto beats = gen_fecg(cfg, rng);
    const double from_peaks =
        60.0 * static_cast<double>(beats.peaks.size() - 1) / (beats.peaks.back() - beats.peaks.front());
    double harmonic = 0.0;
    for (std::size_t i = 0; i + 1 < beats.fhr.size(); ++i) harmonic += 60.0 / beats.fhr[i];
    const double traj = 60.0 * static_cast<double>(beats.fhr.size() - 1) / harmonic;
    EXPECT_NEAR(from_peaks, traj, 1.0);
    for (double b : beats.fhr) {
        EXPECT_GE(b, 90.0);
        EXPECT_LE(b, 200.0);
    }
}

TEST(GenFecg, RWaveIsLargestNearPeak) {
    auto cfg = one_subject(20.0);
    auto rng = substream(cfg.seed, "x");
    const auto beats = gen_fecg(cfg, rng);
    for (double p : beats.peaks) {
        const auto i = static_cast<std::size_t>(std::lround(p * 250.0));
        if (i < 5 || i + 5 >= beats.ecg.size()) continue;
        const auto it = std::max_element(beats.ecg.samples.begin() + static_cast<long>(i) - 5,
                                         beats.ecg.samples.begin() + static_cast<long>(i) + 6);
        EXPECT_EQ(static_cast<std::size_t>(it - beats.ecg.samples.begin()), i);
    }
}

TEST(GenDus, SpectralPeakInBand) {
    const auto rec = gen_dataset(one_subject(60.0)).front();
    const auto psd = signal::welch_psd(rec.dus, 256, 0.5);
    const auto k = static_cast<std::size_t>(std::max_element(psd.power.begin(), psd.power.end()) - psd.power.begin());
    EXPECT_GE(psd.freqs[k], 150.0);
    EXPECT_LE(psd.freqs[k], 300.0);
}

TEST(GenDus, TwoEnvelopeMaximaPerCycle) {
    auto cfg = one_subject(60.0);
    const auto rec = gen_dataset(cfg).front();
    const auto env = preprocess::homomorphic_envelope(rec.dus);
    const auto& e = env.samples;
    std::size_t cycles = 0, ok = 0;
    for (std::size_t k = 0; k + 1 < rec.peaks.size(); ++k) {
        const auto a = static_cast<std::size_t>((rec.peaks[k] + cfg.lag_s) * env.fs);
        const auto b = static_cast<std::size_t>((rec.peaks[k + 1] + cfg.lag_s) * env.fs);
        if (b + 1 >= e.size()) break;
        ++cycles;
        int maxima = 0;
        for (std::size_t i = std::max<std::size_t>(a, 1); i < b; ++i)
            if (e[i] > e[i - 1] && e[i] >= e[i + 1]) ++maxima;
        if (maxima >= 2) ++ok;
    }
    ASSERT_GT(cycles, 100u);
    EXPECT_GE(static_cast<double>(ok), 0.9 * static_cast<double>(cycles));
}

TEST(GenDus, EmptyPeaksThrow) {
    auto cfg = one_subject(30.0);
    auto rng = substream(1, "d");
    EXPECT_THROW(gen_dus({}, cfg, rng), std::invalid_argument);
    EXPECT_THROW(gen_dus({1.0, 0.5}, cfg, rng), std::invalid_argument);
}

TEST(GenDataset, Deterministic) {
    SynthConfig cfg;
    cfg.n_subjects = 2;
    cfg.duration_s = 30.0;
    cfg.corruption_fraction = 0.3;
    const auto a = gen_dataset(cfg), b = gen_dataset(cfg);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].dus.samples, b[i].dus.samples);
        EXPECT_EQ(a[i].peaks, b[i].peaks);
        for (std::size_t c = 0; c < a[i].fecg_channels.size(); ++c)
            EXPECT_EQ(a[i].fecg_channels[c].samples, b[i].fecg_channels[c].samples);
        for (std::size_t s = 0; s < a[i].segments.size(); ++s) {
            EXPECT_EQ(a[i].segments[s].fecg_sqi, b[i].segments[s].fecg_sqi);
            EXPECT_EQ(a[i].segments[s].dus_sqi, b[i].segments[s].dus_sqi);
        }
    }
    cfg.seed = 43;
    EXPECT_NE(gen_dataset(cfg)[0].dus.samples, a[0].dus.samples);
}

TEST(GenDataset, SubjectsIndependentOfCount) {
    SynthConfig cfg;
    cfg.n_subjects = 3;
    cfg.duration_s = 30.0;
    cfg.fhr_spread = 0.0;
    const auto three = gen_dataset(cfg);
    cfg.n_subjects = 2;
    const auto two = gen_dataset(cfg);
    EXPECT_EQ(two[1].dus.samples, three[1].dus.samples);
}

TEST(GenDataset, CleanByDefault) {
    SynthConfig cfg;
    cfg.n_subjects = 2;
    cfg.duration_s = 60.0;
    for (const auto& rec : gen_dataset(cfg)) {
        EXPECT_EQ(rec.segments.size(), 16u);
        for (const auto& s : rec.segments) {
            EXPECT_EQ(s.dus_sqi, (std::array<int, 2>{1, 1}));
            for (const auto& q : s.fecg_sqi) EXPECT_EQ(q, (std::array<int, 2>{1, 1}));
        }
        EXPECT_NO_THROW(preprocess::validate_record(rec));
    }
}

TEST(GenDataset, CorruptionLabelsLowerQuality) {
    SynthConfig cfg;
    cfg.n_subjects = 1;
    cfg.duration_s = 300.0;
    cfg.corruption_fraction = 0.5;
    const auto rec = gen_dataset(cfg).front();
    std::size_t degraded = 0;
    for (const auto& s : rec.segments) {
        bool bad = s.dus_sqi != std::array<int, 2>{1, 1};
        for (const auto& q : s.fecg_sqi) bad |= q != std::array<int, 2>{1, 1};
        degraded += bad;
    }
    EXPECT_GT(degraded, rec.segments.size() / 4);
    EXPECT_LT(degraded, 3 * rec.segments.size() / 4);
}

TEST(GenDataset, SegmentTruthAndSubjectSpread) {
    SynthConfig cfg;
    cfg.duration_s = 30.0;
    const auto data = gen_dataset(cfg);
    ASSERT_EQ(data.size(), 5u);
    EXPECT_EQ(data[0].subject_id, "S01");
    EXPECT_EQ(data[4].subject_id, "S05");
    for (const auto& rec : data) {
        ASSERT_TRUE(rec.truth.has_value());
        EXPECT_EQ(rec.truth->injected_lag_s, 0.10);
        for (double f : rec.truth->segment_fhr) {
            EXPECT_GE(f, 90.0);
            EXPECT_LE(f, 200.0);
        }
    }
}

TEST(GenDataset, DefaultYieldsEnoughPairs) {
    const SynthConfig cfg;  // 5 subjects x 600 s
    std::size_t pairs = 0;
    for (const auto& raw : gen_dataset(cfg))
        pairs += preprocess::extract_beat_pairs(preprocess::prepare_subject(raw).record, 1, 160).size();
    EXPECT_GE(pairs, 3000u);
}

TEST(SynthConfig, Validation) {
    SynthConfig cfg;
    cfg.fhr_base = 80.0;
    EXPECT_THROW(gen_dataset(cfg), ConfigError);
    cfg = {};
    cfg.duration_s = 10.0;
    EXPECT_THROW(gen_dataset(cfg), ConfigError);
    cfg = {};
    cfg.dus_peak_hz = 700.0;
    EXPECT_THROW(gen_dataset(cfg), ConfigError);
}
