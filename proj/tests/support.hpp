#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fedus/preprocess/prepare.hpp"
#include "fedus/synth/synthgen.hpp"

namespace fedus::test {

/// Beat pairs from a small synthetic dataset (generation, preparation, extraction).
inline std::vector<preprocess::BeatPair> synthetic_pairs(int n_subjects, double duration_s, int n_beats = 1,
                                                         std::uint64_t seed = 42) {
    synth::SynthConfig cfg;
    cfg.n_subjects = n_subjects;
    cfg.duration_s = duration_s;
    cfg.seed = seed;
    std::vector<preprocess::BeatPair> out;
    for (const auto& raw : synth::gen_dataset(cfg)) {
        const auto prepared = preprocess::prepare_subject(raw);
        auto pairs = preprocess::extract_beat_pairs(prepared.record, n_beats, 160);
        out.insert(out.end(), pairs.begin(), pairs.end());
    }
    return out;
}

/// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("fedus_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::vector<double> uniform_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = lo + (hi - lo) * uniform01(rng);
    return v;
}

} // namespace fedus::test
