#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "fedus/model/train.hpp"
#include "fedus/parallel.hpp"
#include "fedus/preprocess/beats.hpp"

namespace fedus::model {

/// Constant predictor: the sample-wise mean of the training DUS beats.
inline std::vector<float> mean_beat(const std::vector<BeatPair>& pairs) {
    if (pairs.empty()) throw DataError("mean_beat: no pairs");
    std::vector<double> acc(pairs.front().dus_out.size(), 0.0);
    for (const auto& p : pairs) {
        if (p.dus_out.size() != acc.size()) throw DataError("mean_beat: inconsistent DUS lengths");
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += p.dus_out[i];
    }
    std::vector<float> out(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i] / static_cast<double>(pairs.size()));
    return out;
}

struct FoldResult {
    std::string held_out;
    TrainResult<float> trained;
    std::vector<BeatPair> test;
    std::vector<std::vector<float>> predictions;  // one per test pair
    std::vector<float> baseline;                  // mean training beat
    double rmse_model = 0.0;
    double rmse_baseline = 0.0;
};

namespace detail {

inline double pooled_rmse(const std::vector<BeatPair>& test, const std::function<const std::vector<float>&(std::size_t)>& pred) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto& y = test[i].dus_out;
        const auto& p = pred(i);
        for (std::size_t j = 0; j < y.size(); ++j) {
            const double d = static_cast<double>(p[j]) - static_cast<double>(y[j]);
            acc += d * d;
        }
        n += y.size();
    }
    return n ? std::sqrt(acc / static_cast<double>(n)) : std::nan("");
}

} // namespace detail

/// Trains on all subjects but `held_out` and predicts the held-out subject's beats.
inline FoldResult run_fold(const std::vector<BeatPair>& pairs, const std::string& held_out, const ArchConfig& arch,
                           const TrainConfig& tc, const std::function<void(const HistoryRow&)>& on_epoch = {}) {
    auto [train_pairs, test_pairs] = preprocess::loso_split(pairs, held_out);
    FoldResult f;
    f.held_out = held_out;
    f.trained = train<float>(train_pairs, arch, tc, on_epoch);
    if (f.trained.provenance.count(held_out))
        throw Error(ErrorKind::internal, "LOSO integrity violated: held-out subject " + held_out + " reached a gradient step");
    f.test = std::move(test_pairs);
    std::vector<std::vector<float>> inputs;
    for (const auto& p : f.test) inputs.push_back(p.fecg_in);
    f.predictions = predict_batch(f.trained.params, inputs);
    f.baseline = mean_beat(train_pairs);
    f.rmse_model = detail::pooled_rmse(f.test, [&](std::size_t i) -> const std::vector<float>& { return f.predictions[i]; });
    f.rmse_baseline = detail::pooled_rmse(f.test, [&](std::size_t) -> const std::vector<float>& { return f.baseline; });
    return f;
}

/// One fold per subject, in sorted subject order. Folds are independent and may
/// run concurrently; results do not depend on `jobs`.
inline std::vector<FoldResult> run_loso(const std::vector<BeatPair>& pairs, const ArchConfig& arch,
                                        const TrainConfig& tc, unsigned jobs = 1,
                                        const std::function<void(const std::string&, const HistoryRow&)>& on_epoch = {}) {
    const auto ids = preprocess::subject_ids(pairs);
    if (ids.size() < 2) throw DataError("LOSO needs at least two subjects, found " + std::to_string(ids.size()));
    std::vector<FoldResult> folds(ids.size());
    parallel_for(ids.size(), jobs, [&](std::size_t i) {
        std::function<void(const HistoryRow&)> cb;
        if (on_epoch) cb = [&, id = ids[i]](const HistoryRow& r) { on_epoch(id, r); };
        folds[i] = run_fold(pairs, ids[i], arch, tc, cb);
    });
    return folds;
}

} // namespace fedus::model
