#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "fedus/model/forward.hpp"
#include "fedus/nn/adam.hpp"
#include "fedus/preprocess/records.hpp"

namespace fedus::model {

using preprocess::BeatPair;

struct HistoryRow {
    int epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
    double best_val_mse = 0.0;
};

template <class T>
struct TrainResult {
    ModelParams<T> params;  // best-validation parameters
    std::vector<HistoryRow> history;
    int best_epoch = 0;
    bool early_stopped = false;
    std::set<std::string> provenance;  // subjects whose pairs entered a gradient step
};

/// Time-ordered split: the last `fraction` of each subject's pairs go to validation.
inline std::pair<std::vector<const BeatPair*>, std::vector<const BeatPair*>> validation_split(
    const std::vector<BeatPair>& pairs, double fraction) {
    std::map<std::string, std::vector<const BeatPair*>> by_subject;
    std::vector<std::string> order;
    for (const auto& p : pairs) {
        auto [it, fresh] = by_subject.try_emplace(p.subject_id);
        if (fresh) order.push_back(p.subject_id);
        it->second.push_back(&p);
    }
    std::pair<std::vector<const BeatPair*>, std::vector<const BeatPair*>> out;
    for (const auto& id : order) {
        const auto& list = by_subject[id];
        const auto n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(list.size())));
        const std::size_t n_train = list.size() - n_val;
        out.first.insert(out.first.end(), list.begin(), list.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.second.insert(out.second.end(), list.begin() + static_cast<std::ptrdiff_t>(n_train), list.end());
    }
    return out;
}

inline void check_pair_shapes(const std::vector<const BeatPair*>& pairs, const ArchConfig& arch) {
    for (const auto* p : pairs)
        if (p->fecg_in.size() != arch.l_in || p->dus_out.size() != arch.l_out)
            throw DataError("train: pair of subject " + p->subject_id + " has lengths " +
                            std::to_string(p->fecg_in.size()) + "/" + std::to_string(p->dus_out.size()) +
                            ", model expects " + std::to_string(arch.l_in) + "/" + std::to_string(arch.l_out));
}

namespace detail {

template <class T>
struct Batch {
    nn::Tensor<T> x, y;
};

template <class T>
Batch<T> make_batch(const std::vector<const BeatPair*>& pairs, const std::vector<std::size_t>& idx, std::size_t from,
                    std::size_t to, const ArchConfig& arch) {
    const std::size_t b = to - from;
    Batch<T> out{nn::Tensor<T>(nn::Shape{arch.l_in, b, 1}), nn::Tensor<T>(nn::Shape{b, arch.l_out})};
    for (std::size_t i = 0; i < b; ++i) {
        const BeatPair& p = *pairs[idx[from + i]];
        for (std::size_t t = 0; t < arch.l_in; ++t) out.x.data[t * b + i] = static_cast<T>(p.fecg_in[t]);
        for (std::size_t t = 0; t < arch.l_out; ++t) out.y.data[i * arch.l_out + t] = static_cast<T>(p.dus_out[t]);
    }
    return out;
}

} // namespace detail

/// Mean squared error of the model over a set of pairs (NaN when empty).
template <class T>
double evaluate_mse(const ModelParams<T>& p, const std::vector<const BeatPair*>& pairs, std::size_t batch = 64) {
    if (pairs.empty()) return std::nan("");
    std::vector<std::size_t> idx(pairs.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    double acc = 0.0;
    for (std::size_t from = 0; from < pairs.size(); from += batch) {
        const std::size_t to = std::min(pairs.size(), from + batch);
        auto bt = detail::make_batch<T>(pairs, idx, from, to, p.arch);
        nn::Tape<T> tape;
        auto leaves = bind_constants(tape, p);
        auto g = build_graph(p.arch, leaves, tape.input(std::move(bt.x)));
        const auto& out = g.output.value().data;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double d = static_cast<double>(out[i]) - static_cast<double>(bt.y.data[i]);
            acc += d * d;
        }
    }
    return acc / static_cast<double>(pairs.size() * p.arch.l_out);
}

/// Mini-batch Adam on MSE with early stopping on validation loss.
template <class T = float>
TrainResult<T> train(const std::vector<BeatPair>& pairs, const ArchConfig& arch, const TrainConfig& tc,
                     const std::function<void(const HistoryRow&)>& on_epoch = {}) {
    validate(arch);
    validate(tc);
    if (pairs.empty()) throw DataError("train: no training pairs");
    auto [train_set, val_set] = validation_split(pairs, tc.val_fraction);
    check_pair_shapes(train_set, arch);
    check_pair_shapes(val_set, arch);
    if (train_set.empty()) throw DataError("train: validation split left no training pairs");
    // Tiny datasets may leave no validation pairs; early stopping then tracks the training loss.
    const bool have_val = !val_set.empty();

    TrainResult<T> res;
    ModelParams<T> p = init_params<T>(arch, tc.seed);
    nn::AdamState<T> adam;
    adam.lr = tc.lr;
    auto shuffle_rng = substream(tc.seed, "shuffle");
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    HistoryRow row0{0, evaluate_mse(p, train_set), 0.0, 0.0};
    row0.val_mse = have_val ? evaluate_mse(p, val_set) : row0.train_mse;
    if (!std::isfinite(row0.train_mse) || !std::isfinite(row0.val_mse))
        throw ModelError("train: initial loss is not finite");
    row0.best_val_mse = row0.val_mse;
    res.history.push_back(row0);
    if (on_epoch) on_epoch(row0);
    res.params = p;
    double best = row0.val_mse;
    int since_best = 0;

    auto tensors = p.tensors();
    const auto bs = static_cast<std::size_t>(tc.batch_size);
    for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng() % i]);
        double sum = 0.0;
        for (std::size_t from = 0; from < order.size(); from += bs) {
            const std::size_t to = std::min(order.size(), from + bs);
            auto bt = detail::make_batch<T>(train_set, order, from, to, arch);
            nn::Tape<T> tape;
            auto leaves = bind_params(tape, p);
            auto g = build_graph(arch, leaves, tape.input(std::move(bt.x)));
            auto loss = nn::mse_loss(g.output, tape.input(std::move(bt.y)));
            const double l = static_cast<double>(loss.value().data[0]);
            if (!std::isfinite(l)) {
                char msg[160];
                std::snprintf(msg, sizeof msg, "train: loss diverged (epoch %d, batch starting at %zu, lr %g)", epoch,
                              from, tc.lr);
                throw ModelError(msg);
            }
            p.zero_grad();
            tape.backward(loss);
            nn::adam_step(tensors, adam);
            for (std::size_t i = from; i < to; ++i) res.provenance.insert(train_set[order[i]]->subject_id);
            sum += l * static_cast<double>(to - from);
        }
        HistoryRow row{epoch, sum / static_cast<double>(order.size()), 0.0, 0.0};
        row.val_mse = have_val ? evaluate_mse(p, val_set) : row.train_mse;
        if (!std::isfinite(row.val_mse)) throw ModelError("train: validation loss diverged at epoch " + std::to_string(epoch));
        if (row.val_mse < best) {
            best = row.val_mse;
            since_best = 0;
            res.best_epoch = epoch;
            res.params = p;
        } else {
            ++since_best;
        }
        row.best_val_mse = best;
        res.history.push_back(row);
        if (on_epoch) on_epoch(row);
        if (since_best >= tc.patience) {
            res.early_stopped = true;
            break;
        }
    }
    for (auto* t : res.params.tensors()) t->grad.clear();
    return res;
}

inline void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& history) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path.string());
    os << "epoch,train_mse,val_mse\n";
    char line[96];
    for (const auto& r : history) {
        std::snprintf(line, sizeof line, "%d,%.9g,%.9g\n", r.epoch, r.train_mse, r.val_mse);
        os << line;
    }
}

} // namespace fedus::model
