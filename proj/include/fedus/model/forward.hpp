#pragma once

#include <span>
#include <string>
#include <vector>

#include "fedus/error.hpp"
#include "fedus/model/params.hpp"
#include "fedus/nn/tape.hpp"
#include "fedus/parallel.hpp"

namespace fedus::model {

using nn::Tape;
using nn::Var;

template <class T>
struct Graph {
    Var<T> features;  // conv-stack output [T, B, C], before flatten
    Var<T> output;    // [B, L_out]
};

/// Trainable leaves in named() order; gradients accumulate into the tensors.
template <class T>
std::vector<Var<T>> bind_params(Tape<T>& tape, ModelParams<T>& p) {
    std::vector<Var<T>> out;
    for (auto& [name, t] : p.named()) out.push_back(tape.param(*t));
    return out;
}

/// Frozen leaves in named() order.
template <class T>
std::vector<Var<T>> bind_constants(Tape<T>& tape, const ModelParams<T>& p) {
    std::vector<Var<T>> out;
    for (auto& [name, t] : p.named()) out.push_back(tape.constant(*t));
    return out;
}

/// Records the conv stack (front conv, residual blocks, post-skip convs) for a
/// time-major input [T, B, 1] of any length. Consumes leaves from `next`.
template <class T, class Next>
Var<T> build_features(const ArchConfig& arch, Next& next, Var<T> x) {
    Var<T> fw = next(), fb = next();
    Var<T> h = nn::conv1d_causal(x, fw, fb, 1);
    Var<T> skip;
    bool have_skip = false;
    for (int d : arch.dilations) {
        Var<T> filt_w = next(), filt_b = next(), gate_w = next(), gate_b = next(), out_w = next(), out_b = next();
        const auto dil = static_cast<std::size_t>(d);
        Var<T> z = nn::mul(nn::tanh(nn::conv1d_causal(h, filt_w, filt_b, dil)),
                           nn::sigmoid(nn::conv1d_causal(h, gate_w, gate_b, dil)));
        Var<T> s = nn::conv1d_causal(z, out_w, out_b, 1);
        h = nn::add(h, s);
        skip = have_skip ? nn::add(skip, s) : s;
        have_skip = true;
    }
    Var<T> f = skip;
    for (int k = 0; k < arch.post_skip_convs; ++k) {
        Var<T> w = next(), b = next();
        f = nn::conv1d_causal(nn::relu(f), w, b, 1);
    }
    return f;
}

/// Records the network on `tape`. x is time-major [L_in, B, 1]; leaves come from
/// bind_params or bind_constants.
template <class T>
Graph<T> build_graph(const ArchConfig& arch, const std::vector<Var<T>>& leaves, Var<T> x) {
    const auto& xs = x.shape();
    if (xs.size() != 3 || xs[2] != 1) throw ModelError("forward: input must be [L_in, B, 1], got " + nn::shape_str(xs));
    if (xs[0] != arch.l_in)
        throw ModelError("forward: input length " + std::to_string(xs[0]) + " != L_in " + std::to_string(arch.l_in));
    std::size_t i = 0;
    auto next = [&]() -> Var<T> { return leaves.at(i++); };
    Var<T> f = build_features(arch, next, x);
    Var<T> dw = next(), db = next();
    Var<T> y = nn::tanh(nn::dense(nn::flatten(f), dw, db));
    return {f, y};
}

/// Packs inputs (each L_in samples) into a time-major [L_in, B, 1] tensor.
template <class T, class Range>
nn::Tensor<T> pack_inputs(const Range& inputs, std::size_t l_in) {
    const std::size_t batch = std::size(inputs);
    nn::Tensor<T> x(nn::Shape{l_in, batch, 1});
    std::size_t b = 0;
    for (const auto& in : inputs) {
        if (std::size(in) != l_in)
            throw ModelError("forward: input length " + std::to_string(std::size(in)) + " != L_in " +
                             std::to_string(l_in));
        std::size_t t = 0;
        for (auto v : in) x.data[t++ * batch + b] = static_cast<T>(v);
        ++b;
    }
    return x;
}

template <class T>
std::vector<T> forward(const ModelParams<T>& p, std::span<const T> fecg_in) {
    Tape<T> tape;
    auto leaves = bind_constants(tape, p);
    std::vector<std::span<const T>> one{fecg_in};
    auto x = tape.input(pack_inputs<T>(one, p.arch.l_in));
    const auto& y = build_graph(p.arch, leaves, x).output.value().data;
    return std::vector<T>(y.begin(), y.end());
}

/// Conv-stack features for one input of any length T, as [T, n_filters].
template <class T>
nn::Tensor<T> forward_features(const ModelParams<T>& p, std::span<const T> fecg_in) {
    if (fecg_in.empty()) throw ModelError("forward_features: empty input");
    Tape<T> tape;
    auto leaves = bind_constants(tape, p);
    std::vector<std::span<const T>> one{fecg_in};
    auto x = tape.input(pack_inputs<T>(one, fecg_in.size()));
    std::size_t i = 0;
    auto next = [&]() -> Var<T> { return leaves.at(i++); };
    const auto& f = build_features(p.arch, next, x).value();
    return nn::Tensor<T>(nn::Shape{f.shape[0], f.shape[2]}, f.data);
}

/// Per-item forward for every input; items are independent, so the result does
/// not depend on `jobs`.
template <class T>
std::vector<std::vector<T>> predict_batch(const ModelParams<T>& p, const std::vector<std::vector<T>>& inputs,
                                          unsigned jobs = 1) {
    std::vector<std::vector<T>> out(inputs.size());
    parallel_for(inputs.size(), jobs, [&](std::size_t i) { out[i] = forward(p, std::span<const T>(inputs[i])); });
    return out;
}

} // namespace fedus::model
