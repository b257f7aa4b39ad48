#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fedus/model/arch.hpp"
#include "fedus/nn/tensor.hpp"
#include "fedus/random.hpp"

namespace fedus::model {

using nn::Shape;
using nn::Tensor;

template <class T>
struct ResidualBlock {
    Tensor<T> filter_w, filter_b;
    Tensor<T> gate_w, gate_b;
    Tensor<T> out_w, out_b;  // 1x1
};

template <class T>
struct ModelParams {
    ArchConfig arch;
    Tensor<T> front_w, front_b;
    std::vector<ResidualBlock<T>> blocks;
    std::vector<std::pair<Tensor<T>, Tensor<T>>> post;  // 1x1 convs after the skip sum
    Tensor<T> dense_w, dense_b;

    ModelParams() = default;

    /// Zero-initialized parameters with shapes derived from `a`.
    explicit ModelParams(const ArchConfig& a) : arch(a) {
        validate(a);
        const std::size_t c = static_cast<std::size_t>(a.n_filters), k = static_cast<std::size_t>(a.kernel);
        front_w = Tensor<T>(Shape{k, 1, c});
        front_b = Tensor<T>(Shape{c});
        for (std::size_t i = 0; i < a.dilations.size(); ++i) {
            ResidualBlock<T> b;
            b.filter_w = Tensor<T>(Shape{k, c, c});
            b.filter_b = Tensor<T>(Shape{c});
            b.gate_w = Tensor<T>(Shape{k, c, c});
            b.gate_b = Tensor<T>(Shape{c});
            b.out_w = Tensor<T>(Shape{1, c, c});
            b.out_b = Tensor<T>(Shape{c});
            blocks.push_back(std::move(b));
        }
        for (int i = 0; i < a.post_skip_convs; ++i) post.emplace_back(Tensor<T>(Shape{1, c, c}), Tensor<T>(Shape{c}));
        dense_w = Tensor<T>(Shape{a.l_in * c, a.l_out});
        dense_b = Tensor<T>(Shape{a.l_out});
    }

    /// Stable (name, tensor) listing; the order defines checkpoint layout and optimizer state.
    std::vector<std::pair<std::string, Tensor<T>*>> named() {
        std::vector<std::pair<std::string, Tensor<T>*>> out{{"front.w", &front_w}, {"front.b", &front_b}};
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const std::string p = "block" + std::to_string(i) + ".";
            auto& b = blocks[i];
            out.insert(out.end(), {{p + "filter.w", &b.filter_w},
                                   {p + "filter.b", &b.filter_b},
                                   {p + "gate.w", &b.gate_w},
                                   {p + "gate.b", &b.gate_b},
                                   {p + "out.w", &b.out_w},
                                   {p + "out.b", &b.out_b}});
        }
        for (std::size_t i = 0; i < post.size(); ++i) {
            const std::string p = "post" + std::to_string(i) + ".";
            out.emplace_back(p + "w", &post[i].first);
            out.emplace_back(p + "b", &post[i].second);
        }
        out.emplace_back("dense.w", &dense_w);
        out.emplace_back("dense.b", &dense_b);
        return out;
    }

    std::vector<std::pair<std::string, const Tensor<T>*>> named() const {
        std::vector<std::pair<std::string, const Tensor<T>*>> out;
        for (auto& [n, t] : const_cast<ModelParams*>(this)->named()) out.emplace_back(n, t);
        return out;
    }

    std::vector<Tensor<T>*> tensors() {
        std::vector<Tensor<T>*> out;
        for (auto& [n, t] : named()) out.push_back(t);
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& [name, t] : named()) n += t->size();
        return n;
    }

    void zero_grad() {
        for (auto* t : tensors()) t->zero_grad();
    }

    bool all_finite() const {
        for (const auto& [name, t] : named())
            for (T v : t->data)
                if (!std::isfinite(v)) return false;
        return true;
    }

    template <class U>
    ModelParams<U> cast() const {
        ModelParams<U> out(arch);
        auto dst = out.named();
        auto src = named();
        for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = src[i].second->template cast<U>();
        return out;
    }
};

/// Glorot-uniform weights, zero biases.
template <class T>
ModelParams<T> init_params(const ArchConfig& a, std::uint64_t seed) {
    ModelParams<T> p(a);
    auto rng = substream(seed, "init");
    auto fill = [&](Tensor<T>& w, double fan_in, double fan_out) {
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& v : w.data) v = static_cast<T>((2.0 * uniform01(rng) - 1.0) * limit);
    };
    auto fill_conv = [&](Tensor<T>& w) {
        const double k = static_cast<double>(w.shape[0]);
        fill(w, k * static_cast<double>(w.shape[1]), k * static_cast<double>(w.shape[2]));
    };
    fill_conv(p.front_w);
    for (auto& b : p.blocks) {
        fill_conv(b.filter_w);
        fill_conv(b.gate_w);
        fill_conv(b.out_w);
    }
    for (auto& [w, b] : p.post) fill_conv(w);
    fill(p.dense_w, static_cast<double>(p.dense_w.shape[0]), static_cast<double>(p.dense_w.shape[1]));
    return p;
}

} // namespace fedus::model
