#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "fedus/nn/tensor.hpp"

namespace fedus::nn {

template <class T>
class Tape;

/// Handle to a node on a tape.
template <class T>
class Var {
public:
    Var() = default;
    Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape<T>& tape() const { return *tape_; }
    std::size_t id() const noexcept { return id_; }
    const Tensor<T>& value() const { return tape_->value(*this); }
    const Shape& shape() const { return value().shape; }
    const Buffer<T>& grad() const { return tape_->grad(*this); }

private:
    Tape<T>* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Dynamic reverse-mode tape. Nodes are appended in evaluation order, so
/// reverse insertion order is a valid reverse topological order.
template <class T>
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Tape() { nodes_.reserve(128); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Trainable leaf; gradients accumulate into param.grad across backward calls.
    Var<T> param(Tensor<T>& p) {
        p.ensure_grad();
        Node n;
        n.param = &p;
        n.ref = &p;
        n.requires_grad = true;
        nodes_.push_back(std::move(n));
        return {this, nodes_.size() - 1};
    }

    /// Read-only leaf referring to an external tensor (frozen weights for inference).
    Var<T> constant(const Tensor<T>& p) {
        Node n;
        n.ref = &p;
        nodes_.push_back(std::move(n));
        return {this, nodes_.size() - 1};
    }

    /// Data leaf. With requires_grad its gradient is kept on the tape (input sensitivity).
    Var<T> input(Tensor<T> value, bool requires_grad = false) {
        Node n;
        n.own = std::move(value);
        n.requires_grad = requires_grad;
        nodes_.push_back(std::move(n));
        return {this, nodes_.size() - 1};
    }

    Var<T> record(Tensor<T> value, bool requires_grad, BackwardFn fn) {
        Node n;
        n.own = std::move(value);
        n.requires_grad = requires_grad;
        if (requires_grad) n.backward = std::move(fn);
        nodes_.push_back(std::move(n));
        return {this, nodes_.size() - 1};
    }

    const Tensor<T>& value(Var<T> v) const { return value(v.id()); }
    const Tensor<T>& value(std::size_t id) const { return node(id).ref ? *node(id).ref : node(id).own; }
    bool requires_grad(std::size_t id) const { return node(id).requires_grad; }
    bool requires_grad(Var<T> v) const { return requires_grad(v.id()); }

    Buffer<T>& grad(std::size_t id) {
        Node& n = nodes_.at(id);
        return n.param ? n.param->grad : n.grad;
    }
    const Buffer<T>& grad(Var<T> v) const {
        const Node& n = node(v.id());
        return n.param ? n.param->grad : n.grad;
    }

    /// Seeds d(loss)/d(loss) = 1 and propagates. Intermediate gradients are
    /// reset on every call; parameter gradients accumulate.
    void backward(Var<T> loss) {
        if (value(loss).size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            Node& n = nodes_[i];
            if (n.param)
                n.param->ensure_grad();
            else if (n.requires_grad)
                n.grad.assign(n.own.size(), T(0));
        }
        grad(loss.id())[0] += T(1);
        for (std::size_t i = loss.id() + 1; i-- > 0;)
            if (nodes_[i].backward) nodes_[i].backward(*this, i);
    }

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> own;
        const Tensor<T>* ref = nullptr;
        Tensor<T>* param = nullptr;
        Buffer<T> grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    const Node& node(std::size_t id) const { return nodes_.at(id); }

    std::vector<Node> nodes_;
};

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <class T>
void require_same_tape(Var<T> a, Var<T> b) {
    if (&a.tape() != &b.tape()) throw std::invalid_argument("operands live on different tapes");
}

template <class T>
void require_same_shape(Var<T> a, Var<T> b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
}

template <class T>
using Arr = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <class T>
using ConstArr = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

template <class T>
Arr<T> arr(Buffer<T>& v) {
    return Arr<T>(v.data(), static_cast<Eigen::Index>(v.size()));
}
template <class T>
ConstArr<T> arr(const Buffer<T>& v) {
    return ConstArr<T>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// f(x_array) -> y_array; df(x_array, y_array) -> dy/dx array.
template <class T, class F, class D>
Var<T> unary(Var<T> x, F f, D df) {
    Tape<T>& tape = x.tape();
    const auto& xv = x.value();
    Tensor<T> y(xv.shape);
    arr(y.data) = f(arr(xv.data));
    const std::size_t xi = x.id();
    return tape.record(std::move(y), tape.requires_grad(x), [xi, df](Tape<T>& t, std::size_t self) {
        arr(t.grad(xi)) += arr(t.grad(self)) * df(arr(t.value(xi).data), arr(t.value(self).data));
    });
}

} // namespace detail

// -------------------------------------------------------------- elementwise

template <class T>
Var<T> tanh(Var<T> x) {
    return detail::unary(x, [](const auto& v) { return v.tanh(); }, [](const auto&, const auto& y) { return T(1) - y.square(); });
}

template <class T>
Var<T> sigmoid(Var<T> x) {
    return detail::unary(
        x, [](const auto& v) { return v.logistic(); }, [](const auto&, const auto& y) { return y * (T(1) - y); });
}

template <class T>
Var<T> relu(Var<T> x) {
    return detail::unary(
        x, [](const auto& v) { return v.max(T(0)); },
        [](const auto& v, const auto&) { return (v > T(0)).template cast<T>(); });
}

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
    detail::require_same_tape(a, b);
    detail::require_same_shape(a, b, "add");
    Tape<T>& tape = a.tape();
    Tensor<T> y(a.shape());
    const auto &av = a.value().data, &bv = b.value().data;
    detail::arr(y.data) = detail::arr(av) + detail::arr(bv);
    const std::size_t ai = a.id(), bi = b.id();
    const bool req = tape.requires_grad(a) || tape.requires_grad(b);
    return tape.record(std::move(y), req, [ai, bi](Tape<T>& t, std::size_t self) {
        const auto& gy = t.grad(self);
        for (std::size_t id : {ai, bi}) {
            if (!t.requires_grad(id)) continue;
            detail::arr(t.grad(id)) += detail::arr(gy);
        }
    });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
    detail::require_same_tape(a, b);
    detail::require_same_shape(a, b, "mul");
    Tape<T>& tape = a.tape();
    Tensor<T> y(a.shape());
    const auto &av = a.value().data, &bv = b.value().data;
    detail::arr(y.data) = detail::arr(av) * detail::arr(bv);
    const std::size_t ai = a.id(), bi = b.id();
    const bool req = tape.requires_grad(a) || tape.requires_grad(b);
    return tape.record(std::move(y), req, [ai, bi](Tape<T>& t, std::size_t self) {
        const auto& gy = t.grad(self);
        const auto &av2 = t.value(ai).data, &bv2 = t.value(bi).data;
        if (t.requires_grad(ai)) detail::arr(t.grad(ai)) += detail::arr(gy) * detail::arr(bv2);
        if (t.requires_grad(bi)) detail::arr(t.grad(bi)) += detail::arr(gy) * detail::arr(av2);
    });
}

// -------------------------------------------------------------- convolution

/// Causal dilated 1-D convolution.
///   x: [T, Cin] or time-major batch [T, B, Cin]; w: [K, Cin, Cout]; b: [Cout]
///   y[t, o] = b[o] + sum_{k, c} w[k, c, o] * x[t - k*dilation, c]  (zero for t - k*d < 0)
/// Output has the input's time length.
template <class T>
Var<T> conv1d_causal(Var<T> x, Var<T> w, Var<T> b, std::size_t dilation) {
    detail::require_same_tape(x, w);
    detail::require_same_tape(x, b);
    if (dilation < 1) throw std::invalid_argument("conv1d_causal: dilation must be >= 1");
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    if (xs.size() != 2 && xs.size() != 3) throw std::invalid_argument("conv1d_causal: input must be [T,C] or [T,B,C]");
    if (ws.size() != 3 || ws[0] < 1) throw std::invalid_argument("conv1d_causal: weight must be [K,Cin,Cout]");
    const std::size_t steps = xs[0];
    const std::size_t batch = xs.size() == 3 ? xs[1] : 1;
    const std::size_t cin = xs.back();
    const std::size_t kernel = ws[0], cout = ws[2];
    if (ws[1] != cin) throw std::invalid_argument("conv1d_causal: channel mismatch " + shape_str(xs) + " * " + shape_str(ws));
    if (b.shape() != Shape{cout}) throw std::invalid_argument("conv1d_causal: bias must be [Cout]");

    Shape ys = xs;
    ys.back() = cout;
    Tensor<T> y(ys);
    const auto rows = static_cast<Eigen::Index>(steps * batch);
    using CM = detail::ConstMatMap<T>;
    CM xm(x.value().data.data(), rows, static_cast<Eigen::Index>(cin));
    detail::MatMap<T> ym(y.data.data(), rows, static_cast<Eigen::Index>(cout));
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bm(b.value().data.data(), static_cast<Eigen::Index>(cout));
    ym.rowwise() = bm;
    const T* wdata = w.value().data.data();
    for (std::size_t k = 0; k < kernel; ++k) {
        const std::size_t shift_t = k * dilation;
        if (shift_t >= steps) break;
        const auto shift = static_cast<Eigen::Index>(shift_t * batch);
        CM wk(wdata + k * cin * cout, static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(cout));
        ym.bottomRows(rows - shift).noalias() += xm.topRows(rows - shift) * wk;
    }

    const std::size_t xi = x.id(), wi = w.id(), bi = b.id();
    Tape<T>& tape = x.tape();
    const bool req = tape.requires_grad(xi) || tape.requires_grad(wi) || tape.requires_grad(bi);
    return tape.record(std::move(y), req, [=](Tape<T>& t, std::size_t self) {
        CM gy(t.grad(self).data(), rows, static_cast<Eigen::Index>(cout));
        CM xv(t.value(xi).data.data(), rows, static_cast<Eigen::Index>(cin));
        const T* wv = t.value(wi).data.data();
        if (t.requires_grad(bi)) {
            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(t.grad(bi).data(), static_cast<Eigen::Index>(cout));
            gb += gy.colwise().sum();
        }
        for (std::size_t k = 0; k < kernel; ++k) {
            const std::size_t shift_t = k * dilation;
            if (shift_t >= steps) break;
            const auto shift = static_cast<Eigen::Index>(shift_t * batch);
            if (t.requires_grad(wi)) {
                detail::MatMap<T> gw(t.grad(wi).data() + k * cin * cout, static_cast<Eigen::Index>(cin),
                                     static_cast<Eigen::Index>(cout));
                gw.noalias() += xv.topRows(rows - shift).transpose() * gy.bottomRows(rows - shift);
            }
            if (t.requires_grad(xi)) {
                CM wk(wv + k * cin * cout, static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(cout));
                detail::MatMap<T> gx(t.grad(xi).data(), rows, static_cast<Eigen::Index>(cin));
                gx.topRows(rows - shift).noalias() += gy.bottomRows(rows - shift) * wk.transpose();
            }
        }
    });
}

// ------------------------------------------------------------ dense & shape

/// Row-major flatten per example: [T,C] -> [T*C]; [T,B,C] -> [B, T*C].
template <class T>
Var<T> flatten(Var<T> x) {
    Tape<T>& tape = x.tape();
    const Shape& xs = x.shape();
    const std::size_t xi = x.id();
    if (xs.size() != 3) {
        Tensor<T> y(Shape{x.value().size()}, x.value().data);
        return tape.record(std::move(y), tape.requires_grad(x), [xi](Tape<T>& t, std::size_t self) {
            const auto& gy = t.grad(self);
            auto& gx = t.grad(xi);
            for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
        });
    }
    const std::size_t steps = xs[0], batch = xs[1], ch = xs[2];
    Tensor<T> y(Shape{batch, steps * ch});
    const auto& xv = x.value().data;
    for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t b = 0; b < batch; ++b)
            std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>((t * batch + b) * ch), ch,
                        y.data.begin() + static_cast<std::ptrdiff_t>(b * steps * ch + t * ch));
    return tape.record(std::move(y), tape.requires_grad(x), [=](Tape<T>& tp, std::size_t self) {
        const auto& gy = tp.grad(self);
        auto& gx = tp.grad(xi);
        for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t c = 0; c < ch; ++c) gx[(t * batch + b) * ch + c] += gy[b * steps * ch + t * ch + c];
    });
}

/// Affine map y = x w + b with x: [N] or [B, N], w: [N, M], b: [M].
template <class T>
Var<T> dense(Var<T> x, Var<T> w, Var<T> b) {
    detail::require_same_tape(x, w);
    detail::require_same_tape(x, b);
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    if (xs.empty() || xs.size() > 2) throw std::invalid_argument("dense: input must be [N] or [B,N]");
    if (ws.size() != 2 || ws[0] != xs.back())
        throw std::invalid_argument("dense: shape mismatch " + shape_str(xs) + " * " + shape_str(ws));
    const std::size_t n_in = ws[0], n_out = ws[1];
    if (b.shape() != Shape{n_out}) throw std::invalid_argument("dense: bias must be [M]");
    const std::size_t batch = xs.size() == 2 ? xs[0] : 1;

    Tensor<T> y(xs.size() == 2 ? Shape{batch, n_out} : Shape{n_out});
    using CM = detail::ConstMatMap<T>;
    const auto rb = static_cast<Eigen::Index>(batch), ri = static_cast<Eigen::Index>(n_in),
               ro = static_cast<Eigen::Index>(n_out);
    CM xm(x.value().data.data(), rb, ri);
    CM wm(w.value().data.data(), ri, ro);
    detail::MatMap<T> ym(y.data.data(), rb, ro);
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bm(b.value().data.data(), ro);
    ym.rowwise() = bm;
    ym.noalias() += xm * wm;

    const std::size_t xi = x.id(), wi = w.id(), bi = b.id();
    Tape<T>& tape = x.tape();
    const bool req = tape.requires_grad(xi) || tape.requires_grad(wi) || tape.requires_grad(bi);
    return tape.record(std::move(y), req, [=](Tape<T>& t, std::size_t self) {
        CM gy(t.grad(self).data(), rb, ro);
        if (t.requires_grad(bi)) {
            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(t.grad(bi).data(), ro);
            gb += gy.colwise().sum();
        }
        if (t.requires_grad(wi)) {
            detail::MatMap<T> gw(t.grad(wi).data(), ri, ro);
            gw.noalias() += CM(t.value(xi).data.data(), rb, ri).transpose() * gy;
        }
        if (t.requires_grad(xi)) {
            detail::MatMap<T> gx(t.grad(xi).data(), rb, ri);
            gx.noalias() += gy * CM(t.value(wi).data.data(), ri, ro).transpose();
        }
    });
}

// --------------------------------------------------------------------- loss

/// Mean of squared differences, as a one-element tensor.
template <class T>
Var<T> mse_loss(Var<T> pred, Var<T> target) {
    detail::require_same_tape(pred, target);
    if (pred.value().size() != target.value().size() || pred.value().size() == 0)
        throw std::invalid_argument("mse_loss: shape mismatch " + shape_str(pred.shape()) + " vs " +
                                    shape_str(target.shape()));
    const auto &pv = pred.value().data, &tv = target.value().data;
    double acc = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const double d = static_cast<double>(pv[i]) - static_cast<double>(tv[i]);
        acc += d * d;
    }
    const std::size_t n = pv.size();
    Tensor<T> y(Shape{1}, Buffer<T>{static_cast<T>(acc / static_cast<double>(n))});
    const std::size_t pi = pred.id(), ti = target.id();
    Tape<T>& tape = pred.tape();
    const bool req = tape.requires_grad(pi) || tape.requires_grad(ti);
    return tape.record(std::move(y), req, [pi, ti, n](Tape<T>& t, std::size_t self) {
        const T g = t.grad(self)[0] * T(2) / static_cast<T>(n);
        const auto &p = t.value(pi).data, &q = t.value(ti).data;
        if (t.requires_grad(pi)) {
            auto& gp = t.grad(pi);
            for (std::size_t i = 0; i < n; ++i) gp[i] += g * (p[i] - q[i]);
        }
        if (t.requires_grad(ti)) {
            auto& gt = t.grad(ti);
            for (std::size_t i = 0; i < n; ++i) gt[i] -= g * (p[i] - q[i]);
        }
    });
}

} // namespace fedus::nn
