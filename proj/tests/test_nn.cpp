#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fedus/model/forward.hpp"
#include "fedus/nn/adam.hpp"
#include "fedus/nn/tape.hpp"

using namespace fedus;
using nn::Shape;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

Tensor<double> random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(std::move(s));
    for (auto& v : t.data) v = lo + (hi - lo) * uniform01(rng);
    return t;
}

double direct_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b, std::size_t d,
                   std::size_t t, std::size_t o) {
    const std::size_t cin = x.shape[1], cout = w.shape[2];
    double acc = b.data[o];
    for (std::size_t k = 0; k < w.shape[0]; ++k) {
        if (k * d > t) continue;
        for (std::size_t c = 0; c < cin; ++c) acc += w.data[(k * cin + c) * cout + o] * x.data[(t - k * d) * cin + c];
    }
    return acc;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

// Central-difference check of d(loss)/d(leaf) for every coordinate of every leaf.
template <class Build>
void check_gradients(std::vector<Tensor<double>>& leaves, Build build, double h = 1e-5, double tol = 1e-4) {
    auto loss_of = [&] {
        Tape<double> tape;
        std::vector<Var<double>> vars;
        for (auto& l : leaves) vars.push_back(tape.input(l, false));
        return build(tape, vars).value().data[0];
    };
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (auto& l : leaves) vars.push_back(tape.param(l));
    for (auto& l : leaves) l.zero_grad();
    tape.backward(build(tape, vars));
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        for (std::size_t j = 0; j < leaves[li].size(); ++j) {
            const double keep = leaves[li].data[j];
            leaves[li].data[j] = keep + h;
            const double up = loss_of();
            leaves[li].data[j] = keep - h;
            const double down = loss_of();
            leaves[li].data[j] = keep;
            const double numeric = (up - down) / (2 * h);
            EXPECT_LT(rel_err(leaves[li].grad[j], numeric), tol) << "leaf " << li << " coord " << j;
        }
    }
}

Var<double> sum_sq(Var<double> y) {
    auto& tape = y.tape();
    auto zero = tape.input(Tensor<double>(y.shape()));
    return nn::mse_loss(y, zero);
}

// Weighted sum so that every output coordinate gets a distinct upstream gradient.
Var<double> probe(Var<double> y, std::uint64_t seed = 9) {
    std::mt19937_64 rng(seed);
    auto& tape = y.tape();
    auto w = tape.input(random_tensor(y.shape(), rng));
    return sum_sq(nn::add(y, w));
}

} // namespace

// ------------------------------------------------------------------ conv1d

TEST(Conv1d, IdentityKernel) {
    std::mt19937_64 rng(1);
    Tape<double> tape;
    auto xt = random_tensor({7, 3}, rng);
    Tensor<double> w({1, 3, 3}), b({3});
    for (int c = 0; c < 3; ++c) w.data[c * 3 + c] = 1.0;
    auto y = nn::conv1d_causal(tape.input(xt), tape.constant(w), tape.constant(b), 1);
    EXPECT_EQ(y.value().data, xt.data);
}

TEST(Conv1d, ImpulseReproducesTaps) {
    Tape<double> tape;
    Tensor<double> x({20, 1}), w({3, 1, 1}, {0.5, -2.0, 3.0}), b({1});
    const std::size_t t0 = 5;
    x.data[t0] = 1.0;
    auto y = nn::conv1d_causal(tape.input(x), tape.constant(w), tape.constant(b), 2);
    for (std::size_t t = 0; t < 20; ++t) {
        if (t == t0 || t == t0 + 2 || t == t0 + 4)
            EXPECT_NE(y.value().data[t], 0.0) << t;
        else
            EXPECT_EQ(y.value().data[t], 0.0) << t;
    }
    EXPECT_EQ(y.value().data[t0], 0.5);
    EXPECT_EQ(y.value().data[t0 + 2], -2.0);
    EXPECT_EQ(y.value().data[t0 + 4], 3.0);
}

TEST(Conv1d, MatchesDirectSummation) {
    std::mt19937_64 rng(2);
    auto x = random_tensor({11, 2}, rng), w = random_tensor({4, 2, 3}, rng), b = random_tensor({3}, rng);
    Tape<double> tape;
    auto y = nn::conv1d_causal(tape.input(x), tape.constant(w), tape.constant(b), 2);
    ASSERT_EQ(y.shape(), (Shape{11, 3}));
    for (std::size_t t = 0; t < 11; ++t)
        for (std::size_t o = 0; o < 3; ++o) EXPECT_NEAR(y.value().data[t * 3 + o], direct_conv(x, w, b, 2, t, o), 1e-6);
}

TEST(Conv1d, BatchedMatchesPerItem) {
    std::mt19937_64 rng(3);
    const std::size_t steps = 13, batch = 4, cin = 2, cout = 3;
    auto xb = random_tensor({steps, batch, cin}, rng), w = random_tensor({3, cin, cout}, rng),
         b = random_tensor({cout}, rng);
    Tape<double> tape;
    auto yb = nn::conv1d_causal(tape.input(xb), tape.constant(w), tape.constant(b), 3);
    for (std::size_t item = 0; item < batch; ++item) {
        Tensor<double> xi({steps, cin});
        for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t c = 0; c < cin; ++c) xi.data[t * cin + c] = xb.data[(t * batch + item) * cin + c];
        for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t o = 0; o < cout; ++o)
                EXPECT_NEAR(yb.value().data[(t * batch + item) * cout + o], direct_conv(xi, w, b, 3, t, o), 1e-12);
    }
}

TEST(Conv1d, DilationBeyondLengthLeavesBiasOnly) {
    Tape<double> tape;
    Tensor<double> x({4, 1}, {1, 2, 3, 4}), w({2, 1, 1}, {0.0, 1.0}), b({1}, {0.25});
    auto y = nn::conv1d_causal(tape.input(x), tape.constant(w), tape.constant(b), 8);
    EXPECT_EQ(y.value().data, (nn::Buffer<double>{0.25, 0.25, 0.25, 0.25}));
}

TEST(Conv1d, CausalUnderRandomPerturbation) {
    std::mt19937_64 rng(4);
    auto w = random_tensor({4, 2, 2}, rng), b = random_tensor({2}, rng);
    for (int trial = 0; trial < 50; ++trial) {
        auto x = random_tensor({30, 2}, rng);
        Tape<double> tape;
        auto y0 = nn::conv1d_causal(tape.input(x), tape.constant(w), tape.constant(b), 3).value().data;
        const std::size_t t = rng() % 30;
        x.data[t * 2 + rng() % 2] += 0.5 + uniform01(rng);
        auto y1 = nn::conv1d_causal(tape.input(x), tape.constant(w), tape.constant(b), 3).value().data;
        for (std::size_t s = 0; s < t; ++s)
            for (std::size_t o = 0; o < 2; ++o) EXPECT_EQ(y0[s * 2 + o], y1[s * 2 + o]);
    }
}

TEST(Conv1d, ShapeErrors) {
    Tape<double> tape;
    auto x = tape.input(Tensor<double>({5, 2}));
    auto b = tape.input(Tensor<double>({3}));
    EXPECT_THROW(nn::conv1d_causal(x, tape.input(Tensor<double>({2, 3, 3})), b, 1), std::invalid_argument);
    EXPECT_THROW(nn::conv1d_causal(x, tape.input(Tensor<double>({2, 2, 3})), tape.input(Tensor<double>({2})), 1),
                 std::invalid_argument);
    EXPECT_THROW(nn::conv1d_causal(x, tape.input(Tensor<double>({2, 2, 3})), b, 0), std::invalid_argument);
    EXPECT_THROW(nn::conv1d_causal(x, tape.input(Tensor<double>({0, 2, 3})), b, 1), std::invalid_argument);
}

TEST(Conv1d, GradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(5);
    std::vector<Tensor<double>> leaves{random_tensor({9, 2, 3}, rng), random_tensor({3, 3, 2}, rng),
                                       random_tensor({2}, rng)};
    check_gradients(leaves, [](Tape<double>&, std::vector<Var<double>>& v) {
        return probe(nn::conv1d_causal(v[0], v[1], v[2], 2));
    });
}

// ------------------------------------------------------------- elementwise

TEST(Elementwise, KnownValues) {
    Tape<double> tape;
    auto z = tape.input(Tensor<double>({1}));
    EXPECT_EQ(nn::tanh(z).value().data[0], 0.0);
    EXPECT_EQ(nn::sigmoid(z).value().data[0], 0.5);
    std::mt19937_64 rng(6);
    auto xt = random_tensor({3, 4}, rng);
    auto x = tape.input(xt);
    EXPECT_EQ(nn::mul(x, tape.input(Tensor<double>({3, 4}, 1.0))).value().data, xt.data);
}

TEST(Elementwise, Ranges) {
    Tape<double> tape;
    std::mt19937_64 rng(7);
    auto x = tape.input(random_tensor({200}, rng, -15.0, 15.0));
    for (double v : nn::tanh(x).value().data) {
        EXPECT_GT(v, -1.0);
        EXPECT_LT(v, 1.0);
    }
    for (double v : nn::sigmoid(x).value().data) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
    for (double v : nn::relu(x).value().data) EXPECT_GE(v, 0.0);
}

TEST(Elementwise, TanhGradientAtZero) {
    Tensor<double> x({1});
    Tape<double> tape;
    auto y = nn::tanh(tape.param(x));
    tape.backward(y);
    EXPECT_EQ(x.grad[0], 1.0);
}

TEST(Elementwise, ShapeMismatchThrows) {
    Tape<double> tape;
    auto a = tape.input(Tensor<double>({3}));
    auto b = tape.input(Tensor<double>({4}));
    EXPECT_THROW(nn::add(a, b), std::invalid_argument);
    EXPECT_THROW(nn::mul(a, b), std::invalid_argument);
    EXPECT_THROW(nn::mse_loss(a, b), std::invalid_argument);
}

TEST(Elementwise, GradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(8);
    std::vector<Tensor<double>> leaves{random_tensor({5, 3}, rng), random_tensor({5, 3}, rng)};
    check_gradients(leaves, [](Tape<double>&, std::vector<Var<double>>& v) {
        auto a = nn::mul(nn::tanh(v[0]), nn::sigmoid(v[1]));
        return probe(nn::add(a, nn::mul(v[0], v[1])));
    });
}

TEST(Elementwise, ReluGradientAwayFromKink) {
    std::mt19937_64 rng(10);
    auto x = random_tensor({40}, rng);
    for (auto& v : x.data)
        if (std::abs(v) < 0.05) v = 0.3;
    std::vector<Tensor<double>> leaves{x};
    check_gradients(leaves, [](Tape<double>&, std::vector<Var<double>>& v) { return probe(nn::relu(v[0])); });
}

// ------------------------------------------------------------ dense/flatten

TEST(Dense, IdentityWeights) {
    Tape<double> tape;
    Tensor<double> w({3, 3}), b({3});
    for (int i = 0; i < 3; ++i) w.data[i * 3 + i] = 1.0;
    Tensor<double> x({3}, {0.1, -2.0, 7.5});
    auto y = nn::dense(tape.input(x), tape.constant(w), tape.constant(b));
    EXPECT_EQ(y.value().data, x.data);
}

TEST(Dense, MatchesDirectSum) {
    std::mt19937_64 rng(11);
    auto x = random_tensor({4}, rng), w = random_tensor({4, 3}, rng), b = random_tensor({3}, rng);
    Tape<double> tape;
    auto y = nn::dense(tape.input(x), tape.constant(w), tape.constant(b));
    ASSERT_EQ(y.shape(), (Shape{3}));
    for (std::size_t m = 0; m < 3; ++m) {
        double acc = b.data[m];
        for (std::size_t n = 0; n < 4; ++n) acc += x.data[n] * w.data[n * 3 + m];
        EXPECT_NEAR(y.value().data[m], acc, 1e-12);
    }
}

TEST(Dense, ShapeErrors) {
    Tape<double> tape;
    auto x = tape.input(Tensor<double>({4}));
    EXPECT_THROW(nn::dense(x, tape.input(Tensor<double>({3, 2})), tape.input(Tensor<double>({2}))),
                 std::invalid_argument);
    EXPECT_THROW(nn::dense(x, tape.input(Tensor<double>({4, 2})), tape.input(Tensor<double>({3}))),
                 std::invalid_argument);
}

TEST(Flatten, RowMajorPerExample) {
    Tape<double> tape;
    Tensor<double> x({2, 3}, {1, 2, 3, 4, 5, 6});
    auto f = nn::flatten(tape.input(x));
    EXPECT_EQ(f.shape(), (Shape{6}));
    EXPECT_EQ(f.value().data, x.data);

    // time-major [T=2, B=2, C=2] -> [B, T*C]
    Tensor<double> xb({2, 2, 2}, {1, 2, 10, 20, 3, 4, 30, 40});
    auto fb = nn::flatten(tape.input(xb));
    EXPECT_EQ(fb.shape(), (Shape{2, 4}));
    EXPECT_EQ(fb.value().data, (nn::Buffer<double>{1, 2, 3, 4, 10, 20, 30, 40}));
}

TEST(Dense, GradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(12);
    std::vector<Tensor<double>> leaves{random_tensor({4, 3, 2}, rng), random_tensor({8, 5}, rng),
                                       random_tensor({5}, rng)};
    check_gradients(leaves, [](Tape<double>&, std::vector<Var<double>>& v) {
        return probe(nn::dense(nn::flatten(v[0]), v[1], v[2]));
    });
}

// -------------------------------------------------------------------- loss

TEST(Mse, Examples) {
    Tape<double> tape;
    std::mt19937_64 rng(13);
    auto p = random_tensor({10}, rng);
    EXPECT_EQ(nn::mse_loss(tape.input(p), tape.input(p)).value().data[0], 0.0);
    auto q = p;
    for (auto& v : q.data) v -= 1.0;
    EXPECT_NEAR(nn::mse_loss(tape.input(p), tape.input(q)).value().data[0], 1.0, 1e-12);
}

TEST(Mse, GradientIsTwoResidualOverN) {
    std::mt19937_64 rng(14);
    auto x = random_tensor({8}, rng);
    Tape<double> tape;
    auto loss = nn::mse_loss(tape.param(x), tape.input(Tensor<double>({8})));
    tape.backward(loss);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(x.grad[i], 2.0 * x.data[i] / 8.0, 1e-15);
}

TEST(Mse, FiniteDifferenceGradient) {
    std::mt19937_64 rng(15);
    std::vector<Tensor<double>> leaves{random_tensor({6}, rng), random_tensor({6}, rng)};
    check_gradients(
        leaves, [](Tape<double>&, std::vector<Var<double>>& v) { return nn::mse_loss(v[0], v[1]); }, 1e-4);
}

// ---------------------------------------------------------------- backward

TEST(Backward, AccumulatesAcrossCalls) {
    std::mt19937_64 rng(16);
    auto x = random_tensor({5}, rng);
    nn::Buffer<double> first;
    for (int call = 0; call < 2; ++call) {
        Tape<double> tape;
        tape.backward(nn::mse_loss(nn::tanh(tape.param(x)), tape.input(Tensor<double>({5}, 0.3))));
        if (call == 0) first = x.grad;
    }
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(x.grad[i], 2.0 * first[i]);
}

TEST(Backward, SameTapeTwiceDoubles) {
    std::mt19937_64 rng(17);
    auto x = random_tensor({5}, rng);
    Tape<double> tape;
    auto loss = nn::mse_loss(nn::sigmoid(tape.param(x)), tape.input(Tensor<double>({5})));
    tape.backward(loss);
    const auto once = x.grad;
    tape.backward(loss);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(x.grad[i], 2.0 * once[i]);
}

TEST(Backward, UnreachableParameterGetsZero) {
    Tensor<double> used({3}, {1, 2, 3}), unused({3}, {4, 5, 6});
    Tape<double> tape;
    auto u = tape.param(used);
    tape.param(unused);
    tape.backward(nn::mse_loss(u, tape.input(Tensor<double>({3}))));
    EXPECT_EQ(unused.grad, (nn::Buffer<double>{0, 0, 0}));
}

TEST(Backward, RequiresScalarLoss) {
    Tensor<double> x({3});
    Tape<double> tape;
    EXPECT_THROW(tape.backward(nn::tanh(tape.param(x))), std::invalid_argument);
}

TEST(Backward, DeterministicAcrossRuns) {
    auto run = [] {
        std::mt19937_64 rng(18);
        std::vector<Tensor<double>> leaves{random_tensor({12, 3, 2}, rng), random_tensor({3, 2, 4}, rng),
                                           random_tensor({4}, rng)};
        Tape<double> tape;
        std::vector<Var<double>> v;
        for (auto& l : leaves) v.push_back(tape.param(l));
        tape.backward(probe(nn::tanh(nn::conv1d_causal(v[0], v[1], v[2], 2))));
        return std::make_pair(leaves[1].grad, leaves[0].grad);
    };
    EXPECT_EQ(run(), run());
}

// -------------------------------------------------------------------- Adam

TEST(Adam, ZeroGradientLeavesParameters) {
    Tensor<double> p({3}, {1.0, -2.0, 0.5});
    p.zero_grad();
    nn::AdamState<double> st;
    std::vector<Tensor<double>*> params{&p};
    nn::adam_step(params, st);
    EXPECT_EQ(p.data, (nn::Buffer<double>{1.0, -2.0, 0.5}));
    EXPECT_EQ(st.t, 1);
}

TEST(Adam, FirstStepClosedForm) {
    Tensor<double> p({3}, {0.0, 0.0, 0.0});
    p.grad = {0.3, -4.0, 1e-3};
    nn::AdamState<double> st;
    std::vector<Tensor<double>*> params{&p};
    nn::adam_step(params, st);
    for (std::size_t i = 0; i < 3; ++i) {
        const double g = p.grad[i];
        EXPECT_NEAR(p.data[i], -st.lr * g / (std::sqrt(g * g) + st.eps), 1e-15);
    }
}

TEST(Adam, MinimizesQuadratic) {
    Tensor<double> x({1}, {1.0});
    nn::AdamState<double> st;
    st.lr = 0.05;
    std::vector<Tensor<double>*> params{&x};
    int steps = 0;
    for (; steps < 500 && std::abs(x.data[0]) >= 1e-2; ++steps) {
        x.grad = {2.0 * x.data[0]};
        nn::adam_step(params, st);
    }
    EXPECT_LT(std::abs(x.data[0]), 1e-2);
    EXPECT_LE(steps, 500);
}

TEST(Adam, StateMismatchThrows) {
    Tensor<double> a({2}), b({3});
    a.zero_grad();
    b.zero_grad();
    nn::AdamState<double> st;
    std::vector<Tensor<double>*> one{&a}, two{&a, &b};
    nn::adam_step(one, st);
    EXPECT_THROW(nn::adam_step(two, st), std::invalid_argument);
}

// ------------------------------------------------- micro model gradient

TEST(MicroModel, SampledCoordinatesMatchFiniteDifferences) {
    model::ArchConfig arch;
    arch.l_in = 32;
    arch.l_out = 256;
    arch.n_filters = 4;
    arch.kernel = 3;
    arch.dilations = {1, 2};
    auto p = model::init_params<double>(arch, 3);
    std::mt19937_64 rng(19);
    for (auto* t : p.tensors())
        for (auto& v : t->data) v += 0.1 * (2 * uniform01(rng) - 1);  // nonzero biases too
    std::vector<std::vector<double>> in(2, std::vector<double>(32)), out(2, std::vector<double>(256));
    for (auto& v : in) for (auto& s : v) s = 2 * uniform01(rng) - 1;
    for (auto& v : out) for (auto& s : v) s = 2 * uniform01(rng) - 1;
    nn::Tensor<double> target(Shape{2, 256});
    for (std::size_t b = 0; b < 2; ++b) std::copy(out[b].begin(), out[b].end(), target.data.begin() + b * 256);

    auto loss_of = [&](model::ModelParams<double>& params, bool train) {
        Tape<double> tape;
        auto leaves = train ? model::bind_params(tape, params) : model::bind_constants(tape, params);
        auto g = model::build_graph(arch, leaves, tape.input(model::pack_inputs<double>(in, 32)));
        auto loss = nn::mse_loss(g.output, tape.input(target));
        if (train) tape.backward(loss);
        return loss.value().data[0];
    };
    p.zero_grad();
    loss_of(p, true);

    auto named = p.named();
    int checked = 0;
    for (int s = 0; s < 240; ++s) {
        auto& [name, t] = named[rng() % named.size()];
        const std::size_t j = rng() % t->size();
        const double keep = t->data[j], h = 1e-5;
        t->data[j] = keep + h;
        const double up = loss_of(p, false);
        t->data[j] = keep - h;
        const double down = loss_of(p, false);
        t->data[j] = keep;
        EXPECT_LT(rel_err(t->grad[j], (up - down) / (2 * h)), 1e-4) << name << "[" << j << "]";
        ++checked;
    }
    EXPECT_GE(checked, 200);
}
