#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "dmchan/nn/layers.hpp"
#include "dmchan/nn/ops.hpp"
#include "dmchan/nn/optim.hpp"
#include "support/gradcheck.hpp"

using namespace dmchan;
using namespace dmchan::nn;
using testing_support::check_inputs;
using testing_support::check_params;
using testing_support::random_tensor;

namespace {

template <typename T>
using LossFn = std::function<Var<T>(Tape<T>&, const std::vector<Var<T>>&)>;

// Naive triple loop, independent of the library's matmul.
Tensor<double> naive_affine(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b) {
  Tensor<double> y({x.rows(), w.cols()});
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < w.cols(); ++j) {
      double s = b[j];
      for (std::size_t k = 0; k < w.rows(); ++k) s += x(r, k) * w(k, j);
      y(r, j) = s;
    }
  return y;
}

Tensor<double> eval_dense(const Tensor<double>& w, const Tensor<double>& b, const Tensor<double>& x) {
  Tape<double> tape(false);
  return dense_forward(tape.constant(w), tape.constant(b), tape.constant(x)).value();
}

}  // namespace

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor<float>({2, 3}, std::vector<float>(5)), ShapeError);
  Tensor<float> t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
}

TEST(Tensor, NonFiniteValuesAreAnError) {
  Tensor<float> t({2}, std::vector<float>{1.0f, std::nanf("")});
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(t.require_finite("test"), NumericalError);
}

TEST(Dense, IdentityWeights) {
  const auto w = Tensor<double>::matrix(2, 2, {1, 0, 0, 1});
  const auto y = eval_dense(w, Tensor<double>({2}), Tensor<double>::matrix(1, 2, {3, 4}));
  EXPECT_EQ(y[0], 3.0);
  EXPECT_EQ(y[1], 4.0);
}

TEST(Dense, ZeroWeightsGiveBias) {
  const auto y = eval_dense(Tensor<double>({2, 2}), Tensor<double>({2}, std::vector<double>{1, 2}),
                            Tensor<double>::matrix(1, 2, {-7.5, 0.25}));
  EXPECT_EQ(y[0], 1.0);
  EXPECT_EQ(y[1], 2.0);
}

TEST(Dense, MatchesTripleLoopOracle) {
  Rng rng(7);
  const auto w = random_tensor<double>({5, 4}, rng);
  const auto b = random_tensor<double>({4}, rng);
  const auto x = random_tensor<double>({3, 5}, rng);
  const auto y = eval_dense(w, b, x);
  const auto oracle = naive_affine(x, w, b);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], oracle[i], 1e-6);
}

TEST(Dense, ShapeMismatchThrows) {
  Tape<double> tape(false);
  EXPECT_THROW(dense_forward(tape.constant(Tensor<double>({3, 2})), tape.constant(Tensor<double>({2})),
                             tape.constant(Tensor<double>({1, 4}))),
               ShapeError);
  EXPECT_THROW(dense_forward(tape.constant(Tensor<double>({3, 2})), tape.constant(Tensor<double>({3})),
                             tape.constant(Tensor<double>({1, 3}))),
               ShapeError);
}

TEST(Dense, LinearInInput) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = random_tensor<double>({4, 3}, rng);
    const auto b = random_tensor<double>({3}, rng);
    const auto x = random_tensor<double>({2, 4}, rng);
    const auto z = random_tensor<double>({2, 4}, rng);
    const double alpha = rng.normal(), beta = rng.normal();
    Tensor<double> mix(x.shape());
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = alpha * x[i] + beta * z[i];
    const Tensor<double> zero_b({3});
    const auto lhs = eval_dense(w, b, mix);
    const auto fx = eval_dense(w, zero_b, x);
    const auto fz = eval_dense(w, zero_b, z);
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t j = 0; j < 3; ++j)
        EXPECT_NEAR(lhs(r, j), alpha * fx(r, j) + beta * fz(r, j) + b[j], 1e-12);
  }
}

TEST(Dense, InitialisationBounds) {
  Rng rng(3);
  Dense<float> d("d", 16, 8, rng);
  const float bound = 1.0f / 4.0f;
  for (float v : d.weight().value().data()) EXPECT_LE(std::abs(v), bound);
  for (float v : d.bias().value().data()) EXPECT_EQ(v, 0.0f);
}

TEST(Activation, AnalyticPoints) {
  EXPECT_EQ(elu(0.0), 0.0);
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(softplus(0.0f), 0.6931f, 1e-4f);
  Tape<double> tape(false);
  const auto y = activation(Activation::ReLU, tape.constant(Tensor<double>({3}, std::vector<double>{-1, 0, 2})));
  EXPECT_EQ(y.value()[0], 0.0);
  EXPECT_EQ(y.value()[2], 2.0);
}

TEST(Activation, Asymptotes) {
  EXPECT_NEAR(elu(-50.0), -1.0, 1e-15);
  for (double x : {30.0, 50.0, 100.0, 1000.0}) EXPECT_NEAR(softplus(x), x, 1e-6);
  EXPECT_TRUE(std::isfinite(softplus(1e6)));
  EXPECT_GE(softplus(-1e3), 0.0);
}

TEST(Activation, GradientsMatchFiniteDifferences) {
  Rng rng(5);
  for (auto kind : {Activation::ELU, Activation::Softplus, Activation::ReLU}) {
    auto x = random_tensor<double>({8, 5}, rng, 2.0);
    for (auto& v : x.data())
      if (std::abs(v) < 1e-2) v += 0.1;  // keep ReLU away from its kink
    LossFn<double> f = [kind](Tape<double>&, const std::vector<Var<double>>& in) {
      return sum_squares(activation(kind, in[0]));
    };
    EXPECT_LE(check_inputs<double>(f, {x}, 1e-6).max_rel, 1e-3);
  }
}

TEST(Backward, LinearMapGradient) {
  // loss = sum(x·W) ⇒ dL/dW[k][j] = sum_r x[r][k].
  Rng rng(1);
  Parameter<double> w("w", random_tensor<double>({3, 2}, rng));
  const auto x = random_tensor<double>({4, 3}, rng);
  Tape<double> tape;
  tape.backward(sum(matmul(tape.constant(x), tape.param(w))));
  for (std::size_t k = 0; k < 3; ++k) {
    double col = 0.0;
    for (std::size_t r = 0; r < 4; ++r) col += x(r, k);
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(w.grad()(k, j), col, 1e-12);
  }
}

TEST(Backward, SquaredNormGradientIsTwoX) {
  Rng rng(2);
  const auto x = random_tensor<double>({3, 4}, rng);
  Tape<double> tape;
  Var<double> v = tape.variable(x);
  tape.backward(sum_squares(v));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(v.grad()[i], 2.0 * x[i]);
}

TEST(Backward, GradientsAccumulateUntilZeroed) {
  Parameter<double> p("p", Tensor<double>({2}, std::vector<double>{1.0, -2.0}));
  for (int i = 0; i < 2; ++i) {
    Tape<double> tape;
    tape.backward(sum_squares(tape.param(p)));
  }
  EXPECT_DOUBLE_EQ(p.grad()[0], 4.0);
  EXPECT_DOUBLE_EQ(p.grad()[1], -8.0);
  p.zero_grad();
  EXPECT_DOUBLE_EQ(p.grad()[0], 0.0);
}

TEST(Backward, NonScalarLossRejected) {
  Tape<double> tape;
  Var<double> v = tape.variable(Tensor<double>({2}));
  EXPECT_THROW(tape.backward(v), ShapeError);
}

TEST(Backward, FrozenParameterGetsNoGradient) {
  Parameter<double> p("p", Tensor<double>({2}, std::vector<double>{1.0, 2.0}));
  p.set_requires_grad(false);
  Tape<double> tape;
  tape.backward(sum_squares(tape.param(p)));
  EXPECT_EQ(p.grad()[0], 0.0);
}

TEST(GradCheck, EveryOpIn64Bit) {
  Rng rng(9);
  const auto a = random_tensor<double>({4, 3}, rng);
  const auto b = random_tensor<double>({4, 3}, rng);
  const auto w = random_tensor<double>({3, 5}, rng);
  const auto bias = random_tensor<double>({3}, rng);
  const auto table = random_tensor<double>({6, 3}, rng);
  const std::vector<std::size_t> rows{5, 0, 2, 5};
  const std::vector<std::size_t> labels{0, 2, 1, 2};
  Tensor<double> h({4, 4});
  for (auto& v : h.data()) v = rng.normal();

  const std::vector<std::pair<const char*, LossFn<double>>> cases{
      {"matmul", [&](Tape<double>& t, const auto& in) { return sum_squares(matmul(in[0], t.constant(w))); }},
      {"add_bias", [&](Tape<double>& t, const auto& in) { return sum_squares(add_bias(in[0], t.constant(bias))); }},
      {"lincomb", [](Tape<double>&, const auto& in) { return sum_squares(lincomb(0.7, in[0], -1.3, in[1])); }},
      {"mul", [](Tape<double>&, const auto& in) { return sum_squares(mul(in[0], in[1])); }},
      {"concat_cols", [](Tape<double>&, const auto& in) { return sum_squares(mul(concat_cols(in[0], in[1]), concat_cols(in[1], in[0]))); }},
      {"gather_rows", [&](Tape<double>& t, const auto& in) { return sum_squares(mul(gather_rows(t.constant(table), rows), in[0])); }},
      {"mean", [](Tape<double>&, const auto& in) { return mean(mul(in[0], in[1])); }},
      {"mean_squared_norm", [](Tape<double>&, const auto& in) { return mean_squared_norm(in[0], in[1]); }},
      {"softmax_cross_entropy", [&](Tape<double>&, const auto& in) { return softmax_cross_entropy(in[0], labels); }},
      {"normalize_power", [](Tape<double>&, const auto& in) { return sum_squares(mul(normalize_power(in[0], 3.0), in[1])); }},
  };
  for (const auto& [name, f] : cases) {
    const auto r = check_inputs<double>(f, {a, b}, 1e-6);
    EXPECT_LE(r.max_rel, 1e-5) << name;
  }
  LossFn<double> cm = [&](Tape<double>&, const auto& in) { return sum_squares(mul(complex_mul(in[0], h), in[1])); };
  EXPECT_LE(check_inputs<double>(cm, {random_tensor<double>({4, 4}, rng), random_tensor<double>({4, 4}, rng)}, 1e-6)
                .max_rel,
            1e-5);
  LossFn<double> gt = [&](Tape<double>& t, const auto& in) {
    return sum_squares(mul(gather_rows(in[0], rows), t.constant(a)));
  };
  EXPECT_LE(check_inputs<double>(gt, {table}, 1e-6).max_rel, 1e-5);
}

TEST(GradCheck, DenseStackIn32Bit) {
  Rng rng(4);
  Dense<float> d1("d1", 6, 8, rng), d2("d2", 8, 3, rng);
  const auto x = random_tensor<float>({8, 6}, rng);
  const std::vector<std::size_t> labels{0, 1, 2, 0, 1, 2, 0, 1};
  std::function<Var<float>(Tape<float>&)> loss = [&](Tape<float>& t) {
    return softmax_cross_entropy(d2(activation(Activation::ELU, d1(t.constant(x)))), labels);
  };
  std::vector<Parameter<float>*> ps{&d1.weight(), &d1.bias(), &d2.weight(), &d2.bias()};
  const auto r = check_params<float>(loss, ps, 1e-3);
  EXPECT_LE(r.max_tensor_rel, 1e-2);
  // The same network in 64-bit meets the tight bound element by element.
  Dense<double> e1 = d1.cast<double>(), e2 = d2.cast<double>();
  const Tensor<double> xd = x.cast<double>();
  std::function<Var<double>(Tape<double>&)> loss64 = [&](Tape<double>& t) {
    return softmax_cross_entropy(e2(activation(Activation::ELU, e1(t.constant(xd)))), labels);
  };
  std::vector<Parameter<double>*> ps64{&e1.weight(), &e1.bias(), &e2.weight(), &e2.bias()};
  EXPECT_LE(check_params<double>(loss64, ps64, 1e-6).max_rel, 1e-5);
}

TEST(Optimizer, ZeroGradientLeavesParametersUnchanged) {
  for (auto kind : {OptimizerKind::Adam, OptimizerKind::NAdam, OptimizerKind::RMSprop}) {
    Rng rng(8);
    Parameter<float> p("p", random_tensor<float>({3, 3}, rng));
    const Tensor<float> before = p.value();
    Optimizer<float> opt({kind, 1e-2}, {&p});
    for (int i = 0; i < 5; ++i) opt.step();
    EXPECT_EQ(p.value(), before) << to_string(kind);
    EXPECT_EQ(opt.steps(), 5u);
  }
}

TEST(Optimizer, AdamFirstStepIsSignedLearningRate) {
  const double lr = 1e-3;
  for (double g : {0.37, -2.5, 0.05}) {
    Parameter<double> p("p", Tensor<double>({1}, std::vector<double>{1.0}));
    p.grad()[0] = g;
    Optimizer<double> opt({OptimizerKind::Adam, lr}, {&p});
    opt.step();
    EXPECT_NEAR(p.value()[0] - 1.0, -lr * g / (std::abs(g) + 1e-8), 1e-15);
    EXPECT_NEAR(p.value()[0] - 1.0, -lr * (g > 0 ? 1.0 : -1.0), lr * 1e-6);
  }
}

TEST(Optimizer, NadamAndRmspropFirstStepByHand) {
  const double lr = 1e-2, g = 0.5;
  Parameter<double> a("a", Tensor<double>({1}, std::vector<double>{0.0}));
  Parameter<double> r("r", Tensor<double>({1}, std::vector<double>{0.0}));
  a.grad()[0] = g;
  r.grad()[0] = g;
  Optimizer<double> nadam({OptimizerKind::NAdam, lr}, {&a});
  Optimizer<double> rms({OptimizerKind::RMSprop, lr}, {&r});
  nadam.step();
  rms.step();
  // NAdam step 1: m̂ = g, Nesterov term β1·g + (1−β1)·g/(1−β1) = 0.9g + g, √v̂ = |g|.
  EXPECT_NEAR(a.value()[0], -lr * (0.9 * g + g) / (g + 1e-8), 1e-12);
  // RMSprop step 1: v = 0.01·g².
  EXPECT_NEAR(r.value()[0], -lr * g / (std::sqrt(0.01 * g * g) + 1e-8), 1e-12);
}

TEST(Optimizer, UninitialisedStateThrows) {
  Optimizer<float> opt;
  EXPECT_THROW(opt.step(), std::logic_error);
}

TEST(Optimizer, DeterministicTrainingIsBitIdentical) {
  auto run = [] {
    Rng rng(123);
    Dense<float> d1("d1", 4, 16, rng), d2("d2", 16, 4, rng);
    std::vector<Parameter<float>*> ps{&d1.weight(), &d1.bias(), &d2.weight(), &d2.bias()};
    Optimizer<float> opt({OptimizerKind::Adam, 1e-2}, ps);
    for (int step = 0; step < 100; ++step) {
      const auto x = random_tensor<float>({8, 4}, rng);
      zero_grads(ps);
      Tape<float> tape;
      tape.backward(mean_squared_norm(d2(activation(Activation::Softplus, d1(tape.constant(x)))), tape.constant(x)));
      opt.step();
    }
    std::vector<float> out;
    for (auto* p : ps) out.insert(out.end(), p->value().vec().begin(), p->value().vec().end());
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, StreamsAreDistinct) {
  const Rng root(42);
  std::vector<std::uint64_t> seeds;
  for (auto s : {Stream::Init, Stream::Data, Stream::Noise, Stream::Eval, Stream::Projection})
    seeds.push_back(root.stream(s).seed());
  std::sort(seeds.begin(), seeds.end());
  EXPECT_EQ(std::unique(seeds.begin(), seeds.end()), seeds.end());
  Rng init = root.stream(Stream::Init), data = root.stream(Stream::Data);
  EXPECT_NE(init.next_u64(), data.next_u64());
}

TEST(Rng, UniformOpenAtZero) {
  Rng rng(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform_open0();
    ASSERT_GT(u, 0.0);
    ASSERT_LE(u, 1.0);
  }
}
