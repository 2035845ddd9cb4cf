#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "gsr/numcore/container.hpp"
#include "gsr/numcore/gradient_check.hpp"
#include "gsr/numcore/ops.hpp"

namespace gsr {
namespace {

Tensor<double> random_tensor(std::mt19937_64& rng, Shape shape, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor<double> t(shape);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

// tanh via exp evaluated from its Taylor series; independent of std::tanh.
double tanh_by_series(double x) {
  auto exp_series = [](double y) {
    double term = 1, acc = 1;
    for (int k = 1; k < 60; ++k) {
      term *= y / k;
      acc += term;
    }
    return acc;
  };
  const double e2 = exp_series(2 * x);
  return (e2 - 1) / (e2 + 1);
}

TEST(Affine, IdentityZeroAndHandMatmul) {
  Graph<double> g;
  auto x = g.constant(Tensor<double>::vector({1, 2}));
  auto id = g.constant(Tensor<double>::matrix(2, 2, {1, 0, 0, 1}));
  auto zero_b = g.constant(Tensor<double>::vector({0, 0}));
  auto y = affine(x, id, zero_b);
  EXPECT_EQ(y.value(), Tensor<double>::vector({1, 2}));

  auto zero_w = g.constant(Tensor<double>(Shape{2, 2}));
  auto b = g.constant(Tensor<double>::vector({5, -1}));
  EXPECT_EQ(affine(g.constant(Tensor<double>::vector({7, -3})), zero_w, b).value(),
            Tensor<double>::vector({5, -1}));

  auto w = g.constant(Tensor<double>::matrix(2, 2, {1, 2, 3, 4}));
  auto ones = g.constant(Tensor<double>::vector({1, 1}));
  EXPECT_EQ(affine(ones, w, zero_b).value(), Tensor<double>::vector({3, 7}));
}

TEST(Affine, ShapeMismatchNamesBothShapes) {
  Graph<double> g;
  auto w = g.constant(Tensor<double>(Shape{2, 3}));
  auto x = g.constant(Tensor<double>(Shape{2}));
  auto b = g.constant(Tensor<double>(Shape{2}));
  try {
    affine(x, w, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2]"), std::string::npos) << msg;
  }
}

TEST(Pointwise, KnownValues) {
  Graph<double> g;
  auto zero = g.constant(Tensor<double>::vector({0}));
  EXPECT_EQ(tanh(zero).item(), 0.0);
  EXPECT_EQ(sigmoid(zero).item(), 0.5);
  auto one = g.constant(Tensor<double>::vector({1}));
  EXPECT_NEAR(tanh(one).item(), tanh_by_series(1.0), 1e-14);
  EXPECT_NEAR(tanh(one).item(), 0.7615941559557649, 1e-15);
  auto mixed = g.constant(Tensor<double>::vector({-2, 0, 3}));
  EXPECT_EQ(relu(mixed).value(), Tensor<double>::vector({0, 0, 3}));
}

TEST(L2Normalize, Examples) {
  Graph<double> g;
  auto y = l2_normalize(g.constant(Tensor<double>::vector({3, 4})));
  EXPECT_NEAR(y.value()[0], 0.6, 1e-15);
  EXPECT_NEAR(y.value()[1], 0.8, 1e-15);
  auto u = l2_normalize(g.constant(Tensor<double>::vector({0.6, 0.8})));
  EXPECT_NEAR(u.value()[0], 0.6, 1e-15);
  EXPECT_NEAR(u.value()[1], 0.8, 1e-15);
  auto q = l2_normalize(g.constant(Tensor<double>::vector({1, 1, 1, 1})));
  for (auto v : q.value().data()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(L2Normalize, DegenerateVector) {
  Graph<double> g;
  EXPECT_THROW(l2_normalize(g.constant(Tensor<double>::vector({0, 0}))), DegenerateVectorError);
  EXPECT_THROW(l2_normalize(g.constant(Tensor<double>::vector({1e-13, 0}))), DegenerateVectorError);
}

TEST(MaskedSoftmax, Examples) {
  Graph<double> g;
  auto uni = masked_time_softmax(g.constant(Tensor<double>::vector({2.5, 2.5, 2.5, 2.5})));
  for (auto v : uni.value().data()) EXPECT_DOUBLE_EQ(v, 0.25);
  auto two = masked_time_softmax(g.constant(Tensor<double>::vector({0, std::log(2.0)})));
  EXPECT_NEAR(two.value()[0], 1.0 / 3, 1e-15);
  EXPECT_NEAR(two.value()[1], 2.0 / 3, 1e-15);
  auto masked = masked_time_softmax(g.constant(Tensor<double>::vector({5, 9})), {true, false});
  EXPECT_EQ(masked.value()[0], 1.0);
  EXPECT_EQ(masked.value()[1], 0.0);
}

TEST(MaskedSoftmax, AllMaskedIsAnError) {
  Graph<double> g;
  EXPECT_THROW(masked_time_softmax(g.constant(Tensor<double>::vector({1, 2})), {false, false}),
               EmptySequenceError);
}

TEST(MaskedSoftmax, PropertyNonNegativeAndNormalized) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(1, 40);
  std::bernoulli_distribution coin(0.7);
  for (int trial = 0; trial < 200; ++trial) {
    Graph<double> g;
    const std::size_t n = len(rng);
    std::vector<bool> valid(n);
    for (std::size_t i = 0; i < n; ++i) valid[i] = coin(rng);
    valid[rng() % n] = true;
    auto y = masked_time_softmax(g.constant(random_tensor(rng, Shape{n}, 30.0)), valid);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_GE(y.value()[i], 0.0);
      if (!valid[i]) {
        EXPECT_EQ(y.value()[i], 0.0);
      }
      total += y.value()[i];
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(L2Normalize, PropertyUnitNorm) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Graph<float> g;
    Tensor<float> x(Shape{1 + rng() % 64});
    std::normal_distribution<float> n(0.f, std::pow(10.f, float(int(rng() % 7) - 3)));
    for (auto& v : x.data()) v = n(rng);
    auto y = l2_normalize(g.constant(x));
    double sq = 0;
    for (auto v : y.value().data()) sq += double(v) * v;
    EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-6);
  }
}

TEST(GradientCheck, SquareIsExactUnderCentralDifference) {
  ParamSet<double> p;
  p.add("x", Tensor<double>::vector({3}));
  auto report = gradient_check([](Graph<double>&, const BoundParams<double>& b) { return mul(b["x"], b["x"]); }, p);
  EXPECT_TRUE(report.passed);
  EXPECT_NEAR(report.worst_analytic, 6.0, 1e-12);
  EXPECT_NEAR(report.worst_numeric, 6.0, 1e-9);
  EXPECT_LT(report.max_rel_error, 1e-9);
}

TEST(GradientCheck, SumOfNormalizedVector) {
  std::mt19937_64 rng(3);
  ParamSet<double> p;
  p.add("x", random_tensor(rng, Shape{6}));
  auto report = gradient_check(
      [](Graph<double>&, const BoundParams<double>& b) { return sum(l2_normalize(b["x"])); }, p,
      {.step = 1e-4, .tolerance = 1e-6, .scale_floor = 1e-2});
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(GradientCheck, NonFiniteObjectiveIsReported) {
  ParamSet<double> p;
  p.add("x", Tensor<double>::vector({1e300}));
  EXPECT_THROW(gradient_check([](Graph<double>&, const BoundParams<double>& b) { return mul(b["x"], b["x"]); }, p),
               NumericFault);
}

// Every primitive, reduced to a scalar through a random linear functional so that
// all output entries contribute, must match central differences.
TEST(Primitives, JacobianAgreesWithCentralDifferences) {
  std::mt19937_64 rng(2024);
  using Builder = std::function<Var<double>(Graph<double>&, const BoundParams<double>&)>;
  auto project = [](Graph<double>& g, Var<double> out, const Tensor<double>& weights) {
    auto w = g.constant(Tensor<double>(Shape{out.size()}, weights.storage()));
    Var<double> flat = out.value().rank() == 1 ? out : concat(std::vector<Var<double>>{out});
    return dot(flat, w);
  };

  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng() % 4, n = 1 + rng() % 4, T = 1 + rng() % 5;
    const std::size_t stride = 1 + rng() % 3, klen = 1 + rng() % 3;
    ParamSet<double> p;
    p.add("W", random_tensor(rng, Shape{m, n}));
    p.add("x", random_tensor(rng, Shape{n}));
    p.add("b", random_tensor(rng, Shape{m}));
    p.add("a", random_tensor(rng, Shape{m}));
    p.add("c", random_tensor(rng, Shape{m}));
    p.add("X", random_tensor(rng, Shape{T, n}));
    p.add("K", random_tensor(rng, Shape{klen, n, m}));
    p.add("z", random_tensor(rng, Shape{T}, 3.0));
    p.add("S", random_tensor(rng, Shape{3, 3}, 0.3));
    std::vector<bool> valid(T, true);
    if (T > 1) valid[rng() % T] = false;

    std::vector<std::pair<std::string, Builder>> cases = {
        {"affine", [](auto&, auto& b) { return affine(b["x"], b["W"], b["b"]); }},
        {"add", [](auto&, auto& b) { return add(b["a"], b["b"]); }},
        {"sub", [](auto&, auto& b) { return sub(b["a"], b["b"]); }},
        {"mul", [](auto&, auto& b) { return mul(b["a"], b["b"]); }},
        {"scale", [](auto&, auto& b) { return scale(b["a"], -1.7); }},
        {"tanh", [](auto&, auto& b) { return tanh(b["a"]); }},
        {"sigmoid", [](auto&, auto& b) { return sigmoid(b["a"]); }},
        {"relu", [](auto&, auto& b) { return relu(b["a"]); }},
        {"l2_normalize", [](auto&, auto& b) { return l2_normalize(b["a"]); }},
        {"dot", [](auto&, auto& b) { return dot(b["a"], b["c"]); }},
        {"gate_mix", [](auto&, auto& b) { return gate_mix(b["a"], sigmoid(b["b"]), b["c"]); }},
        {"softmax", [valid](auto&, auto& b) { return masked_time_softmax(b["z"], valid); }},
        {"weighted_sum",
         [T](auto&, auto& b) {
           std::vector<Var<double>> rows;
           for (std::size_t t = 0; t < T; ++t) rows.push_back(row(b["X"], t));
           return weighted_sum(rows, masked_time_softmax(b["z"]));
         }},
        {"conv1d_full", [stride](auto&, auto& b) { return conv1d_full(b["X"], b["K"], b["b"], stride); }},
        {"matmul_abt", [](auto&, auto& b) { return matmul_abt(b["X"], b["W"]); }},
        {"contrastive_hinge", [](auto&, auto& b) { return contrastive_hinge(b["S"], 0.2); }},
    };

    for (auto& [name, build] : cases) {
      // Kinks of relu/hinge are measure-zero; skip instances sitting within a step of one.
      Graph<double> probe;
      BoundParams<double> pb(probe, p, false);
      const auto out_shape = build(probe, pb).value().shape();
      const std::size_t out_n = out_shape.numel();
      Tensor<double> weights = random_tensor(rng, Shape{out_n});
      if (name == "relu") {
        bool near_kink = false;
        for (auto v : p.at("a").data()) near_kink |= std::abs(v) < 1e-2;
        if (near_kink) continue;
      }
      if (name == "l2_normalize") {
        // a single entry normalizes to its sign, which jumps at 0
        double sq = 0;
        for (auto v : p.at("a").data()) sq += v * v;
        if (p.at("a").size() == 1 && std::sqrt(sq) < 1e-2) continue;
      }
      if (name == "contrastive_hinge") {
        const auto& s = p.at("S");
        bool near_kink = false;
        for (std::size_t j = 0; j < 3; ++j)
          for (std::size_t k = 0; k < 3; ++k)
            if (k != j)
              near_kink |= std::abs(0.2 - s(j, j) + s(k, j)) < 1e-2 || std::abs(0.2 - s(j, j) + s(j, k)) < 1e-2;
        if (near_kink) continue;
      }
      auto report = gradient_check(
          [&](Graph<double>& g, const BoundParams<double>& b) { return project(g, build(g, b), weights); }, p);
      EXPECT_TRUE(report.passed) << name << " trial " << trial << " worst " << report.worst_param << "["
                                 << report.worst_entry << "] analytic " << report.worst_analytic << " numeric "
                                 << report.worst_numeric;
    }
  }
}

TEST(Backward, SharedSubexpressionsAccumulate) {
  std::mt19937_64 rng(9);
  Tensor<double> x0 = random_tensor(rng, Shape{5});
  auto grad_of = [&](bool twice) {
    Graph<double> g;
    auto x = g.variable(x0);
    auto gx = sum(tanh(mul(x, x)));
    auto f = twice ? add(gx, gx) : gx;
    g.backward(f);
    return x.grad();
  };
  auto once = grad_of(false);
  auto twice = grad_of(true);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(twice[i], 2 * once[i]);
}

TEST(Backward, ConstantsReceiveNoGradientRule) {
  Graph<double> g;
  auto c = g.constant(Tensor<double>::vector({1, 2}));
  auto v = g.variable(Tensor<double>::vector({3, 4}));
  auto y = dot(c, v);
  EXPECT_FALSE(c.requires_grad());
  EXPECT_TRUE(y.requires_grad());
  g.backward(y);
  EXPECT_EQ(v.grad(), Tensor<double>::vector({1, 2}));
  EXPECT_EQ(c.grad(), Tensor<double>::vector({0, 0}));
}

TEST(Conv1dFull, BruteForceExamples) {
  Graph<double> g;
  auto X = g.constant(Tensor<double>(Shape{4, 1}, {1, 2, 3, 4}));
  auto K = g.constant(Tensor<double>(Shape{2, 1, 1}, {1, 1}));
  auto b = g.constant(Tensor<double>::vector({0}));
  EXPECT_EQ(conv1d_full(X, K, b, 1).value().storage(), (std::vector<double>{1, 3, 5, 7, 4}));
  EXPECT_EQ(conv1d_full(X, K, b, 2).value().storage(), (std::vector<double>{1, 5, 4}));
}

TEST(Container, LittleEndianLayout) {
  NamedTensors<float> t;
  t.add("ab", Tensor<float>(Shape{1, 2}, {1.0f, -2.5f}));
  std::ostringstream os;
  write_container(os, t);
  const std::string bytes = os.str();
  ASSERT_EQ(bytes.size(), 4u + 8 + 8 + 2 + 8 + 16 + 8);
  EXPECT_EQ(bytes.substr(0, 4), "GSR1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);  // entry count, low byte first
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 2);  // name length
  EXPECT_EQ(bytes.substr(20, 2), "ab");
  EXPECT_EQ(static_cast<unsigned char>(bytes[22]), 2);  // rank
  // 1.0f = 0x3F800000 stored as 00 00 80 3F
  const std::size_t payload = 22 + 8 + 16;
  EXPECT_EQ(static_cast<unsigned char>(bytes[payload + 2]), 0x80);
  EXPECT_EQ(static_cast<unsigned char>(bytes[payload + 3]), 0x3F);
}

TEST(Container, RoundTripAndCorruption) {
  std::mt19937_64 rng(1);
  NamedTensors<float> t;
  for (int i = 0; i < 5; ++i) {
    Tensor<float> v(Shape{1 + rng() % 4, 1 + rng() % 3, 2});
    for (auto& x : v.data()) x = std::uniform_real_distribution<float>(-9, 9)(rng);
    t.add("entry." + std::to_string(i), v);
  }
  std::stringstream ss;
  write_container(ss, t);
  EXPECT_EQ(read_container(ss), t);

  std::string bytes;
  {
    std::ostringstream os;
    write_container(os, t);
    bytes = os.str();
  }
  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_container(truncated), FormatError);
  bytes[0] = 'X';
  std::istringstream bad(bytes);
  EXPECT_THROW(read_container(bad), FormatError);
}

}  // namespace
}  // namespace gsr
