#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "gsr/numcore/gradient_check.hpp"
#include "gsr/training/fit.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace gsr {
namespace {

using fixture::random_unit;

std::vector<Var<double>> constants(Graph<double>& g, const oracle::Mat& rows) {
  std::vector<Var<double>> out;
  for (const auto& r : rows) out.push_back(g.constant(Tensor<double>(Shape{r.size()}, r)));
  return out;
}

double loss_of(const oracle::Mat& U, const oracle::Mat& I, double margin = 0.2) {
  Graph<double> g;
  return contrastive_loss(constants(g, U), constants(g, I), LossConfig{margin}).item();
}

TEST(CosineDistance, IdenticalOrthogonalAntipodal) {
  const std::vector<double> a{1, 0}, b{0, 1}, c{-1, 0};
  EXPECT_EQ(cosine_distance<double>(a, a), 0.0);
  EXPECT_EQ(cosine_distance<double>(a, b), 1.0);
  EXPECT_EQ(cosine_distance<double>(a, c), 2.0);
}

TEST(ContrastiveLoss, AllEqualBatchOfTwoIsFourMargins) {
  const oracle::Mat E = {{0.6, 0.8}, {0.6, 0.8}};
  EXPECT_EQ(loss_of(E, E, 0.2), 4 * 0.2);
  EXPECT_EQ(loss_of(E, E, 0.5), 4 * 0.5);
}

TEST(ContrastiveLoss, SatisfiedMarginIsZero) {
  const oracle::Mat U = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  EXPECT_EQ(loss_of(U, U), 0.0);
}

TEST(ContrastiveLoss, MatchesBruteForceOnRandomBatches) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + trial % 7, h = 1 + rng() % 6;
    oracle::Mat U, I;
    for (std::size_t j = 0; j < n; ++j) U.push_back(random_unit(rng, h)), I.push_back(random_unit(rng, h));
    EXPECT_NEAR(loss_of(U, I), oracle::contrastive_loss(U, I, 0.2), 1e-6);
  }
}

TEST(ContrastiveLoss, RejectsDegenerateBatches) {
  Graph<double> g;
  auto one = constants(g, {{1, 0}});
  EXPECT_THROW(contrastive_loss(one, one), NoNegativesError);
  auto two = constants(g, {{1, 0}, {0, 1}});
  EXPECT_THROW(contrastive_loss(two, one), DimensionError);
  EXPECT_THROW(contrastive_loss(two, two, LossConfig{0.0}), std::invalid_argument);
}

TEST(ContrastiveLoss, PermutationAndRotationInvariant) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng() % 6, h = 2 + rng() % 5;
    oracle::Mat U, I;
    for (std::size_t j = 0; j < n; ++j) U.push_back(random_unit(rng, h)), I.push_back(random_unit(rng, h));
    const double base = loss_of(U, I);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    oracle::Mat Up, Ip;
    for (auto p : perm) Up.push_back(U[p]), Ip.push_back(I[p]);
    EXPECT_NEAR(loss_of(Up, Ip), base, 1e-12);

    Eigen::MatrixXd M(h, h);
    std::normal_distribution<double> gs(0, 1);
    for (Eigen::Index r = 0; r < M.rows(); ++r)
      for (Eigen::Index c = 0; c < M.cols(); ++c) M(r, c) = gs(rng);
    const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(M).householderQ();
    auto rotate = [&](const oracle::Mat& X) {
      oracle::Mat out;
      for (const auto& x : X) {
        const Eigen::VectorXd y = Q * Eigen::Map<const Eigen::VectorXd>(x.data(), Eigen::Index(h));
        out.emplace_back(y.data(), y.data() + h);
      }
      return out;
    };
    EXPECT_NEAR(loss_of(rotate(U), rotate(I)), base, 1e-5);
  }
}

TEST(ContrastiveLoss, InactiveEmbeddingGetsZeroGradient) {
  // Pairs 0 and 1 collide (active hinges); pair 2 is orthogonal to both.
  Graph<double> g;
  auto u0 = g.variable(Tensor<double>::vector({1, 0, 0})), u1 = g.variable(Tensor<double>::vector({0.8, 0.6, 0}));
  auto u2 = g.variable(Tensor<double>::vector({0, 0, 1}));
  auto i0 = g.variable(Tensor<double>::vector({0.6, 0.8, 0})), i1 = g.variable(Tensor<double>::vector({1, 0, 0}));
  auto i2 = g.variable(Tensor<double>::vector({0, 0, 1}));
  auto loss = contrastive_loss<double>({u0, u1, u2}, {i0, i1, i2});
  EXPECT_GT(loss.item(), 0.0);
  g.backward(loss);
  const auto gu2 = g.grad(u2), gi2 = g.grad(i2), gu0 = g.grad(u0);
  for (double v : gu2.data()) EXPECT_EQ(v, 0.0);
  for (double v : gi2.data()) EXPECT_EQ(v, 0.0);
  double active = 0;
  for (double v : gu0.data()) active += std::abs(v);
  EXPECT_GT(active, 0.0);
}

TEST(ContrastiveLoss, GradientCheckThroughBothEncoders) {
  std::mt19937_64 rng(23);
  auto cfg = model_preset("micro");
  cfg.hidden = 4, cfg.attn_hidden = 3, cfg.conv_size = 3, cfg.input_dim = 3, cfg.image_dim = 5;
  auto p = init_params<double>(cfg, 5);
  std::vector<Tensor<double>> X, imgs;
  for (int j = 0; j < 3; ++j) {
    X.push_back(fixture::random_tensor(rng, Shape{3 + std::size_t(j), 3}));
    imgs.push_back(fixture::random_tensor(rng, Shape{5}));
  }
  auto report = gradient_check(
      [&](Graph<double>& g, const BoundParams<double>& b) {
        std::vector<Var<double>> U, I;
        for (int j = 0; j < 3; ++j) {
          U.push_back(encode_utterance(g, X[j], b, cfg).embedding);
          I.push_back(encode_image(g.constant(imgs[j]), b));
        }
        return contrastive_loss(U, I, LossConfig{0.2});
      },
      p, GradCheckOptions{1e-5, 1e-6});
  // At step 1e-3 this instance sits at 1.08e-4, all of it O(h^2) truncation.
  EXPECT_TRUE(report.passed) << report.worst_param << "[" << report.worst_entry << "] rel " << report.max_rel_error;
}

// ---------------------------------------------------------------- Adam

ParamSet<double> single(std::vector<double> v) {
  ParamSet<double> p;
  const Shape shape{v.size()};
  p.add("theta", Tensor<double>(shape, std::move(v)));
  return p;
}

TEST(Adam, FirstStepMovesEachEntryByTheLearningRate) {
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> mag(1e-3, 10), sgn(-1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = single({0.3, -0.2, 1.5});
    ParamSet<double> g = single({mag(rng) * (sgn(rng) < 0 ? -1 : 1), mag(rng), -mag(rng)});
    OptimizerState<double> st(p, AdamConfig{0.01});
    const auto before = p;
    adam_step(p, g, st);
    for (std::size_t i = 0; i < 3; ++i) {
      const double delta = p.at("theta")[i] - before.at("theta")[i];
      const double gi = g.at("theta")[i];
      EXPECT_NEAR(std::abs(delta), 0.01, 0.01 * 1e-8 / std::abs(gi) + 1e-15);
      EXPECT_EQ(std::signbit(delta), !std::signbit(gi));
    }
  }
}

TEST(Adam, ZeroGradientLeavesFreshParametersAndDecaysMoments) {
  auto p = single({1, 2});
  OptimizerState<double> st(p, AdamConfig{0.1});
  adam_step(p, single({0, 0}), st);
  EXPECT_EQ(p.at("theta")[0], 1.0);
  EXPECT_EQ(p.at("theta")[1], 2.0);

  adam_step(p, single({0.5, -1}), st);
  const auto m = st.m.at("theta"), v = st.v.at("theta");
  adam_step(p, single({0, 0}), st);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_DOUBLE_EQ(st.m.at("theta")[i], 0.9 * m[i]);
    EXPECT_DOUBLE_EQ(st.v.at("theta")[i], 0.999 * v[i]);
  }
}

TEST(Adam, QuadraticBowlFollowsReferenceRecurrence) {
  auto p = single({1, 1});
  OptimizerState<double> st(p, AdamConfig{0.05});
  double th[2] = {1, 1}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 500; ++t) {
    adam_step(p, single({2 * p.at("theta")[0], 2 * p.at("theta")[1]}), st);
    for (int i = 0; i < 2; ++i) {
      const double g = 2 * th[i];
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      th[i] -= 0.05 * (m[i] / (1 - std::pow(0.9, t))) / (std::sqrt(v[i] / (1 - std::pow(0.999, t))) + 1e-8);
    }
  }
  EXPECT_NEAR(p.at("theta")[0], th[0], 1e-12);
  EXPECT_NEAR(p.at("theta")[1], th[1], 1e-12);
  EXPECT_LT(std::hypot(p.at("theta")[0], p.at("theta")[1]), 1e-2);
}

TEST(Adam, NonFiniteGradientNamesTheParameter) {
  ParamSet<double> p;
  p.add("conv.K", Tensor<double>(Shape{2}));
  p.add("attn.U", Tensor<double>(Shape{2}));
  OptimizerState<double> st(p, AdamConfig{});
  auto g = p.zeros_like();
  g.at("attn.U")[1] = std::nan("");
  try {
    adam_step(p, g, st);
    FAIL() << "expected NonFiniteGradientError";
  } catch (const NonFiniteGradientError& e) {
    EXPECT_EQ(e.param(), "attn.U");
    EXPECT_NE(std::string(e.what()).find("attn.U"), std::string::npos);
  }
  EXPECT_EQ(st.step, 0u);
}

TEST(Adam, ClipScalesTheGlobalNorm) {
  // With clipping, the first step still has magnitude lr; the second differs
  // from the unclipped run because the moments hold scaled gradients.
  auto a = single({0, 0}), b = single({0, 0});
  OptimizerState<double> sa(a, AdamConfig{0.1, 0.9, 0.999, 1e-8, 1.0}), sb(b, AdamConfig{0.1});
  adam_step(a, single({30, 40}), sa);
  adam_step(b, single({30, 40}), sb);
  EXPECT_NEAR(sa.m.at("theta")[0], 0.1 * 0.6, 1e-12);
  EXPECT_NEAR(sa.m.at("theta")[1], 0.1 * 0.8, 1e-12);
  EXPECT_NEAR(sb.m.at("theta")[0], 0.1 * 30, 1e-12);
}

// ---------------------------------------------------------------- fit

SynthCorpus small_corpus() {
  SynthConfig sc;
  sc.n_utterances = 24;
  sc.val_fraction = 0.25;
  sc.seed = 3;
  return generate_synthetic(sc);
}

TEST(Fit, ZeroEpochsReturnsInitialization) {
  auto c = small_corpus();
  auto train = fixture::paired(c, Split::Train), val = fixture::paired(c, Split::Val);
  auto cfg = model_preset("micro");
  auto init = init_params<float>(cfg, 1);
  TrainConfig tc;
  tc.max_epochs = 0;
  std::ostringstream log;
  auto r = fit(cfg, init, train, val, tc, &log);
  EXPECT_TRUE(r.best == init);
  EXPECT_EQ(r.best_epoch, 0u);
  EXPECT_TRUE(r.log.empty());
  EXPECT_EQ(log.str(), std::string(kMetricsHeader) + "\n");
}

TEST(Fit, DeterministicAndSelectsBestValidationEpoch) {
  auto c = small_corpus();
  auto train = fixture::paired(c, Split::Train), val = fixture::paired(c, Split::Val);
  auto cfg = model_preset("micro");
  TrainConfig tc;
  tc.max_epochs = 8;
  tc.batch_size = 6;
  tc.lr = 5e-3;
  tc.seed = 11;
  std::ostringstream l1, l2;
  auto a = fit(cfg, init_params<float>(cfg, 2), train, val, tc, &l1);
  auto b = fit(cfg, init_params<float>(cfg, 2), train, val, tc, &l2);
  EXPECT_EQ(l1.str(), l2.str());
  EXPECT_TRUE(a.best == b.best);
  ASSERT_EQ(a.log.size(), 8u);

  double best = -1;
  std::size_t first_best = 0;
  for (const auto& e : a.log)
    if (e.val.recall(10) > best) best = e.val.recall(10), first_best = e.epoch;
  EXPECT_EQ(a.best_epoch, first_best);
  EXPECT_EQ(evaluate_retrieval(a.best, cfg, val).recall(10), best);

  std::istringstream rows(l1.str());
  std::string line;
  std::getline(rows, line);
  EXPECT_EQ(line, kMetricsHeader);
  std::size_t n = 0;
  while (std::getline(rows, line)) ++n;
  EXPECT_EQ(n, 8u);
}

TEST(Fit, EmptySplitIsAConfigurationError) {
  auto c = small_corpus();
  auto train = fixture::paired(c, Split::Train);
  auto cfg = model_preset("micro");
  EXPECT_THROW(fit(cfg, init_params<float>(cfg, 1), train, PairedSet{}, TrainConfig{}), ConfigError);
  EXPECT_THROW(fit(cfg, init_params<float>(cfg, 1), PairedSet{}, train, TrainConfig{}), ConfigError);
}

TEST(Fit, PresetLearningRates) {
  EXPECT_EQ(train_preset(model_preset("flickr8k-speech")).lr, 2e-4);
  EXPECT_EQ(train_preset(model_preset("coco-speech")).lr, 2e-4);
  EXPECT_EQ(train_preset(model_preset("coco-text")).lr, 1e-3);
}

}  // namespace
}  // namespace gsr
