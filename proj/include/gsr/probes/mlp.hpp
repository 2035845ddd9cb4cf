#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "gsr/probes/stats.hpp"

namespace gsr {

struct MlpConfig {
  std::size_t hidden = 1024;
  std::size_t max_epochs = 200;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double holdout_fraction = 0.1;
  std::size_t patience = 10;  ///< epochs without holdout improvement before stopping
};

/// One-hidden-layer ReLU network with a sigmoid output, trained with Adam on
/// binary cross-entropy. Inputs are standardized with training statistics.
class MlpClassifier {
 public:
  MlpClassifier(MlpConfig cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {}

  void fit(const RowSet& X, const std::vector<int>& y) {
    if (X.size() < 2 || y.size() != X.size()) throw InsufficientDataError("mlp: need at least 2 labelled rows");
    Eigen::MatrixXf all = detail::to_matrix(X).cast<float>();
    mean_ = all.colwise().mean();
    const Eigen::RowVectorXf var = (all.rowwise() - mean_).array().square().colwise().mean();
    scale_ = var.unaryExpr([](float v) { return v > 0 ? 1.0f / std::sqrt(v) : 1.0f; });
    all = standardize(all);

    std::vector<std::size_t> idx(X.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng_);
    const std::size_t n_hold = std::max<std::size_t>(1, std::size_t(cfg_.holdout_fraction * double(X.size())));
    const std::vector<std::size_t> hold(idx.begin(), idx.begin() + std::ptrdiff_t(n_hold));
    std::vector<std::size_t> train(idx.begin() + std::ptrdiff_t(n_hold), idx.end());
    if (train.empty()) train = hold;

    const Eigen::Index d = all.cols(), h = Eigen::Index(cfg_.hidden);
    std::uniform_real_distribution<float> u1(-std::sqrt(6.0f / float(d)), std::sqrt(6.0f / float(d)));
    std::uniform_real_distribution<float> u2(-std::sqrt(6.0f / float(h + 1)), std::sqrt(6.0f / float(h + 1)));
    W1_ = Eigen::MatrixXf::NullaryExpr(h, d, [&] { return u1(rng_); });
    b1_ = Eigen::VectorXf::Zero(h);
    w2_ = Eigen::VectorXf::NullaryExpr(h, [&] { return u2(rng_); });
    b2_ = 0;

    Adam a(W1_.size() + b1_.size() + w2_.size() + 1, cfg_.lr);
    auto best = snapshot();
    double best_acc = -1;
    std::size_t stale = 0;
    for (std::size_t epoch = 0; epoch < cfg_.max_epochs && stale < cfg_.patience; ++epoch) {
      std::shuffle(train.begin(), train.end(), rng_);
      for (std::size_t s = 0; s < train.size(); s += cfg_.batch_size) {
        const std::size_t e = std::min(train.size(), s + cfg_.batch_size);
        const Eigen::Index m = Eigen::Index(e - s);
        Eigen::MatrixXf Xb(d, m);
        Eigen::VectorXf yb(m);
        for (Eigen::Index j = 0; j < m; ++j) {
          Xb.col(j) = all.row(Eigen::Index(train[s + std::size_t(j)])).transpose();
          yb[j] = float(y[train[s + std::size_t(j)]]);
        }
        const Eigen::MatrixXf pre = (W1_ * Xb).colwise() + b1_;
        const Eigen::MatrixXf act = pre.cwiseMax(0.0f);
        const Eigen::VectorXf logit = (w2_.transpose() * act).transpose().array() + b2_;
        const Eigen::VectorXf p = (1.0f + (-logit.array()).exp()).inverse();
        const Eigen::VectorXf dlogit = (p - yb) / float(m);
        const Eigen::VectorXf gw2 = act * dlogit;
        const float gb2 = dlogit.sum();
        const Eigen::MatrixXf dact = (w2_ * dlogit.transpose()).cwiseProduct((pre.array() > 0).cast<float>().matrix());
        const Eigen::MatrixXf gW1 = dact * Xb.transpose();
        const Eigen::VectorXf gb1 = dact.rowwise().sum();
        a.step({{W1_.data(), gW1.data(), W1_.size()},
                {b1_.data(), gb1.data(), b1_.size()},
                {w2_.data(), gw2.data(), w2_.size()},
                {&b2_, &gb2, 1}});
      }
      std::size_t correct = 0;
      for (auto i : hold) correct += (score_std(all.row(Eigen::Index(i))) > 0.5f ? 1 : 0) == y[i];
      const double acc = double(correct) / double(hold.size());
      if (acc > best_acc) {
        best_acc = acc;
        best = snapshot();
        stale = 0;
      } else {
        ++stale;
      }
    }
    restore(best);
  }

  int predict(const std::vector<double>& x) const {
    Eigen::RowVectorXf r(Eigen::Index(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) r[Eigen::Index(i)] = float(x[i]);
    return score_std(standardize(r)) > 0.5f ? 1 : 0;
  }

  double accuracy(const RowSet& X, const std::vector<int>& y) const {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < X.size(); ++i) correct += predict(X[i]) == y[i];
    return X.empty() ? 0.0 : double(correct) / double(X.size());
  }

 private:
  struct Slot {
    float* param;
    const float* grad;
    Eigen::Index size;
  };

  struct Adam {
    Eigen::VectorXf m, v;
    double lr;
    std::uint64_t t = 0;
    Adam(Eigen::Index n, double lr_) : m(Eigen::VectorXf::Zero(n)), v(Eigen::VectorXf::Zero(n)), lr(lr_) {}
    void step(std::initializer_list<Slot> slots) {
      ++t;
      const float c1 = float(1 - std::pow(0.9, double(t))), c2 = float(1 - std::pow(0.999, double(t)));
      Eigen::Index off = 0;
      for (const auto& s : slots) {
        for (Eigen::Index i = 0; i < s.size; ++i, ++off) {
          const float g = s.grad[i];
          m[off] = 0.9f * m[off] + 0.1f * g;
          v[off] = 0.999f * v[off] + 0.001f * g * g;
          s.param[i] -= float(lr) * (m[off] / c1) / (std::sqrt(v[off] / c2) + 1e-8f);
        }
      }
    }
  };

  struct Snapshot {
    Eigen::MatrixXf W1;
    Eigen::VectorXf b1, w2;
    float b2;
  };
  Snapshot snapshot() const { return {W1_, b1_, w2_, b2_}; }
  void restore(const Snapshot& s) { W1_ = s.W1, b1_ = s.b1, w2_ = s.w2, b2_ = s.b2; }

  template <class M>
  Eigen::MatrixXf standardize(const M& x) const {
    return ((x.rowwise() - mean_).array().rowwise() * scale_.array()).matrix();
  }

  float score_std(const Eigen::RowVectorXf& x) const {
    const Eigen::VectorXf a = (W1_ * x.transpose() + b1_).cwiseMax(0.0f);
    return 1.0f / (1.0f + std::exp(-(w2_.dot(a) + b2_)));
  }

  MlpConfig cfg_;
  std::mt19937_64 rng_;
  Eigen::RowVectorXf mean_, scale_;
  Eigen::MatrixXf W1_;
  Eigen::VectorXf b1_, w2_;
  float b2_ = 0;
};

}  // namespace gsr
