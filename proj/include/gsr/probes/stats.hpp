#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsr {

using RowSet = std::vector<std::vector<double>>;

class InsufficientDataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UndefinedCorrelationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace detail {

inline Eigen::MatrixXd to_matrix(const RowSet& rows) {
  const Eigen::Index n = Eigen::Index(rows.size()), p = rows.empty() ? 0 : Eigen::Index(rows.front().size());
  Eigen::MatrixXd M(n, p);
  for (Eigen::Index r = 0; r < n; ++r) {
    if (Eigen::Index(rows[r].size()) != p) throw std::invalid_argument("ragged feature rows");
    for (Eigen::Index c = 0; c < p; ++c) {
      if (!std::isfinite(rows[r][c])) throw std::invalid_argument("non-finite feature value");
      M(r, c) = rows[r][c];
    }
  }
  return M;
}

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

}  // namespace detail

// ---------------------------------------------------------------- ridge

struct RidgeModel {
  Eigen::VectorXd w;
  double intercept = 0;

  std::vector<double> predict(const RowSet& X) const {
    const Eigen::VectorXd y = (detail::to_matrix(X) * w).array() + intercept;
    return {y.data(), y.data() + y.size()};
  }
};

/// Closed-form ridge, w = (Xc'Xc + alpha I)^-1 Xc'yc on centered columns; the
/// intercept is unpenalized.
inline RidgeModel ridge_fit(const RowSet& Xtr, const std::vector<double>& ytr, double alpha = 1.0) {
  if (Xtr.size() < 2) throw InsufficientDataError("ridge: need at least 2 training rows");
  if (ytr.size() != Xtr.size()) throw std::invalid_argument("ridge: label count mismatch");
  if (!(alpha > 0)) throw std::invalid_argument("ridge: alpha must be > 0");
  const Eigen::MatrixXd X = detail::to_matrix(Xtr);
  const Eigen::VectorXd y = detail::to_vector(ytr);
  const Eigen::RowVectorXd mx = X.colwise().mean();
  const double my = y.mean();
  const Eigen::MatrixXd Xc = X.rowwise() - mx;
  const Eigen::VectorXd yc = y.array() - my;
  Eigen::MatrixXd A = Xc.transpose() * Xc;
  A.diagonal().array() += alpha;
  RidgeModel m;
  m.w = A.llt().solve(Xc.transpose() * yc);
  m.intercept = my - mx.dot(m.w);
  return m;
}

inline std::vector<double> ridge_fit_predict(const RowSet& Xtr, const std::vector<double>& ytr, const RowSet& Xte,
                                             double alpha = 1.0) {
  return ridge_fit(Xtr, ytr, alpha).predict(Xte);
}

/// 1 - SSE/SST about the mean of `y`; 0 when `y` has no variance.
inline double r_squared(const std::vector<double>& y, const std::vector<double>& pred) {
  if (y.size() != pred.size() || y.empty()) throw std::invalid_argument("r_squared: size mismatch");
  double mean = 0;
  for (double v : y) mean += v;
  mean /= double(y.size());
  double sse = 0, sst = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sse += (y[i] - pred[i]) * (y[i] - pred[i]);
    sst += (y[i] - mean) * (y[i] - mean);
  }
  return sst == 0 ? 0.0 : 1.0 - sse / sst;
}

// ---------------------------------------------------------------- correlation

inline double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson_r: length mismatch");
  if (x.size() < 2) throw UndefinedCorrelationError("pearson_r: need at least 2 points");
  const double n = double(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) throw UndefinedCorrelationError("pearson_r: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct BootstrapResult {
  double point = 0;
  double ci_low = 0, ci_high = 0;  ///< 2.5th and 97.5th percentiles
  double min = 0, max = 0;
  std::size_t samples = 0;  ///< resamples with a defined correlation
};

/// Percentile bootstrap of Pearson's r over resampled index pairs.
inline BootstrapResult bootstrap_pearson(const std::vector<double>& x, const std::vector<double>& y,
                                         std::size_t iterations, std::uint64_t seed) {
  BootstrapResult b;
  b.point = pearson_r(x, y);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  std::vector<double> rs, xs(x.size()), ys(y.size());
  rs.reserve(iterations);
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto k = pick(rng);
      xs[i] = x[k], ys[i] = y[k];
    }
    try {
      rs.push_back(pearson_r(xs, ys));
    } catch (const UndefinedCorrelationError&) {
    }
  }
  if (rs.empty()) {
    b.ci_low = b.ci_high = b.min = b.max = b.point;
    return b;
  }
  std::sort(rs.begin(), rs.end());
  auto q = [&](double p) {
    const double pos = p * double(rs.size() - 1);
    const auto lo = std::size_t(std::floor(pos));
    const auto hi = std::min(lo + 1, rs.size() - 1);
    return rs[lo] + (pos - double(lo)) * (rs[hi] - rs[lo]);
  };
  b.ci_low = q(0.025), b.ci_high = q(0.975);
  b.min = rs.front(), b.max = rs.back();
  b.samples = rs.size();
  return b;
}

/// Per-dimension z-score across rows; zero-variance dimensions are only centered.
inline RowSet zscore(const RowSet& rows) {
  if (rows.empty()) return rows;
  const std::size_t p = rows.front().size();
  std::vector<double> mean(p, 0.0), sd(p, 0.0);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < p; ++c) mean[c] += r[c];
  for (auto& m : mean) m /= double(rows.size());
  for (const auto& r : rows)
    for (std::size_t c = 0; c < p; ++c) sd[c] += (r[c] - mean[c]) * (r[c] - mean[c]);
  for (auto& s : sd) s = std::sqrt(s / double(rows.size()));
  RowSet out = rows;
  for (auto& r : out)
    for (std::size_t c = 0; c < p; ++c) r[c] = sd[c] > 0 ? (r[c] - mean[c]) / sd[c] : r[c] - mean[c];
  return out;
}

/// Cosine similarity; 0 when either vector is zero.
inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i], aa += a[i] * a[i], bb += b[i] * b[i];
  return aa == 0 || bb == 0 ? 0.0 : ab / std::sqrt(aa * bb);
}

inline std::vector<double> unit_normalized(std::vector<double> v) {
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0)
    for (double& x : v) x /= n;
  return v;
}

// ---------------------------------------------------------------- logistic regression

/// Binary logistic regression with penalty (lambda/2)|w|^2 on the weights only,
/// fitted by Newton's method.
struct LogisticModel {
  Eigen::VectorXd w;
  double intercept = 0;

  double probability(const std::vector<double>& x) const {
    double z = intercept;
    for (std::size_t i = 0; i < x.size(); ++i) z += w[Eigen::Index(i)] * x[i];
    return 1.0 / (1.0 + std::exp(-z));
  }
  int predict(const std::vector<double>& x) const { return probability(x) > 0.5 ? 1 : 0; }
};

inline LogisticModel logistic_fit(const RowSet& Xtr, const std::vector<int>& y, double lambda = 1.0) {
  if (Xtr.empty() || y.size() != Xtr.size()) throw InsufficientDataError("logistic: empty or mismatched data");
  const Eigen::MatrixXd X0 = detail::to_matrix(Xtr);
  const Eigen::Index n = X0.rows(), p = X0.cols();
  Eigen::MatrixXd X(n, p + 1);
  X.col(0).setOnes();
  X.rightCols(p) = X0;
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) t[i] = y[std::size_t(i)];
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
  Eigen::VectorXd pen = Eigen::VectorXd::Constant(p + 1, lambda);
  pen[0] = 0;
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd z = X * beta;
    const Eigen::VectorXd mu = (1.0 + (-z.array()).exp()).inverse().matrix();
    const Eigen::VectorXd grad = X.transpose() * (mu - t) + pen.cwiseProduct(beta);
    const Eigen::VectorXd wts = (mu.array() * (1 - mu.array())).max(1e-12).matrix();
    Eigen::MatrixXd H = X.transpose() * wts.asDiagonal() * X;
    H.diagonal() += pen;
    H.diagonal().array() += 1e-10;
    const Eigen::VectorXd step = H.ldlt().solve(grad);
    beta -= step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  LogisticModel m;
  m.intercept = beta[0];
  m.w = beta.tail(p);
  return m;
}

// ---------------------------------------------------------------- strings

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// 1 - edit distance / max length; 1 for two empty strings.
inline double levenshtein_similarity(const std::string& a, const std::string& b) {
  const std::size_t m = std::max(a.size(), b.size());
  return m == 0 ? 1.0 : 1.0 - double(edit_distance(a, b)) / double(m);
}

}  // namespace gsr
