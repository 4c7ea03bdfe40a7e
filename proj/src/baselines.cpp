#include "painmtl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "painmtl/errors.hpp"
#include "painmtl/nn.hpp"
#include "painmtl/random.hpp"

namespace painmtl {

std::string_view to_string(LinearKind kind) { return kind == LinearKind::Logistic ? "logistic" : "hinge"; }

double LinearModel::decision_value(std::span<const double> x) const {
  if (x.size() != weights.size())
    throw DimensionMismatch("input has " + std::to_string(x.size()) + " features, model expects " +
                            std::to_string(weights.size()));
  double z = bias;
  for (std::size_t j = 0; j < x.size(); ++j) z += weights[j] * x[j];
  return z;
}

namespace {

std::size_t check_data(const LabeledMatrix& data) {
  if (data.x.size() != data.y.size()) throw DimensionMismatch("feature rows and labels differ in count");
  if (data.x.size() < 2) throw SingleClassData("need at least 2 training samples");
  const std::size_t d = data.x.front().size();
  bool has0 = false, has1 = false;
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    if (data.x[i].size() != d) throw DimensionMismatch("ragged feature matrix");
    if (data.y[i] == 0) {
      has0 = true;
    } else if (data.y[i] == 1) {
      has1 = true;
    } else {
      throw ConfigError("labels must be 0 or 1");
    }
  }
  if (!has0 || !has1) throw SingleClassData("training data contains only one class");
  return d;
}

double dot(std::span<const double> w, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[j];
  return s;
}

}  // namespace

double logistic_objective(const LabeledMatrix& data, std::span<const double> w, double b, double l2) {
  double loss = 0.0;
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    const double z = dot(w, data.x[i]) + b;
    // log(1 + e^-z) for y = 1, log(1 + e^z) for y = 0, evaluated stably.
    const double m = data.y[i] == 1 ? -z : z;
    loss += m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
  }
  double reg = 0.0;
  for (double v : w) reg += v * v;
  return loss / static_cast<double>(data.x.size()) + 0.5 * l2 * reg;
}

std::vector<double> logistic_gradient(const LabeledMatrix& data, std::span<const double> w, double b, double l2) {
  const std::size_t d = w.size();
  std::vector<double> g(d + 1, 0.0);
  const double inv_n = 1.0 / static_cast<double>(data.x.size());
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    const double r = (sigmoid(dot(w, data.x[i]) + b) - data.y[i]) * inv_n;
    for (std::size_t j = 0; j < d; ++j) g[j] += r * data.x[i][j];
    g[d] += r;
  }
  for (std::size_t j = 0; j < d; ++j) g[j] += l2 * w[j];
  return g;
}

LinearModel train_logistic(const LabeledMatrix& data, double l2, const LinearConfig& cfg) {
  const std::size_t d = check_data(data);
  if (!(l2 >= 0.0)) throw ConfigError("l2 must be non-negative");

  // Curvature bound: 0.25 * mean |[x, 1]|^2 + l2.
  double mean_sq = 0.0;
  for (const auto& x : data.x) mean_sq += dot(x, x) + 1.0;
  mean_sq /= static_cast<double>(data.x.size());
  const double step = 1.0 / (0.25 * mean_sq + l2);

  std::vector<double> theta(d + 1, 0.0), prev = theta, y(d + 1), next(d + 1);
  auto split_grad = [&](const std::vector<double>& p) {
    return logistic_gradient(data, std::span<const double>(p.data(), d), p[d], l2);
  };
  std::size_t k = 0;
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    const auto g_theta = split_grad(theta);
    double gnorm = 0.0;
    for (double v : g_theta) gnorm += v * v;
    if (!std::isfinite(gnorm)) throw NonFiniteLoss(it);
    if (std::sqrt(gnorm) <= cfg.tolerance) break;

    const double momentum = static_cast<double>(k) / static_cast<double>(k + 3);
    for (std::size_t j = 0; j <= d; ++j) y[j] = theta[j] + momentum * (theta[j] - prev[j]);
    const auto g_y = split_grad(y);
    double restart = 0.0;
    for (std::size_t j = 0; j <= d; ++j) {
      next[j] = y[j] - step * g_y[j];
      restart += g_y[j] * (next[j] - theta[j]);
    }
    prev = theta;
    theta = next;
    k = restart > 0.0 ? 0 : k + 1;
  }

  LinearModel m;
  m.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(d));
  m.bias = theta[d];
  m.kind = LinearKind::Logistic;
  if (!std::isfinite(logistic_objective(data, m.weights, m.bias, l2))) throw NonFiniteLoss(cfg.max_iterations);
  return m;
}

double svm_objective(const LabeledMatrix& data, std::span<const double> w, double b, double c) {
  double hinge = 0.0;
  for (std::size_t i = 0; i < data.x.size(); ++i) {
    const double y = data.y[i] == 1 ? 1.0 : -1.0;
    hinge += std::max(0.0, 1.0 - y * (dot(w, data.x[i]) + b));
  }
  return 0.5 * dot(w, w) + c * hinge / static_cast<double>(data.x.size());
}

LinearModel train_linear_svm(const LabeledMatrix& data, double c, const LinearConfig& cfg) {
  const std::size_t d = check_data(data);
  if (!(c > 0.0)) throw ConfigError("SVM C must be positive");
  if (cfg.svm_iterations == 0) throw ConfigError("svm_iterations must be positive");

  // Objective / c = (lambda/2)|w|^2 + mean hinge, lambda = 1/c; step 1/(lambda t).
  const double lambda = 1.0 / c;
  const double radius = 1.0 / std::sqrt(lambda);
  const double inv_n = 1.0 / static_cast<double>(data.x.size());
  std::vector<double> w(d, 0.0), gw(d), w_avg(d, 0.0);
  double b = 0.0, b_avg = 0.0;
  const std::size_t total = cfg.svm_iterations;
  const std::size_t avg_from = total / 2 + 1;

  for (std::size_t t = 1; t <= total; ++t) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < data.x.size(); ++i) {
      const double y = data.y[i] == 1 ? 1.0 : -1.0;
      if (y * (dot(w, data.x[i]) + b) < 1.0) {
        for (std::size_t j = 0; j < d; ++j) gw[j] -= y * data.x[i][j] * inv_n;
        gb -= y * inv_n;
      }
    }
    const double eta = 1.0 / (lambda * static_cast<double>(t));
    double norm_sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      w[j] = (1.0 - eta * lambda) * w[j] - eta * gw[j];
      norm_sq += w[j] * w[j];
    }
    b -= eta * gb;
    // The minimiser lies in the ball |w| <= 1/sqrt(lambda).
    const double norm = std::sqrt(norm_sq);
    if (norm > radius)
      for (double& v : w) v *= radius / norm;
    if (!std::isfinite(b) || !std::isfinite(norm)) throw NonFiniteLoss(t);
    if (t >= avg_from) {
      for (std::size_t j = 0; j < d; ++j) w_avg[j] += w[j];
      b_avg += b;
    }
  }
  const double count = static_cast<double>(total - avg_from + 1);
  LinearModel m;
  m.kind = LinearKind::Hinge;
  m.weights.resize(d);
  for (std::size_t j = 0; j < d; ++j) m.weights[j] = w_avg[j] / count;
  m.bias = b_avg / count;
  return m;
}

int predict_linear(const LinearModel& model, std::span<const double> x) {
  const double z = model.decision_value(x);
  if (model.kind == LinearKind::Logistic) return decide(sigmoid(z));
  return z >= 0.0 ? 1 : 0;
}

double linear_accuracy(const LinearModel& model, const LabeledMatrix& data) {
  if (data.x.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.x.size(); ++i)
    if (predict_linear(model, data.x[i]) == data.y[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.x.size());
}

double select_regularization(const LabeledMatrix& data, LinearKind kind, std::span<const double> grid,
                             const LinearConfig& cfg) {
  check_data(data);
  if (grid.empty()) throw ConfigError("empty hyperparameter grid");
  constexpr std::size_t kInnerFolds = 3;
  std::vector<std::size_t> fold(data.x.size());
  for (int label : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.y.size(); ++i)
      if (data.y[i] == label) idx.push_back(i);
    Rng rng(derive_seed(cfg.seed, {stream::kGridSearch, static_cast<std::uint64_t>(label)}));
    rng.shuffle(idx);
    for (std::size_t j = 0; j < idx.size(); ++j) fold[idx[j]] = j % kInnerFolds;
  }

  double best_value = grid.front(), best_acc = -1.0;
  for (double value : grid) {
    double acc = 0.0;
    std::size_t used = 0;
    for (std::size_t f = 0; f < kInnerFolds; ++f) {
      LabeledMatrix tr, te;
      for (std::size_t i = 0; i < data.x.size(); ++i) {
        LabeledMatrix& dst = fold[i] == f ? te : tr;
        dst.x.push_back(data.x[i]);
        dst.y.push_back(data.y[i]);
      }
      if (te.x.empty()) continue;
      try {
        const LinearModel m =
            kind == LinearKind::Logistic ? train_logistic(tr, value, cfg) : train_linear_svm(tr, value, cfg);
        acc += linear_accuracy(m, te);
        ++used;
      } catch (const SingleClassData&) {
      }
    }
    if (used == 0) continue;
    acc /= static_cast<double>(used);
    if (acc > best_acc) {
      best_acc = acc;
      best_value = value;
    }
  }
  return best_value;
}

}  // namespace painmtl
