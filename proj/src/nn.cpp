#include "painmtl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "painmtl/errors.hpp"
#include "painmtl/random.hpp"

namespace painmtl {

double bce_loss(double p, int y) {
  p = std::clamp(p, kProbabilityClip, 1.0 - kProbabilityClip);
  return y == 1 ? -std::log(p) : -std::log(1.0 - p);
}

std::size_t NetworkSpec::task_index(const std::string& id) const {
  const auto it = std::find(task_ids.begin(), task_ids.end(), id);
  if (it == task_ids.end()) throw UnknownTask("unknown task '" + id + "'");
  return static_cast<std::size_t>(it - task_ids.begin());
}

void NetworkSpec::validate() const {
  if (input_dim == 0) throw ConfigError("input_dim must be positive");
  if (task_ids.empty()) throw ConfigError("network needs at least one task");
  for (auto w : shared_layers)
    if (w == 0) throw ConfigError("shared layer width must be positive");
  for (auto w : task_layers)
    if (w == 0) throw ConfigError("task layer width must be positive");
  std::set<std::string> unique(task_ids.begin(), task_ids.end());
  if (unique.size() != task_ids.size()) throw ConfigError("duplicate task ids");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0, 1)");
  if (!(max_norm > 0.0)) throw ConfigError("max_norm must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation_fraction must be in (0, 1)");
}

namespace {

LayerParams make_layer(std::size_t out, std::size_t in) { return {Matrix(out, in), std::vector<double>(out)}; }

template <typename F>
void for_each_layer(NetworkParams& p, F&& f) {
  for (auto& l : p.shared) f(l);
  for (auto& t : p.per_task) {
    for (auto& l : t.layers) f(l);
    f(t.head);
  }
}

// z = W a + b
void affine(const LayerParams& layer, std::span<const double> a, std::vector<double>& z) {
  z.assign(layer.biases.begin(), layer.biases.end());
  for (std::size_t r = 0; r < layer.weights.rows; ++r) {
    const auto w = layer.weights.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < w.size(); ++c) s += w[c] * a[c];
    z[r] += s;
  }
}

void check_input(const NetworkSpec& spec, std::span<const double> x, std::size_t task) {
  if (x.size() != spec.input_dim)
    throw DimensionMismatch("input has " + std::to_string(x.size()) + " features, network expects " +
                            std::to_string(spec.input_dim));
  if (task >= spec.num_tasks()) throw UnknownTask("task index " + std::to_string(task) + " out of range");
}

// Hidden layers of one task path, in evaluation order.
std::vector<const LayerParams*> path(const NetworkParams& p, std::size_t task) {
  std::vector<const LayerParams*> out;
  for (const auto& l : p.shared) out.push_back(&l);
  for (const auto& l : p.per_task[task].layers) out.push_back(&l);
  return out;
}

}  // namespace

std::vector<std::span<double>> parameter_arrays(NetworkParams& params) {
  std::vector<std::span<double>> out;
  for_each_layer(params, [&](LayerParams& l) {
    out.emplace_back(l.weights.data);
    out.emplace_back(l.biases);
  });
  return out;
}

std::size_t parameter_count(const NetworkSpec& spec) {
  std::size_t n = 0, in = spec.input_dim;
  for (auto w : spec.shared_layers) {
    n += w * in + w;
    in = w;
  }
  std::size_t per_task = 0;
  for (auto w : spec.task_layers) {
    per_task += w * in + w;
    in = w;
  }
  per_task += in + 1;
  return n + per_task * spec.num_tasks();
}

NetworkParams zero_params(const NetworkSpec& spec) {
  NetworkParams p;
  std::size_t in = spec.input_dim;
  for (auto w : spec.shared_layers) {
    p.shared.push_back(make_layer(w, in));
    in = w;
  }
  const std::size_t shared_out = in;
  for (std::size_t t = 0; t < spec.num_tasks(); ++t) {
    TaskParams tp;
    in = shared_out;
    for (auto w : spec.task_layers) {
      tp.layers.push_back(make_layer(w, in));
      in = w;
    }
    tp.head = make_layer(1, in);
    p.per_task.push_back(std::move(tp));
  }
  return p;
}

NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  NetworkParams p = zero_params(spec);
  Rng rng(derive_seed(seed, {stream::kInit}));
  auto fill = [&](LayerParams& l, double scale) {
    const double limit = std::sqrt(scale / static_cast<double>(l.weights.cols));
    for (double& w : l.weights.data) w = rng.uniform(-limit, limit);
  };
  for (auto& l : p.shared) fill(l, 6.0);
  for (auto& t : p.per_task) {
    for (auto& l : t.layers) fill(l, 6.0);
    fill(t.head, 3.0);
  }
  return p;
}

void check_shapes(const NetworkSpec& spec, const NetworkParams& params) {
  const NetworkParams ref = zero_params(spec);
  auto same = [](const LayerParams& a, const LayerParams& b) {
    return a.weights.rows == b.weights.rows && a.weights.cols == b.weights.cols &&
           a.weights.data.size() == b.weights.data.size() && a.biases.size() == b.biases.size();
  };
  bool ok = ref.shared.size() == params.shared.size() && ref.per_task.size() == params.per_task.size();
  for (std::size_t i = 0; ok && i < ref.shared.size(); ++i) ok = same(ref.shared[i], params.shared[i]);
  for (std::size_t t = 0; ok && t < ref.per_task.size(); ++t) {
    ok = ref.per_task[t].layers.size() == params.per_task[t].layers.size() &&
         same(ref.per_task[t].head, params.per_task[t].head);
    for (std::size_t i = 0; ok && i < ref.per_task[t].layers.size(); ++i)
      ok = same(ref.per_task[t].layers[i], params.per_task[t].layers[i]);
  }
  if (!ok) throw ConfigError("network parameters do not match the network spec");
}

void apply_max_norm(NetworkParams& params, double max_norm) {
  for_each_layer(params, [&](LayerParams& l) {
    for (std::size_t r = 0; r < l.weights.rows; ++r) {
      auto w = l.weights.row(r);
      double sq = 0.0;
      for (double v : w) sq += v * v;
      const double norm = std::sqrt(sq);
      if (norm > max_norm) {
        const double scale = max_norm / norm;
        for (double& v : w) v *= scale;
      }
    }
  });
}

double forward_logit(const NetworkParams& params, const NetworkSpec& spec, std::span<const double> x,
                     std::size_t task) {
  check_input(spec, x, task);
  std::vector<double> a(x.begin(), x.end()), z;
  for (const LayerParams* l : path(params, task)) {
    affine(*l, a, z);
    for (double& v : z) v = std::max(v, 0.0);
    a.swap(z);
  }
  affine(params.per_task[task].head, a, z);
  return z[0];
}

double forward(const NetworkParams& params, const NetworkSpec& spec, std::span<const double> x, std::size_t task) {
  return sigmoid(forward_logit(params, spec, x, task));
}

double forward(const NetworkParams& params, const NetworkSpec& spec, std::span<const double> x,
               const std::string& task_id) {
  return forward(params, spec, x, spec.task_index(task_id));
}

DropoutMask no_dropout_mask(const NetworkSpec& spec) {
  DropoutMask m;
  for (auto w : spec.shared_layers) m.emplace_back(w, 1.0);
  for (auto w : spec.task_layers) m.emplace_back(w, 1.0);
  return m;
}

DropoutMask draw_dropout_mask(const NetworkSpec& spec, double rate, Rng& rng) {
  const double keep = 1.0 - rate;
  DropoutMask m = no_dropout_mask(spec);
  for (auto& layer : m)
    for (double& v : layer) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return m;
}

BackwardResult backward(const NetworkParams& params, const NetworkSpec& spec, std::span<const Example> batch,
                        std::span<const DropoutMask> masks) {
  if (batch.empty()) throw ConfigError("backward needs a non-empty batch");
  if (!masks.empty() && masks.size() != batch.size())
    throw DimensionMismatch("dropout masks must match the batch size");

  BackwardResult out{zero_params(spec), 0.0};
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const std::size_t n_shared = spec.shared_layers.size();
  const std::size_t n_hidden = spec.num_hidden();

  std::vector<std::vector<double>> pre(n_hidden), act(n_hidden + 1);
  std::vector<double> delta, prev_delta;

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Example& ex = batch[b];
    check_input(spec, ex.x, ex.task);
    const auto layers = path(params, ex.task);
    const DropoutMask* mask = masks.empty() ? nullptr : &masks[b];

    act[0] = ex.x;
    for (std::size_t l = 0; l < n_hidden; ++l) {
      affine(*layers[l], act[l], pre[l]);
      act[l + 1].resize(pre[l].size());
      for (std::size_t u = 0; u < pre[l].size(); ++u) {
        const double m = mask != nullptr ? (*mask)[l][u] : 1.0;
        act[l + 1][u] = std::max(pre[l][u], 0.0) * m;
      }
    }
    const LayerParams& head = params.per_task[ex.task].head;
    double logit = head.biases[0];
    for (std::size_t c = 0; c < head.weights.cols; ++c) logit += head.weights(0, c) * act[n_hidden][c];
    const double p = sigmoid(logit);
    out.mean_loss += bce_loss(p, ex.y) * inv_b;

    const double d_logit = (p - static_cast<double>(ex.y)) * inv_b;
    TaskParams& g_task = out.gradients.per_task[ex.task];
    for (std::size_t c = 0; c < head.weights.cols; ++c) g_task.head.weights(0, c) += d_logit * act[n_hidden][c];
    g_task.head.biases[0] += d_logit;

    delta.assign(head.weights.cols, 0.0);
    for (std::size_t c = 0; c < head.weights.cols; ++c) delta[c] = d_logit * head.weights(0, c);

    for (std::size_t l = n_hidden; l-- > 0;) {
      // delta is d/d(masked activation); move it through mask and ReLU.
      for (std::size_t u = 0; u < delta.size(); ++u) {
        const double m = mask != nullptr ? (*mask)[l][u] : 1.0;
        delta[u] = pre[l][u] > 0.0 ? delta[u] * m : 0.0;
      }
      LayerParams& g = l < n_shared ? out.gradients.shared[l] : g_task.layers[l - n_shared];
      const LayerParams& w = *layers[l];
      const auto& a_in = act[l];
      for (std::size_t r = 0; r < w.weights.rows; ++r) {
        if (delta[r] == 0.0) continue;
        auto grow = g.weights.row(r);
        for (std::size_t c = 0; c < w.weights.cols; ++c) grow[c] += delta[r] * a_in[c];
        g.biases[r] += delta[r];
      }
      if (l == 0) break;
      prev_delta.assign(w.weights.cols, 0.0);
      for (std::size_t r = 0; r < w.weights.rows; ++r) {
        if (delta[r] == 0.0) continue;
        const auto wrow = w.weights.row(r);
        for (std::size_t c = 0; c < w.weights.cols; ++c) prev_delta[c] += delta[r] * wrow[c];
      }
      delta.swap(prev_delta);
    }
  }
  return out;
}

double mean_loss(const NetworkParams& params, const NetworkSpec& spec, std::span<const Example> data) {
  if (data.empty()) return 0.0;
  double s = 0.0;
  for (const auto& ex : data) s += bce_loss(forward(params, spec, ex.x, ex.task), ex.y);
  return s / static_cast<double>(data.size());
}

double predict_accuracy(const NetworkParams& params, const NetworkSpec& spec, std::span<const Example> data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& ex : data)
    if (decide(forward(params, spec, ex.x, ex.task)) == ex.y) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

struct Split {
  std::vector<Example> train;
  std::vector<Example> validation;
};

Split validation_split(const NetworkSpec& spec, const TrainConfig& cfg, std::span<const Example> data) {
  std::map<std::pair<std::size_t, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.size(); ++i) groups[{data[i].task, data[i].y}].push_back(i);

  Split s;
  for (auto& [key, idx] : groups) {
    Rng rng(derive_seed(cfg.seed, {stream::kValidation, key.first, static_cast<std::uint64_t>(key.second)}));
    rng.shuffle(idx);
    std::size_t n_val = 0;
    if (idx.size() >= 2) {
      n_val = static_cast<std::size_t>(std::lround(cfg.validation_fraction * static_cast<double>(idx.size())));
      n_val = std::clamp<std::size_t>(n_val, 1, idx.size() - 1);
    }
    for (std::size_t j = 0; j < idx.size(); ++j) (j < n_val ? s.validation : s.train).push_back(data[idx[j]]);
  }

  std::vector<std::size_t> n_train(spec.num_tasks(), 0), n_val(spec.num_tasks(), 0);
  for (const auto& e : s.train) ++n_train[e.task];
  for (const auto& e : s.validation) ++n_val[e.task];
  for (std::size_t t = 0; t < spec.num_tasks(); ++t) {
    if (n_train[t] == 0 || n_val[t] == 0)
      throw EmptyTask("task '" + spec.task_ids[t] + "' has " + std::to_string(n_train[t]) + " training and " +
                      std::to_string(n_val[t]) + " validation samples; both must be >= 1");
  }
  return s;
}

class AdamState {
 public:
  AdamState(const NetworkSpec& spec) : m_(zero_params(spec)), v_(zero_params(spec)) {}

  void step(NetworkParams& params, NetworkParams& grads, const TrainConfig& cfg) {
    auto p = parameter_arrays(params);
    auto g = parameter_arrays(grads);
    if (cfg.optimizer == Optimizer::Sgd) {
      for (std::size_t a = 0; a < p.size(); ++a)
        for (std::size_t i = 0; i < p[a].size(); ++i) p[a][i] -= cfg.learning_rate * g[a][i];
      return;
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    auto m = parameter_arrays(m_);
    auto v = parameter_arrays(v_);
    for (std::size_t a = 0; a < p.size(); ++a) {
      for (std::size_t i = 0; i < p[a].size(); ++i) {
        const double gi = g[a][i];
        m[a][i] = beta1 * m[a][i] + (1.0 - beta1) * gi;
        v[a][i] = beta2 * v[a][i] + (1.0 - beta2) * gi * gi;
        p[a][i] -= cfg.learning_rate * (m[a][i] / c1) / (std::sqrt(v[a][i] / c2) + eps);
      }
    }
  }

 private:
  NetworkParams m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace

TrainResult train(const NetworkSpec& spec, const TrainConfig& cfg, std::span<const Example> data) {
  spec.validate();
  cfg.validate();
  for (const auto& ex : data) check_input(spec, ex.x, ex.task);

  Split split = validation_split(spec, cfg, data);
  TrainResult result{init_params(spec, cfg.seed), {}};
  NetworkParams& params = result.params;
  TrainReport& report = result.report;
  report.n_train = split.train.size();
  report.n_validation = split.validation.size();

  Rng shuffle_rng(derive_seed(cfg.seed, {stream::kShuffle}));
  Rng dropout_rng(derive_seed(cfg.seed, {stream::kDropout}));
  AdamState opt(spec);

  report.train_loss.push_back(mean_loss(params, spec, split.train));
  report.val_loss.push_back(mean_loss(params, spec, split.validation));
  report.best_val_loss = report.val_loss[0];
  if (!std::isfinite(report.best_val_loss)) throw NonFiniteLoss(0);
  NetworkParams best = params;
  std::size_t since_best = 0;

  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Example> batch;
  std::vector<DropoutMask> masks;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      masks.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(split.train[order[i]]);
        if (cfg.dropout_rate > 0.0) masks.push_back(draw_dropout_mask(spec, cfg.dropout_rate, dropout_rng));
      }
      BackwardResult br = backward(params, spec, batch, masks);
      if (!std::isfinite(br.mean_loss)) throw NonFiniteLoss(epoch);
      epoch_loss += br.mean_loss * static_cast<double>(batch.size());
      opt.step(params, br.gradients, cfg);
      apply_max_norm(params, cfg.max_norm);
    }
    report.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    const double val = mean_loss(params, spec, split.validation);
    if (!std::isfinite(val)) throw NonFiniteLoss(epoch);
    for (auto arr : parameter_arrays(params))
      for (double v : arr)
        if (!std::isfinite(v)) throw NonFiniteLoss(epoch);
    report.val_loss.push_back(val);
    report.stopped_epoch = epoch;
    if (val < report.best_val_loss) {
      report.best_val_loss = val;
      report.best_epoch = epoch;
      best = params;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  params = std::move(best);
  return result;
}

}  // namespace painmtl
