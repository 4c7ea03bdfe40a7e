#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "painmtl/random.hpp"

namespace painmtl {

// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Prediction rule shared by every classifier: p >= 0.5 is class 1.
inline int decide(double p) { return p >= 0.5 ? 1 : 0; }

inline constexpr double kProbabilityClip = 1e-7;

// Binary cross-entropy with p clipped to [1e-7, 1 - 1e-7].
double bce_loss(double p, int y);

struct LayerParams {
  Matrix weights;              // out_dim x in_dim
  std::vector<double> biases;  // out_dim

  bool operator==(const LayerParams&) const = default;
};

// Hard parameter sharing: every task runs the input through the shared
// hidden layers, then through its own hidden layers and its own sigmoid head.
// All hidden layers use ReLU. A single task id gives the single-task network.
struct NetworkSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> shared_layers = {32};
  std::vector<std::size_t> task_layers = {8};
  std::vector<std::string> task_ids;

  std::size_t num_tasks() const { return task_ids.size(); }
  std::size_t num_hidden() const { return shared_layers.size() + task_layers.size(); }
  // Throws UnknownTask.
  std::size_t task_index(const std::string& id) const;
  // Throws ConfigError on zero widths, zero input_dim, no tasks or duplicate ids.
  void validate() const;

  bool operator==(const NetworkSpec&) const = default;
};

struct TaskParams {
  std::vector<LayerParams> layers;
  LayerParams head;  // out_dim 1

  bool operator==(const TaskParams&) const = default;
};

// per_task[i] belongs to spec.task_ids[i].
struct NetworkParams {
  std::vector<LayerParams> shared;
  std::vector<TaskParams> per_task;

  bool operator==(const NetworkParams&) const = default;
};

// Every weight and bias array in a fixed order: shared layers, then for each
// task its hidden layers followed by its head; weights before biases.
std::vector<std::span<double>> parameter_arrays(NetworkParams& params);
std::size_t parameter_count(const NetworkSpec& spec);

NetworkParams zero_params(const NetworkSpec& spec);
// Uniform fan-in scaling: U(-sqrt(6/fan_in), +) for hidden layers, U(-sqrt(3/fan_in), +)
// for heads; biases zero.
NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed);
// Throws ConfigError when shapes do not match the spec.
void check_shapes(const NetworkSpec& spec, const NetworkParams& params);

// Rescales each unit's incoming weight row to norm max_norm when it exceeds
// it. Applied to every layer, heads included.
void apply_max_norm(NetworkParams& params, double max_norm);

// Logit and probability in inference mode. Throws DimensionMismatch or
// UnknownTask.
double forward_logit(const NetworkParams& params, const NetworkSpec& spec, std::span<const double> x, std::size_t task);
double forward(const NetworkParams& params, const NetworkSpec& spec, std::span<const double> x, std::size_t task);
double forward(const NetworkParams& params, const NetworkSpec& spec, std::span<const double> x,
               const std::string& task_id);

struct Example {
  std::vector<double> x;
  int y = 0;
  std::size_t task = 0;  // index into NetworkSpec::task_ids
};

// Per-example multiplicative masks, one vector per hidden layer (shared
// layers first). Entries are 0 or 1/(1-rate).
using DropoutMask = std::vector<std::vector<double>>;

DropoutMask no_dropout_mask(const NetworkSpec& spec);
// Each entry kept with probability 1 - rate.
DropoutMask draw_dropout_mask(const NetworkSpec& spec, double rate, Rng& rng);

struct BackwardResult {
  NetworkParams gradients;  // d(mean BCE)/d(param), same shapes as the params
  double mean_loss = 0.0;
};

// Exact gradient of the batch-mean BCE. `masks` is either empty (no dropout)
// or one mask per batch item. The logit gradient is p - y; the clipping in
// bce_loss only guards the reported loss.
BackwardResult backward(const NetworkParams& params, const NetworkSpec& spec, std::span<const Example> batch,
                        std::span<const DropoutMask> masks = {});

enum class Optimizer { Adam, Sgd };

struct TrainConfig {
  Optimizer optimizer = Optimizer::Adam;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 300;
  double dropout_rate = 0.2;
  double max_norm = 3.0;
  std::size_t patience = 10;
  double validation_fraction = 0.15;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct TrainReport {
  // Index 0 holds the loss of the initial parameters; index e the loss after epoch e.
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;
  std::size_t stopped_epoch = 0;
  double best_val_loss = 0.0;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
};

struct TrainResult {
  NetworkParams params;
  TrainReport report;
};

// Splits off a validation set stratified by (task, label), then runs
// mini-batch training with inverted dropout, max-norm projection after every
// update, and early stopping that restores the best-validation parameters.
// Throws EmptyTask naming a task without training or validation samples,
// NonFiniteLoss on divergence.
TrainResult train(const NetworkSpec& spec, const TrainConfig& cfg, std::span<const Example> data);

// Mean BCE in inference mode.
double mean_loss(const NetworkParams& params, const NetworkSpec& spec, std::span<const Example> data);

double predict_accuracy(const NetworkParams& params, const NetworkSpec& spec, std::span<const Example> data);

}  // namespace painmtl
