#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace painmtl {

// Population (pooled-data) linear classifiers.

enum class LinearKind { Logistic, Hinge };

std::string_view to_string(LinearKind kind);

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  LinearKind kind = LinearKind::Logistic;

  double decision_value(std::span<const double> x) const;
  bool operator==(const LinearModel&) const = default;
};

struct LinearConfig {
  std::size_t max_iterations = 20000;  // logistic
  double tolerance = 1e-6;             // logistic gradient-norm stopping rule
  std::size_t svm_iterations = 5000;
  std::uint64_t seed = 0;  // unused by the default zero initialisation
};

// Row-major samples; labels in {0, 1}.
struct LabeledMatrix {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
};

// Objective (mean BCE + l2/2 |w|^2) and its gradient w.r.t. (w..., b).
double logistic_objective(const LabeledMatrix& data, std::span<const double> w, double b, double l2);
std::vector<double> logistic_gradient(const LabeledMatrix& data, std::span<const double> w, double b, double l2);

// Full-batch accelerated gradient descent from zero with step 1/L (L a bound
// on the objective's curvature) and adaptive restart; stops when the gradient
// norm falls to cfg.tolerance. Throws SingleClassData, NonFiniteLoss.
LinearModel train_logistic(const LabeledMatrix& data, double l2, const LinearConfig& cfg = {});

// 1/2 |w|^2 + c * mean hinge loss with labels mapped to -1/+1.
double svm_objective(const LabeledMatrix& data, std::span<const double> w, double b, double c);

// Deterministic full-batch subgradient descent on the objective scaled by
// 1/c (steps 1/t), returning the average of the second-half iterates.
// Throws SingleClassData, NonFiniteLoss, ConfigError for c <= 0.
LinearModel train_linear_svm(const LabeledMatrix& data, double c, const LinearConfig& cfg = {});

// Class 1 iff decision value >= 0 (for logistic: sigmoid >= 0.5).
// Throws DimensionMismatch.
int predict_linear(const LinearModel& model, std::span<const double> x);

double linear_accuracy(const LinearModel& model, const LabeledMatrix& data);

// Picks the regularisation value with the best 3-fold (label-stratified)
// accuracy among `grid`; ties go to the earlier grid entry.
double select_regularization(const LabeledMatrix& data, LinearKind kind, std::span<const double> grid,
                             const LinearConfig& cfg = {});

inline constexpr double kDefaultL2 = 1e-3;
inline constexpr double kDefaultSvmC = 1.0;
inline constexpr double kRegularizationGrid[] = {0.01, 0.1, 1.0, 10.0};

}  // namespace painmtl
