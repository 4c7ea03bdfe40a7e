#pragma once

#include <map>
#include <string>
#include <string_view>
#include <variant>

#include "painmtl/baselines.hpp"
#include "painmtl/nn.hpp"

namespace painmtl {

// Trained models serialize to one JSON document:
//
//   {"format": "painmtl-model", "schema_version": 1, "kind": "nn" | "logistic" | "hinge",
//    "metadata": {...}, ...kind-specific fields...}
//
// nn documents carry "spec", "train_config" and "params" (weights as
// row-major arrays); linear documents carry "weights", "bias" and
// "regularization". Numbers are written in shortest round-trip form, so a
// loaded model predicts bitwise-identically.

inline constexpr int kModelSchemaVersion = 1;

using ModelMetadata = std::map<std::string, std::string>;

struct NeuralModel {
  NetworkSpec spec;
  TrainConfig config;
  NetworkParams params;
  ModelMetadata metadata;
};

struct LinearModelDocument {
  LinearModel model;
  double regularization = 0.0;  // l2 for logistic, C for hinge
  ModelMetadata metadata;
};

using ModelDocument = std::variant<NeuralModel, LinearModelDocument>;

std::string to_document(const NeuralModel& model);
std::string to_document(const LinearModelDocument& model);

// Throws ModelFormatError on malformed input, unknown kind or schema version,
// or parameter shapes that disagree with the stored spec.
ModelDocument read_model_document(std::string_view text);

}  // namespace painmtl
