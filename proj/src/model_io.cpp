#include "painmtl/model_io.hpp"

#include <json.hpp>

#include "painmtl/errors.hpp"

namespace painmtl {

using nlohmann::json;

namespace {

json layer_to_json(const LayerParams& l) {
  return {{"rows", l.weights.rows}, {"cols", l.weights.cols}, {"weights", l.weights.data}, {"biases", l.biases}};
}

LayerParams layer_from_json(const json& j) {
  LayerParams l;
  l.weights.rows = j.at("rows").get<std::size_t>();
  l.weights.cols = j.at("cols").get<std::size_t>();
  l.weights.data = j.at("weights").get<std::vector<double>>();
  l.biases = j.at("biases").get<std::vector<double>>();
  if (l.weights.data.size() != l.weights.rows * l.weights.cols || l.biases.size() != l.weights.rows)
    throw ModelFormatError("layer arrays do not match the declared shape");
  return l;
}

std::string_view optimizer_name(Optimizer o) { return o == Optimizer::Adam ? "adam" : "sgd"; }

Optimizer optimizer_from(const std::string& s) {
  if (s == "adam") return Optimizer::Adam;
  if (s == "sgd") return Optimizer::Sgd;
  throw ModelFormatError("unknown optimizer '" + s + "'");
}

json header(std::string_view kind, const ModelMetadata& metadata) {
  return {{"format", "painmtl-model"}, {"schema_version", kModelSchemaVersion}, {"kind", kind}, {"metadata", metadata}};
}

}  // namespace

std::string to_document(const NeuralModel& m) {
  json doc = header("nn", m.metadata);
  doc["spec"] = {{"input_dim", m.spec.input_dim},
                 {"shared_layers", m.spec.shared_layers},
                 {"task_layers", m.spec.task_layers},
                 {"task_ids", m.spec.task_ids},
                 {"activation", "relu"}};
  const TrainConfig& c = m.config;
  doc["train_config"] = {{"optimizer", optimizer_name(c.optimizer)},
                         {"learning_rate", c.learning_rate},
                         {"batch_size", c.batch_size},
                         {"max_epochs", c.max_epochs},
                         {"dropout_rate", c.dropout_rate},
                         {"max_norm", c.max_norm},
                         {"patience", c.patience},
                         {"validation_fraction", c.validation_fraction},
                         {"seed", c.seed}};
  json shared = json::array();
  for (const auto& l : m.params.shared) shared.push_back(layer_to_json(l));
  json tasks = json::array();
  for (const auto& t : m.params.per_task) {
    json layers = json::array();
    for (const auto& l : t.layers) layers.push_back(layer_to_json(l));
    tasks.push_back({{"layers", layers}, {"head", layer_to_json(t.head)}});
  }
  doc["params"] = {{"shared", shared}, {"per_task", tasks}};
  return doc.dump(1) + "\n";
}

std::string to_document(const LinearModelDocument& m) {
  json doc = header(to_string(m.model.kind), m.metadata);
  doc["weights"] = m.model.weights;
  doc["bias"] = m.model.bias;
  doc["regularization"] = m.regularization;
  return doc.dump(1) + "\n";
}

ModelDocument read_model_document(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != "painmtl-model") throw ModelFormatError("not a painmtl model");
    const int version = doc.at("schema_version").get<int>();
    if (version != kModelSchemaVersion) throw ModelFormatError("unsupported schema version " + std::to_string(version));
    const auto kind = doc.at("kind").get<std::string>();
    const auto metadata = doc.value("metadata", ModelMetadata{});

    if (kind == "logistic" || kind == "hinge") {
      LinearModelDocument out;
      out.model.kind = kind == "logistic" ? LinearKind::Logistic : LinearKind::Hinge;
      out.model.weights = doc.at("weights").get<std::vector<double>>();
      out.model.bias = doc.at("bias").get<double>();
      out.regularization = doc.at("regularization").get<double>();
      out.metadata = metadata;
      return out;
    }
    if (kind != "nn") throw ModelFormatError("unknown model kind '" + kind + "'");

    NeuralModel out;
    const json& s = doc.at("spec");
    if (s.value("activation", "relu") != "relu") throw ModelFormatError("only relu activations are supported");
    out.spec.input_dim = s.at("input_dim").get<std::size_t>();
    out.spec.shared_layers = s.at("shared_layers").get<std::vector<std::size_t>>();
    out.spec.task_layers = s.at("task_layers").get<std::vector<std::size_t>>();
    out.spec.task_ids = s.at("task_ids").get<std::vector<std::string>>();

    const json& c = doc.at("train_config");
    out.config.optimizer = optimizer_from(c.at("optimizer").get<std::string>());
    out.config.learning_rate = c.at("learning_rate").get<double>();
    out.config.batch_size = c.at("batch_size").get<std::size_t>();
    out.config.max_epochs = c.at("max_epochs").get<std::size_t>();
    out.config.dropout_rate = c.at("dropout_rate").get<double>();
    out.config.max_norm = c.at("max_norm").get<double>();
    out.config.patience = c.at("patience").get<std::size_t>();
    out.config.validation_fraction = c.at("validation_fraction").get<double>();
    out.config.seed = c.at("seed").get<std::uint64_t>();

    const json& p = doc.at("params");
    for (const auto& l : p.at("shared")) out.params.shared.push_back(layer_from_json(l));
    for (const auto& t : p.at("per_task")) {
      TaskParams tp;
      for (const auto& l : t.at("layers")) tp.layers.push_back(layer_from_json(l));
      tp.head = layer_from_json(t.at("head"));
      out.params.per_task.push_back(std::move(tp));
    }
    out.metadata = metadata;
    try {
      out.spec.validate();
      check_shapes(out.spec, out.params);
    } catch (const ConfigError& e) {
      throw ModelFormatError(e.what());
    }
    return out;
  } catch (const json::exception& e) {
    throw ModelFormatError(std::string("malformed model document: ") + e.what());
  }
}

}  // namespace painmtl
