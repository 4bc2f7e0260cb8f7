#include "moosurr/serialize.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "moosurr/errors.hpp"

namespace moosurr {

using nlohmann::json;

namespace {

json parse_or_throw(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string(what) + ": " + e.what());
  }
}

void expect_format(const json& j, const char* format) {
  if (!j.is_object() || j.value("format", "") != format) {
    throw FormatError(std::string("expected a ") + format + " document");
  }
  if (j.value("version", 0) != kCheckpointVersion) {
    throw FormatError(std::string(format) + ": unsupported version");
  }
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

std::string mlp_to_json(const Mlp& model) {
  json layers = json::array();
  for (const auto& layer : model.layers()) {
    layers.push_back({{"inputs", layer.input_dim()},
                      {"outputs", layer.output_dim()},
                      {"activation", to_string(layer.activation)}});
  }
  json j = {{"format", "moosurr.mlp"},
            {"version", kCheckpointVersion},
            {"output_kind", to_string(model.output_kind())},
            {"layers", layers},
            {"parameters", model.flatten()}};
  return j.dump(2);
}

Mlp mlp_from_json(const std::string& text) {
  const json j = parse_or_throw(text, "mlp checkpoint");
  expect_format(j, "moosurr.mlp");
  try {
    std::vector<DenseLayer> layers;
    for (const auto& l : j.at("layers")) {
      const auto in = l.at("inputs").get<std::size_t>();
      const auto out = l.at("outputs").get<std::size_t>();
      layers.push_back({Matrix(out, in), Vector(out, 0.0),
                        activation_from_string(l.at("activation").get<std::string>())});
    }
    Mlp model(std::move(layers), output_kind_from_string(j.at("output_kind").get<std::string>()));
    model.unflatten(j.at("parameters").get<Vector>());
    return model;
  } catch (const json::exception& e) {
    throw FormatError(std::string("mlp checkpoint: ") + e.what());
  }
}

std::string surrogate_to_json(const LinearSurrogate& g, std::span<const std::string> names) {
  require_same_size(names.size(), g.dim(), "surrogate export names");
  json features = json::array();
  for (std::size_t i = 0; i < g.dim(); ++i) {
    features.push_back({{"name", names[i]}, {"coefficient", g.phi[i]}});
  }
  json j = {{"format", "moosurr.surrogate"},
            {"version", kCheckpointVersion},
            {"bias", g.bias},
            {"features", features}};
  return j.dump(2);
}

LinearSurrogate surrogate_from_json(const std::string& text, std::vector<std::string>* names) {
  const json j = parse_or_throw(text, "surrogate");
  expect_format(j, "moosurr.surrogate");
  try {
    LinearSurrogate g;
    g.bias = j.at("bias").get<double>();
    if (names) names->clear();
    for (const auto& f : j.at("features")) {
      g.phi.push_back(f.at("coefficient").get<double>());
      if (names) names->push_back(f.at("name").get<std::string>());
    }
    return g;
  } catch (const json::exception& e) {
    throw FormatError(std::string("surrogate: ") + e.what());
  }
}

std::string importance_to_text(const FeatureImportance& importance, double bias) {
  std::ostringstream os;
  os << std::setprecision(6);
  for (const auto& e : importance) os << e.feature << '\t' << e.coefficient << '\t' << e.rank << '\n';
  os << "(bias)\t" << bias << '\n';
  return os.str();
}

std::string report_to_json(const TrainReport& report) {
  json history = json::array();
  for (const auto& h : report.history) {
    history.push_back({{"loss_pred", h.loss_pred}, {"loss_pf", h.loss_pf}, {"alpha", h.alpha}});
  }
  json j = {{"format", "moosurr.report"},
            {"version", kCheckpointVersion},
            {"method", report.method},
            {"seed", report.seed},
            {"epochs_run", report.epochs_run},
            {"stopped_reason", to_string(report.stopped)},
            {"task_metric_name", report.task_metric_name},
            {"task_metric", optional_number(report.task_metric)},
            {"gf", optional_number(report.gf)},
            {"gnf", optional_number(report.gnf)},
            {"history", history}};
  return j.dump(2);
}

TrainReport report_from_json(const std::string& text) {
  const json j = parse_or_throw(text, "train report");
  expect_format(j, "moosurr.report");
  try {
    TrainReport r;
    r.method = j.at("method").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.epochs_run = j.at("epochs_run").get<std::size_t>();
    r.stopped = j.at("stopped_reason").get<std::string>() == "stationary" ? StopReason::Stationary
                                                                          : StopReason::Budget;
    r.task_metric_name = j.at("task_metric_name").get<std::string>();
    r.task_metric = read_optional(j, "task_metric");
    r.gf = read_optional(j, "gf");
    r.gnf = read_optional(j, "gnf");
    for (const auto& h : j.at("history")) {
      r.history.push_back({h.at("loss_pred").get<double>(), h.at("loss_pf").get<double>(),
                           h.at("alpha").get<double>()});
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("train report: ") + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace moosurr
