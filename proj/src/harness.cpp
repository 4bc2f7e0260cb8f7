#include "moosurr/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "moosurr/errors.hpp"
#include "moosurr/moo.hpp"
#include "moosurr/rng.hpp"
#include "moosurr/serialize.hpp"

namespace moosurr {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto pos = s.find(sep, start);
    std::string item = trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw FormatError("'" + key + "': expected a number, got '" + v + "'");
  }
}

std::size_t to_count(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d < 0 || d != std::floor(d)) throw FormatError("'" + key + "': expected a non-negative integer");
  return static_cast<std::size_t>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw FormatError("'" + key + "': expected true/false");
}

std::map<std::string, std::string> parse_params(const std::string& text) {
  std::map<std::string, std::string> out;
  for (const auto& item : split_list(text)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw FormatError("dataset parameter '" + item + "' is not key=value");
    out[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
  }
  return out;
}

std::filesystem::path resolve_path(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

// ---- spec ------------------------------------------------------------------

void apply_config_field(TrainConfig& config, const std::string& field, const std::string& value) {
  if (field == "epochs") config.max_epochs = to_count(field, value);
  else if (field == "batch_size") config.batch_size = to_count(field, value);
  else if (field == "full_batch") config.full_batch = to_bool(field, value);
  else if (field == "lr_theta") config.lr_theta = to_double(field, value);
  else if (field == "lr_phi") config.lr_phi = to_double(field, value);
  else if (field == "stationarity_tol") config.stationarity_tol = to_double(field, value);
  else if (field == "surrogate_steps") config.surrogate_steps = to_count(field, value);
  else if (field == "warm_start") config.surrogate_warm_start = to_bool(field, value);
  else if (field == "distill_weight") config.distill_weight = to_double(field, value);
  else if (field == "teacher_epochs") config.teacher_epochs = to_count(field, value);
  else if (field == "hidden") {
    config.hidden.clear();
    for (const auto& w : split_list(value)) config.hidden.push_back(to_count(field, w));
  } else {
    throw FormatError("unknown training field '" + field + "'");
  }
}

TrainConfig config_for_tag(const std::string& tag, TrainConfig base) {
  const auto colon = tag.find(':');
  base.method = method_from_string(colon == std::string::npos ? tag : tag.substr(0, colon));
  if (base.method == Method::GS) {
    if (colon == std::string::npos) throw FormatError("GS needs an alpha, e.g. GS:0.3");
    base.gs_alpha = to_double(tag, tag.substr(colon + 1));
  } else if (colon != std::string::npos) {
    throw FormatError("method tag '" + tag + "' takes no parameter");
  }
  return base;
}

void ExperimentSpec::validate() const {
  if (dataset.empty()) throw FormatError("experiment spec: 'dataset' is required");
  if (methods.empty()) throw FormatError("experiment spec: at least one method required");
  if (seeds.empty()) throw FormatError("experiment spec: at least one seed required");
  for (const auto& m : methods) m.config.validate();
  for (const auto& metric : metrics) {
    if (metric != "task" && metric != "gf" && metric != "gnf") {
      throw FormatError("experiment spec: unknown metric '" + metric + "'");
    }
  }
}

ExperimentSpec parse_experiment_spec(std::istream& in, const std::filesystem::path& base_dir) {
  ExperimentSpec spec;
  spec.base_dir = base_dir;
  TrainConfig shared;
  std::vector<std::string> tags;
  std::vector<std::pair<std::string, std::string>> overrides;  // "TAG.field", value

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw FormatError("spec line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    try {
      if (key == "version") {
        if (value != "1") throw FormatError("unsupported spec version '" + value + "'");
      } else if (key == "name") {
        spec.name = value;
      } else if (key == "dataset") {
        spec.dataset = value;
      } else if (key == "methods") {
        tags = split_list(value);
      } else if (key == "seeds") {
        spec.seeds.clear();
        for (const auto& s : split_list(value)) spec.seeds.push_back(to_count(key, s));
      } else if (key == "metrics") {
        spec.metrics = split_list(value);
      } else if (key == "output") {
        spec.output_dir = resolve_path(value, base_dir);
      } else if (key.rfind("gnf.", 0) == 0) {
        const std::string field = key.substr(4);
        GnfSettings& g = spec.gnf;
        if (field == "points") g.points = to_count(key, value);
        else if (field == "neighbors") g.neighbors = to_count(key, value);
        else if (field == "sigma2") g.sigma2 = to_double(key, value);
        else if (field == "fit_samples") g.fit_samples = to_count(key, value);
        else if (field == "patch_size") g.patch_size = to_count(key, value);
        else if (field == "patches") g.patches = to_count(key, value);
        else if (field == "mode") {
          if (value != "local" && value != "global") throw FormatError("gnf.mode must be local or global");
          g.local = value == "local";
        } else {
          throw FormatError("unknown key '" + key + "'");
        }
      } else if (const auto dot = key.find('.'); dot != std::string::npos) {
        overrides.emplace_back(key, value);
      } else {
        apply_config_field(shared, key, value);
      }
    } catch (const FormatError& e) {
      throw FormatError("spec line " + std::to_string(line_no) + ": " + e.what());
    }
  }

  for (const auto& tag : tags) {
    MethodEntry entry{tag, config_for_tag(tag, shared)};
    for (const auto& [key, value] : overrides) {
      const auto dot = key.rfind('.');
      if (key.substr(0, dot) == tag) apply_config_field(entry.config, key.substr(dot + 1), value);
    }
    spec.methods.push_back(std::move(entry));
  }
  for (const auto& [key, value] : overrides) {
    const std::string tag = key.substr(0, key.rfind('.'));
    bool known = false;
    for (const auto& t : tags) known = known || t == tag;
    if (!known) throw FormatError("override '" + key + "' names a method not in 'methods'");
  }
  spec.gnf.enabled = std::find(spec.metrics.begin(), spec.metrics.end(), "gnf") != spec.metrics.end();
  if (spec.name.empty() && !spec.dataset.empty()) spec.name = dataset_label(spec.dataset);
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open spec file " + path.string());
  return parse_experiment_spec(in, path.parent_path());
}

// ---- datasets --------------------------------------------------------------

std::string dataset_label(const std::string& reference) {
  const auto colon = reference.find(':');
  const std::string scheme = reference.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : reference.substr(colon + 1);
  if (scheme == "synthetic") return "synthetic-" + rest.substr(0, rest.find(':'));
  if (scheme == "csv") return std::filesystem::path(rest).stem().string();
  if (scheme == "idx") {
    const auto digit = rest.find("digit=");
    return digit == std::string::npos ? "idx" : "mnist-" + rest.substr(digit + 6, 1);
  }
  return reference;
}

Dataset resolve_dataset(const std::string& reference, const std::filesystem::path& base_dir) {
  const auto colon = reference.find(':');
  if (colon == std::string::npos) throw FormatError("dataset reference '" + reference + "' has no scheme");
  const std::string scheme = reference.substr(0, colon);
  const std::string rest = reference.substr(colon + 1);

  if (scheme == "synthetic") {
    const auto colon2 = rest.find(':');
    const SyntheticKind kind = synthetic_kind_from_string(rest.substr(0, colon2));
    auto params = parse_params(colon2 == std::string::npos ? "" : rest.substr(colon2 + 1));
    auto get = [&](const char* k, const char* def) {
      auto it = params.find(k);
      return it == params.end() ? std::string(def) : it->second;
    };
    return make_synthetic(kind, to_count("n", get("n", "2000")), to_count("d", get("d", "10")),
                          to_double("noise", get("noise", "0")), to_count("seed", get("seed", "0")))
        .data;
  }
  if (scheme == "csv") {
    const Schema schema = load_schema(resolve_path(rest, base_dir));
    return build_dataset(load_csv(schema.csv_path, schema.columns), schema, 0);
  }
  if (scheme == "idx") {
    const auto parts = split_list(rest);
    if (parts.size() < 3) throw FormatError("idx reference needs images,labels,digit=N");
    const auto params = parse_params(rest.substr(rest.find(parts[2])));
    if (!params.count("digit")) throw FormatError("idx reference needs digit=N");
    ImageSet images = load_idx(resolve_path(parts[0], base_dir), resolve_path(parts[1], base_dir));
    if (auto it = params.find("limit"); it != params.end()) {
      const std::size_t limit = std::min(images.labels.size(), to_count("limit", it->second));
      std::vector<std::size_t> keep(limit);
      for (std::size_t i = 0; i < limit; ++i) keep[i] = i;
      images.pixels = images.pixels.select_rows(keep);
      images.labels.resize(limit);
    }
    return binarize_label(images, static_cast<int>(to_count("digit", params.at("digit"))));
  }
  throw FormatError("unknown dataset scheme '" + scheme + "'");
}

// ---- running ---------------------------------------------------------------

const ResultRow* ResultsTable::find(const std::string& method, const std::string& metric) const {
  for (const auto& row : rows) {
    if (row.method == method && row.metric == metric) return &row;
  }
  return nullptr;
}

Dataset dataset_for_seed(const Dataset& base, std::uint64_t seed) {
  return resplit(base, derive_seed(seed, streams::kSplit));
}

double evaluate_gnf(const TrainResult& result, const Dataset& data, const GnfSettings& settings,
                    std::uint64_t seed) {
  if (!result.black_box) throw std::invalid_argument("evaluate_gnf: method has no black-box model");
  const auto test = data.indices(Split::Test);
  std::vector<std::size_t> rows(test.begin(),
                                test.begin() + static_cast<std::ptrdiff_t>(std::min(settings.points, test.size())));
  const Matrix points = data.features.select_rows(rows);

  NeighborhoodSpec eval;
  if (data.image_dims) {
    eval = NeighborhoodSpec::patches(settings.neighbors, data.image_dims->first,
                                     data.image_dims->second, derive_seed(seed, streams::kNeighborhood),
                                     settings.patch_size, settings.patches);
  } else {
    eval = NeighborhoodSpec::gaussian(settings.neighbors, settings.sigma2,
                                      derive_seed(seed, streams::kNeighborhood));
  }
  if (!settings.local) {
    const LinearSurrogate& global = result.surrogate;
    return gnf(*result.black_box, [&](std::size_t, std::span<const double>) { return global; },
               points, eval);
  }
  NeighborhoodSpec fit = eval;
  fit.count = settings.fit_samples;
  fit.seed = derive_seed(seed, streams::kLocalFit);
  return gnf(*result.black_box, local_surrogate_provider(*result.black_box, fit), points, eval);
}

namespace {

ResultsTable aggregate(const ExperimentSpec& spec, const std::vector<RunOutcome>& runs) {
  ResultsTable table;
  const std::string label = spec.name.empty() ? dataset_label(spec.dataset) : spec.name;
  for (const auto& entry : spec.methods) {
    std::map<std::string, std::vector<double>> values;
    std::vector<std::string> order;
    std::size_t failed = 0;
    for (const auto& run : runs) {
      if (run.method != entry.tag) continue;
      if (!run.result) {
        ++failed;
        continue;
      }
      const TrainReport& r = run.result->report;
      auto add = [&](const std::string& metric, const std::optional<double>& v) {
        if (!v) return;
        if (!values.count(metric)) order.push_back(metric);
        values[metric].push_back(*v);
      };
      for (const auto& metric : spec.metrics) {
        if (metric == "task") add(r.task_metric_name, r.task_metric);
        if (metric == "gf") add("gf", r.gf);
        if (metric == "gnf") add("gnf", r.gnf);
      }
    }
    for (const auto& metric : order) {
      const auto& v = values[metric];
      ResultRow row{label, entry.tag, metric, 0.0, std::nullopt, v.size()};
      for (double x : v) row.mean += x;
      row.mean /= static_cast<double>(v.size());
      if (v.size() >= 2) {
        double ss = 0.0;
        for (double x : v) ss += (x - row.mean) * (x - row.mean);
        row.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
      }
      table.rows.push_back(row);
    }
    if (failed > 0) {
      table.rows.push_back({label, entry.tag, "failed", static_cast<double>(failed), std::nullopt, failed});
    }
  }
  return table;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, const Dataset& data) {
  spec.validate();
  ExperimentResult out;
  for (const auto& entry : spec.methods) {
    for (std::uint64_t seed : spec.seeds) {
      RunOutcome run{entry.tag, seed, std::nullopt, {}};
      try {
        const Dataset ds = dataset_for_seed(data, seed);
        TrainConfig config = entry.config;
        config.seed = seed;
        TrainResult result = train(ds, config);
        evaluate(result, ds);
        if (spec.gnf.enabled && result.black_box) {
          result.report.gnf = evaluate_gnf(result, ds, spec.gnf, seed);
        }
        run.result = std::move(result);
      } catch (const std::exception& e) {
        run.error = e.what();
        ++out.failed;
      }
      out.runs.push_back(std::move(run));
    }
  }
  out.table = aggregate(spec, out.runs);
  return out;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const std::string& format) {
  const Dataset data = resolve_dataset(spec.dataset, spec.base_dir);
  ExperimentResult result = run_experiment(spec, data);
  const auto& dir = spec.output_dir;
  for (const auto& run : result.runs) {
    std::string stem = run.method + "_seed" + std::to_string(run.seed);
    for (char& c : stem) {
      if (c == ':') c = '_';
    }
    const auto run_dir = dir / "runs";
    if (!run.result) {
      write_text_file(run_dir / (stem + ".error.txt"), run.error + "\n");
      continue;
    }
    write_text_file(run_dir / (stem + ".report.json"), report_to_json(run.result->report) + "\n");
    write_text_file(run_dir / (stem + ".surrogate.json"),
                    surrogate_to_json(run.result->surrogate, data.feature_names) + "\n");
    if (run.result->black_box) {
      write_text_file(run_dir / (stem + ".model.json"), mlp_to_json(*run.result->black_box) + "\n");
    }
  }
  emit_report(result.table, format, dir);
  return result;
}

// ---- Pareto scan -----------------------------------------------------------

void flag_dominance(std::vector<ScatterPoint>& points) {
  for (auto& p : points) {
    p.dominated = false;
    const double a[2] = {p.task_loss, p.gf};
    for (const auto& q : points) {
      if (&q == &p || q.seed != p.seed) continue;
      const double b[2] = {q.task_loss, q.gf};
      if (dominates(b, a)) {
        p.dominated = true;
        break;
      }
    }
  }
}

std::vector<ScatterPoint> pareto_scan(const ExperimentSpec& spec, const Dataset& data) {
  if (spec.seeds.empty()) throw FormatError("pareto_scan: at least one seed required");
  TrainConfig base;
  bool found = false;
  for (const auto& m : spec.methods) {
    if (m.config.method == Method::MOO) {
      base = m.config;
      found = true;
    }
  }
  if (!found && !spec.methods.empty()) base = spec.methods.front().config;

  std::vector<ScatterPoint> points;
  for (std::uint64_t seed : spec.seeds) {
    const Dataset ds = dataset_for_seed(data, seed);
    auto record = [&](const std::string& label, TrainConfig config, bool is_moo) {
      config.seed = seed;
      TrainResult r = train(ds, config);
      evaluate(r, ds);
      ScatterPoint p;
      p.seed = seed;
      p.label = label;
      p.alpha = is_moo ? r.report.history.back().alpha : config.gs_alpha;
      p.task_metric = *r.report.task_metric;
      p.task_loss = ds.task == Task::BinaryClassification ? 1.0 - p.task_metric : p.task_metric;
      p.gf = *r.report.gf;
      points.push_back(p);
    };
    for (int step = 1; step <= 9; ++step) {
      TrainConfig c = base;
      c.method = Method::GS;
      c.gs_alpha = step / 10.0;
      record("GS:0." + std::to_string(step), c, false);
    }
    TrainConfig moo = base;
    moo.method = Method::MOO;
    record("MOO", moo, true);
  }
  flag_dominance(points);
  return points;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string scatter_to_csv(const std::vector<ScatterPoint>& points) {
  std::string out = "seed,label,alpha,task_metric,task_loss,gf,dominated\n";
  for (const auto& p : points) {
    out += std::to_string(p.seed) + "," + p.label + "," + format_number(p.alpha) + "," +
           format_number(p.task_metric) + "," + format_number(p.task_loss) + "," +
           format_number(p.gf) + "," + (p.dominated ? "1" : "0") + "\n";
  }
  return out;
}

// ---- reports ---------------------------------------------------------------

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

double round6(double v) { return std::stod(format_number(v)); }

}  // namespace

std::string results_to_csv(const ResultsTable& table) {
  std::string out = "dataset,method,metric,mean,std,n\n";
  for (const auto& r : table.rows) {
    out += csv_field(r.dataset) + "," + csv_field(r.method) + "," + csv_field(r.metric) + "," +
           format_number(r.mean) + "," + (r.stddev ? format_number(*r.stddev) : "") + "," +
           std::to_string(r.n) + "\n";
  }
  return out;
}

ResultsTable results_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "dataset,method,metric,mean,std,n") {
    throw FormatError("results csv: unexpected header");
  }
  ResultsTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != 6) throw FormatError("results csv: expected 6 fields in '" + line + "'");
    ResultRow row{f[0], f[1], f[2], to_double("mean", f[3]), std::nullopt, to_count("n", f[5])};
    if (!f[4].empty()) row.stddev = to_double("std", f[4]);
    table.rows.push_back(row);
  }
  return table;
}

std::string results_to_json(const ResultsTable& table) {
  using ordered = nlohmann::ordered_json;
  ordered rows = ordered::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"dataset", r.dataset},
                    {"method", r.method},
                    {"metric", r.metric},
                    {"mean", round6(r.mean)},
                    {"std", r.stddev ? ordered(round6(*r.stddev)) : ordered(nullptr)},
                    {"n", r.n}});
  }
  ordered j = {{"schema_version", kResultsSchemaVersion}, {"rows", rows}};
  return j.dump(2) + "\n";
}

std::filesystem::path emit_report(const ResultsTable& table, const std::string& format,
                                  const std::filesystem::path& dir) {
  if (format != "csv" && format != "json") throw std::invalid_argument("format must be csv or json");
  const auto path = dir / ("results." + format);
  write_text_file(path, format == "csv" ? results_to_csv(table) : results_to_json(table));
  return path;
}

}  // namespace moosurr
