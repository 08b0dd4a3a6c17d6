#include "cli.hpp"

#include <openssl/sha.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sosflow/data.hpp"
#include "sosflow/error.hpp"
#include "sosflow/flow.hpp"
#include "sosflow/oracle.hpp"
#include "sosflow/train.hpp"

namespace sosflow::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Thrown for problems found while reading flags or the run config.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidConfig:
    case ErrorKind::kInvalidFractions:
    case ErrorKind::kUnknownDataset:
      return kConfig;
    case ErrorKind::kIo:
    case ErrorKind::kEmptyData:
    case ErrorKind::kParse:
    case ErrorKind::kFormatVersionMismatch:
    case ErrorKind::kChecksumMismatch:
      return kIo;
    case ErrorKind::kDimensionMismatch:
    case ErrorKind::kInvalidData:
      return kMismatch;
    case ErrorKind::kUnsupported:
      return kUnsupported;
    default:
      return kFailure;
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  f << bytes;
  if (!f) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

// ---- run config ----------------------------------------------------------

const std::set<std::string> kTopKeys = {"dataset", "train", "output_dir", "grid"};
const std::set<std::string> kTrainKeys = {
    "batch_size", "learning_rate", "epochs", "blocks", "k", "r",
    "hidden_sizes", "seed", "val_fraction", "optimizer", "clip_gradients",
    "clip_value", "alternate_orderings", "shards"};
const std::set<std::string> kGeneratorKeys = {"generator", "n", "seed"};
const std::set<std::string> kCsvKeys = {"csv", "delimiter"};
const std::set<std::string> kGridKeys = {"lo", "hi", "resolution"};

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
}

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + where + key + "'");
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("'" + where + key + "' has the wrong type");
  }
}

template <typename T>
void read_opt(const json& j, const std::string& key, const std::string& where,
              T& target) {
  if (j.contains(key)) target = get<T>(j, key, where);
}

int get_int(const json& j, const std::string& key, const std::string& where) {
  const json& v = j.at(key);
  if (!v.is_number_integer())
    throw ConfigError("'" + where + key + "' must be an integer");
  return v.get<int>();
}

struct DatasetSpec {
  std::string generator;  // empty when loading a CSV
  int n = 0;
  std::uint64_t seed = 0;
  fs::path csv;
  char delimiter = ',';
};

struct GridSpec {
  std::vector<double> lo, hi;
  int resolution = 0;
};

struct RunConfig {
  DatasetSpec dataset;
  TrainConfig train;
  fs::path output_dir;
  std::optional<GridSpec> grid;
  json echo;  // the validated document, defaults filled in
};

std::vector<double> number_list(const json& j, const std::string& where) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array() || j.empty())
    throw ConfigError("'" + where + "' must be a number or a list of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw ConfigError("'" + where + "' must contain numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

TrainConfig parse_train(const json& t) {
  require_object(t, "train");
  reject_unknown(t, kTrainKeys, "train.");
  TrainConfig c;
  const std::string w = "train.";
  for (const char* key : {"batch_size", "epochs", "blocks", "k", "r", "shards"})
    if (t.contains(key)) {
      const int v = get_int(t, key, w);
      const std::string k = key;
      if (k == "batch_size") c.batch_size = v;
      if (k == "epochs") c.epochs = v;
      if (k == "blocks") c.blocks = v;
      if (k == "k") c.k = v;
      if (k == "r") c.r = v;
      if (k == "shards") c.shards = v;
    }
  read_opt(t, "learning_rate", w, c.learning_rate);
  read_opt(t, "val_fraction", w, c.val_fraction);
  read_opt(t, "clip_gradients", w, c.clip_gradients);
  read_opt(t, "clip_value", w, c.clip_value);
  read_opt(t, "alternate_orderings", w, c.alternate_orderings);
  read_opt(t, "hidden_sizes", w, c.hidden_sizes);
  if (t.contains("seed")) {
    if (!t["seed"].is_number_unsigned())
      throw ConfigError("'train.seed' must be a non-negative integer");
    c.seed = t["seed"].get<std::uint64_t>();
  }
  if (t.contains("optimizer")) {
    const auto name = get<std::string>(t, "optimizer", w);
    if (name == "adam")
      c.optimizer = OptimizerKind::kAdam;
    else if (name == "sgd")
      c.optimizer = OptimizerKind::kSgd;
    else
      throw ConfigError("'train.optimizer' must be \"adam\" or \"sgd\"");
  }
  c.validate();
  return c;
}

json train_to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"blocks", c.blocks},
          {"k", c.k},
          {"r", c.r},
          {"hidden_sizes", c.hidden_sizes},
          {"seed", c.seed},
          {"val_fraction", c.val_fraction},
          {"optimizer", c.optimizer == OptimizerKind::kAdam ? "adam" : "sgd"},
          {"clip_gradients", c.clip_gradients},
          {"clip_value", c.clip_value},
          {"alternate_orderings", c.alternate_orderings},
          {"shards", c.shards}};
}

// Applies "a.b.c=value"; value is read as JSON when it parses, else as a
// plain string.
void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::stringstream parts(path);
  std::string part;
  std::vector<std::string> keys;
  while (std::getline(parts, part, '.')) keys.push_back(part);
  for (size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!node->contains(keys[i])) (*node)[keys[i]] = json::object();
    node = &(*node)[keys[i]];
    if (!node->is_object()) throw ConfigError("cannot set '" + path + "'");
  }
  (*node)[keys.back()] = value;
}

RunConfig parse_run_config(const fs::path& path,
                           const std::vector<std::string>& overrides) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  require_object(doc, "config");
  for (const auto& o : overrides) apply_override(doc, o);
  reject_unknown(doc, kTopKeys, "");
  const fs::path base = path.parent_path();
  auto resolve = [&](const fs::path& p) { return p.is_absolute() ? p : base / p; };

  RunConfig rc;
  if (!doc.contains("dataset")) throw ConfigError("missing 'dataset'");
  const json& ds = doc["dataset"];
  require_object(ds, "dataset");
  json ds_echo;
  if (ds.contains("generator")) {
    reject_unknown(ds, kGeneratorKeys, "dataset.");
    rc.dataset.generator = get<std::string>(ds, "generator", "dataset.");
    dataset_dim(rc.dataset.generator);  // UnknownDataset
    if (!ds.contains("n")) throw ConfigError("missing 'dataset.n'");
    rc.dataset.n = get_int(ds, "n", "dataset.");
    if (rc.dataset.n < 2) throw ConfigError("'dataset.n' must be >= 2");
    if (ds.contains("seed")) {
      if (!ds["seed"].is_number_unsigned())
        throw ConfigError("'dataset.seed' must be a non-negative integer");
      rc.dataset.seed = ds["seed"].get<std::uint64_t>();
    }
    ds_echo = {{"generator", rc.dataset.generator},
               {"n", rc.dataset.n},
               {"seed", rc.dataset.seed}};
  } else if (ds.contains("csv")) {
    reject_unknown(ds, kCsvKeys, "dataset.");
    rc.dataset.csv = resolve(get<std::string>(ds, "csv", "dataset."));
    if (ds.contains("delimiter")) {
      const auto d = get<std::string>(ds, "delimiter", "dataset.");
      if (d.size() != 1) throw ConfigError("'dataset.delimiter' must be one character");
      rc.dataset.delimiter = d[0];
    }
    ds_echo = {{"csv", get<std::string>(ds, "csv", "dataset.")},
               {"delimiter", std::string(1, rc.dataset.delimiter)}};
  } else {
    throw ConfigError("'dataset' needs either 'generator' or 'csv'");
  }

  rc.train = parse_train(doc.value("train", json::object()));

  if (!doc.contains("output_dir")) throw ConfigError("missing 'output_dir'");
  rc.output_dir = resolve(get<std::string>(doc, "output_dir", ""));

  json echo = {{"dataset", ds_echo},
               {"train", train_to_json(rc.train)},
               {"output_dir", doc["output_dir"]}};
  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    require_object(g, "grid");
    reject_unknown(g, kGridKeys, "grid.");
    GridSpec gs;
    if (!g.contains("lo") || !g.contains("hi") || !g.contains("resolution"))
      throw ConfigError("'grid' needs lo, hi and resolution");
    gs.lo = number_list(g["lo"], "grid.lo");
    gs.hi = number_list(g["hi"], "grid.hi");
    gs.resolution = get_int(g, "resolution", "grid.");
    rc.grid = gs;
    echo["grid"] = {{"lo", gs.lo}, {"hi", gs.hi}, {"resolution", gs.resolution}};
  }
  rc.echo = echo;
  return rc;
}

// ---- shared pieces -------------------------------------------------------

// Density grid CSV: "x,logq" for d = 1, else "x1,x2,logq" with x1 varying
// fastest (row-major with one row per x2 value).
std::string density_grid(const FlowModel& model, std::vector<double> lo,
                         std::vector<double> hi, int resolution) {
  const int d = model.dim();
  if (d > 2) throw Error(ErrorKind::kUnsupported, "density grids need d <= 2");
  if (resolution < 1) throw Error(ErrorKind::kInvalidConfig, "resolution must be >= 1");
  if (lo.size() == 1 && d == 2) lo.push_back(lo[0]);
  if (hi.size() == 1 && d == 2) hi.push_back(hi[0]);
  if (lo.size() != static_cast<size_t>(d) || hi.size() != static_cast<size_t>(d))
    throw Error(ErrorKind::kInvalidConfig, "grid bounds need 1 or d values");
  for (int i = 0; i < d; ++i)
    if (!(lo[static_cast<size_t>(i)] < hi[static_cast<size_t>(i)]) && resolution > 1)
      throw Error(ErrorKind::kInvalidConfig, "grid needs lo < hi");
  auto coord = [&](int axis, int i) {
    const auto a = static_cast<size_t>(axis);
    return resolution == 1 ? lo[a]
                           : lo[a] + (hi[a] - lo[a]) * i / (resolution - 1);
  };
  auto logq = [&](const std::vector<double>& x) {
    try {
      return model.log_prob(x);
    } catch (const Error& e) {
      // Overflowing z means the density has underflowed.
      if (e.kind() == ErrorKind::kNonFinite) return -std::numeric_limits<double>::infinity();
      throw;
    }
  };
  std::ostringstream s;
  if (d == 1) {
    s << "x,logq\n";
    for (int i = 0; i < resolution; ++i) {
      const double x = coord(0, i);
      s << format_double(x) << ',' << format_double(logq({x})) << '\n';
    }
  } else {
    s << "x1,x2,logq\n";
    for (int j = 0; j < resolution; ++j)
      for (int i = 0; i < resolution; ++i) {
        const double x1 = coord(0, i), x2 = coord(1, j);
        s << format_double(x1) << ',' << format_double(x2) << ','
          << format_double(logq({x1, x2})) << '\n';
      }
  }
  return s.str();
}

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty() || out_path == "-")
    out << text;
  else
    write_file(out_path, text);
}

GmmSpec oracle_spec(const std::string& name) {
  if (name == "gmm3") return GmmSpec::three_component();
  if (name == "gmm5") return GmmSpec::five_component();
  throw Error(ErrorKind::kInvalidConfig, "unknown oracle '" + name + "' (gmm3, gmm5)");
}

// ---- subcommands ---------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::string output_dir;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig rc = parse_run_config(a.config, a.overrides);
  if (!a.output_dir.empty()) {
    rc.output_dir = a.output_dir;
    rc.echo["output_dir"] = a.output_dir;
  }

  Eigen::MatrixXd rows;
  json data_info;
  if (!rc.dataset.generator.empty()) {
    rows = gen(rc.dataset.generator, rc.dataset.n, rc.dataset.seed).rows;
  } else {
    auto loaded = load_csv(rc.dataset.csv, rc.dataset.delimiter);
    rows = std::move(loaded.dataset.rows);
    data_info["rejected_lines"] = loaded.rejected_lines;
    if (!loaded.rejected_lines.empty())
      err << "skipped " << loaded.rejected_lines.size()
          << " rows with non-finite values\n";
  }
  data_info["rows"] = rows.rows();
  data_info["cols"] = rows.cols();
  if (rc.grid && rows.cols() > 2)
    throw Error(ErrorKind::kUnsupported, "density grids need d <= 2");

  std::ostringstream metrics;
  metrics << "epoch,train_nll,val_nll\n";
  const FitResult result = fit(rows, rc.train, [&](const EpochMetrics& m) {
    metrics << m.epoch << ',' << format_double(m.train_nll) << ','
            << format_double(m.val_nll) << '\n';
    if (!a.quiet)
      err << "epoch " << m.epoch << "  train_nll " << m.train_nll
          << "  val_nll " << m.val_nll << '\n';
  });

  fs::create_directories(rc.output_dir);
  const std::string ckpt = serialize(result.model);
  write_file(rc.output_dir / "model.sosf", ckpt);
  write_file(rc.output_dir / "metrics.csv", metrics.str());
  json outputs = {{"checkpoint", "model.sosf"}, {"metrics", "metrics.csv"}};
  if (rc.grid) {
    write_file(rc.output_dir / "grid.csv",
               density_grid(result.model, rc.grid->lo, rc.grid->hi, rc.grid->resolution));
    outputs["grid"] = "grid.csv";
  }
  const json manifest = {
      {"config", rc.echo},
      {"data", data_info},
      {"outputs", outputs},
      {"checkpoint", {{"git_blob_sha1", git_blob_hash(ckpt)}, {"bytes", ckpt.size()}}},
      {"best_epoch", result.best_epoch},
      {"num_params", result.model.num_params()}};
  write_file(rc.output_dir / "manifest.json", manifest.dump(2) + "\n");
  out << json{{"output_dir", rc.output_dir.string()},
              {"best_epoch", result.best_epoch},
              {"checkpoint_sha1", git_blob_hash(ckpt)}}
             .dump()
      << '\n';
  return kOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, char delimiter,
             std::ostream& out) {
  const FlowModel model = load(checkpoint);
  const auto loaded = load_csv(data, delimiter);
  const Eigen::MatrixXd& rows = loaded.dataset.rows;
  if (rows.cols() != model.dim())
    throw Error(ErrorKind::kDimensionMismatch,
                "data has " + std::to_string(rows.cols()) + " columns, model expects " +
                    std::to_string(model.dim()));
  const Eigen::VectorXd lp = model.log_prob_rows(rows);
  const double n = static_cast<double>(lp.size());
  const double mean = lp.mean();
  const double var = lp.size() > 1 ? (lp.array() - mean).square().sum() / (n - 1) : NAN;
  out << json{{"n", lp.size()},
              {"mean_log_likelihood", mean},
              {"stderr", std::sqrt(var / n)},
              {"rejected_rows", loaded.rejected_lines.size()}}
             .dump()
      << '\n';
  return kOk;
}

int cmd_sample(const std::string& checkpoint, int n, std::uint64_t seed,
               const std::string& out_path, std::ostream& out) {
  if (n < 1) throw Error(ErrorKind::kInvalidConfig, "n must be >= 1");
  const FlowModel model = load(checkpoint);
  std::vector<std::string> header;
  for (int i = 0; i < model.dim(); ++i) header.push_back("x" + std::to_string(i + 1));
  std::ostringstream s;
  write_csv(s, model.sample(n, seed), header);
  emit(s.str(), out_path, out);
  return kOk;
}

int cmd_gen(const std::string& name, int n, std::uint64_t seed,
            const std::string& out_path, std::ostream& out) {
  const Dataset ds = gen(name, n, seed);
  std::vector<std::string> header;
  for (int i = 0; i < ds.rows.cols(); ++i) header.push_back("x" + std::to_string(i + 1));
  std::ostringstream s;
  write_csv(s, ds.rows, header);
  emit(s.str(), out_path, out);
  return kOk;
}

int cmd_grid(const std::string& checkpoint, const std::vector<double>& lo,
             const std::vector<double>& hi, int resolution, const std::string& out_path,
             std::ostream& out) {
  const FlowModel model = load(checkpoint);
  emit(density_grid(model, lo, hi, resolution), out_path, out);
  return kOk;
}

struct CurveArgs {
  std::string checkpoint;
  std::string oracle;
  double lo = -4.0;
  double hi = 4.0;
  int points = 201;
  std::string out;
};

// Transform curve z -> T(z) from the source to the data space.
int cmd_curve(const CurveArgs& a, std::ostream& out, std::ostream& err) {
  if (a.checkpoint.empty() && a.oracle.empty())
    throw Error(ErrorKind::kInvalidConfig, "curve needs --checkpoint and/or --oracle");
  if (!(a.lo < a.hi)) throw Error(ErrorKind::kInvalidConfig, "curve needs lo < hi");
  if (a.points < 2) throw Error(ErrorKind::kInvalidConfig, "curve needs >= 2 points");
  std::vector<double> z(static_cast<size_t>(a.points));
  for (int i = 0; i < a.points; ++i)
    z[static_cast<size_t>(i)] = a.lo + (a.hi - a.lo) * i / (a.points - 1);

  std::vector<double> model_t, oracle_t;
  if (!a.oracle.empty()) {
    const GmmSpec spec = oracle_spec(a.oracle);
    const Cdf1D src = Cdf1D::normal(0.0, 1.0);
    const Cdf1D dst = Cdf1D::gaussian_mixture(spec);
    for (double v : z) oracle_t.push_back(kr_map_1d(src, dst, v));
  }
  if (!a.checkpoint.empty()) {
    const FlowModel model = load(a.checkpoint);
    if (model.dim() != 1)
      throw Error(ErrorKind::kUnsupported, "transform curves need a 1D model");
    if (model.source() != SourceKind::kNormal && !oracle_t.empty())
      throw Error(ErrorKind::kUnsupported, "oracle curves assume a normal source");
    for (double v : z) model_t.push_back(model.inverse(std::vector<double>{v})(0));
  }

  std::ostringstream s;
  if (model_t.empty())
    write_curve_csv(s, z, oracle_t);
  else
    write_curve_csv(s, z, model_t, oracle_t);
  emit(s.str(), a.out, out);

  if (!model_t.empty() && !oracle_t.empty()) {
    double sup = 0.0, at = z[0];
    for (size_t i = 0; i < z.size(); ++i) {
      const double d = std::abs(model_t[i] - oracle_t[i]);
      if (d > sup) sup = d, at = z[i];
    }
    const std::string summary = json{{"sup_diff", sup}, {"at_z", at}}.dump();
    // Keep stdout a clean CSV when the curve itself goes there.
    (a.out.empty() || a.out == "-" ? err : out) << summary << '\n';
  }
  return kOk;
}

std::vector<double> parse_bounds(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(std::string(flag) + " expects numbers, got '" + text + "'");
    }
  }
  if (out.empty()) throw ConfigError(std::string(flag) + " is empty");
  return out;
}

}  // namespace

std::string git_blob_hash(const std::string& bytes) {
  const std::string blob = "blob " + std::to_string(bytes.size()) + '\0' + bytes;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(blob.data()), blob.size(), digest);
  std::ostringstream s;
  for (unsigned char c : digest) s << std::hex << std::setw(2) << std::setfill('0') << int(c);
  return s.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sum-of-squares polynomial flows: training, evaluation and oracles",
               "sosflow"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "fit a flow from a JSON run config");
  c_train->add_option("--config", train.config, "run config (JSON)")->required();
  c_train->add_option("--set", train.overrides, "override a config key, e.g. train.epochs=5");
  c_train->add_option("--out", train.output_dir, "output directory (overrides output_dir)");
  c_train->add_flag("--quiet", train.quiet, "no per-epoch progress on stderr");

  std::string checkpoint, data, out_path, delimiter = ",";
  auto* c_eval = app.add_subcommand("eval", "mean log-likelihood of a CSV under a checkpoint");
  c_eval->add_option("--checkpoint", checkpoint)->required();
  c_eval->add_option("--data", data, "CSV file")->required();
  c_eval->add_option("--delimiter", delimiter);

  int n = 0;
  std::uint64_t seed = 0;
  auto* c_sample = app.add_subcommand("sample", "draw samples from a checkpoint");
  c_sample->add_option("--checkpoint", checkpoint)->required();
  c_sample->add_option("--n", n)->required();
  c_sample->add_option("--seed", seed);
  c_sample->add_option("--out", out_path, "CSV path, stdout by default");

  std::string name;
  auto* c_gen = app.add_subcommand("gen", "export a synthetic dataset as CSV");
  c_gen->add_option("--name", name)->required();
  c_gen->add_option("--n", n)->required();
  c_gen->add_option("--seed", seed);
  c_gen->add_option("--out", out_path, "CSV path, stdout by default");

  std::string lo_text, hi_text;
  int resolution = 0;
  auto* c_grid = app.add_subcommand("grid", "log-density on a regular grid (d <= 2)");
  c_grid->add_option("--checkpoint", checkpoint)->required();
  c_grid->add_option("--lo", lo_text, "lower bound(s), e.g. -4 or -4,-3")->required();
  c_grid->add_option("--hi", hi_text, "upper bound(s)")->required();
  c_grid->add_option("--resolution", resolution, "points per axis")->required();
  c_grid->add_option("--out", out_path, "CSV path, stdout by default");

  CurveArgs curve;
  auto* c_curve = app.add_subcommand("curve", "transform curve of a 1D model and/or oracle");
  c_curve->add_option("--checkpoint", curve.checkpoint);
  c_curve->add_option("--oracle", curve.oracle, "gmm3 or gmm5");
  c_curve->add_option("--lo", curve.lo);
  c_curve->add_option("--hi", curve.hi);
  c_curve->add_option("--points", curve.points);
  c_curve->add_option("--out", curve.out, "CSV path, stdout by default");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*c_train) return cmd_train(train, out, err);
    if (*c_eval) {
      if (delimiter.size() != 1) throw ConfigError("--delimiter must be one character");
      return cmd_eval(checkpoint, data, delimiter[0], out);
    }
    if (*c_sample) return cmd_sample(checkpoint, n, seed, out_path, out);
    if (*c_gen) return cmd_gen(name, n, seed, out_path, out);
    if (*c_grid)
      return cmd_grid(checkpoint, parse_bounds(lo_text, "--lo"), parse_bounds(hi_text, "--hi"),
                      resolution, out_path, out);
    if (*c_curve) return cmd_curve(curve, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  }
  return kFailure;
}

}  // namespace sosflow::cli
