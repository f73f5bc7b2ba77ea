#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "lbcnn/coarsening.hpp"
#include "lbcnn/error.hpp"
#include "lbcnn/lb_operator.hpp"
#include "lbcnn/mesh.hpp"
#include "lbcnn/poly_filters.hpp"
#include "lbcnn/spectral_oracle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lbcnn::cli {

namespace {

std::vector<std::string> split_on(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, sep)) parts.push_back(part);
  return parts;
}

int to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw InputError("invalid integer '" + s + "' for " + what);
}

std::vector<double> parse_theta(const std::string& text) {
  std::vector<double> theta;
  for (const auto& part : split_on(text, ',')) {
    try {
      theta.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw InputError("invalid coefficient '" + part + "' in --theta");
    }
  }
  if (theta.empty()) throw InputError("--theta needs at least one coefficient");
  return theta;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

void write_json(const fs::path& path, const json& j) { open_out(path) << j.dump(2) << '\n'; }

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

// Rejects keys outside `allowed`, so typos in configs fail loudly.
void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InputError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw InputError("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(std::string("config: key '") + key + "' has the wrong type");
  }
}

std::string pool_mode_name(PoolMode m) { return m == PoolMode::real_only ? "real_only" : "fakes_as_zero"; }

PoolMode parse_pool_mode(const std::string& s) {
  if (s == "real_only") return PoolMode::real_only;
  if (s == "fakes_as_zero") return PoolMode::fakes_as_zero;
  throw InputError("config: unknown pool_mode '" + s + "'");
}

LBOperator operator_for(const TriMesh& mesh, OperatorKind kind) {
  require_valid(mesh);
  LBOperator op = assemble_operator(mesh, kind);
  estimate_lambda_max_within_margin(op);
  return op;
}

json metrics_block(const Metrics& m) { return to_json(m); }

}  // namespace

TriMesh resolve_mesh(const std::string& spec) {
  const auto parts = split_on(spec, ':');
  if (!parts.empty() && parts[0] == "icosphere" && (parts.size() == 2 || parts.size() == 3)) {
    const double radius = parts.size() == 3 ? std::stod(parts[2]) : 1.0;
    return generate_icosphere(to_int(parts[1], "icosphere subdivisions"), radius);
  }
  if (!parts.empty() && parts[0] == "torus" && parts.size() == 3) {
    return generate_torus(to_int(parts[1], "torus rings"), to_int(parts[2], "torus segments"));
  }
  if (!parts.empty() && parts[0] == "grid" && parts.size() == 3) {
    return generate_grid(to_int(parts[1], "grid nx"), to_int(parts[2], "grid ny"));
  }
  return load_off_file(spec);
}

// ---------------------------------------------------------------------------
// Config

RunConfig parse_run_config(const json& j) {
  check_keys(j, {"mesh", "operator", "family", "inflation", "coarsening_levels", "order_seed", "network", "train",
                 "data", "split"},
             "config");
  RunConfig c;
  c.mesh = get_or<std::string>(j, "mesh", c.mesh);
  c.kind = parse_operator_kind(get_or<std::string>(j, "operator", "lb"));
  c.family = parse_family(get_or<std::string>(j, "family", "chebyshev"));
  c.inflation = get_or(j, "inflation", c.inflation);
  c.coarsening_levels = get_or(j, "coarsening_levels", 0);
  c.order_seed = get_or(j, "order_seed", 0);

  const json net = j.value("network", json::object());
  check_keys(net, {"layers", "hidden", "conv_bias", "l2_on_conv", "pool_mode"}, "network");
  c.network.hidden = get_or(net, "hidden", 128);
  c.network.conv_bias = get_or(net, "conv_bias", true);
  c.network.l2_on_conv = get_or(net, "l2_on_conv", false);
  c.network.pool_mode = parse_pool_mode(get_or<std::string>(net, "pool_mode", "real_only"));
  if (net.contains("layers")) {
    if (!net["layers"].is_array()) throw InputError("config: network.layers must be an array");
    for (const json& l : net["layers"]) {
      check_keys(l, {"filters", "K", "pool_p"}, "network.layers[]");
      c.network.layers.push_back({get_or(l, "filters", 8), get_or(l, "K", 6), get_or(l, "pool_p", 1)});
    }
  } else {
    c.network.layers = {{8, 6, 2}, {16, 6, 2}};
  }
  for (const auto& l : c.network.layers) {
    if (l.filters_out < 1 || l.K < 1 || l.pool_p < 0) throw InputError("config: invalid layer specification");
  }

  const json tr = j.value("train", json::object());
  check_keys(tr, {"epochs", "batch_size", "lr0", "lr_decay", "decay_every", "momentum", "l2_weight", "seed",
                  "schedule", "positive_class"},
             "train");
  TrainConfig& t = c.train;
  t.epochs = get_or(tr, "epochs", t.epochs);
  t.batch_size = get_or(tr, "batch_size", t.batch_size);
  t.lr0 = get_or(tr, "lr0", t.lr0);
  t.lr_decay = get_or(tr, "lr_decay", t.lr_decay);
  t.decay_every = get_or(tr, "decay_every", t.decay_every);
  t.momentum = get_or(tr, "momentum", t.momentum);
  t.l2_weight = get_or(tr, "l2_weight", t.l2_weight);
  t.seed = get_or<std::uint64_t>(tr, "seed", t.seed);
  t.schedule = parse_lr_schedule(get_or<std::string>(tr, "schedule", "multiplicative"));
  t.positive_class = get_or(tr, "positive_class", t.positive_class);
  if (t.epochs < 1 || t.batch_size < 1 || !(t.lr0 > 0) || t.momentum < 0 || t.l2_weight < 0 || t.decay_every < 0) {
    throw InputError("config: invalid training hyperparameters");
  }

  const json data = j.value("data", json{{"generate", json::object()}});
  check_keys(data, {"generate", "csv"}, "data");
  if (data.contains("csv") == data.contains("generate")) {
    throw InputError("config: data needs exactly one of 'generate' or 'csv'");
  }
  if (data.contains("csv")) {
    c.data.csv_path = data["csv"].get<std::string>();
  } else {
    const json& g = data["generate"];
    check_keys(g, {"n_per_class", "noise_sigma", "bump_width", "bump_height", "jitter_rings", "seed"},
               "data.generate");
    BumpParams b;
    b.n_per_class = get_or(g, "n_per_class", b.n_per_class);
    b.noise_sigma = get_or(g, "noise_sigma", b.noise_sigma);
    b.bump_width = get_or(g, "bump_width", b.bump_width);
    b.bump_height = get_or(g, "bump_height", b.bump_height);
    b.jitter_rings = get_or(g, "jitter_rings", b.jitter_rings);
    c.data.generate = b;
    c.data.generate_seed = get_or<std::uint64_t>(g, "seed", 0);
  }

  const json sp = j.value("split", json::object());
  check_keys(sp, {"train", "val", "test", "seed"}, "split");
  c.split.train = get_or(sp, "train", c.split.train);
  c.split.val = get_or(sp, "val", c.split.val);
  c.split.test = get_or(sp, "test", c.split.test);
  c.split_seed = get_or<std::uint64_t>(sp, "seed", 0);
  return c;
}

json to_json(const RunConfig& c) {
  json layers = json::array();
  for (const auto& l : c.network.layers) layers.push_back({{"filters", l.filters_out}, {"K", l.K}, {"pool_p", l.pool_p}});
  json data;
  if (c.data.generate) {
    const BumpParams& b = *c.data.generate;
    data["generate"] = {{"n_per_class", b.n_per_class}, {"noise_sigma", b.noise_sigma}, {"bump_width", b.bump_width},
                        {"bump_height", b.bump_height}, {"jitter_rings", b.jitter_rings},
                        {"seed", c.data.generate_seed}};
  } else {
    data["csv"] = c.data.csv_path;
  }
  const TrainConfig& t = c.train;
  return json{
      {"mesh", c.mesh},
      {"operator", to_string(c.kind)},
      {"family", to_string(c.family)},
      {"inflation", c.inflation},
      {"coarsening_levels", hierarchy_depth(c)},
      {"order_seed", c.order_seed},
      {"network",
       {{"layers", layers}, {"hidden", c.network.hidden}, {"conv_bias", c.network.conv_bias},
        {"l2_on_conv", c.network.l2_on_conv}, {"pool_mode", pool_mode_name(c.network.pool_mode)}}},
      {"train",
       {{"epochs", t.epochs}, {"batch_size", t.batch_size}, {"lr0", t.lr0}, {"lr_decay", t.lr_decay},
        {"decay_every", t.decay_every}, {"momentum", t.momentum}, {"l2_weight", t.l2_weight}, {"seed", t.seed},
        {"schedule", to_string(t.schedule)}, {"positive_class", t.positive_class}}},
      {"data", data},
      {"split", {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}, {"seed", c.split_seed}}},
  };
}

json to_json(const Metrics& m) {
  return json{{"accuracy", m.accuracy}, {"sensitivity", m.sensitivity}, {"specificity", m.specificity},
              {"gmean", m.gmean},       {"tp", m.tp},                   {"tn", m.tn},
              {"fp", m.fp},             {"fn", m.fn},                   {"total", m.total}};
}

int hierarchy_depth(const RunConfig& config) {
  if (config.coarsening_levels > 0) return config.coarsening_levels;
  int depth = 0;
  for (const auto& l : config.network.layers) depth += l.pool_p;
  return std::max(depth, 1);
}

namespace {

CoarseningHierarchy hierarchy_for(const TriMesh& mesh, const RunConfig& config) {
  const LBOperator op = operator_for(mesh, config.kind);
  HierarchyOptions options;
  options.order_seed = config.order_seed;
  return build_hierarchy(op, hierarchy_depth(config), options);
}

LabeledSignals load_data(const RunConfig& config, const TriMesh& mesh) {
  if (config.data.generate) return generate_bump_dataset(mesh, *config.data.generate, config.data.generate_seed);
  return load_signals_csv(config.data.csv_path, mesh);
}

}  // namespace

TrainOutcome run_training(const RunConfig& config, Exec exec) {
  const TriMesh mesh = resolve_mesh(config.mesh);
  const LabeledSignals data = load_data(config, mesh);
  Splits splits = split_grouped(data, config.split, config.split_seed);
  NetworkSpec spec = config.network;
  spec.classes = std::max(2, data.num_classes);
  Model model(spec, hierarchy_for(mesh, config), config.family, config.train.seed, config.inflation);
  auto history = train(model, splits.train, splits.val, config.train, exec);
  const int pos = config.train.positive_class;
  Metrics tr = evaluate(model, splits.train, pos);
  Metrics va = evaluate(model, splits.val, pos);
  Metrics te = splits.test.size() > 0 ? evaluate(model, splits.test, pos) : Metrics{};
  return TrainOutcome{std::move(model), std::move(history), std::move(splits), tr, va, te};
}

// ---------------------------------------------------------------------------
// Commands

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string config;
};

fs::path require_out(const Globals& g) {
  if (g.out.empty()) throw InputError("--out is required");
  return g.out;
}

void cmd_operator(const std::string& mesh_spec, const std::string& kind, const Globals& g, std::ostream& log) {
  const TriMesh mesh = resolve_mesh(mesh_spec);
  LBOperator op = operator_for(mesh, parse_operator_kind(kind));
  const fs::path dir = require_out(g);
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "stiffness.txt");
    write_triplets(out, op.stiffness);
  }
  {
    auto out = open_out(dir / "areas.txt");
    write_vector(out, op.areas);
  }
  const json summary{{"n", op.size()}, {"nnz", op.stiffness.nonZeros()}, {"lambda_max", *op.lambda_max},
                     {"kind", to_string(op.kind)}};
  write_json(dir / "summary.json", summary);
  log << summary.dump() << '\n';
}

void cmd_spectrum(const std::string& mesh_spec, const std::string& kind, int count, const Globals& g) {
  const TriMesh mesh = resolve_mesh(mesh_spec);
  require_valid(mesh);
  const LBOperator op = assemble_operator(mesh, parse_operator_kind(kind));
  const EigenSystem eig =
      eig_decompose(op.stiffness_and_mass(), count > 0 ? std::optional<Eigen::Index>(count) : std::nullopt);
  auto out = open_out(require_out(g));
  out << "index,lambda\n";
  for (Eigen::Index j = 0; j < eig.lambdas.size(); ++j) out << j << ',' << eig.lambdas[j] << '\n';
}

void cmd_filter(const std::string& mesh_spec, const std::string& kind, const std::string& family,
                const std::string& theta, const std::string& signal_path, int impulse, const Globals& g) {
  const TriMesh mesh = resolve_mesh(mesh_spec);
  const NormalizedOperator op = normalize(operator_for(mesh, parse_operator_kind(kind)), parse_family(family));
  const FilterCoefficients coeffs{op.family(), parse_theta(theta)};
  Eigen::VectorXd f;
  if (!signal_path.empty()) {
    std::ifstream in(signal_path);
    if (!in) throw InputError("cannot open signal file " + signal_path);
    f = read_vector(in);
    if (f.size() != op.size()) throw InputError("signal file length does not match mesh vertex count");
  } else if (impulse >= 0) {
    if (impulse >= op.size()) throw InputError("impulse vertex out of range");
    f = Eigen::VectorXd::Zero(op.size());
    f[impulse] = 1.0;
  } else {
    throw InputError("filter needs --signal or --impulse");
  }
  const Eigen::VectorXd h = filter_apply(op, f, coeffs);
  auto out = open_out(require_out(g));
  out << "vertex,value\n";
  for (Eigen::Index v = 0; v < h.size(); ++v) out << v << ',' << h[v] << '\n';
}

void cmd_localize(const std::string& mesh_spec, const std::string& kind, const std::string& family, int K,
                  int vertex, const Globals& g) {
  const TriMesh mesh = resolve_mesh(mesh_spec);
  const NormalizedOperator op = normalize(operator_for(mesh, parse_operator_kind(kind)), parse_family(family));
  if (vertex < 0 || vertex >= op.size()) throw InputError("vertex " + std::to_string(vertex) + " out of range");
  if (K < 1) throw InputError("K must be at least 1");
  Eigen::MatrixXd impulse = Eigen::MatrixXd::Zero(op.size(), 1);
  impulse(vertex, 0) = 1.0;
  const auto basis = poly_basis_apply(op, impulse, K);
  const auto ring = ring_distances(mesh, vertex);
  auto out = open_out(require_out(g));
  out << "vertex,ring";
  for (int k = 0; k < K; ++k) out << ",p" << k;
  out << '\n';
  for (Eigen::Index v = 0; v < op.size(); ++v) {
    out << v << ',' << ring[v];
    for (int k = 0; k < K; ++k) out << ',' << basis[k](v, 0);
    out << '\n';
  }
}

json triplets_json(const SparseMatrix& m) {
  json entries = json::array();
  for (Eigen::Index i = 0; i < m.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(m, i); it; ++it) entries.push_back({it.row(), it.col(), it.value()});
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"nnz", m.nonZeros()}, {"triplets", entries}};
}

void cmd_coarsen(const std::string& mesh_spec, const std::string& kind, int levels, int order_seed,
                 const Globals& g) {
  const TriMesh mesh = resolve_mesh(mesh_spec);
  const LBOperator op = operator_for(mesh, parse_operator_kind(kind));
  HierarchyOptions options;
  options.order_seed = order_seed;
  const CoarseningHierarchy h = build_hierarchy(op, levels, options);
  json out_levels = json::array();
  for (int l = 0; l <= h.depth(); ++l) {
    const HierarchyLevel& lv = h.levels[l];
    json level{{"level", l},
               {"real_size", lv.real_size()},
               {"padded_size", lv.padded_size()},
               {"parent", lv.parent},
               {"permutation", lv.permutation},
               {"fake_mask", lv.fake_mask},
               {"lambda_max", lv.op.lambda_max ? json(*lv.op.lambda_max) : json(nullptr)},
               {"areas", std::vector<double>(lv.op.areas.data(), lv.op.areas.data() + lv.op.areas.size())},
               {"stiffness", triplets_json(lv.op.stiffness)}};
    out_levels.push_back(std::move(level));
  }
  write_json(require_out(g), json{{"kind", to_string(op.kind)}, {"depth", h.depth()}, {"levels", out_levels}});
}

void cmd_polyplot(const std::string& family_name, int K, int samples, const Globals& g) {
  if (K < 1 || samples < 2) throw InputError("polyplot needs K >= 1 and samples >= 2");
  const PolyFamily family = parse_family(family_name);
  const Interval dom = family_domain(family);
  auto out = open_out(require_out(g));
  out << "lambda";
  for (int k = 1; k <= K; ++k) out << ",p" << k;
  out << '\n';
  for (int s = 0; s < samples; ++s) {
    const double lambda = dom.lo + (dom.hi - dom.lo) * s / (samples - 1);
    out << lambda;
    for (int k = 1; k <= K; ++k) out << ',' << eval_poly_scalar(family, k, lambda);
    out << '\n';
  }
}

void cmd_gen_data(const std::string& mesh_spec, const BumpParams& params, const Globals& g) {
  const TriMesh mesh = resolve_mesh(mesh_spec);
  require_valid(mesh);
  const LabeledSignals data = generate_bump_dataset(mesh, params, g.seed);
  const fs::path dir = require_out(g);
  fs::create_directories(dir);
  save_signals_csv((dir / "signals.csv").string(), data);
  std::size_t counts[2] = {0, 0};
  for (int l : data.labels) ++counts[l];
  const auto [a, b] = bump_centers(mesh);
  write_json(dir / "manifest.json",
             json{{"seed", g.seed},
                  {"mesh", mesh_spec},
                  {"vertices", mesh.num_vertices()},
                  {"params",
                   {{"n_per_class", params.n_per_class}, {"noise_sigma", params.noise_sigma},
                    {"bump_width", params.bump_width}, {"bump_height", params.bump_height},
                    {"jitter_rings", params.jitter_rings}}},
                  {"centers", {a, b}},
                  {"class_counts", {counts[0], counts[1]}},
                  {"groups", data.group_ids.empty() ? 0 : data.group_ids.back() + 1}});
}

void write_history(const fs::path& path, const std::vector<EpochRecord>& history) {
  auto out = open_out(path);
  out << "epoch,lr,train_loss,val_loss,val_acc\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << r.lr << ',' << r.train_loss << ',' << r.val_loss << ',' << r.val_acc << '\n';
  }
}

json layout_json(const ParamLayout& l) {
  json conv = json::array();
  for (const auto& c : l.conv) {
    conv.push_back({{"level", c.level}, {"K", c.K}, {"in", c.in}, {"out", c.out}, {"theta_offset", c.theta},
                    {"bias_offset", c.bias}});
  }
  return json{{"conv", conv},
              {"features", l.features},
              {"hidden", l.hidden},
              {"classes", l.classes},
              {"w1_offset", l.w1},
              {"b1_offset", l.b1},
              {"w2_offset", l.w2},
              {"b2_offset", l.b2},
              {"total", l.total},
              {"order",
               "per conv layer: theta as K blocks of (in x out) column-major, then bias; W1 (hidden x features) "
               "column-major; b1; W2 (classes x hidden) column-major; b2"}};
}

void cmd_train(const Globals& g, std::ostream& log) {
  if (g.config.empty()) throw InputError("train needs --config");
  json cfg_json = read_json(g.config);
  RunConfig config = parse_run_config(cfg_json);
  if (g.seed_set) config.train.seed = g.seed;
  if (config.data.csv_path.size() && fs::path(config.data.csv_path).is_relative()) {
    config.data.csv_path = (fs::path(g.config).parent_path() / config.data.csv_path).string();
  }
  if (config.mesh.find(':') == std::string::npos && fs::path(config.mesh).is_relative()) {
    config.mesh = (fs::path(g.config).parent_path() / config.mesh).string();
  }

  TrainOutcome result = run_training(config);
  const fs::path dir = require_out(g);
  fs::create_directories(dir);
  write_params((dir / "params.bin").string(), result.model.params());
  write_json(dir / "checkpoint.json",
             json{{"config", to_json(config)},
                  {"seed", config.train.seed},
                  {"epoch", result.history.back().epoch},
                  {"classes", result.model.spec().classes},
                  {"param_count", result.model.params().size()},
                  {"params_file", "params.bin"},
                  {"layout", layout_json(result.model.layout())}});
  write_history(dir / "history.csv", result.history);
  save_signals_csv((dir / "train.csv").string(), result.splits.train);
  save_signals_csv((dir / "val.csv").string(), result.splits.val);
  if (result.splits.test.size() > 0) save_signals_csv((dir / "test.csv").string(), result.splits.test);
  json metrics{{"train", to_json(result.train_metrics)}, {"val", to_json(result.val_metrics)}};
  if (result.splits.test.size() > 0) metrics["test"] = to_json(result.test_metrics);
  write_json(dir / "metrics.json", metrics);
  log << metrics.dump() << '\n';
}

void cmd_eval(const std::string& checkpoint, const std::string& data_path, const Globals& g, std::ostream& log) {
  const json manifest = read_json(checkpoint);
  RunConfig config = parse_run_config(manifest.at("config"));
  const TriMesh mesh = resolve_mesh(config.mesh);
  NetworkSpec spec = config.network;
  spec.classes = manifest.at("classes").get<int>();
  Model model(spec, hierarchy_for(mesh, config), config.family, config.train.seed, config.inflation);
  const fs::path params_path = fs::path(checkpoint).parent_path() / manifest.at("params_file").get<std::string>();
  model.params() = read_params(params_path.string(), model.params().size());
  const LabeledSignals data = load_signals_csv(data_path, mesh);
  const json metrics = to_json(evaluate(model, data, config.train.positive_class));
  if (!g.out.empty()) write_json(g.out, metrics);
  log << metrics.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral CNNs on triangle meshes with polynomial Laplace-Beltrami filters"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->each([&](const std::string&) { g.seed_set = true; });
  app.add_option("--out", g.out, "Output file or directory");
  app.add_option("--config", g.config, "JSON run configuration");
  app.fallthrough();

  std::string mesh = "icosphere:2";
  std::string kind = "lb";
  std::string family = "chebyshev";

  auto* op_cmd = app.add_subcommand("operator", "Assemble an operator and write triplets, areas and a summary");
  op_cmd->add_option("--mesh", mesh, "OFF path or generator spec")->required();
  op_cmd->add_option("--kind", kind, "lb | graph");

  int count = 0;
  auto* spec_cmd = app.add_subcommand("spectrum", "Dense generalized eigenvalues as CSV");
  spec_cmd->add_option("--mesh", mesh)->required();
  spec_cmd->add_option("--kind", kind);
  spec_cmd->add_option("--count", count, "Number of smallest eigenvalues (0: all)");

  std::string theta = "1";
  std::string signal;
  int impulse = -1;
  auto* filter_cmd = app.add_subcommand("filter", "Apply a polynomial spectral filter to a signal");
  filter_cmd->add_option("--mesh", mesh)->required();
  filter_cmd->add_option("--kind", kind);
  filter_cmd->add_option("--family", family);
  filter_cmd->add_option("--theta", theta, "Comma-separated coefficients theta_0..theta_{K-1}");
  filter_cmd->add_option("--signal", signal, "File with one value per vertex");
  filter_cmd->add_option("--impulse", impulse, "Use the unit impulse at this vertex");

  int K = 6;
  int vertex = 0;
  auto* loc_cmd = app.add_subcommand("localize", "Impulse responses P_0..P_{K-1} as per-vertex CSV");
  loc_cmd->add_option("--mesh", mesh)->required();
  loc_cmd->add_option("--kind", kind);
  loc_cmd->add_option("--family", family);
  loc_cmd->add_option("--K", K);
  loc_cmd->add_option("--vertex", vertex);

  int levels = 1;
  int order_seed = 0;
  auto* coarsen_cmd = app.add_subcommand("coarsen", "Build the coarsening hierarchy and export it as JSON");
  coarsen_cmd->add_option("--mesh", mesh)->required();
  coarsen_cmd->add_option("--kind", kind);
  coarsen_cmd->add_option("--levels", levels);
  coarsen_cmd->add_option("--order-seed", order_seed);

  int samples = 512;
  int plot_K = 6;
  auto* plot_cmd = app.add_subcommand("polyplot", "Sample P_1..P_K over the family domain as CSV");
  plot_cmd->add_option("--family", family);
  plot_cmd->add_option("--K", plot_K);
  plot_cmd->add_option("--samples", samples);

  BumpParams bump;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate the synthetic two-bump dataset");
  gen_cmd->add_option("--mesh", mesh)->required();
  gen_cmd->add_option("--n-per-class", bump.n_per_class);
  gen_cmd->add_option("--noise", bump.noise_sigma);
  gen_cmd->add_option("--width", bump.bump_width);
  gen_cmd->add_option("--height", bump.bump_height);
  gen_cmd->add_option("--jitter", bump.jitter_rings);

  auto* train_cmd = app.add_subcommand("train", "Train a model from a JSON config");

  std::string checkpoint;
  std::string data_path;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a signals CSV");
  eval_cmd->add_option("--checkpoint", checkpoint)->required();
  eval_cmd->add_option("--data", data_path)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*op_cmd) cmd_operator(mesh, kind, g, out);
    else if (*spec_cmd) cmd_spectrum(mesh, kind, count, g);
    else if (*filter_cmd) cmd_filter(mesh, kind, family, theta, signal, impulse, g);
    else if (*loc_cmd) cmd_localize(mesh, kind, family, K, vertex, g);
    else if (*coarsen_cmd) cmd_coarsen(mesh, kind, levels, order_seed, g);
    else if (*plot_cmd) cmd_polyplot(family, plot_K, samples, g);
    else if (*gen_cmd) cmd_gen_data(mesh, bump, g);
    else if (*train_cmd) cmd_train(g, out);
    else if (*eval_cmd) cmd_eval(checkpoint, data_path, g, out);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace lbcnn::cli
