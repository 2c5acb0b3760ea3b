// Command-line front end: generate linear-Gaussian trajectory datasets on
// segmented temporal graphs, recover segment-task structure from them, run
// the sparse unmixing experiments, and reproduce the accuracy/MCC sweeps.
// Exit codes: 0 success, 2 usage or config error, 1 runtime failure.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "segtask/ci.hpp"
#include "segtask/discovery.hpp"
#include "segtask/graph.hpp"
#include "segtask/ident.hpp"
#include "segtask/io.hpp"
#include "segtask/metrics.hpp"
#include "segtask/random.hpp"
#include "segtask/scm.hpp"

using namespace segtask;

namespace {

void require_file(const std::string& path, const char* what) {
  if (path.empty()) return;
  if (!std::filesystem::exists(path))
    throw std::invalid_argument(std::string(what) + " does not exist: " + path);
}

int parse_int(const std::string& text, const char* what) {
  std::size_t used = 0;
  int value = 0;
  try {
    value = std::stoi(text, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used != text.size())
    throw std::invalid_argument(std::string("malformed ") + what + ": " + text);
  return value;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string trimmed(const std::string& text) {
  const auto first = text.find_first_not_of(" \t");
  if (first == std::string::npos) return "";
  const auto last = text.find_last_not_of(" \t");
  return text.substr(first, last - first + 1);
}

// "1,2;3" -> {{1,2},{3}}
std::vector<std::vector<int>> parse_supports(const std::string& text) {
  if (trimmed(text).empty()) throw std::invalid_argument("supports are empty");
  std::vector<std::vector<int>> supports;
  for (const auto& group : split(text, ';')) {
    std::vector<int> indices;
    for (const auto& field : split(group, ','))
      indices.push_back(parse_int(trimmed(field), "support index"));
    supports.push_back(std::move(indices));
  }
  return supports;
}

// "8:2,10:2" -> {{8,2},{10,2}}
std::vector<SweepCell> parse_cells(const std::string& text) {
  std::vector<SweepCell> cells;
  for (const auto& item : split(text, ',')) {
    const auto parts = split(item, ':');
    if (parts.size() != 2)
      throw std::invalid_argument("malformed sweep cell (want T:M): " + item);
    cells.push_back({parse_int(trimmed(parts[0]), "sweep T"),
                     parse_int(trimmed(parts[1]), "sweep M")});
  }
  return cells;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split(text, ',')) {
    const std::string field = trimmed(item);
    std::size_t used = 0;
    unsigned long long value = 0;
    try {
      value = std::stoull(field, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (used != field.size())
      throw std::invalid_argument("malformed seed: " + field);
    seeds.push_back(value);
  }
  return seeds;
}

NodeId parse_node_or_fail(const std::string& text) {
  const auto node = parse_node(trimmed(text));
  if (!node) throw std::invalid_argument("not a node name: " + text);
  return *node;
}

Backend backend_from_tag(const std::string& tag) {
  const auto backend = parse_backend(tag);
  if (!backend) throw std::invalid_argument("unknown backend: " + tag);
  return *backend;
}

// Options shared by the commands that answer independence queries.
struct BackendOpts {
  std::string backend = "fisher";
  std::string graph_path;
  std::string meta_path;
  std::string data_path;
  double alpha = 0.05;
  double atol = 1e-8;
};

void add_backend_opts(CLI::App* cmd, BackendOpts& opts) {
  cmd->add_option("--backend", opts.backend, "oracle, analytic or fisher")
      ->capture_default_str()
      ->check(CLI::IsMember({"oracle", "analytic", "fisher"}));
  cmd->add_option("--graph", opts.graph_path, "graph spec (json); enough for oracle runs");
  cmd->add_option("--meta", opts.meta_path, "dataset metadata (json)");
  cmd->add_option("--data", opts.data_path, "trajectory table (csv); fisher only");
  cmd->add_option("--alpha", opts.alpha, "test level for fisher")->capture_default_str();
  cmd->add_option("--atol", opts.atol, "zero tolerance for analytic")->capture_default_str();
}

struct LoadedBackend {
  TemporalGraph graph;
  CiContext ctx;
};

LoadedBackend load_backend(const BackendOpts& opts) {
  const Backend backend = backend_from_tag(opts.backend);
  require_file(opts.graph_path, "graph spec");
  require_file(opts.meta_path, "metadata file");
  require_file(opts.data_path, "dataset file");

  std::optional<DatasetMeta> meta;
  if (!opts.meta_path.empty()) meta = meta_from_json(read_text_file(opts.meta_path));

  TemporalGraph graph;
  if (!opts.graph_path.empty())
    graph = graph_from_spec(graph_spec_from_json(read_text_file(opts.graph_path)));
  else if (meta)
    graph = graph_from_spec(meta->graph);
  else
    throw std::invalid_argument("need --graph or --meta to know the graph");

  CiContext ctx = [&]() -> CiContext {
    if (backend == Backend::GraphOracle) return CiContext::reachability(graph);
    if (!meta)
      throw std::invalid_argument("--meta is required for the " + opts.backend +
                                  " backend");

    ScmOptions scm;
    scm.d_s = meta->d_s;
    scm.d_a = meta->d_a;
    scm.d_g = meta->d_g;
    scm.noise = meta->noise;
    scm.coeff_min = meta->coeff_min;
    scm.coeff_max = meta->coeff_max;
    const ScmParams params = parameterize(graph, scm, meta->scm_seed);
    const VariableLayout layout = layout_for(graph, params);

    if (backend == Backend::AnalyticCorr)
      return CiContext::analytic(joint_covariance(graph, params), layout, opts.atol);

    if (opts.data_path.empty())
      throw std::invalid_argument("--data is required for the fisher backend");
    const Dataset dataset = dataset_from_csv(read_text_file(opts.data_path));
    const auto expected = layout.labels();
    std::string missing;
    for (const auto& label : expected) {
      if (std::find(dataset.labels.begin(), dataset.labels.end(), label) ==
          dataset.labels.end())
        missing += (missing.empty() ? "" : ", ") + label;
    }
    if (!missing.empty())
      throw std::invalid_argument("dataset is missing columns: " + missing);
    if (dataset.labels != expected)
      throw std::invalid_argument("dataset columns are not in layout order");
    return CiContext::fisher(dataset.data, layout, opts.alpha);
  }();
  return {std::move(graph), std::move(ctx)};
}

void print_incidence(const TaskIncidence& incidence) {
  for (int i = 1; i <= incidence.tasks(); ++i) {
    std::string segments;
    for (int k = 1; k <= incidence.segments(); ++k)
      if (incidence.at(k, i)) segments += (segments.empty() ? "" : " ") + std::to_string(k);
    std::printf("task %d: segments %s\n", i, segments.empty() ? "none" : segments.c_str());
  }
}

// ---------------------------------------------------------------- gen ----

struct GenOpts {
  std::string graph_path;
  int T = 0;
  int L = 2;
  int M = 0;
  double disconnect = 0.2;
  double density = 0.5;
  std::uint64_t seed = 0;
  int d_s = 1, d_a = 1, d_g = 1;
  double noise_action = 1.0, noise_state = 1.0, noise_task = 1.0;
  double coeff_min = 0.5, coeff_max = 1.5;
  int n = 10000;
  std::string data_path;
  std::string meta_path;
  std::string graph_out;
};

int run_gen(const GenOpts& opts) {
  require_file(opts.graph_path, "graph spec");

  TemporalGraph graph;
  std::uint64_t graph_seed = derive_seed(opts.seed, 1);
  if (!opts.graph_path.empty()) {
    graph = graph_from_spec(graph_spec_from_json(read_text_file(opts.graph_path)));
    graph_seed = 0;
  } else {
    if (opts.T == 0 || opts.M == 0)
      throw std::invalid_argument("need --graph, or -T and -M for a random graph");
    RandomGraphSpec spec;
    spec.T = opts.T;
    spec.L = opts.L;
    spec.M = opts.M;
    spec.disconnect_prob = opts.disconnect;
    spec.incidence_density = opts.density;
    spec.seed = graph_seed;
    graph = random_graph(spec);
  }

  DatasetMeta meta;
  meta.graph = describe_graph(graph, graph_seed);
  meta.d_s = opts.d_s;
  meta.d_a = opts.d_a;
  meta.d_g = opts.d_g;
  meta.noise = {opts.noise_action, opts.noise_state, opts.noise_task};
  meta.coeff_min = opts.coeff_min;
  meta.coeff_max = opts.coeff_max;
  meta.scm_seed = derive_seed(opts.seed, 2);
  meta.sample_seed = derive_seed(opts.seed, 3);
  meta.n = opts.n;

  ScmOptions scm;
  scm.d_s = meta.d_s;
  scm.d_a = meta.d_a;
  scm.d_g = meta.d_g;
  scm.noise = meta.noise;
  scm.coeff_min = meta.coeff_min;
  scm.coeff_max = meta.coeff_max;
  const ScmParams params = parameterize(graph, scm, meta.scm_seed);
  const Eigen::MatrixXd data = sample(graph, params, meta.n, meta.sample_seed);
  const VariableLayout layout = layout_for(graph, params);

  write_text_file(opts.data_path, dataset_csv(data, layout));
  write_text_file(opts.meta_path, meta_to_json(meta));
  if (!opts.graph_out.empty())
    write_text_file(opts.graph_out, graph_spec_to_json(meta.graph));

  std::printf("wrote %s (%d rows, %d columns) and %s\n", opts.data_path.c_str(), meta.n,
              layout.total_dim(), opts.meta_path.c_str());
  return 0;
}

// ----------------------------------------------------------- discover ----

struct DiscoverOpts {
  BackendOpts backend;
  std::string out_path;
};

int run_discover(const DiscoverOpts& opts) {
  const LoadedBackend loaded = load_backend(opts.backend);
  const DiscoveryResult result = discover_structure(loaded.ctx, loaded.graph.L());
  write_text_file(opts.out_path, discovery_to_json(result));

  print_incidence(result.incidence);
  std::printf("accuracy %.17g\n", incidence_accuracy(result.incidence,
                                                     loaded.graph.incidence()));
  std::printf("mcc %.17g\n", incidence_mcc(result.incidence, loaded.graph.incidence()));
  return 0;
}

// -------------------------------------------------------------- ident ----

struct IdentOpts {
  std::string spec_path;
  int d_s = 0;
  std::string supports;
  std::uint64_t seed = 0;
  std::string sigma = "tanh";
  bool span_only = false;
  int span_samples = 256;
  int points = 512;
  double lambda = 1.0;
  double mu = 0.1;
  int iters = 5000;
  std::uint64_t opt_seed = 0;
  int r2_samples = 10000;
  std::string out_path;
};

int run_ident(const IdentOpts& opts) {
  require_file(opts.spec_path, "unmixing spec");

  IdentSpecFile spec;
  if (!opts.spec_path.empty()) {
    spec = ident_spec_from_json(read_text_file(opts.spec_path));
  } else {
    if (opts.d_s == 0 || opts.supports.empty())
      throw std::invalid_argument("need --spec, or --d-s and --supports");
    spec.d_s = opts.d_s;
    spec.supports = parse_supports(opts.supports);
    spec.seed = opts.seed;
    if (opts.sigma == "tanh")
      spec.sigma = Nonlinearity::Tanh;
    else
      spec.sigma = Nonlinearity::Identity;
  }

  IdentInstance inst = make_instance(spec.d_s, spec.supports, spec.seed);
  inst.sigma = spec.sigma;

  if (opts.span_only) {
    const auto span =
        check_span_condition(inst, opts.span_samples, derive_seed(spec.seed, 1));
    for (std::size_t r = 0; r < span.row_holds.size(); ++r)
      std::printf("row %zu: %s\n", r + 1, span.row_holds[r] ? "spanned" : "missing");
    return 0;
  }
  if (opts.out_path.empty()) throw std::invalid_argument("--out is required");

  IdentResultFile result;
  result.unmix =
      sparse_unmix(inst, opts.points, opts.lambda, opts.mu, opts.iters, opts.opt_seed);

  const auto s = sample_latents(inst, opts.r2_samples, derive_seed(spec.seed, 3));
  const Eigen::MatrixXd s_hat = s * result.unmix.composite.transpose();
  for (const auto& support : inst.supports)
    result.r2.push_back(group_r2(s, s_hat, support, result.unmix.pi));

  write_text_file(opts.out_path, ident_result_to_json(result));

  for (std::size_t t = 0; t < result.unmix.block_verdict.size(); ++t)
    std::printf("task %zu: %s (r2 relevant %.4f, irrelevant %.4f)\n", t + 1,
                result.unmix.block_verdict[t] ? "disentangled" : "entangled",
                result.r2[t].first, result.r2[t].second);
  std::printf("off_block_max %.17g\n", result.unmix.off_block_max);
  return 0;
}

// -------------------------------------------------------------- sweep ----

struct SweepOpts {
  std::string grid;
  std::string cells;
  int runs = 10;
  std::uint64_t first_seed = 0;
  std::string seeds;
  int L = 2;
  int n = 10000;
  double alpha = 0.05;
  double disconnect = 0.2;
  double density = 0.5;
  std::string backend = "fisher";
  int threads = 0;
  std::string out_path;
};

int run_sweep_cmd(const SweepOpts& opts) {
  SweepConfig config;
  if (opts.grid == "t")
    config.grid = t_sweep_grid();
  else if (opts.grid == "m")
    config.grid = m_sweep_grid();
  else if (!opts.grid.empty())
    throw std::invalid_argument("unknown grid (want t or m): " + opts.grid);
  if (!opts.cells.empty()) {
    const auto extra = parse_cells(opts.cells);
    config.grid.insert(config.grid.end(), extra.begin(), extra.end());
  }
  if (config.grid.empty())
    throw std::invalid_argument("need --grid or --cells to define the sweep");

  if (!opts.seeds.empty()) {
    config.seeds = parse_seed_list(opts.seeds);
  } else {
    for (int r = 0; r < opts.runs; ++r) config.seeds.push_back(opts.first_seed + r);
  }
  config.L = opts.L;
  config.n = opts.n;
  config.alpha = opts.alpha;
  config.disconnect_prob = opts.disconnect;
  config.incidence_density = opts.density;
  config.backend = backend_from_tag(opts.backend);
  config.threads = opts.threads;

  const auto records = run_sweep(config);
  write_text_file(opts.out_path, sweep_csv(records));
  std::printf("wrote %zu records to %s\n", records.size(), opts.out_path.c_str());
  return 0;
}

// --------------------------------------------------------------- eval ----

struct EvalOpts {
  std::string result_path;
  std::string graph_path;
  std::string meta_path;
};

int run_eval(const EvalOpts& opts) {
  require_file(opts.result_path, "discovery result");
  require_file(opts.graph_path, "graph spec");
  require_file(opts.meta_path, "metadata file");

  const DiscoveryResult result = discovery_from_json(read_text_file(opts.result_path));
  TemporalGraph graph;
  if (!opts.graph_path.empty())
    graph = graph_from_spec(graph_spec_from_json(read_text_file(opts.graph_path)));
  else if (!opts.meta_path.empty())
    graph = graph_from_spec(meta_from_json(read_text_file(opts.meta_path)).graph);
  else
    throw std::invalid_argument("need --graph or --meta for the ground truth");

  std::printf("accuracy %.17g\n", incidence_accuracy(result.incidence, graph.incidence()));
  std::printf("mcc %.17g\n", incidence_mcc(result.incidence, graph.incidence()));
  return 0;
}

// ----------------------------------------------------------------- ci ----

struct CiOpts {
  BackendOpts backend;
  std::string x;
  std::string y;
  std::string cond;
};

int run_ci(const CiOpts& opts) {
  const LoadedBackend loaded = load_backend(opts.backend);
  const NodeId x = parse_node_or_fail(opts.x);
  const NodeId y = parse_node_or_fail(opts.y);
  ConditioningSet z;
  if (!trimmed(opts.cond).empty())
    for (const auto& item : split(opts.cond, ','))
      if (!z.insert(parse_node_or_fail(item)))
        throw std::invalid_argument("duplicate conditioning node: " + item);

  const CiResult verdict = loaded.ctx.query(x, y, z);
  std::string line = to_string(x) + " vs " + to_string(y) + " | " + z.to_string() + ": " +
                     (verdict.dependent ? "dependent" : "independent");
  char detail[128];
  if (verdict.p_value)
    std::snprintf(detail, sizeof detail, " (statistic %.6g, p %.6g)", verdict.statistic,
                  *verdict.p_value);
  else
    std::snprintf(detail, sizeof detail, " (statistic %.6g)", verdict.statistic);
  std::printf("%s%s\n", line.c_str(), detail);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segmented-task structure discovery and sparse unmixing toolkit"};
  app.set_config("--config", "", "INI file whose keys mirror the flags");
  app.require_subcommand(1);

  GenOpts gen_opts;
  auto* gen = app.add_subcommand("gen", "generate a dataset from a temporal task graph");
  gen->add_option("--graph", gen_opts.graph_path, "existing graph spec (json)");
  gen->add_option("-T,--T", gen_opts.T, "number of time steps");
  gen->add_option("-L,--L", gen_opts.L, "segment length")->capture_default_str();
  gen->add_option("-M,--M", gen_opts.M, "number of tasks");
  gen->add_option("--disconnect", gen_opts.disconnect, "boundary removal probability")
      ->capture_default_str();
  gen->add_option("--density", gen_opts.density, "incidence density")->capture_default_str();
  gen->add_option("--seed", gen_opts.seed, "master seed")->required();
  gen->add_option("--d-s", gen_opts.d_s, "state coordinates")->capture_default_str();
  gen->add_option("--d-a", gen_opts.d_a, "action coordinates")->capture_default_str();
  gen->add_option("--d-g", gen_opts.d_g, "task coordinates")->capture_default_str();
  gen->add_option("--noise-action", gen_opts.noise_action, "")->capture_default_str();
  gen->add_option("--noise-state", gen_opts.noise_state, "")->capture_default_str();
  gen->add_option("--noise-task", gen_opts.noise_task, "")->capture_default_str();
  gen->add_option("--coeff-min", gen_opts.coeff_min, "")->capture_default_str();
  gen->add_option("--coeff-max", gen_opts.coeff_max, "")->capture_default_str();
  gen->add_option("-n,--n", gen_opts.n, "trajectories to sample")->capture_default_str();
  gen->add_option("--data", gen_opts.data_path, "output dataset (csv)")->required();
  gen->add_option("--meta", gen_opts.meta_path, "output metadata (json)")->required();
  gen->add_option("--graph-out", gen_opts.graph_out, "also write the realized graph spec");

  DiscoverOpts discover_opts;
  auto* discover =
      app.add_subcommand("discover", "recover segment-task structure from band queries");
  add_backend_opts(discover, discover_opts.backend);
  discover->add_option("--out", discover_opts.out_path, "output result (json)")->required();

  IdentOpts ident_opts;
  auto* ident = app.add_subcommand("ident", "sparse unmixing on a synthetic instance");
  ident->add_option("--spec", ident_opts.spec_path, "instance spec (json)");
  ident->add_option("--d-s", ident_opts.d_s, "latent dimension");
  ident->add_option("--supports", ident_opts.supports,
                    "task supports, e.g. \"1,2;3\" for {1,2} and {3}");
  ident->add_option("--seed", ident_opts.seed, "instance seed")->capture_default_str();
  ident->add_option("--sigma", ident_opts.sigma, "tanh or identity")
      ->capture_default_str()
      ->check(CLI::IsMember({"tanh", "identity"}));
  ident->add_flag("--span-check-only", ident_opts.span_only,
                  "only report which Jacobian rows are spanned");
  ident->add_option("--span-samples", ident_opts.span_samples, "")->capture_default_str();
  ident->add_option("--points", ident_opts.points, "objective sample points")
      ->capture_default_str();
  ident->add_option("--lambda", ident_opts.lambda, "sparsity weight")->capture_default_str();
  ident->add_option("--mu", ident_opts.mu, "volume weight")->capture_default_str();
  ident->add_option("--iters", ident_opts.iters, "descent iterations")->capture_default_str();
  ident->add_option("--opt-seed", ident_opts.opt_seed, "restart jitter seed")
      ->capture_default_str();
  ident->add_option("--r2-samples", ident_opts.r2_samples, "")->capture_default_str();
  ident->add_option("--out", ident_opts.out_path, "output result (json)");

  SweepOpts sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "accuracy/MCC sweep over a (T, M) grid");
  sweep->add_option("--grid", sweep_opts.grid, "t (step sweep) or m (task sweep)");
  sweep->add_option("--cells", sweep_opts.cells, "extra cells as T:M,T:M,...");
  sweep->add_option("--runs", sweep_opts.runs, "seeds per cell")->capture_default_str();
  sweep->add_option("--first-seed", sweep_opts.first_seed, "")->capture_default_str();
  sweep->add_option("--seeds", sweep_opts.seeds, "explicit seed list, overrides --runs");
  sweep->add_option("-L,--L", sweep_opts.L, "segment length")->capture_default_str();
  sweep->add_option("-n,--n", sweep_opts.n, "samples per cell")->capture_default_str();
  sweep->add_option("--alpha", sweep_opts.alpha, "")->capture_default_str();
  sweep->add_option("--disconnect", sweep_opts.disconnect, "")->capture_default_str();
  sweep->add_option("--density", sweep_opts.density, "")->capture_default_str();
  sweep->add_option("--backend", sweep_opts.backend, "oracle, analytic or fisher")
      ->capture_default_str()
      ->check(CLI::IsMember({"oracle", "analytic", "fisher"}));
  sweep->add_option("--threads", sweep_opts.threads,
                    "worker threads; 0 uses SEGTASK_THREADS, then the hardware count")
      ->capture_default_str();
  sweep->add_option("--out", sweep_opts.out_path, "output table (csv)")->required();

  EvalOpts eval_opts;
  auto* eval = app.add_subcommand("eval", "score a discovery result against the truth");
  eval->add_option("--result", eval_opts.result_path, "discovery result (json)")->required();
  eval->add_option("--graph", eval_opts.graph_path, "graph spec with the truth");
  eval->add_option("--meta", eval_opts.meta_path, "metadata with the truth");

  CiOpts ci_opts;
  auto* ci = app.add_subcommand("ci", "debug a single independence query");
  add_backend_opts(ci, ci_opts.backend);
  ci->add_option("--x", ci_opts.x, "first node, e.g. s[4]")->required();
  ci->add_option("--y", ci_opts.y, "second node, e.g. s[8]")->required();
  ci->add_option("--cond", ci_opts.cond, "conditioning nodes, e.g. s[3],s[5],g[1]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return run_gen(gen_opts);
    if (*discover) return run_discover(discover_opts);
    if (*ident) return run_ident(ident_opts);
    if (*sweep) return run_sweep_cmd(sweep_opts);
    if (*eval) return run_eval(eval_opts);
    if (*ci) return run_ci(ci_opts);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
