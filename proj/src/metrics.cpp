#include "segtask/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <stdexcept>
#include <thread>

#include "segtask/ci.hpp"
#include "segtask/discovery.hpp"
#include "segtask/random.hpp"
#include "segtask/scm.hpp"

namespace segtask {

namespace {

void check_shapes(const TaskIncidence& est, const TaskIncidence& truth) {
  if (est.segments() != truth.segments() || est.tasks() != truth.tasks())
    throw std::invalid_argument("incidence shapes differ");
  if (est.segments() == 0 || est.tasks() == 0)
    throw std::invalid_argument("incidence is empty");
}

struct Confusion {
  double tp = 0, tn = 0, fp = 0, fn = 0;
};

Confusion count_cells(const TaskIncidence& est, const TaskIncidence& truth) {
  Confusion c;
  for (int k = 1; k <= truth.segments(); ++k) {
    for (int i = 1; i <= truth.tasks(); ++i) {
      const bool e = est.at(k, i), t = truth.at(k, i);
      if (e && t)
        c.tp += 1;
      else if (!e && !t)
        c.tn += 1;
      else if (e)
        c.fp += 1;
      else
        c.fn += 1;
    }
  }
  return c;
}

}  // namespace

double incidence_accuracy(const TaskIncidence& est, const TaskIncidence& truth) {
  check_shapes(est, truth);
  const Confusion c = count_cells(est, truth);
  return (c.tp + c.tn) / (c.tp + c.tn + c.fp + c.fn);
}

double incidence_mcc(const TaskIncidence& est, const TaskIncidence& truth) {
  check_shapes(est, truth);
  const Confusion c = count_cells(est, truth);
  const double factors[4] = {c.tp + c.fp, c.tp + c.fn, c.tn + c.fp, c.tn + c.fn};
  for (double f : factors)
    if (f == 0.0) return 0.0;
  return (c.tp * c.tn - c.fp * c.fn) /
         std::sqrt(factors[0] * factors[1] * factors[2] * factors[3]);
}

std::string to_string(Backend backend) {
  switch (backend) {
    case Backend::GraphOracle: return "oracle";
    case Backend::AnalyticCorr: return "analytic";
    case Backend::FisherZ: return "fisher";
  }
  throw std::invalid_argument("unknown backend");
}

std::optional<Backend> parse_backend(const std::string& tag) {
  if (tag == "oracle") return Backend::GraphOracle;
  if (tag == "analytic") return Backend::AnalyticCorr;
  if (tag == "fisher") return Backend::FisherZ;
  return std::nullopt;
}

ScmOptions sweep_scm_defaults() {
  ScmOptions opt;
  opt.noise.task = 0.2;
  return opt;
}

std::vector<SweepCell> t_sweep_grid() {
  std::vector<SweepCell> grid;
  for (int T = 8; T <= 20; T += 2)
    grid.push_back({T, std::max(2, static_cast<int>(std::lround(T / 5.0)))});
  return grid;
}

std::vector<SweepCell> m_sweep_grid() {
  std::vector<SweepCell> grid;
  for (int M = 2; M <= 10; ++M) grid.push_back({20, M});
  return grid;
}

namespace {

int resolve_threads(int requested, std::size_t jobs) {
  int threads = requested;
  if (threads <= 0) {
    if (const char* env = std::getenv("SEGTASK_THREADS")) threads = std::atoi(env);
  }
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads <= 0) threads = 1;
  return static_cast<int>(std::min<std::size_t>(threads, std::max<std::size_t>(jobs, 1)));
}

SweepRecord run_cell(const SweepConfig& config, const SweepCell& cell, std::uint64_t seed) {
  const auto started = std::chrono::steady_clock::now();

  const std::uint64_t key =
      (static_cast<std::uint64_t>(cell.T) << 32) ^ (static_cast<std::uint64_t>(cell.M) << 16);
  const std::uint64_t base = derive_seed(seed, key);

  RandomGraphSpec spec;
  spec.T = cell.T;
  spec.L = config.L;
  spec.M = cell.M;
  spec.disconnect_prob = config.disconnect_prob;
  spec.incidence_density = config.incidence_density;
  spec.seed = derive_seed(base, 1);
  const TemporalGraph graph = random_graph(spec);

  SweepRecord record;
  record.method = to_string(config.backend);
  record.T = cell.T;
  record.L = config.L;
  record.M = cell.M;
  record.seed = seed;

  DiscoveryResult result;
  if (config.backend == Backend::GraphOracle) {
    result = discover_structure(CiContext::reachability(graph), config.L);
  } else {
    const ScmParams params = parameterize(graph, config.scm, derive_seed(base, 2));
    const VariableLayout layout = layout_for(graph, params);
    if (config.backend == Backend::AnalyticCorr) {
      result = discover_structure(
          CiContext::analytic(joint_covariance(graph, params), layout), config.L);
    } else {
      const Eigen::MatrixXd data = sample(graph, params, config.n, derive_seed(base, 3));
      result = discover_structure(CiContext::fisher(data, layout, config.alpha), config.L);
      record.n = config.n;
    }
  }

  record.accuracy = incidence_accuracy(result.incidence, graph.incidence());
  record.mcc = incidence_mcc(result.incidence, graph.incidence());
  record.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                         .count();
  return record;
}

}  // namespace

std::vector<SweepRecord> run_sweep(const SweepConfig& config) {
  std::vector<SweepCell> cells = config.grid;
  std::stable_sort(cells.begin(), cells.end(), [](const SweepCell& a, const SweepCell& b) {
    return a.T != b.T ? a.T < b.T : a.M < b.M;
  });
  std::vector<std::uint64_t> seeds = config.seeds;
  std::sort(seeds.begin(), seeds.end());

  struct Job {
    SweepCell cell;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& cell : cells)
    for (std::uint64_t seed : seeds) jobs.push_back({cell, seed});

  std::vector<SweepRecord> records(jobs.size());
  std::vector<std::exception_ptr> failures(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next.fetch_add(1); j < jobs.size(); j = next.fetch_add(1)) {
      try {
        records[j] = run_cell(config, jobs[j].cell, jobs[j].seed);
      } catch (...) {
        failures[j] = std::current_exception();
      }
    }
  };

  const int threads = resolve_threads(config.threads, jobs.size());
  if (threads <= 1 || jobs.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);
  return records;
}

std::string sweep_csv(const std::vector<SweepRecord>& records) {
  std::string out = "method,T,L,M,seed,n,accuracy,mcc,runtime_s\n";
  char line[256];
  for (const auto& r : records) {
    std::snprintf(line, sizeof line, "%s,%d,%d,%d,%llu,%d,%.17g,%.17g,%.3f\n",
                  r.method.c_str(), r.T, r.L, r.M, static_cast<unsigned long long>(r.seed),
                  r.n, r.accuracy, r.mcc, r.runtime_s);
    out += line;
  }
  return out;
}

}  // namespace segtask
