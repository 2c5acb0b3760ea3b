#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "segtask/graph.hpp"
#include "segtask/scm.hpp"

namespace segtask {

// Fraction of incidence cells on which the estimate agrees with the truth.
double incidence_accuracy(const TaskIncidence& est, const TaskIncidence& truth);

// Matthews correlation over the same cells; any zero factor under the root
// yields 0.
double incidence_mcc(const TaskIncidence& est, const TaskIncidence& truth);

// Which engine answers the independence queries of a sweep cell.
enum class Backend { GraphOracle, AnalyticCorr, FisherZ };

// "oracle", "analytic", "fisher" -- the method tags written to tables.
std::string to_string(Backend backend);
std::optional<Backend> parse_backend(const std::string& tag);

struct SweepRecord {
  std::string method;
  int T = 0;
  int L = 0;
  int M = 0;
  std::uint64_t seed = 0;
  int n = 0;  // samples behind the verdicts; 0 for exact backends
  double accuracy = 0.0;
  double mcc = 0.0;
  double runtime_s = 0.0;
};

struct SweepCell {
  int T = 0;
  int M = 0;
};

// Simulation settings for sweep cells. The task sink gets a sharper noise
// scale than the generic default so that the collider-induced dependence
// stays detectable at n = 10,000.
ScmOptions sweep_scm_defaults();

struct SweepConfig {
  std::vector<SweepCell> grid;
  std::vector<std::uint64_t> seeds;
  int L = 2;
  int n = 10000;
  double alpha = 0.05;
  double disconnect_prob = 0.2;
  double incidence_density = 0.5;
  ScmOptions scm = sweep_scm_defaults();
  Backend backend = Backend::FisherZ;
  // 0 picks the SEGTASK_THREADS environment variable, then the hardware
  // concurrency, then 1.
  int threads = 0;
};

// Step-count sweep: T from 8 to 20 with M = max(2, round(T/5)).
std::vector<SweepCell> t_sweep_grid();
// Task-count sweep: T = 20 with M from 2 to 10.
std::vector<SweepCell> m_sweep_grid();

// One record per (cell, seed): draw the random graph, parameterize and
// sample if the backend needs data, run discovery over band queries, score
// against the embedded truth. Cells run concurrently; records come back in
// canonical (T, M, seed) order and are identical across reruns except for
// the runtime field.
std::vector<SweepRecord> run_sweep(const SweepConfig& config);

// Delimited table with header method,T,L,M,seed,n,accuracy,mcc,runtime_s.
std::string sweep_csv(const std::vector<SweepRecord>& records);

}  // namespace segtask
