#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "segtask/discovery.hpp"
#include "segtask/graph.hpp"
#include "segtask/ident.hpp"
#include "segtask/scm.hpp"

namespace segtask {

// Realized graph in file form: enough to rebuild it bit for bit. The seed
// is provenance only; reconstruction never redraws anything.
struct GraphSpecFile {
  int T = 0;
  int L = 0;
  int M = 0;
  std::vector<std::pair<int, int>> incidence;  // (segment, task), row-major
  std::vector<int> disconnected_boundaries;    // ascending, in 1..T-1
  std::uint64_t seed = 0;
};

GraphSpecFile describe_graph(const TemporalGraph& g, std::uint64_t seed = 0);
TemporalGraph graph_from_spec(const GraphSpecFile& spec);

std::string graph_spec_to_json(const GraphSpecFile& spec);
GraphSpecFile graph_spec_from_json(const std::string& text);

// Everything a discovery run needs to know about a dataset on disk.
struct DatasetMeta {
  GraphSpecFile graph;
  int d_s = 1;
  int d_a = 1;
  int d_g = 1;
  NoiseStds noise;
  double coeff_min = 0.5;
  double coeff_max = 1.5;
  std::uint64_t scm_seed = 0;
  std::uint64_t sample_seed = 0;
  int n = 0;
};

std::string meta_to_json(const DatasetMeta& meta);
DatasetMeta meta_from_json(const std::string& text);

// Trajectories as delimited text: one header line of coordinate labels in
// layout order, then one row per trajectory with full double fidelity.
std::string dataset_csv(const Eigen::MatrixXd& data, const VariableLayout& layout);

struct Dataset {
  std::vector<std::string> labels;
  Eigen::MatrixXd data;
};

Dataset dataset_from_csv(const std::string& text);

std::string discovery_to_json(const DiscoveryResult& result);
DiscoveryResult discovery_from_json(const std::string& text);

// Unmixing problem in file form.
struct IdentSpecFile {
  int d_s = 0;
  std::vector<std::vector<int>> supports;
  std::uint64_t seed = 0;
  Nonlinearity sigma = Nonlinearity::Tanh;
};

std::string ident_spec_to_json(const IdentSpecFile& spec);
IdentSpecFile ident_spec_from_json(const std::string& text);

// Unmixing outcome plus the per-task regression scores.
struct IdentResultFile {
  UnmixResult unmix;
  // One (relevant, irrelevant) pair per task, in task order.
  std::vector<std::pair<double, double>> r2;
};

std::string ident_result_to_json(const IdentResultFile& result);
IdentResultFile ident_result_from_json(const std::string& text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace segtask
