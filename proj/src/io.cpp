#include "segtask/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace segtask {

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  if (!rows.is_array()) throw std::invalid_argument("matrix field is not an array");
  const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index c = r == 0 ? 0 : static_cast<Eigen::Index>(rows.at(0).size());
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const json& row = rows.at(i);
    if (static_cast<Eigen::Index>(row.size()) != c)
      throw std::invalid_argument("matrix rows have uneven lengths");
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = row.at(j).get<double>();
  }
  return m;
}

json pairs_to_json(const std::vector<std::pair<int, int>>& pairs) {
  json out = json::array();
  for (const auto& [a, b] : pairs) out.push_back(json::array({a, b}));
  return out;
}

std::vector<std::pair<int, int>> pairs_from_json(const json& arr) {
  std::vector<std::pair<int, int>> pairs;
  for (const auto& item : arr) {
    if (!item.is_array() || item.size() != 2)
      throw std::invalid_argument("expected [first, second] pairs");
    pairs.emplace_back(item.at(0).get<int>(), item.at(1).get<int>());
  }
  return pairs;
}

const char* sigma_tag(Nonlinearity sigma) {
  return sigma == Nonlinearity::Tanh ? "tanh" : "identity";
}

Nonlinearity sigma_from_tag(const std::string& tag) {
  if (tag == "tanh") return Nonlinearity::Tanh;
  if (tag == "identity") return Nonlinearity::Identity;
  throw std::invalid_argument("unknown nonlinearity tag: " + tag);
}

void append_value(std::string& out, double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  out += buffer;
}

}  // namespace

GraphSpecFile describe_graph(const TemporalGraph& g, std::uint64_t seed) {
  GraphSpecFile spec;
  spec.T = g.T();
  spec.L = g.L();
  spec.M = g.M();
  spec.incidence = g.incidence().true_cells();
  for (int t = 1; t < g.T(); ++t)
    if (!g.boundary_connected(t)) spec.disconnected_boundaries.push_back(t);
  spec.seed = seed;
  return spec;
}

TemporalGraph graph_from_spec(const GraphSpecFile& spec) {
  if (spec.L < 2) throw std::invalid_argument("segment length must be at least 2");
  if (spec.T < 2 || spec.T % spec.L != 0)
    throw std::invalid_argument("step count must be a positive multiple of the segment length");
  std::vector<bool> connected(spec.T - 1, true);
  for (int t : spec.disconnected_boundaries) {
    if (t < 1 || t >= spec.T)
      throw std::invalid_argument("disconnected boundary outside 1..T-1");
    connected[t - 1] = false;
  }
  const auto incidence =
      TaskIncidence::from_pairs(spec.T / spec.L, spec.M, spec.incidence);
  return build_graph(spec.T, spec.L, spec.M, incidence, connected);
}

std::string graph_spec_to_json(const GraphSpecFile& spec) {
  json j;
  j["T"] = spec.T;
  j["L"] = spec.L;
  j["M"] = spec.M;
  j["incidence"] = pairs_to_json(spec.incidence);
  j["disconnected_boundaries"] = spec.disconnected_boundaries;
  j["seed"] = spec.seed;
  return j.dump(2) + "\n";
}

GraphSpecFile graph_spec_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    GraphSpecFile spec;
    spec.T = j.at("T").get<int>();
    spec.L = j.at("L").get<int>();
    spec.M = j.at("M").get<int>();
    spec.incidence = pairs_from_json(j.at("incidence"));
    spec.disconnected_boundaries = j.at("disconnected_boundaries").get<std::vector<int>>();
    spec.seed = j.value("seed", std::uint64_t{0});
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed graph spec: ") + e.what());
  }
}

std::string meta_to_json(const DatasetMeta& meta) {
  json j;
  j["graph"] = json::parse(graph_spec_to_json(meta.graph));
  j["dims"] = {{"d_s", meta.d_s}, {"d_a", meta.d_a}, {"d_g", meta.d_g}};
  j["noise"] = {{"action", meta.noise.action},
                {"state", meta.noise.state},
                {"task", meta.noise.task}};
  j["coeff"] = {{"min", meta.coeff_min}, {"max", meta.coeff_max}};
  j["scm_seed"] = meta.scm_seed;
  j["sample_seed"] = meta.sample_seed;
  j["n"] = meta.n;
  return j.dump(2) + "\n";
}

DatasetMeta meta_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    DatasetMeta meta;
    meta.graph = graph_spec_from_json(j.at("graph").dump());
    meta.d_s = j.at("dims").at("d_s").get<int>();
    meta.d_a = j.at("dims").at("d_a").get<int>();
    meta.d_g = j.at("dims").at("d_g").get<int>();
    meta.noise.action = j.at("noise").at("action").get<double>();
    meta.noise.state = j.at("noise").at("state").get<double>();
    meta.noise.task = j.at("noise").at("task").get<double>();
    meta.coeff_min = j.at("coeff").at("min").get<double>();
    meta.coeff_max = j.at("coeff").at("max").get<double>();
    meta.scm_seed = j.at("scm_seed").get<std::uint64_t>();
    meta.sample_seed = j.at("sample_seed").get<std::uint64_t>();
    meta.n = j.at("n").get<int>();
    return meta;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed dataset metadata: ") + e.what());
  }
}

std::string dataset_csv(const Eigen::MatrixXd& data, const VariableLayout& layout) {
  const auto labels = layout.labels();
  if (data.cols() != static_cast<Eigen::Index>(labels.size()))
    throw std::invalid_argument("data width does not match the layout");
  std::string out;
  out.reserve(static_cast<std::size_t>(data.size()) * 12 + labels.size() * 8);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (j) out += ',';
    out += labels[j];
  }
  out += '\n';
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      if (c) out += ',';
      append_value(out, data(r, c));
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

}  // namespace

Dataset dataset_from_csv(const std::string& text) {
  std::istringstream stream(text);
  std::string line;
  if (!std::getline(stream, line)) throw std::runtime_error("dataset is empty");
  Dataset dataset;
  dataset.labels = split_line(line);
  const std::size_t width = dataset.labels.size();

  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(stream, line)) {
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != width)
      throw std::runtime_error("dataset row " + std::to_string(rows + 1) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(width));
    for (const auto& field : fields) {
      std::size_t used = 0;
      try {
        values.push_back(std::stod(field, &used));
      } catch (const std::logic_error&) {
        used = 0;
      }
      if (used != field.size())
        throw std::runtime_error("dataset field is not a number: " + field);
    }
    ++rows;
  }
  dataset.data.resize(rows, static_cast<Eigen::Index>(width));
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(width); ++c)
      dataset.data(r, c) = values[static_cast<std::size_t>(r) * width + c];
  return dataset;
}

std::string discovery_to_json(const DiscoveryResult& result) {
  json j;
  j["segments"] = result.incidence.segments();
  j["tasks"] = result.incidence.tasks();
  j["incidence_est"] = pairs_to_json(result.incidence.true_cells());
  j["step_labels"] = result.step_labels;
  json queries = json::array();
  for (const auto& q : result.queries) {
    json item;
    item["k"] = q.k;
    item["v"] = q.v;
    item["i"] = q.i;
    item["statistic"] = q.statistic;
    item["p_value"] = q.p_value ? json(*q.p_value) : json(nullptr);
    item["dependent"] = q.dependent;
    queries.push_back(std::move(item));
  }
  j["queries"] = std::move(queries);
  return j.dump(2) + "\n";
}

DiscoveryResult discovery_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    DiscoveryResult result;
    result.incidence = TaskIncidence::from_pairs(j.at("segments").get<int>(),
                                                 j.at("tasks").get<int>(),
                                                 pairs_from_json(j.at("incidence_est")));
    result.step_labels = j.at("step_labels").get<std::vector<std::vector<int>>>();
    for (const auto& item : j.at("queries")) {
      QueryRecord q;
      q.k = item.at("k").get<int>();
      q.v = item.at("v").get<int>();
      q.i = item.at("i").get<int>();
      q.statistic = item.at("statistic").get<double>();
      if (!item.at("p_value").is_null()) q.p_value = item.at("p_value").get<double>();
      q.dependent = item.at("dependent").get<bool>();
      result.queries.push_back(std::move(q));
    }
    return result;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed discovery result: ") + e.what());
  }
}

std::string ident_spec_to_json(const IdentSpecFile& spec) {
  json j;
  j["d_s"] = spec.d_s;
  j["supports"] = spec.supports;
  j["seed"] = spec.seed;
  j["sigma"] = sigma_tag(spec.sigma);
  return j.dump(2) + "\n";
}

IdentSpecFile ident_spec_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    IdentSpecFile spec;
    spec.d_s = j.at("d_s").get<int>();
    spec.supports = j.at("supports").get<std::vector<std::vector<int>>>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.sigma = sigma_from_tag(j.value("sigma", std::string("tanh")));
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed unmixing spec: ") + e.what());
  }
}

std::string ident_result_to_json(const IdentResultFile& result) {
  json j;
  j["Q_hat"] = matrix_to_json(result.unmix.Q_hat);
  j["composite"] = matrix_to_json(result.unmix.composite);
  j["pi"] = result.unmix.pi;
  j["block_verdict"] = result.unmix.block_verdict;
  j["off_block_max"] = result.unmix.off_block_max;
  j["objective_trace"] = result.unmix.objective_trace;
  j["restarts"] = result.unmix.restarts;
  json r2 = json::array();
  for (const auto& [relevant, irrelevant] : result.r2)
    r2.push_back({{"relevant", relevant}, {"irrelevant", irrelevant}});
  j["r2"] = std::move(r2);
  return j.dump(2) + "\n";
}

IdentResultFile ident_result_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    IdentResultFile result;
    result.unmix.Q_hat = matrix_from_json(j.at("Q_hat"));
    result.unmix.composite = matrix_from_json(j.at("composite"));
    result.unmix.pi = j.at("pi").get<std::vector<int>>();
    result.unmix.block_verdict = j.at("block_verdict").get<std::vector<bool>>();
    result.unmix.off_block_max = j.at("off_block_max").get<double>();
    result.unmix.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    result.unmix.restarts = j.at("restarts").get<int>();
    for (const auto& item : j.at("r2"))
      result.r2.emplace_back(item.at("relevant").get<double>(),
                             item.at("irrelevant").get<double>());
    return result;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed unmixing result: ") + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace segtask
