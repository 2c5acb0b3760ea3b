#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "segtask/graph.hpp"
#include "segtask/io.hpp"

using namespace segtask;
namespace fs = std::filesystem;

namespace {

std::string bin() {
  const char* path = std::getenv("SEGTASK_BIN");
  REQUIRE_MESSAGE(path != nullptr, "SEGTASK_BIN must point at the cli binary");
  return path;
}

struct Outcome {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
};

Outcome run(const std::string& args) {
  const std::string cmd = bin() + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  Outcome outcome;
  char buffer[4096];
  while (std::size_t got = std::fread(buffer, 1, sizeof buffer, pipe))
    outcome.output.append(buffer, got);
  const int status = pclose(pipe);
  outcome.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return outcome;
}

// Fresh working directory per test case, removed on destruction.
struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("segtask_cli_" + std::to_string(getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const char* name) const { return (path / name).string(); }
};

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("gen writes deterministic files and validates the segment length") {
  TempDir dir;
  const std::string args = "gen -T 10 -L 2 -M 1 --seed 7 -n 50 --data " + dir.file("d.csv") +
                           " --meta " + dir.file("m.json") + " --graph-out " +
                           dir.file("g.json");
  const auto first = run(args);
  CHECK(first.code == 0);
  CHECK(contains(first.output, "50 rows"));
  REQUIRE(fs::exists(dir.file("d.csv")));
  REQUIRE(fs::exists(dir.file("m.json")));
  REQUIRE(fs::exists(dir.file("g.json")));

  const std::string data = read_text_file(dir.file("d.csv"));
  CHECK(data.rfind("s[1].0,a[1].0,", 0) == 0);
  const std::string meta = read_text_file(dir.file("m.json"));

  const auto rerun = run(args);
  CHECK(rerun.code == 0);
  CHECK(read_text_file(dir.file("d.csv")) == data);
  CHECK(read_text_file(dir.file("m.json")) == meta);

  const auto bad = run("gen -T 10 -L 1 -M 1 --seed 7 --data " + dir.file("x.csv") +
                       " --meta " + dir.file("y.json"));
  CHECK(bad.code == 2);
  CHECK(contains(bad.output, "at least 2"));
}

TEST_CASE("a config file can stand in for the flags") {
  TempDir dir;
  const std::string ini = "[gen]\nT=8\nL=2\nM=1\nseed=9\nn=20\ndata=" + dir.file("c.csv") +
                          "\nmeta=" + dir.file("c.json") + "\n";
  write_text_file(dir.file("run.ini"), ini);
  const auto outcome = run("--config " + dir.file("run.ini") + " gen");
  CHECK(outcome.code == 0);
  CHECK(fs::exists(dir.file("c.csv")));
  CHECK(fs::exists(dir.file("c.json")));
}

TEST_CASE("discover with the oracle prints the structure it recovered") {
  TempDir dir;
  const auto graph = build_graph(10, 2, 1, TaskIncidence::from_pairs(5, 1, {{2, 1}, {4, 1}}),
                                 std::vector<bool>(9, true));
  write_text_file(dir.file("g.json"), graph_spec_to_json(describe_graph(graph)));

  const auto outcome = run("discover --backend oracle --graph " + dir.file("g.json") +
                           " --out " + dir.file("r.json"));
  CHECK(outcome.code == 0);
  CHECK(contains(outcome.output, "task 1: segments 2 4"));
  CHECK(contains(outcome.output, "accuracy 1"));
  CHECK(contains(outcome.output, "mcc 1"));

  const auto result = discovery_from_json(read_text_file(dir.file("r.json")));
  CHECK(result.incidence == graph.incidence());
  CHECK(result.queries.size() == 10);
}

TEST_CASE("gen, discover and eval chain through the same files") {
  TempDir dir;
  REQUIRE(run("gen -T 8 -L 2 -M 2 --seed 11 -n 4000 --data " + dir.file("d.csv") +
              " --meta " + dir.file("m.json"))
              .code == 0);

  const auto discovered = run("discover --backend fisher --meta " + dir.file("m.json") +
                              " --data " + dir.file("d.csv") + " --out " + dir.file("r.json"));
  CHECK(discovered.code == 0);
  CHECK(contains(discovered.output, "accuracy "));

  const auto scored = run("eval --result " + dir.file("r.json") + " --meta " +
                          dir.file("m.json"));
  CHECK(scored.code == 0);
  // Both commands score against the same truth, so the summaries agree.
  const auto tail = discovered.output.substr(discovered.output.find("accuracy "));
  CHECK(scored.output == tail);

  const auto analytic = run("discover --backend analytic --meta " + dir.file("m.json") +
                            " --out " + dir.file("ra.json"));
  CHECK(analytic.code == 0);
  CHECK(contains(analytic.output, "accuracy 1"));
  CHECK(contains(analytic.output, "mcc 1"));
}

TEST_CASE("ident unmixes, span-checks and rejects malformed supports") {
  TempDir dir;
  const auto unmixed = run("ident --d-s 2 --supports \"1;2\" --seed 3 --points 128 "
                           "--iters 800 --r2-samples 2000 --out " +
                           dir.file("id.json"));
  CHECK(unmixed.code == 0);
  CHECK(contains(unmixed.output, "task 1: disentangled"));
  CHECK(contains(unmixed.output, "task 2: disentangled"));
  const auto result = ident_result_from_json(read_text_file(dir.file("id.json")));
  CHECK(result.unmix.block_verdict == std::vector<bool>{true, true});
  CHECK(result.r2.size() == 2);

  // One line per task row of the stacked Jacobian.
  const auto span = run("ident --d-s 3 --supports \"1,2;2,3;1,3\" --seed 5 --span-check-only");
  CHECK(span.code == 0);
  CHECK(contains(span.output, "row 1: spanned"));
  CHECK(contains(span.output, "row 2: spanned"));
  CHECK(contains(span.output, "row 3: spanned"));

  const auto bad = run("ident --d-s 2 --supports \"1,5\" --seed 3 --out " + dir.file("x.json"));
  CHECK(bad.code == 2);

  const auto empty = run("ident --d-s 2 --supports \";\" --seed 3 --out " + dir.file("y.json"));
  CHECK(empty.code == 2);
}

TEST_CASE("sweep writes the canonical table") {
  TempDir dir;
  const auto outcome = run("sweep --cells \"10:2,8:2\" --runs 2 --backend oracle --out " +
                           dir.file("sw.csv"));
  CHECK(outcome.code == 0);
  CHECK(contains(outcome.output, "wrote 4 records"));

  const std::string table = read_text_file(dir.file("sw.csv"));
  CHECK(table.rfind("method,T,L,M,seed,n,accuracy,mcc,runtime_s\n", 0) == 0);
  CHECK(contains(table, "oracle,8,2,2,0,0,1,1,"));
  CHECK(contains(table, "oracle,8,2,2,1,0,1,1,"));
  CHECK(contains(table, "oracle,10,2,2,0,0,1,1,"));
  // Canonical order: T = 8 cells before T = 10 despite the flag order.
  CHECK(table.find(",8,2,2,") < table.find(",10,2,2,"));

  const auto seeded = run("sweep --cells \"8:2\" --seeds 5 --backend oracle --out " +
                          dir.file("sw2.csv"));
  CHECK(seeded.code == 0);
  CHECK(contains(read_text_file(dir.file("sw2.csv")), "oracle,8,2,2,5,0,1,1,"));
}

TEST_CASE("usage and config mistakes exit with code 2") {
  TempDir dir;
  CHECK(run("").code == 2);
  CHECK(run("nosuch").code == 2);
  CHECK(run("discover --backend exact --graph x --out y").code == 2);
  CHECK(run("discover --backend oracle --graph " + dir.file("absent.json") + " --out " +
            dir.file("r.json"))
            .code == 2);
  CHECK(run("sweep --backend oracle --out " + dir.file("s.csv")).code == 2);  // no grid
  CHECK(run("gen -T 10 -M 1 --seed 1 --data " + dir.file("d.csv")).code == 2);  // no meta

  write_text_file(dir.file("broken.json"), "{not json");
  const auto broken = run("discover --backend oracle --graph " + dir.file("broken.json") +
                          " --out " + dir.file("r.json"));
  CHECK(broken.code == 2);
  CHECK(contains(broken.output, "malformed graph spec"));

  CHECK(run("--help").code == 0);
}

TEST_CASE("ci answers a single band query") {
  TempDir dir;
  const auto graph = build_graph(10, 2, 1, TaskIncidence::from_pairs(5, 1, {{2, 1}, {4, 1}}),
                                 std::vector<bool>(9, true));
  write_text_file(dir.file("g.json"), graph_spec_to_json(describe_graph(graph)));
  const std::string base = "ci --backend oracle --graph " + dir.file("g.json");

  const auto dependent =
      run(base + " --x \"s[4]\" --y \"s[8]\" --cond \"s[3],s[5],s[7],s[9],g[1]\"");
  CHECK(dependent.code == 0);
  CHECK(contains(dependent.output, ": dependent"));

  const auto independent =
      run(base + " --x \"s[4]\" --y \"s[6]\" --cond \"s[3],s[5],s[7],g[1]\"");
  CHECK(independent.code == 0);
  CHECK(contains(independent.output, ": independent"));

  CHECK(run(base + " --x \"q[1]\" --y \"s[2]\"").code == 2);
  CHECK(run(base + " --x \"s[1]\" --y \"s[2]\" --cond \"g[1],g[1]\"").code == 2);
}
