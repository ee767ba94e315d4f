#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "frontmix/inversion.hpp"
#include "frontmix/network.hpp"
#include "frontmix/problem.hpp"
#include "frontmix/simulator.hpp"

// JSON config ingestion, deterministic CSV emission, and the run manifest.
// Everything the command line front end needs that is not numerics.

namespace frontmix {

struct GridRange {
  double lo = 0.0;
  double hi = 0.0;
  int points = 0;
};

// One parsed config file. A file carries a problem section, a network
// section, or both (the degenerate-network comparison needs both).
struct RunConfig {
  std::string name;
  std::optional<ProblemSpec> problem;
  std::optional<NetworkSpec> network;
  // Designated path interval for the network generating function.
  int network_interval = -1;
  // Emit the late-time F_sim / L^-1[f] curve from the network run.
  bool ratio_curve = false;

  SimGrid grid;
  NetGrid net_grid;
  double horizon = 1.0;
  GridRange s_grid{1e-3, 1e3, 121};  // geometric spacing
  GridRange t_grid{0.01, 1.0, 100};  // linear spacing
  InversionMethod method;
};

// Parses and validates. Unknown keys are rejected so typos cannot silently
// fall back to defaults. Throws ConfigError with a path-prefixed message.
RunConfig load_config(const std::string& path);

// Resolved network spec as JSON text (releases already folded into edge
// densities), round-trippable through load_config's explicit edge form.
std::string network_to_json(const NetworkSpec& net);

uint64_t fnv1a64(const void* data, std::size_t n);
// FNV-1a of the raw config bytes, as 16 hex digits.
std::string file_hash_hex(const std::string& path);

std::vector<double> geometric_points(const GridRange& g);
std::vector<double> linear_points(const GridRange& g);

// Shortest decimal that round-trips a double (17 significant digits).
std::string format_g17(double x);

// Worker count: FRONTMIX_THREADS when set, otherwise the hardware count,
// clamped to [1, 64].
int thread_budget();
// Index-parallel loop; results must be written to preallocated slots so the
// output is identical for every worker count.
void parallel_for(int n, const std::function<void(int)>& body);

// CSV file with the fixed preamble: a manifest reference comment, then the
// header row. All numeric cells go through format_g17.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& header);
  ~CsvWriter();

  void row(const std::vector<std::string>& cells);
  static std::string num(double x) { return format_g17(x); }

 private:
  struct Impl;
  Impl* impl_;
};

// Reproducibility record: config identity, invocation, and produced files.
// Wall-clock timestamps live only here, never in CSV bodies.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::string config_hash;
  std::map<std::string, std::string> parameters;
  std::vector<std::string> outputs;
};

void write_manifest(const std::string& out_dir, const RunManifest& m);

}  // namespace frontmix
