#pragma once

#include "ptrot/calabi.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptrot::cli {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MapSection {
  std::string kind = "band";
  double alpha = 0.3;
  double beta = 0.45;
  int deck_shift = 0;
  double radius = 0.0;
  bool operator==(const MapSection&) const = default;
};

struct DecompositionSection {
  int m = 8;
  double K_target = 4.0;
  int n_radius = 200;
  int n_angle = 200;
  bool operator==(const DecompositionSection&) const = default;
};

struct RangeSection {
  int b_min = 3;
  int b_max = 7;
  std::string a_rule = "all";  // all | smallest | convergents
  bool operator==(const RangeSection&) const = default;
};

struct QuadratureSection {
  std::string scheme = "monte_carlo";  // monte_carlo | gauss
  long samples = 200000;
  long batch = 1000;
  int angle_nodes = 32;
  bool operator==(const QuadratureSection&) const = default;
};

struct RunSection {
  std::string out_dir = "runs";
  std::uint64_t seed = 1;
  int workers = 0;
  bool operator==(const RunSection&) const = default;
};

struct FlowSection {
  int seeds = 8;
  double t_end = 2.0;
  double tol = 1e-9;
  double scale = 0.5;
  long lipschitz_pairs = 10000;
  bool mesh = true;
  bool operator==(const FlowSection&) const = default;
};

struct MeshSection {
  int orbits = 256;
  int levels = 256;
  int coarse_from = 13;
  int coarse_orbits = 128;
  int coarse_levels = 128;
  std::string cache_dir;  // empty: <out>/cache
  bool operator==(const MeshSection&) const = default;
};

struct Theorem1Section {
  int b_max = 34;
  long bound_pairs = 1000;
  int bound_b_max = 34;
  double bound_step = 0.125;
  bool operator==(const Theorem1Section&) const = default;
};

struct ExperimentConfig {
  MapSection map;
  DecompositionSection decomposition;
  RangeSection range;
  QuadratureSection quadrature;
  RunSection run;
  FlowSection flow;
  MeshSection mesh;
  Theorem1Section theorem1;
  bool operator==(const ExperimentConfig&) const = default;

  MapSpec map_spec() const;
  QuadratureMeasure measure() const;
  MeshRule mesh_rule() const;
  std::string cache_dir() const;
  // Integers a in (b alpha, b beta) selected by the rule, for b in the range.
  std::vector<std::pair<int, int>> pairs() const;
  // Throws ConfigError when a value is outside the module preconditions.
  void validate() const;
};

// INI text; unknown sections or keys are errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string to_ini(const ExperimentConfig& c);

}  // namespace ptrot::cli
