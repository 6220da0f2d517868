#include "config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace ptrot::cli {

namespace {

namespace pt = boost::property_tree;

// Calls v(section, key, field) for every field, in file order.
template <class C, class V>
void visit(C& c, V&& v) {
  v("map", "kind", c.map.kind);
  v("map", "alpha", c.map.alpha);
  v("map", "beta", c.map.beta);
  v("map", "deck_shift", c.map.deck_shift);
  v("map", "radius", c.map.radius);
  v("decomposition", "m", c.decomposition.m);
  v("decomposition", "K_target", c.decomposition.K_target);
  v("decomposition", "n_radius", c.decomposition.n_radius);
  v("decomposition", "n_angle", c.decomposition.n_angle);
  v("range", "b_min", c.range.b_min);
  v("range", "b_max", c.range.b_max);
  v("range", "a_rule", c.range.a_rule);
  v("quadrature", "scheme", c.quadrature.scheme);
  v("quadrature", "samples", c.quadrature.samples);
  v("quadrature", "batch", c.quadrature.batch);
  v("quadrature", "angle_nodes", c.quadrature.angle_nodes);
  v("run", "out_dir", c.run.out_dir);
  v("run", "seed", c.run.seed);
  v("run", "workers", c.run.workers);
  v("flow", "seeds", c.flow.seeds);
  v("flow", "t_end", c.flow.t_end);
  v("flow", "tol", c.flow.tol);
  v("flow", "scale", c.flow.scale);
  v("flow", "lipschitz_pairs", c.flow.lipschitz_pairs);
  v("flow", "mesh", c.flow.mesh);
  v("mesh", "orbits", c.mesh.orbits);
  v("mesh", "levels", c.mesh.levels);
  v("mesh", "coarse_from", c.mesh.coarse_from);
  v("mesh", "coarse_orbits", c.mesh.coarse_orbits);
  v("mesh", "coarse_levels", c.mesh.coarse_levels);
  v("mesh", "cache_dir", c.mesh.cache_dir);
  v("theorem1", "b_max", c.theorem1.b_max);
  v("theorem1", "bound_pairs", c.theorem1.bound_pairs);
  v("theorem1", "bound_b_max", c.theorem1.bound_b_max);
  v("theorem1", "bound_step", c.theorem1.bound_step);
}

std::string format_value(const std::string& v) { return v; }
std::string format_value(bool v) { return v ? "true" : "false"; }
std::string format_value(double v) { return fmt::format("{}", v); }
template <class I>
std::string format_value(I v) {
  return fmt::format("{}", v);
}

void parse_value(const std::string& s, std::string& out) { out = s; }
void parse_value(const std::string& s, bool& out) {
  if (s == "true" || s == "1")
    out = true;
  else if (s == "false" || s == "0")
    out = false;
  else
    throw ConfigError("expected a boolean, found '" + s + "'");
}
template <class N>
void parse_value(const std::string& s, N& out) {
  N v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("expected a number, found '" + s + "'");
  out = v;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace

MapSpec ExperimentConfig::map_spec() const {
  MapSpec s;
  s.kind = map.kind;
  s.alpha = map.alpha;
  s.beta = map.beta;
  s.deck_shift = map.deck_shift;
  s.radius = map.radius;
  return s;
}

QuadratureMeasure ExperimentConfig::measure() const {
  QuadratureMeasure q;
  q.radius = map_spec().disk_radius();
  q.scheme = quadrature.scheme == "gauss" ? QuadratureMeasure::Scheme::gauss : QuadratureMeasure::Scheme::monte_carlo;
  q.samples = quadrature.samples;
  q.batch = quadrature.batch;
  q.angle_nodes = quadrature.angle_nodes;
  q.seed = run.seed;
  q.workers = run.workers;
  return q;
}

MeshRule ExperimentConfig::mesh_rule() const {
  return {mesh.orbits, mesh.levels, mesh.coarse_from, mesh.coarse_orbits, mesh.coarse_levels};
}

std::string ExperimentConfig::cache_dir() const {
  return mesh.cache_dir.empty() ? run.out_dir + "/cache" : mesh.cache_dir;
}

std::vector<std::pair<int, int>> ExperimentConfig::pairs() const {
  std::vector<std::pair<int, int>> out;
  std::set<int> conv;
  for (auto [a, b] : convergents(map.alpha, range.b_max)) conv.insert(b);
  for (int b = range.b_min; b <= range.b_max; ++b) {
    if (range.a_rule == "convergents" && !conv.count(b)) continue;
    int lo = int(std::floor(b * map.alpha)) + 1;
    for (int a = lo; a < b * map.beta; ++a) {
      if (!(a > b * map.alpha)) continue;
      out.emplace_back(a, b);
      if (range.a_rule != "all") break;
    }
  }
  return out;
}

void ExperimentConfig::validate() const {
  try {
    map_spec().validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  require(decomposition.m >= 1, "decomposition.m must be positive");
  require(decomposition.K_target >= 1.0, "decomposition.K_target must be at least 1");
  require(decomposition.n_radius >= 2 && decomposition.n_angle >= 2, "decomposition sample grid too small");
  require(range.b_min >= 1 && range.b_max >= range.b_min, "range: need 1 <= b_min <= b_max");
  require(range.a_rule == "all" || range.a_rule == "smallest" || range.a_rule == "convergents",
          "range.a_rule must be all, smallest or convergents");
  require(quadrature.scheme == "monte_carlo" || quadrature.scheme == "gauss",
          "quadrature.scheme must be monte_carlo or gauss");
  require(quadrature.samples >= 2 && quadrature.batch >= 1, "quadrature: samples >= 2 and batch >= 1");
  require(quadrature.angle_nodes >= 1, "quadrature.angle_nodes must be positive");
  require(!run.out_dir.empty(), "run.out_dir is empty");
  require(run.workers >= 0, "run.workers must be non-negative");
  require(flow.seeds >= 1 && flow.t_end > 0.0 && flow.tol > 0.0 && flow.scale > 0.0, "flow: bad parameters");
  require(flow.lipschitz_pairs >= 1, "flow.lipschitz_pairs must be positive");
  require(mesh.orbits >= 3 && mesh.levels >= 3 && mesh.coarse_orbits >= 3 && mesh.coarse_levels >= 3,
          "mesh sizes must be at least 3");
  require(theorem1.b_max >= 1 && theorem1.bound_pairs >= 10 && theorem1.bound_step > 0.0,
          "theorem1: bad parameters");
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  ExperimentConfig c;
  std::set<std::string> known;
  visit(c, [&](const char* section, const char* key, auto& field) {
    std::string path = std::string(section) + "." + key;
    known.insert(path);
    auto node = tree.get_child_optional(pt::ptree::path_type(path, '.'));
    if (!node) return;
    try {
      parse_value(node->data(), field);
    } catch (const ConfigError& e) {
      throw ConfigError(path + ": " + e.what());
    }
  });
  for (const auto& [section, sub] : tree) {
    if (sub.empty()) throw ConfigError("key '" + section + "' outside a section");
    for (const auto& kv : sub) {
      std::string path = section + "." + kv.first;
      if (!known.count(path)) throw ConfigError("unknown config key '" + path + "'");
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string to_ini(const ExperimentConfig& c) {
  std::string out, current;
  visit(c, [&](const char* section, const char* key, const auto& field) {
    if (current != section) {
      if (!current.empty()) out += "\n";
      out += fmt::format("[{}]\n", section);
      current = section;
    }
    out += fmt::format("{} = {}\n", key, format_value(field));
  });
  return out;
}

}  // namespace ptrot::cli
