#pragma once

#include "ptrot/foliation.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ptrot {

struct QuadratureMeasure {
  enum class Scheme { monte_carlo, gauss };
  double radius = 1.0;
  Scheme scheme = Scheme::monte_carlo;
  long samples = 200000;  // pairs
  std::uint64_t seed = 1;
  int workers = 0;     // 0: hardware concurrency
  long batch = 1000;   // pairs per random stream
  int angle_nodes = 32;  // per angle in the product scheme

  double area() const { return kPi * radius * radius; }
};

struct CalabiEstimate {
  std::string estimator;
  double value = 0.0;
  double error = 0.0;  // three standard errors, or the quadrature tolerance
  long samples = 0;
  long rejected = 0;
  std::uint64_t seed = 0;
  double seconds = 0.0;
};

struct McResult {
  std::vector<double> mean;
  std::vector<double> se;
  long samples = 0;
  long rejected = 0;
  double seconds = 0.0;
};

// Integrand: writes `outputs` values for the pair and returns false to reject the sample.
using PairIntegrand = std::function<bool(const Vec2& z, const Vec2& zp, double* out)>;

// Pairs uniform in the disk, radius-stratified per batch; one random stream per batch.
McResult monte_carlo_pairs(const QuadratureMeasure& measure, int outputs, const PairIntegrand& f);
// Same with one point per sample.
McResult monte_carlo_points(const QuadratureMeasure& measure, int outputs,
                            const std::function<bool(const Vec2&, double*)>& f);

// Turns of f_s(z') - f_s(z) over the isotopy, by continuous unwrapping.
double ang_winding(const IsotopyPath& path, const Vec2& z, const Vec2& zp);

CalabiEstimate calabi_ang(const IsotopyPath& path, const QuadratureMeasure& measure);

struct ActionCalabi {
  double cal = 0.0;        // standard primitive
  double cal_exact = 0.0;  // primitive plus an exact form
  double rot = 0.0;        // boundary rotation number of the lift
  double area = 0.0;
  double cal_tilde = 0.0;  // cal + area^2 rot
};

// Polar maps of the supported family on the disk of their natural radius.
ActionCalabi calabi_action(const MapSpec& spec);
// 4 pi^2 int_0^R omega(r) r^3 dr = 2 int H dmu with H(R) = 0.
double radial_calabi_tilde(const AngularProfile& profile, int deck_shift, double R);

CalabiEstimate calabi_link(const IsotopyPath& path, const FoliationChart& F, double ell_phi,
                           const QuadratureMeasure& measure, const TrackOptions& opt = {});
// Integral of the displacement function.
CalabiEstimate rotation_integral(const FoliationChart& F, double ell_phi, const FoliationChart::CoverMap& f_lift,
                                 const QuadratureMeasure& measure);

struct BoundOptions {
  long pairs = 2000;
  std::uint64_t seed = 1;
  int workers = 0;
  double step = 0.125;
};

struct BoundReport {
  int a = 0, b = 0, m = 0;
  double A = 0.0, C = 0.0;
  double mass = 0.0, mass_err = 0.0;      // mu x mu of {tau-bar != 0}
  double integral = 0.0, integral_err = 0.0;  // int tau-bar
  double first_bound = 0.0;   // 2AC
  double second_bound = 0.0;  // 8mbAC
  double m_integral = 0.0, m_integral_err = 0.0;              // f^b T^{-a}, chart of q_1(F)
  double m_integral_euclid = 0.0, m_integral_euclid_err = 0.0;  // same, Euclidean chart
  long samples = 0;
  long rejected = 0;
  long exhausted = 0;
  double resolution = 0.0;
  double seconds = 0.0;
  bool under_resolved = false;
  bool first_holds() const { return mass - mass_err <= first_bound; }
  bool second_holds() const { return integral - integral_err <= second_bound; }
};

BoundReport bound_experiment(const DeltaDisk& disk, const EbSpace& space, const BoundOptions& opt = {});

// Continued-fraction convergents a/b of x with b <= bmax.
std::vector<std::pair<int, int>> convergents(double x, int bmax);

struct ChainCheck {
  double target = 0.0;     // (a/b) A^2
  double gap_term = 0.0;   // AC/b
  double residual_plus = 0.0;   // link - target - AC/b
  double residual_minus = 0.0;  // link - target + AC/b
  double bound = 0.0;      // 8mAC
  bool holds() const { return std::abs(residual_plus) <= bound; }
};

ChainCheck final_chain(double link, double alpha, double beta, int a, int b, int m);

// Mesh size per row: coarser meshes from b = coarse_from on.
struct MeshRule {
  int orbits = 256;
  int levels = 256;
  int coarse_from = 13;
  int coarse_orbits = 128;
  int coarse_levels = 128;
  DeltaDiskOptions options(int b) const;
};

struct Theorem1Options {
  double alpha = 0.6180339887498949;
  double beta = 0.7680339887498949;
  int m = 10;
  double K = 4.0;
  int b_max = 34;
  QuadratureMeasure link;       // radius is set per row
  BoundOptions bound;
  int bound_b_max = 34;         // rows with larger b skip the bound experiment
  MeshRule mesh;
  std::string cache_dir;        // empty: no mesh cache
  std::function<void(const std::string&)> log;
};

struct Theorem1Row {
  int a = 0, b = 0;
  bool skipped = false;
  std::string reason;
  double A = 0.0, C = 0.0;
  CalabiEstimate link;
  double closed_form = 0.0;  // pi^2 alpha + restricted correction
  ChainCheck chain;
  double deviation = 0.0;    // |link - pi^2 alpha|
  std::optional<BoundReport> bound;
  double resolution = 0.0;
  double seconds = 0.0;
};

struct Theorem1Table {
  std::vector<Theorem1Row> rows;
  bool chain_holds = true;
  bool bounds_hold = true;
  bool monotone = true;  // deviation non-increasing as 8mAC decreases
  double seconds = 0.0;
  bool pass() const { return chain_holds && bounds_hold && monotone; }
};

Theorem1Table theorem1_table(const Theorem1Options& opt);

}  // namespace ptrot
