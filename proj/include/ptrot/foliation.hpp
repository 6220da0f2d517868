#pragma once

#include "ptrot/delta_disk.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ptrot {

inline constexpr double kLeafEps = 1e-9;

// Element of Z/4Z with the digital line topology: odd values open, even values closed.
struct QuarterAngle {
  int value = 0;

  static QuarterAngle of(long v) { return {int(((v % 4) + 4) % 4)}; }
  bool odd() const { return value % 2 != 0; }
  // Equal or adjacent values: the only moves of a continuous path.
  bool adjacent(QuarterAngle o) const { return (value - o.value + 4) % 4 != 2; }
  QuarterAngle operator+(QuarterAngle o) const { return of(value + o.value); }
  bool operator==(const QuarterAngle& o) const { return value == o.value; }
};

struct LiftedAngle {
  long value = 0;
  QuarterAngle base() const { return QuarterAngle::of(value); }
};

// Leaf label (deck shift adds 1) and position along the leaf (increasing toward the boundary).
struct LeafPosition {
  double leaf = 0.0;
  double along = 0.0;
};

enum class ChartSource { euclidean, image, gradient };
std::string to_string(ChartSource s);

class FoliationChart {
 public:
  using Coord = std::function<LeafPosition(const CoverPoint&)>;
  using CoverMap = std::function<CoverPoint(const CoverPoint&)>;

  FoliationChart(Coord coord, ChartSource source, double eps = kLeafEps)
      : coord_(std::move(coord)), source_(source), eps_(eps) {}

  // Rays from the origin; exact comparison.
  static FoliationChart euclidean();
  // Chart of h(F) from the chart of F and a lift of h^{-1}.
  static FoliationChart image(const FoliationChart& base, CoverMap lifted_inverse);

  LeafPosition operator()(const CoverPoint& z) const { return coord_(z); }
  ChartSource source() const { return source_; }
  double eps() const { return eps_; }

 private:
  Coord coord_;
  ChartSource source_;
  double eps_;
};

// 0: same leaf, b ahead; 1: leaf of b on the left; 2: same leaf, b behind; 3: leaf of b on the right.
QuarterAngle theta(const LeafPosition& a, const LeafPosition& b, double eps = kLeafEps);
QuarterAngle theta(const CoverPoint& z, const CoverPoint& zp, const FoliationChart& F);
// 0 on the same leaf, 1/2 if the leaf of b is on the left, -1/2 on the right.
double delta_value(QuarterAngle t);
double delta(const CoverPoint& z, const CoverPoint& zp, const FoliationChart& F);
// Algebraic count of crossings of 4Z by a path from k to l, endpoints counting 1/2.
double lambda_count(long k, long l);

struct TrackOptions {
  double max_step = 0.05;
  int max_bisect = 40;
  double eps = kLeafEps;
  int k_budget = 100000;
};

// Two tracked points in the chart, with continuation hints for mesh charts.
struct TrackSample {
  LeafPosition a, b;
  std::optional<MeshCoord> ha, hb;
};

// Sample at parameter s; `near` is an already computed sample at a nearby parameter.
using PairFamily = std::function<TrackSample(double s, const TrackSample& near)>;

struct TauResult {
  long start = 0;
  long end = 0;
  int bisections = 0;
  bool exhausted = false;
  long tau() const { return end - start; }
  double lambda() const { return lambda_count(start, end); }
};

struct AnnulusSums {
  double tau_bar = 0.0;
  long tau = 0;
  double lambda = 0.0;
  long max_abs_tau = 0;
  long k_min = 0;
  long k_max = 0;
  bool exhausted = false;
};

// Lifted quarter angle of (a, T^k b) along a parameter interval.
class PairTracker {
 public:
  PairTracker(PairFamily family, double s0, double s1, const TrackSample& first, const TrackOptions& opt = {});

  TauResult translate(long k) const;
  AnnulusSums sums() const;
  std::pair<long, long> k_range() const { return {k_lo_, k_hi_}; }
  const std::vector<std::pair<double, TrackSample>>& samples() const { return samples_; }

 private:
  PairFamily family_;
  TrackOptions opt_;
  std::vector<std::pair<double, TrackSample>> samples_;
  long k_lo_ = 0, k_hi_ = 0;
};

// theta of (f_s z, f_s z') in F along the isotopy, lifted.
TauResult tau_hat(const CoverPoint& z, const CoverPoint& zp, const FoliationChart& F, const IsotopyPath& path,
                  const TrackOptions& opt = {});
AnnulusSums annulus_sums(const Vec2& z, const Vec2& zp, const FoliationChart& F, const IsotopyPath& path,
                         const TrackOptions& opt = {});

// Lift of z whose leaf label lies in [ell_phi, ell_phi + 1).
CoverPoint fundamental_lift(const FoliationChart& F, double ell_phi, const Vec2& z);
int displacement_m(const FoliationChart& F, double ell_phi, const FoliationChart::CoverMap& f_lift, const Vec2& z);
// Displacement of the end map of the isotopy lift.
int displacement_m(const FoliationChart& F, double ell_phi, const IsotopyPath& path, const Vec2& z);

// lambda_{f,F}(z, z') + m(z)
double Lambda(const FoliationChart& F, double ell_phi, const IsotopyPath& path, const Vec2& z, const Vec2& zp,
              const TrackOptions& opt = {});

// Chart of a continuous family of foliations G_s at a fixed cover point.
using ChartFamily = std::function<LeafPosition(double s, const CoverPoint& z, std::optional<MeshCoord>& hint)>;

// Tracker of theta(z, z', G_s) for fixed points.
PairTracker fixed_pair_tracker(const ChartFamily& family, const CoverPoint& z, const CoverPoint& zp, double s0,
                               double s1, std::optional<MeshCoord> hz = {}, std::optional<MeshCoord> hzp = {},
                               const TrackOptions& opt = {});

struct DistanceEstimate {
  long value = 0;  // lower bound of d
  long pairs = 0;
  long exhausted = 0;
};

// sup |tau-hat| over the sampled pairs and all translates.
DistanceEstimate winding_distance_estimate(const std::vector<PairTracker>& trackers);

struct Estimate {
  double value = 0.0;
  double error = 0.0;
  long window = 0;
  long samples = 0;
};

struct RecurrenceSet {
  double r_min = 0.0;
  double r_max = 1e300;
  bool contains(const Vec2& p) const {
    double r = p.norm();
    return r >= r_min && r <= r_max;
  }
};

// Birkhoff averages of m along the orbit at the return times to K.
Estimate rotation_number_estimate(const FoliationChart& F, double ell_phi, const IsotopyPath& path, const Vec2& z,
                                  long window, const RecurrenceSet& K = {});
// Birkhoff averages of Lambda along the pair orbit at joint return times.
Estimate linking_number_estimate(const FoliationChart& F, double ell_phi, const IsotopyPath& path, const Vec2& z,
                                 const Vec2& zp, long window, const RecurrenceSet& K = {},
                                 const TrackOptions& opt = {});

// View of q_i^s (s in [0,1]) or q'_i^{s-1} (s in [1,2]).
ViewKey projected_view(int i, double s);
// Chart of the projected gradient foliation: leaf label from the landing angle, along = level coordinate.
LeafPosition gradient_position(const DeltaDisk& disk, const ViewKey& key, const CoverPoint& z,
                               std::optional<MeshCoord>& hint);
FoliationChart gradient_foliation_chart(const DeltaDisk& disk, int i, double s);

// Lift of F_k^{-1} = f_{n-k+1}^{-1} ... f_n^{-1}; polar factors lift exactly.
CoverPoint chain_inverse_lift(const FactorChain& chain, int n, int k, const CoverPoint& z);
CoverPoint chain_forward_lift(const FactorChain& chain, int first, int count, const CoverPoint& z);

// s in [0,1] -> q_i^{s}(F) or q'_i^{s}(F).
ChartFamily projected_family(const DeltaDisk& disk, int i, bool primed);
// s in [0, 2mb] -> the image of F_1 = q_1(F) by the good isotopy at time s.
ChartFamily good_isotopy_family(const DeltaDisk& disk, const EbSpace& space);
// Point of D_{a/b} at time s of the good isotopy for mesh coordinate c of q_1, lifted.
CoverPoint good_isotopy_lift(const DeltaDisk& disk, const EbSpace& space, double s, const MeshCoord& c,
                             double near_ell);

struct BrouwerReport {
  long leaves = 0;
  long points = 0;
  long left = 0;
  long right = 0;
  long on_leaf = 0;
  double min_gap = 0.0;  // smallest |label difference|
  bool pass() const { return points > 0 && left == 0 && on_leaf == 0; }
};

// Position of f^b T^{-a}(phi) relative to sampled lifted leaves phi of q_1(F).
BrouwerReport brouwer_check(const DeltaDisk& disk, const EbSpace& space, int leaves, int points_per_leaf);

}  // namespace ptrot
