#include "ptrot/foliation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ptrot {

std::string to_string(ChartSource s) {
  switch (s) {
    case ChartSource::euclidean: return "euclidean";
    case ChartSource::image: return "image";
    case ChartSource::gradient: return "gradient";
  }
  return "unknown";
}

FoliationChart FoliationChart::euclidean() {
  return FoliationChart([](const CoverPoint& z) { return LeafPosition{z.ell, z.r}; }, ChartSource::euclidean, 0.0);
}

FoliationChart FoliationChart::image(const FoliationChart& base, CoverMap lifted_inverse) {
  return FoliationChart([base, inv = std::move(lifted_inverse)](const CoverPoint& z) { return base(inv(z)); },
                        ChartSource::image, base.eps());
}

QuarterAngle theta(const LeafPosition& a, const LeafPosition& b, double eps) {
  double d = b.leaf - a.leaf;
  if (std::abs(d) <= eps) {
    if (b.along > a.along) return {0};
    if (b.along < a.along) return {2};
    throw std::domain_error("theta: coincident points");
  }
  return {d > 0.0 ? 1 : 3};
}

QuarterAngle theta(const CoverPoint& z, const CoverPoint& zp, const FoliationChart& F) {
  return theta(F(z), F(zp), F.eps());
}

double delta_value(QuarterAngle t) {
  if (t.value == 1) return 0.5;
  if (t.value == 3) return -0.5;
  return 0.0;
}

double delta(const CoverPoint& z, const CoverPoint& zp, const FoliationChart& F) {
  return delta_value(theta(z, zp, F));
}

namespace {

long floor_div4(long v) { return v >= 0 ? v / 4 : -((-v + 3) / 4); }

// Number of multiples of 4 in [lo, hi].
long count4(long lo, long hi) { return lo > hi ? 0 : floor_div4(hi) - floor_div4(lo - 1); }

}  // namespace

double lambda_count(long k, long l) {
  if (k == l) return 0.0;
  if (k > l) return -lambda_count(l, k);
  double ends = (k % 4 == 0 ? 0.5 : 0.0) + (l % 4 == 0 ? 0.5 : 0.0);
  return double(count4(k + 1, l - 1)) + ends;
}

PairTracker::PairTracker(PairFamily family, double s0, double s1, const TrackSample& first,
                         const TrackOptions& opt)
    : family_(std::move(family)), opt_(opt) {
  if (!(s1 >= s0)) throw std::invalid_argument("tracker: empty parameter interval");
  if (!(opt.max_step > 0.0)) throw std::invalid_argument("tracker: step must be positive");
  int steps = std::max(1, int(std::ceil((s1 - s0) / opt.max_step - 1e-12)));
  samples_.reserve(size_t(steps) + 1);
  samples_.emplace_back(s0, family_(s0, first));
  for (int j = 1; j <= steps; ++j) {
    double s = j == steps ? s1 : s0 + (s1 - s0) * j / steps;
    samples_.emplace_back(s, family_(s, samples_.back().second));
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [s, t] : samples_) {
    double d = t.a.leaf - t.b.leaf;
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  k_lo_ = long(std::floor(lo)) - 2;
  k_hi_ = long(std::ceil(hi)) + 2;
}

TauResult PairTracker::translate(long k) const {
  auto th = [&](const TrackSample& x) {
    LeafPosition b = x.b;
    b.leaf += double(k);
    return theta(x.a, b, opt_.eps);
  };
  TauResult res;
  auto unit = [](QuarterAngle from, QuarterAngle to) {
    int d = (to.value - from.value + 4) % 4;
    return d == 0 ? 0 : (d == 1 ? 1 : -1);
  };
  // Lifted change across [sa, sb] when the end values are opposite.
  std::function<long(double, const TrackSample&, QuarterAngle, double, const TrackSample&, QuarterAngle, int)>
      cross = [&](double sa, const TrackSample& A, QuarterAngle ta, double sb, const TrackSample& B,
                  QuarterAngle tb, int depth) -> long {
    double sm = 0.5 * (sa + sb);
    TrackSample M = family_(sm, A);
    ++res.bisections;
    if (depth >= opt_.max_bisect) {
      res.exhausted = true;
      QuarterAngle tm;
      LeafPosition b = M.b;
      b.leaf += double(k);
      if (ta.odd())
        tm = {b.along >= M.a.along ? 0 : 2};
      else
        tm = {b.leaf >= M.a.leaf ? 1 : 3};
      return unit(ta, tm) + unit(tm, tb);
    }
    QuarterAngle tm = th(M);
    if (tm == ta) return cross(sm, M, tm, sb, B, tb, depth + 1);
    if (tm == tb) return cross(sa, A, ta, sm, M, tm, depth + 1);
    return unit(ta, tm) + unit(tm, tb);
  };
  QuarterAngle cur = th(samples_[0].second);
  long lifted = cur.value;
  res.start = lifted;
  for (size_t i = 1; i < samples_.size(); ++i) {
    QuarterAngle nxt = th(samples_[i].second);
    if (nxt.adjacent(cur))
      lifted += unit(cur, nxt);
    else
      lifted += cross(samples_[i - 1].first, samples_[i - 1].second, cur, samples_[i].first, samples_[i].second,
                      nxt, 0);
    cur = nxt;
  }
  res.end = lifted;
  return res;
}

AnnulusSums PairTracker::sums() const {
  if (k_hi_ - k_lo_ > opt_.k_budget) throw std::runtime_error("annulus sums: translate budget exceeded");
  AnnulusSums out;
  out.k_min = k_lo_;
  out.k_max = k_hi_;
  for (long k = k_lo_; k <= k_hi_; ++k) {
    TauResult r = translate(k);
    out.tau_bar += double(std::abs(r.tau()));
    out.tau += r.tau();
    out.lambda += r.lambda();
    out.max_abs_tau = std::max(out.max_abs_tau, std::abs(r.tau()));
    out.exhausted = out.exhausted || r.exhausted;
  }
  return out;
}

namespace {

PairTracker moving_pair_tracker(const CoverPoint& z, const CoverPoint& zp, const FoliationChart& F,
                                const IsotopyPath& path, const TrackOptions& opt) {
  if (!(z.r > 0.0) || !(zp.r > 0.0) || z.r > path.r_max || zp.r > path.r_max)
    throw std::domain_error("point outside the punctured disk");
  PairFamily fam = [&F, &path, z, zp](double s, const TrackSample&) {
    TrackSample t;
    t.a = F(path.lift(s, z));
    t.b = F(path.lift(s, zp));
    return t;
  };
  TrackOptions o = opt;
  o.max_step = std::min(opt.max_step, path.max_step);
  o.eps = F.eps();
  return PairTracker(fam, 0.0, path.s_max, TrackSample{}, o);
}

}  // namespace

TauResult tau_hat(const CoverPoint& z, const CoverPoint& zp, const FoliationChart& F, const IsotopyPath& path,
                  const TrackOptions& opt) {
  return moving_pair_tracker(z, zp, F, path, opt).translate(0);
}

AnnulusSums annulus_sums(const Vec2& z, const Vec2& zp, const FoliationChart& F, const IsotopyPath& path,
                         const TrackOptions& opt) {
  if ((z - zp).norm() == 0.0) throw std::domain_error("annulus sums: coincident points");
  return moving_pair_tracker(CoverPoint::lift(z), CoverPoint::lift(zp), F, path, opt).sums();
}

CoverPoint fundamental_lift(const FoliationChart& F, double ell_phi, const Vec2& z) {
  if (z.norm() == 0.0) throw std::domain_error("fundamental lift of the origin");
  CoverPoint p = CoverPoint::lift(z, ell_phi + 0.5);
  double k = std::floor(F(p).leaf - ell_phi);
  p.ell -= k;
  return p;
}

int displacement_m(const FoliationChart& F, double ell_phi, const FoliationChart::CoverMap& f_lift, const Vec2& z) {
  CoverPoint p = fundamental_lift(F, ell_phi, z);
  return int(std::floor(F(f_lift(p)).leaf - ell_phi));
}

int displacement_m(const FoliationChart& F, double ell_phi, const IsotopyPath& path, const Vec2& z) {
  return displacement_m(F, ell_phi, [&path](const CoverPoint& p) { return eval_lift(path, path.s_max, p); }, z);
}

double Lambda(const FoliationChart& F, double ell_phi, const IsotopyPath& path, const Vec2& z, const Vec2& zp,
              const TrackOptions& opt) {
  return annulus_sums(z, zp, F, path, opt).lambda + displacement_m(F, ell_phi, path, z);
}

PairTracker fixed_pair_tracker(const ChartFamily& family, const CoverPoint& z, const CoverPoint& zp, double s0,
                               double s1, std::optional<MeshCoord> hz, std::optional<MeshCoord> hzp,
                               const TrackOptions& opt) {
  PairFamily fam = [family, z, zp](double s, const TrackSample& near) {
    TrackSample t;
    t.ha = near.ha;
    t.hb = near.hb;
    t.a = family(s, z, t.ha);
    t.b = family(s, zp, t.hb);
    return t;
  };
  TrackSample seed;
  seed.ha = hz;
  seed.hb = hzp;
  return PairTracker(fam, s0, s1, seed, opt);
}

DistanceEstimate winding_distance_estimate(const std::vector<PairTracker>& trackers) {
  DistanceEstimate d;
  for (const auto& t : trackers) {
    AnnulusSums s = t.sums();
    d.value = std::max(d.value, s.max_abs_tau);
    d.exhausted += s.exhausted ? 1 : 0;
    ++d.pairs;
  }
  return d;
}

namespace {

template <class Step>
Estimate birkhoff(long window, Step step) {
  if (window < 2) throw std::invalid_argument("recurrence window too short");
  double sum = 0.0;
  std::vector<std::pair<long, double>> returns;
  for (long t = 1; t <= window; ++t) {
    auto [value, back] = step();
    sum += value;
    if (back) returns.emplace_back(t, sum / double(t));
  }
  std::vector<double> late;
  for (const auto& [t, e] : returns)
    if (t >= window / 2) late.push_back(e);
  if (late.empty()) throw std::runtime_error("no recurrence within the window");
  Estimate est;
  est.value = late.back();
  for (double e : late) est.error = std::max(est.error, std::abs(e - est.value));
  est.error += 1.0 / double(window);
  est.window = window;
  est.samples = long(returns.size());
  return est;
}

}  // namespace

Estimate rotation_number_estimate(const FoliationChart& F, double ell_phi, const IsotopyPath& path, const Vec2& z,
                                  long window, const RecurrenceSet& K) {
  if (!K.contains(z)) throw std::domain_error("rotation number: start point outside the recurrence set");
  Vec2 p = z;
  return birkhoff(window, [&]() {
    double m = displacement_m(F, ell_phi, path, p);
    p = path.family(path.s_max, p);
    return std::make_pair(m, K.contains(p));
  });
}

Estimate linking_number_estimate(const FoliationChart& F, double ell_phi, const IsotopyPath& path, const Vec2& z,
                                 const Vec2& zp, long window, const RecurrenceSet& K, const TrackOptions& opt) {
  if (!K.contains(z) || !K.contains(zp)) throw std::domain_error("linking number: start outside the recurrence set");
  Vec2 p = z, q = zp;
  return birkhoff(window, [&]() {
    double v = Lambda(F, ell_phi, path, p, q, opt);
    p = path.family(path.s_max, p);
    q = path.family(path.s_max, q);
    return std::make_pair(v, K.contains(p) && K.contains(q));
  });
}

ViewKey projected_view(int i, double s) {
  if (s < 0.0 || s > 2.0) throw std::domain_error("projected view: parameter outside [0,2]");
  return s <= 1.0 ? ViewKey{i, false, s} : ViewKey{i, true, s - 1.0};
}

LeafPosition gradient_position(const DeltaDisk& disk, const ViewKey& key, const CoverPoint& z,
                               std::optional<MeshCoord>& hint) {
  auto c = disk.invert(key, z.project(), hint ? &*hint : nullptr);
  if (!c) throw std::domain_error(fmt::format("point at radius {} outside the invariant disk", z.r));
  hint = *c;
  double e = disk.landing_angle(key, c->u);
  double w = disk.excursion(key, *c);
  return {e + std::round(z.ell + w - e), c->v};
}

FoliationChart gradient_foliation_chart(const DeltaDisk& disk, int i, double s) {
  ViewKey key = projected_view(i, s);
  return FoliationChart(
      [&disk, key](const CoverPoint& z) {
        std::optional<MeshCoord> h;
        return gradient_position(disk, key, z, h);
      },
      ChartSource::gradient);
}

namespace {

CoverPoint factor_inverse_lift(const Factor& f, const CoverPoint& z) {
  if (auto pf = dynamic_cast<const PolarFactor*>(&f)) return {z.ell - pf->profile().omega(z.r), z.r};
  return CoverPoint::lift(f.inverse(z.project()), z.ell);
}

CoverPoint factor_forward_lift(const Factor& f, const CoverPoint& z) {
  if (auto pf = dynamic_cast<const PolarFactor*>(&f)) return {z.ell + pf->profile().omega(z.r), z.r};
  return CoverPoint::lift(f.forward(z.project()), z.ell);
}

}  // namespace

CoverPoint chain_inverse_lift(const FactorChain& chain, int n, int k, const CoverPoint& z) {
  CoverPoint p = z;
  for (int i = n; i > n - k; --i) p = factor_inverse_lift(chain.factor(i), p);
  return p;
}

CoverPoint chain_forward_lift(const FactorChain& chain, int first, int count, const CoverPoint& z) {
  CoverPoint p = z;
  for (int i = first; i < first + count; ++i) p = factor_forward_lift(chain.factor(i), p);
  return p;
}

ChartFamily projected_family(const DeltaDisk& disk, int i, bool primed) {
  return [&disk, i, primed](double s, const CoverPoint& z, std::optional<MeshCoord>& hint) {
    return gradient_position(disk, ViewKey{i, primed, std::clamp(s, 0.0, 1.0)}, z, hint);
  };
}

namespace {

std::pair<int, ViewKey> isotopy_stage(const DeltaDisk& disk, double s) {
  int n = disk.n();
  if (s < 0.0 || s > 2.0 * n) throw std::domain_error("good isotopy: parameter out of range");
  int k = std::min(int(std::floor(s / 2.0)), n - 1);
  double rest = s - 2.0 * k;
  ViewKey key = rest <= 1.0 ? ViewKey{n - k + 1, false, rest} : ViewKey{n - k + 1, true, rest - 1.0};
  return {k, key};
}

}  // namespace

ChartFamily good_isotopy_family(const DeltaDisk& disk, const EbSpace& space) {
  return [&disk, &space](double s, const CoverPoint& z, std::optional<MeshCoord>& hint) {
    auto [k, key] = isotopy_stage(disk, s);
    CoverPoint y = chain_inverse_lift(space.chain(), disk.n(), k, z);
    return gradient_position(disk, key, y, hint);
  };
}

CoverPoint good_isotopy_lift(const DeltaDisk& disk, const EbSpace& space, double s, const MeshCoord& c,
                             double near_ell) {
  auto [k, key] = isotopy_stage(disk, s);
  CoverPoint y = CoverPoint::lift(disk.eval(key, c), near_ell);
  return chain_forward_lift(space.chain(), disk.n() - k + 1, k, y);
}

BrouwerReport brouwer_check(const DeltaDisk& disk, const EbSpace& space, int leaves, int points_per_leaf) {
  if (leaves < 1 || points_per_leaf < 1) throw std::invalid_argument("brouwer check: empty sample");
  BrouwerReport rep;
  rep.min_gap = std::numeric_limits<double>::infinity();
  ViewKey q1{1, false, 0.0};
  int N = disk.orbits(), L = disk.levels();
  for (int j = 0; j < leaves; ++j) {
    double u = (j + 0.5) * N / leaves;
    ++rep.leaves;
    for (int t = 0; t < points_per_leaf; ++t) {
      MeshCoord c{u, (t + 0.5) * (L - 1) / points_per_leaf};
      CoverPoint p = CoverPoint::lift(disk.eval(q1, c));
      std::optional<MeshCoord> h = c;
      double leaf = gradient_position(disk, q1, p, h).leaf;
      CoverPoint img = chain_forward_lift(space.chain(), 1, disk.n(), p);
      img.ell -= disk.a();
      std::optional<MeshCoord> hi;
      double d = gradient_position(disk, q1, img, hi).leaf - leaf;
      ++rep.points;
      rep.min_gap = std::min(rep.min_gap, std::abs(d));
      if (std::abs(d) <= kLeafEps)
        ++rep.on_leaf;
      else if (d > 0.0)
        ++rep.left;
      else
        ++rep.right;
    }
  }
  return rep;
}

}  // namespace ptrot
