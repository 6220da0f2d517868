#include "ptrot/genfun.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ptrot {

double PolarFactor::guess_x(double X, double y) const {
  double t = kTwoPi * map_.profile().omega(std::hypot(X, y));
  double c = std::cos(t);
  return c > 0.05 ? (X + y * std::sin(t)) / c : X;
}

std::optional<double> PolarFactor::h_closed(double X, double y) const {
  ImplicitSolve s = solve_untwisted(*this, X, y);
  return 0.5 * (X * s.Y + s.x * y) - map_.profile().s0(std::hypot(s.x, y));
}

std::vector<double> PolarFactor::kink_radii() const {
  const auto& p = map_.profile();
  if (p.kind() == AngularProfile::Kind::constant) return {};
  return {1.0, p.band_end()};
}

std::string PolarFactor::describe() const {
  const auto& p = map_.profile();
  if (p.kind() == AngularProfile::Kind::constant) return fmt::format("rotation({:.12g})", p.omega(0.0));
  return fmt::format("polar_band(alpha={:.12g},beta={:.12g},scale={:.12g})", p.alpha(), p.beta(), p.scale());
}

namespace {

ImplicitSolve finish(const Factor& f, double x, double y) {
  Vec2 p(x, y);
  Mat2 J = f.jacobian(p);
  ImplicitSolve s;
  s.x = x;
  s.Y = f.forward(p).y();
  s.gX = 1.0 / J(0, 0);
  s.gy = -J(0, 1) / J(0, 0);
  s.gpX = J(1, 0) * s.gX;
  s.gpy = J(1, 0) * s.gy + J(1, 1);
  return s;
}

}  // namespace

ImplicitSolve solve_untwisted(const Factor& f, double X, double y, const SolveOptions& opt) {
  if (!std::isfinite(X) || !std::isfinite(y)) throw std::domain_error("implicit solve: non-finite argument");
  auto F = [&](double x) { return f.forward(Vec2(x, y)).x() - X; };
  double scale = std::max(1.0, std::abs(X));
  double x = f.guess_x(X, y);
  for (int it = 0; it < opt.max_newton; ++it) {
    double r = F(x);
    if (std::abs(r) <= opt.tol * scale) return finish(f, x, y);
    double d = f.jacobian(Vec2(x, y))(0, 0);
    if (!(d > 0.0)) break;
    double nx = x - r / d;
    if (!std::isfinite(nx)) break;
    x = nx;
  }
  // bisection on a bracket around X
  double w = 4.0 * opt.K * std::abs(X) + 4.0;
  double lo = X - 0.5 * w, hi = X + 0.5 * w;
  int grow = 0;
  while (F(lo) > 0.0 || F(hi) < 0.0) {
    if (++grow > 60) throw std::runtime_error("implicit solve: no bracket, factor not untwisted here");
    lo -= w;
    hi += w;
    w *= 2.0;
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double r = F(mid);
    if (std::abs(r) <= opt.tol * scale || hi - lo < 1e-15 * scale) return finish(f, mid, y);
    (r > 0.0 ? hi : lo) = mid;
  }
  throw std::runtime_error("implicit solve: bisection did not converge");
}

namespace {

// Integral of g over the segment a + s (b - a), s in [0, 1], split where the preimage radius crosses a kink.
template <class G>
double segment_integral(const Factor& f, Vec2 a, Vec2 b, G g, int pieces) {
  using GL = boost::math::quadrature::gauss<double, 20>;
  std::vector<double> cuts{0.0, 1.0};
  auto radius = [&](double s) {
    Vec2 q = a + s * (b - a);
    return std::hypot(solve_untwisted(f, q.x(), q.y()).x, q.y());
  };
  const int n = 64;
  std::vector<double> rs(n + 1);
  for (int k = 0; k <= n; ++k) rs[k] = radius(double(k) / n);
  for (double rk : f.kink_radii()) {
    for (int k = 0; k < n; ++k) {
      if ((rs[k] - rk) * (rs[k + 1] - rk) >= 0.0) continue;
      double lo = double(k) / n, hi = double(k + 1) / n;
      bool lo_below = rs[k] < rk;
      for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        ((radius(mid) < rk) == lo_below ? lo : hi) = mid;
      }
      cuts.push_back(0.5 * (lo + hi));
    }
  }
  std::sort(cuts.begin(), cuts.end());
  double sum = 0.0;
  for (size_t k = 0; k + 1 < cuts.size(); ++k) {
    double w = (cuts[k + 1] - cuts[k]) / pieces;
    for (int j = 0; j < pieces; ++j)
      sum += GL::integrate([&](double s) { return g(a + s * (b - a)); }, cuts[k] + j * w, cuts[k] + (j + 1) * w);
  }
  return sum;
}

}  // namespace

double generating_value(const Factor& f, double X, double y, const QuadratureOptions& opt) {
  Vec2 o(0.0, 0.0), q(X, y);
  double h = segment_integral(
      f, o, q,
      [&](const Vec2& p) {
        ImplicitSolve s = solve_untwisted(f, p.x(), p.y());
        return s.x * y + s.Y * X;
      },
      opt.pieces);
  if (opt.check_path) {
    Vec2 corner(X, 0.0);
    double leg1 = X == 0.0 ? 0.0
                           : X * segment_integral(
                                     f, o, corner,
                                     [&](const Vec2& p) { return solve_untwisted(f, p.x(), 0.0).Y; }, opt.pieces);
    double leg2 = y == 0.0 ? 0.0
                           : y * segment_integral(
                                     f, corner, q, [&](const Vec2& p) { return solve_untwisted(f, X, p.y()).x; },
                                     opt.pieces);
    if (std::abs(leg1 + leg2 - h) > opt.path_tol)
      throw std::runtime_error(
          fmt::format("generating_value: path dependence {:.3e}, factor not area preserving", leg1 + leg2 - h));
  }
  return h;
}

double CertificateReport::observed_K() const {
  double k = 1.0;
  for (const auto& c : conditions) k = std::max(k, c.max_ratio);
  return k;
}

std::string CertificateReport::to_text() const {
  std::string s = "# empirical certificate from sampled difference quotients, not a proof\n";
  s += fmt::format("K {:.6f}\nr_max {:.6f}\ngrid {}x{}\nuntwisted {}\n", K, r_max, n_radius, n_angle,
                   untwisted ? "yes" : "no");
  for (const auto& c : conditions)
    s += fmt::format("condition {} max_ratio {:.9f} samples {}\n", c.name, c.max_ratio, c.samples);
  s += fmt::format("pass {}\n", pass ? "yes" : "no");
  return s;
}

CertificateReport verify_untwisted_lipschitz(const Factor& f, double K, const SampleSpec& spec) {
  CertificateReport rep;
  rep.K = K;
  rep.r_max = spec.r_max;
  rep.n_radius = spec.n_radius;
  rep.n_angle = spec.n_angle;
  ConditionReport bi{"f_bi_lipschitz"}, gx{"g_in_X_bi_lipschitz"}, gpy{"gprime_in_y_bi_lipschitz"},
      gy{"g_in_y_lipschitz"}, gpx{"gprime_in_X_lipschitz"};
  auto bump = [](ConditionReport& c, double ratio, bool two_sided) {
    if (!std::isfinite(ratio) || ratio <= 0.0) ratio = two_sided ? 1e300 : (ratio == 0.0 ? 0.0 : 1e300);
    double v = two_sided ? std::max(ratio, 1.0 / ratio) : ratio;
    c.max_ratio = std::max(c.max_ratio, v);
    ++c.samples;
  };
  auto grid = [&](int k, int j) { return CoverPoint{double(j) / spec.n_angle, spec.r_max * k / spec.n_radius}.project(); };
  SolveOptions so;
  so.K = K;
  for (int k = 1; k <= spec.n_radius; ++k) {
    for (int j = 0; j < spec.n_angle; ++j) {
      Vec2 p = grid(k, j);
      Vec2 fp = f.forward(p);
      if (!(f.jacobian(p)(0, 0) > 0.0)) rep.untwisted = false;
      for (Vec2 q : {grid(k, j + 1), k < spec.n_radius ? grid(k + 1, j) : Vec2(grid(k - 1, j))}) {
        bump(bi, (f.forward(q) - fp).norm() / (q - p).norm(), true);
      }
      double X = fp.x(), y = p.y();
      double d = 1e-5 * (1.0 + std::abs(X) + std::abs(y));
      try {
        ImplicitSolve s0 = solve_untwisted(f, X, y, so);
        ImplicitSolve sX = solve_untwisted(f, X + d, y, so);
        ImplicitSolve sy = solve_untwisted(f, X, y + d, so);
        bump(gx, (sX.x - s0.x) / d, true);
        bump(gpy, (sy.Y - s0.Y) / d, true);
        bump(gy, std::abs(sy.x - s0.x) / d, false);
        bump(gpx, std::abs(sX.Y - s0.Y) / d, false);
      } catch (const std::exception&) {
        rep.untwisted = false;
      }
    }
  }
  rep.conditions = {bi, gx, gpy, gy, gpx};
  rep.pass = rep.untwisted;
  for (const auto& c : rep.conditions) rep.pass = rep.pass && c.max_ratio <= K + 1e-9;
  return rep;
}

FactorChain::FactorChain(std::vector<FactorPtr> factors, double K) : factors_(std::move(factors)), K_(K) {
  if (factors_.empty()) throw std::invalid_argument("empty factor chain");
  uniform_ = std::all_of(factors_.begin(), factors_.end(), [&](const FactorPtr& p) { return p == factors_[0]; });
}

const Factor& FactorChain::factor(int i) const {
  int m = int(factors_.size());
  int k = ((i - 1) % m + m) % m;
  return *factors_[k];
}

Vec2 FactorChain::compose(const Vec2& p) const {
  Vec2 q = p;
  for (const auto& f : factors_) q = f->forward(q);
  return q;
}

DecompositionResult factor_polar(const AngularProfile& profile, int m, double K_target,
                                 const std::vector<FactorPtr>& extra, const SampleSpec& spec) {
  if (m < 1) throw std::invalid_argument("factor count must be positive");
  auto base = std::make_shared<PolarFactor>(profile.scaled(1.0 / m));
  std::vector<FactorPtr> fs(m, base);
  fs.insert(fs.end(), extra.begin(), extra.end());
  DecompositionResult res;
  res.pass = true;
  res.reports.push_back(verify_untwisted_lipschitz(*base, K_target, spec));
  for (const auto& e : extra) res.reports.push_back(verify_untwisted_lipschitz(*e, K_target, spec));
  double K = 1.0;
  for (const auto& r : res.reports) {
    res.pass = res.pass && r.pass;
    K = std::max(K, r.observed_K());
  }
  res.chain = FactorChain(std::move(fs), K);
  return res;
}

FactorChain certified_chain(const AngularProfile& profile, int m, double K_target) {
  auto res = factor_polar(profile, m, K_target);
  if (!res.pass)
    throw std::runtime_error(fmt::format("certification failed at m={} K={}", m, K_target));
  return res.chain;
}

}  // namespace ptrot
