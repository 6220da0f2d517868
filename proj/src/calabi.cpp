#include "ptrot/calabi.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

namespace ptrot {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

double wrap_half(double t) { return t - std::round(t); }

double turns_of(const Vec2& p) { return std::atan2(p.y(), p.x()) / kTwoPi; }

int worker_count(int requested) {
  if (requested > 0) return requested;
  unsigned h = std::thread::hardware_concurrency();
  return h == 0 ? 1 : int(h);
}

struct BatchSums {
  std::vector<double> sum;
  long accepted = 0;
  long rejected = 0;
};

// Runs `batches` jobs on a worker pool; job b writes only slot b.
void run_batches(long batches, int workers, const std::function<void(long)>& job) {
  std::atomic<long> next{0};
  auto loop = [&]() {
    for (long b = next++; b < batches; b = next++) job(b);
  };
  int w = int(std::min<long>(worker_count(workers), std::max<long>(batches, 1)));
  if (w <= 1) {
    loop();
    return;
  }
  std::vector<std::thread> pool;
  for (int i = 0; i < w; ++i) pool.emplace_back(loop);
  for (auto& t : pool) t.join();
}

McResult reduce(const std::vector<BatchSums>& parts, int outputs, double seconds) {
  McResult r;
  r.mean.assign(size_t(outputs), 0.0);
  r.se.assign(size_t(outputs), 0.0);
  for (const auto& p : parts) {
    r.samples += p.accepted;
    r.rejected += p.rejected;
    for (int k = 0; k < outputs; ++k) r.mean[size_t(k)] += p.sum[size_t(k)];
  }
  if (r.samples == 0) throw std::runtime_error("Monte Carlo: every sample was rejected");
  for (auto& v : r.mean) v /= double(r.samples);
  long used = 0;
  for (const auto& p : parts) used += p.accepted > 0 ? 1 : 0;
  if (used >= 2) {
    for (int k = 0; k < outputs; ++k) {
      double ss = 0.0, wsum = 0.0;
      for (const auto& p : parts) {
        if (p.accepted == 0) continue;
        double mb = p.sum[size_t(k)] / double(p.accepted);
        double w = double(p.accepted);
        ss += w * w * (mb - r.mean[size_t(k)]) * (mb - r.mean[size_t(k)]);
        wsum += w;
      }
      r.se[size_t(k)] = std::sqrt(ss * double(used) / double(used - 1)) / wsum;
    }
  } else {
    r.se.assign(size_t(outputs), std::numeric_limits<double>::infinity());
  }
  r.seconds = seconds;
  return r;
}

Vec2 disk_point(double R, double u, double angle) { return CoverPoint{angle, R * std::sqrt(u)}.project(); }

}  // namespace

McResult monte_carlo_pairs(const QuadratureMeasure& measure, int outputs, const PairIntegrand& f) {
  if (!(measure.radius > 0.0) || measure.samples < 1 || measure.batch < 1 || outputs < 1)
    throw std::invalid_argument("Monte Carlo: bad measure");
  auto t0 = Clock::now();
  double R = measure.radius;
  if (measure.scheme == QuadratureMeasure::Scheme::gauss) {
    // Gauss-Legendre in the area coordinate u = r^2/R^2, midpoint rule in the angles.
    using GL = boost::math::quadrature::gauss<double, 30>;
    std::vector<double> x, w;
    for (size_t i = 0; i < GL::abscissa().size(); ++i) {
      double xi = GL::abscissa()[i], wi = GL::weights()[i];
      x.push_back(0.5 * (1.0 + xi));
      w.push_back(0.5 * wi);
      if (xi != 0.0) {
        x.push_back(0.5 * (1.0 - xi));
        w.push_back(0.5 * wi);
      }
    }
    int n = int(x.size()), na = std::max(2, measure.angle_nodes);
    std::vector<BatchSums> parts(static_cast<size_t>(n));
    run_batches(n, measure.workers, [&](long i) {
      BatchSums& bs = parts[size_t(i)];
      bs.sum.assign(size_t(outputs) + 1, 0.0);
      std::vector<double> out(static_cast<size_t>(outputs));
      for (int a1 = 0; a1 < na; ++a1)
        for (int j = 0; j < n; ++j)
          for (int a2 = 0; a2 < na; ++a2) {
            Vec2 z = disk_point(R, x[size_t(i)], (a1 + 0.5) / na);
            Vec2 zp = disk_point(R, x[size_t(j)], (a2 + 0.25) / na);
            bool ok = false;
            try {
              ok = f(z, zp, out.data());
            } catch (const std::exception&) {
              ok = false;
            }
            if (!ok) {
              ++bs.rejected;
              continue;
            }
            ++bs.accepted;
            double wt = w[size_t(i)] * w[size_t(j)];
            for (int k = 0; k < outputs; ++k) bs.sum[size_t(k)] += wt * out[size_t(k)];
            bs.sum[size_t(outputs)] += wt;
          }
    });
    McResult r;
    r.mean.assign(size_t(outputs), 0.0);
    r.se.assign(size_t(outputs), 0.0);
    double wsum = 0.0;
    for (const auto& p : parts) {
      r.samples += p.accepted;
      r.rejected += p.rejected;
      wsum += p.sum[size_t(outputs)];
      for (int k = 0; k < outputs; ++k) r.mean[size_t(k)] += p.sum[size_t(k)];
    }
    if (!(wsum > 0.0)) throw std::runtime_error("quadrature: every node was rejected");
    for (auto& v : r.mean) v /= wsum;
    r.seconds = seconds_since(t0);
    return r;
  }
  long nb = (measure.samples + measure.batch - 1) / measure.batch;
  std::vector<BatchSums> parts(static_cast<size_t>(nb));
  run_batches(nb, measure.workers, [&](long b) {
    BatchSums& bs = parts[size_t(b)];
    bs.sum.assign(size_t(outputs), 0.0);
    long B = std::min(measure.batch, measure.samples - b * measure.batch);
    std::seed_seq seq{std::uint64_t(measure.seed), std::uint64_t(b)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<long> perm(static_cast<size_t>(B));
    std::iota(perm.begin(), perm.end(), 0L);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> out(static_cast<size_t>(outputs));
    for (long i = 0; i < B; ++i) {
      double u1 = (double(i) + U(rng)) / double(B), a1 = U(rng);
      double u2 = (double(perm[size_t(i)]) + U(rng)) / double(B), a2 = U(rng);
      Vec2 z = disk_point(R, u1, a1), zp = disk_point(R, u2, a2);
      bool ok = false;
      try {
        ok = f(z, zp, out.data());
      } catch (const std::exception&) {
        ok = false;
      }
      if (!ok) {
        ++bs.rejected;
        continue;
      }
      ++bs.accepted;
      for (int k = 0; k < outputs; ++k) bs.sum[size_t(k)] += out[size_t(k)];
    }
  });
  return reduce(parts, outputs, seconds_since(t0));
}

McResult monte_carlo_points(const QuadratureMeasure& measure, int outputs,
                            const std::function<bool(const Vec2&, double*)>& f) {
  if (!(measure.radius > 0.0) || measure.samples < 1 || measure.batch < 1 || outputs < 1)
    throw std::invalid_argument("Monte Carlo: bad measure");
  auto t0 = Clock::now();
  long nb = (measure.samples + measure.batch - 1) / measure.batch;
  std::vector<BatchSums> parts(static_cast<size_t>(nb));
  run_batches(nb, measure.workers, [&](long b) {
    BatchSums& bs = parts[size_t(b)];
    bs.sum.assign(size_t(outputs), 0.0);
    long B = std::min(measure.batch, measure.samples - b * measure.batch);
    std::seed_seq seq{std::uint64_t(measure.seed), std::uint64_t(b), std::uint64_t(1)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<double> out(static_cast<size_t>(outputs));
    for (long i = 0; i < B; ++i) {
      Vec2 z = disk_point(measure.radius, (double(i) + U(rng)) / double(B), U(rng));
      bool ok = false;
      try {
        ok = f(z, out.data());
      } catch (const std::exception&) {
        ok = false;
      }
      if (!ok) {
        ++bs.rejected;
        continue;
      }
      ++bs.accepted;
      for (int k = 0; k < outputs; ++k) bs.sum[size_t(k)] += out[size_t(k)];
    }
  });
  return reduce(parts, outputs, seconds_since(t0));
}

double ang_winding(const IsotopyPath& path, const Vec2& z, const Vec2& zp) {
  if ((z - zp).norm() == 0.0) throw std::domain_error("ang: coincident points");
  auto dir = [&](double s) {
    Vec2 v = path.family(s, zp) - path.family(s, z);
    if (v.norm() == 0.0) throw std::runtime_error("ang: collision along the isotopy");
    return turns_of(v);
  };
  std::function<double(double, double, double, double, int)> piece = [&](double sa, double ta, double sb,
                                                                         double tb, int depth) -> double {
    double d = wrap_half(tb - ta);
    if (std::abs(d) < 0.25 || depth >= 40) return d;
    double sm = 0.5 * (sa + sb), tm = dir(sm);
    return piece(sa, ta, sm, tm, depth + 1) + piece(sm, tm, sb, tb, depth + 1);
  };
  int steps = std::max(1, int(std::ceil(path.s_max / path.max_step - 1e-12)));
  double total = 0.0, s_prev = 0.0, t_prev = dir(0.0);
  for (int j = 1; j <= steps; ++j) {
    double s = j == steps ? path.s_max : path.s_max * j / steps;
    double t = dir(s);
    total += piece(s_prev, t_prev, s, t, 0);
    s_prev = s;
    t_prev = t;
  }
  return total;
}

CalabiEstimate calabi_ang(const IsotopyPath& path, const QuadratureMeasure& measure) {
  McResult r = monte_carlo_pairs(measure, 1, [&](const Vec2& z, const Vec2& zp, double* out) {
    out[0] = ang_winding(path, z, zp);
    return true;
  });
  double a2 = measure.area() * measure.area();
  return {"ang", a2 * r.mean[0], 3.0 * a2 * r.se[0], r.samples, r.rejected, measure.seed, r.seconds};
}

namespace {

std::vector<double> breakpoints(const AngularProfile& p, double R) {
  std::vector<double> b{0.0};
  if (p.kind() == AngularProfile::Kind::band) {
    for (double x : {1.0, p.band_end()})
      if (x > 0.0 && x < R) b.push_back(x);
  }
  b.push_back(R);
  return b;
}

template <class F>
double piecewise(const std::vector<double>& bp, double lo, double hi, F f) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  double s = 0.0;
  for (size_t i = 0; i + 1 < bp.size(); ++i) {
    double a = std::max(lo, bp[i]), b = std::min(hi, bp[i + 1]);
    if (b > a) s += GK::integrate(f, a, b, 10, 1e-14);
  }
  return s;
}

}  // namespace

double radial_calabi_tilde(const AngularProfile& profile, int deck_shift, double R) {
  if (!(R > 0.0)) throw std::invalid_argument("radius must be positive");
  auto bp = breakpoints(profile, R);
  return 4.0 * kPi * kPi *
         piecewise(bp, 0.0, R, [&](double r) { return (profile.omega(r) + deck_shift) * r * r * r; });
}

ActionCalabi calabi_action(const MapSpec& spec) {
  spec.validate();
  AngularProfile p = spec.profile();
  double R = spec.disk_radius();
  auto bp = breakpoints(p, R);
  // A(r) = -int_r^R pi rho^2 omega'(rho) drho, vanishing on the boundary circle.
  auto action = [&](double r) {
    return -piecewise(bp, r, R, [&](double rho) { return kPi * rho * rho * p.domega(rho); });
  };
  ActionCalabi out;
  out.cal = piecewise(bp, 0.0, R, [&](double r) { return action(r) * kTwoPi * r; });
  // kappa + dG with G non-radial: the action gains G o f - G.
  auto G = [](const Vec2& q) { return q.x() * q.x() * q.x() * q.y() + 0.3 * q.x() * q.y() * q.y() + q.y(); };
  PolarMap f(p);
  const int na = 256;
  auto ring = [&](double r) {
    double s = 0.0;
    for (int k = 0; k < na; ++k) {
      Vec2 q = CoverPoint{(k + 0.5) / na, r}.project();
      s += G(f(q)) - G(q);
    }
    return s / na;
  };
  using GL = boost::math::quadrature::gauss<double, 30>;
  double alt = 0.0;
  for (size_t i = 0; i + 1 < bp.size(); ++i)
    alt += GL::integrate([&](double r) { return (action(r) + ring(r)) * kTwoPi * r; }, bp[i], bp[i + 1]);
  out.cal_exact = alt;
  out.rot = p.omega(R) + spec.deck_shift;
  out.area = kPi * R * R;
  out.cal_tilde = out.cal + out.area * out.area * out.rot;
  return out;
}

CalabiEstimate calabi_link(const IsotopyPath& path, const FoliationChart& F, double ell_phi,
                           const QuadratureMeasure& measure, const TrackOptions& opt) {
  McResult r = monte_carlo_pairs(measure, 1, [&](const Vec2& z, const Vec2& zp, double* out) {
    out[0] = Lambda(F, ell_phi, path, z, zp, opt);
    return true;
  });
  if (double(r.rejected) > 1e-3 * double(r.samples + r.rejected))
    throw std::runtime_error(fmt::format("link: {} rejected samples exceed the budget", r.rejected));
  double a2 = measure.area() * measure.area();
  return {"link", a2 * r.mean[0], 3.0 * a2 * r.se[0], r.samples, r.rejected, measure.seed, r.seconds};
}

CalabiEstimate rotation_integral(const FoliationChart& F, double ell_phi, const FoliationChart::CoverMap& f_lift,
                                 const QuadratureMeasure& measure) {
  McResult r = monte_carlo_points(measure, 1, [&](const Vec2& z, double* out) {
    out[0] = displacement_m(F, ell_phi, f_lift, z);
    return true;
  });
  double a = measure.area();
  return {"rotation", a * r.mean[0], 3.0 * a * r.se[0], r.samples, r.rejected, measure.seed, r.seconds};
}

BoundReport bound_experiment(const DeltaDisk& disk, const EbSpace& space, const BoundOptions& opt) {
  auto t0 = Clock::now();
  BoundReport rep;
  rep.a = disk.a();
  rep.b = disk.b();
  rep.m = disk.m();
  double rho = disk.radius();
  rep.A = kPi * rho * rho;
  rep.C = disk.action_gap();
  rep.first_bound = 2.0 * rep.A * rep.C;
  rep.second_bound = 8.0 * rep.m * rep.b * rep.A * rep.C;
  rep.resolution = disk.resolution();
  rep.under_resolved = disk.resolution() > 0.05 * rho;

  QuadratureMeasure mu;
  mu.radius = rho * (1.0 - 1e-12);
  mu.samples = opt.pairs;
  mu.seed = opt.seed;
  mu.workers = opt.workers;
  mu.batch = std::max(1L, std::min(100L, opt.pairs / 10));
  ChartFamily fam = good_isotopy_family(disk, space);
  TrackOptions to;
  to.max_step = opt.step;
  McResult r = monte_carlo_pairs(mu, 3, [&](const Vec2& z, const Vec2& zp, double* out) {
    PairTracker tr = fixed_pair_tracker(fam, CoverPoint::lift(z), CoverPoint::lift(zp), 0.0, 2.0 * disk.n(), {}, {}, to);
    AnnulusSums s = tr.sums();
    out[0] = s.tau_bar != 0.0 ? 1.0 : 0.0;
    out[1] = s.tau_bar;
    out[2] = s.exhausted ? 1.0 : 0.0;
    return true;
  });
  double a2 = rep.A * rep.A;
  rep.mass = a2 * r.mean[0];
  rep.mass_err = 3.0 * a2 * r.se[0];
  rep.integral = a2 * r.mean[1];
  rep.integral_err = 3.0 * a2 * r.se[1];
  rep.exhausted = std::lround(r.mean[2] * double(r.samples));
  rep.samples = r.samples;
  rep.rejected = r.rejected;

  int a = disk.a(), n = disk.n();
  const FactorChain& chain = space.chain();
  FoliationChart::CoverMap lift = [&chain, a, n](const CoverPoint& z) {
    CoverPoint p = chain_forward_lift(chain, 1, n, z);
    p.ell -= a;
    return p;
  };
  QuadratureMeasure pts = mu;
  pts.samples = std::max(1000L, opt.pairs * 10);
  pts.batch = std::max(50L, pts.samples / 20);
  FoliationChart F1 = gradient_foliation_chart(disk, 1, 0.0);
  double phi = disk.landing_angle(ViewKey{1, false, 0.0}, 0.0);
  CalabiEstimate m1 = rotation_integral(F1, phi, lift, pts);
  CalabiEstimate me = rotation_integral(FoliationChart::euclidean(), 0.0, lift, pts);
  rep.m_integral = m1.value;
  rep.m_integral_err = m1.error;
  rep.m_integral_euclid = me.value;
  rep.m_integral_euclid_err = me.error;
  rep.rejected += m1.rejected + me.rejected;
  rep.seconds = seconds_since(t0);
  return rep;
}

std::vector<std::pair<int, int>> convergents(double x, int bmax) {
  std::vector<std::pair<int, int>> out;
  long h2 = 0, h1 = 1, k2 = 1, k1 = 0;
  double r = x;
  for (int it = 0; it < 64; ++it) {
    double fl = std::floor(r);
    long q = long(fl);
    long h = q * h1 + h2, k = q * k1 + k2;
    if (k > bmax) break;
    out.emplace_back(int(h), int(k));
    h2 = h1;
    h1 = h;
    k2 = k1;
    k1 = k;
    double frac = r - fl;
    if (frac < 1e-12) break;
    r = 1.0 / frac;
  }
  return out;
}

ChainCheck final_chain(double link, double alpha, double beta, int a, int b, int m) {
  double A = a_ab(alpha, beta, a, b), C = c_ab(alpha, beta, a, b);
  ChainCheck c;
  c.target = double(a) / b * A * A;
  c.gap_term = A * C / b;
  c.residual_plus = link - c.target - c.gap_term;
  c.residual_minus = link - c.target + c.gap_term;
  c.bound = 8.0 * m * A * C;
  return c;
}

DeltaDiskOptions MeshRule::options(int b) const {
  DeltaDiskOptions o;
  bool coarse = b >= coarse_from;
  o.orbits = coarse ? coarse_orbits : orbits;
  o.levels = coarse ? coarse_levels : levels;
  return o;
}

Theorem1Table theorem1_table(const Theorem1Options& opt) {
  auto t0 = Clock::now();
  auto log = [&](const std::string& s) {
    if (opt.log) opt.log(s);
  };
  Theorem1Table table;
  FactorChain chain = certified_chain(AngularProfile::band(opt.alpha, opt.beta), opt.m, opt.K);
  const double pi2a = kPi * kPi * opt.alpha;
  for (auto [a, b] : convergents(opt.alpha, opt.b_max)) {
    auto tr = Clock::now();
    Theorem1Row row;
    row.a = a;
    row.b = b;
    double q = double(a) / b;
    if (!(q > opt.alpha && q < opt.beta)) {
      row.skipped = true;
      row.reason = fmt::format("a/b = {:.6f} outside (alpha, beta)", q);
      log(fmt::format("{}/{}: skipped, {}", a, b, row.reason));
      table.rows.push_back(std::move(row));
      continue;
    }
    row.A = a_ab(opt.alpha, opt.beta, a, b);
    row.C = c_ab(opt.alpha, opt.beta, a, b);
    double rho = 1.0 + q - opt.alpha;
    QuadratureMeasure mu = opt.link;
    mu.radius = rho;
    row.link = calabi_link(polar_isotopy(AngularProfile::band(opt.alpha, opt.beta), 0, rho),
                           FoliationChart::euclidean(), 0.0, mu);
    row.closed_form = pi2a + restricted_calabi_closed_form(opt.alpha, opt.beta, a, b);
    row.chain = final_chain(row.link.value, opt.alpha, opt.beta, a, b, opt.m);
    row.deviation = std::abs(row.link.value - pi2a);
    if (b <= opt.bound_b_max) {
      EbSpace space(chain, b);
      DeltaDiskOptions dopt = opt.mesh.options(b);
      std::string cache;
      if (!opt.cache_dir.empty()) {
        std::string key = fmt::format("{:.17g}/{:.17g}/{:.17g}/{}", opt.alpha, opt.beta, opt.K, dopt.orbits);
        cache = fmt::format("{}/delta_a{}_b{}_m{}_L{}_{:016x}.bin", opt.cache_dir, a, b, opt.m, dopt.levels,
                            std::hash<std::string>{}(key));
      }
      log(fmt::format("{}/{}: invariant disk {}x{}", a, b, dopt.orbits, dopt.levels));
      DeltaDisk disk = cache.empty() ? DeltaDisk::build(space, opt.alpha, a, dopt)
                                     : DeltaDisk::cached(space, opt.alpha, a, dopt, cache);
      row.resolution = disk.resolution();
      row.bound = bound_experiment(disk, space, opt.bound);
      table.bounds_hold = table.bounds_hold && row.bound->first_holds() && row.bound->second_holds();
    }
    table.chain_holds = table.chain_holds && row.chain.holds();
    row.seconds = seconds_since(tr);
    log(fmt::format("{}/{}: link {:.5f} +- {:.5f}, deviation {:.5f}, bound {:.4f}", a, b, row.link.value,
                    row.link.error, row.deviation, row.chain.bound));
    table.rows.push_back(std::move(row));
  }
  std::vector<const Theorem1Row*> used;
  for (const auto& r : table.rows)
    if (!r.skipped) used.push_back(&r);
  std::sort(used.begin(), used.end(), [](auto x, auto y) { return x->chain.bound > y->chain.bound; });
  for (size_t i = 1; i < used.size(); ++i)
    if (used[i]->deviation > used[i - 1]->deviation) table.monotone = false;
  if (used.empty()) table.chain_holds = table.monotone = false;
  table.seconds = seconds_since(t0);
  return table;
}

}  // namespace ptrot
