#include "ptrot/actionflow.hpp"

#include <boost/numeric/odeint.hpp>
#include <fmt/format.h>

#include <cmath>
#include <stdexcept>

namespace ptrot {

namespace odeint = boost::numeric::odeint;

EbSpace::EbSpace(FactorChain chain, int b) : chain_(std::move(chain)), b_(b), n_(chain_.m() * b) {
  if (b < 1) throw std::invalid_argument("b must be positive");
}

State EbSpace::zeta(const State& z) const {
  State out(dim());
  for (int i = 1; i <= n_; ++i) {
    ImplicitSolve s = solve_untwisted(chain_.factor(i), x(z, i + 1), y(z, i));
    out[2 * slot(i) + 1] = x(z, i) - s.x;
    out[2 * slot(i + 1)] = y(z, i + 1) - s.Y;
  }
  return out;
}

double EbSpace::action(const State& z) const {
  double h = 0.0;
  for (int i = 1; i <= n_; ++i) {
    const Factor& f = chain_.factor(i);
    double X = x(z, i + 1), yy = y(z, i);
    auto hc = f.h_closed(X, yy);
    h += X * y(z, i + 1) - (hc ? *hc : generating_value(f, X, yy));
  }
  return h;
}

double EbSpace::action_quadrature(const State& z) const {
  double h = 0.0;
  for (int i = 1; i <= n_; ++i) {
    double X = x(z, i + 1), yy = y(z, i);
    h += X * y(z, i + 1) - generating_value(chain_.factor(i), X, yy);
  }
  return h;
}

SparseMat EbSpace::jacobian(const State& z) const {
  SparseMat J;
  zeta_jacobian(z, J);
  return J;
}

State EbSpace::zeta_jacobian(const State& z, SparseMat& J) const {
  State out(dim());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(6 * n_);
  for (int i = 1; i <= n_; ++i) {
    ImplicitSolve s = solve_untwisted(chain_.factor(i), x(z, i + 1), y(z, i));
    out[2 * slot(i) + 1] = x(z, i) - s.x;
    out[2 * slot(i + 1)] = y(z, i + 1) - s.Y;
    int eta = 2 * slot(i) + 1, xi_next = 2 * slot(i + 1);
    int xi_col = 2 * slot(i), yi_col = 2 * slot(i) + 1;
    int xn_col = 2 * slot(i + 1), yn_col = 2 * slot(i + 1) + 1;
    trip.emplace_back(eta, xi_col, 1.0);
    trip.emplace_back(eta, xn_col, -s.gX);
    trip.emplace_back(eta, yi_col, -s.gy);
    trip.emplace_back(xi_next, yn_col, 1.0);
    trip.emplace_back(xi_next, xn_col, -s.gpX);
    trip.emplace_back(xi_next, yi_col, -s.gpy);
  }
  J.resize(dim(), dim());
  J.setFromTriplets(trip.begin(), trip.end());
  return out;
}

Projections EbSpace::projections(const State& z, int i) const {
  ImplicitSolve s = solve_untwisted(chain_.factor(i), x(z, i + 1), y(z, i));
  ImplicitSolve sp = solve_untwisted(chain_.factor(i - 1), x(z, i), y(z, i - 1));
  return {Vec2(s.x, y(z, i)), point(z, i), Vec2(x(z, i), sp.Y)};
}

State EbSpace::shift(const State& z, int k) const {
  State out(dim());
  for (int i = 1; i <= n_; ++i) {
    out[2 * slot(i)] = x(z, i + k);
    out[2 * slot(i) + 1] = y(z, i + k);
  }
  return out;
}

State EbSpace::from_orbit(const Vec2& p) const {
  State z(dim());
  Vec2 q = p;
  for (int i = 1; i <= n_; ++i) {
    z[2 * (i - 1)] = q.x();
    z[2 * (i - 1) + 1] = q.y();
    q = chain_.factor(i).forward(q);
  }
  return z;
}

namespace {

using Buffer = std::vector<double>;

struct Rhs {
  const EbSpace* space;
  double sign;
  void operator()(const Buffer& x, Buffer& dx, double) const {
    Eigen::Map<const State> z(x.data(), Eigen::Index(x.size()));
    State v = space->zeta(z);
    dx.resize(x.size());
    for (size_t k = 0; k < x.size(); ++k) dx[k] = sign * v[Eigen::Index(k)];
  }
};

}  // namespace

FlowTrajectory flow(const EbSpace& space, const State& z0, double t_end, const FlowOptions& opt) {
  if (!(opt.tol > 0.0)) throw std::invalid_argument("flow tolerance must be positive");
  FlowTrajectory tr;
  double dir = t_end < 0.0 ? -1.0 : 1.0;
  double span = std::abs(t_end);
  Rhs rhs{&space, dir};
  auto stepper = odeint::make_controlled(opt.tol, opt.tol, odeint::runge_kutta_dopri5<Buffer>());
  Buffer x(z0.data(), z0.data() + z0.size());
  auto record = [&](double tau) {
    tr.t.push_back(dir * tau);
    tr.z.push_back(Eigen::Map<const State>(x.data(), Eigen::Index(x.size())));
    if (opt.record_action) tr.h.push_back(space.action(tr.z.back()));
  };
  double tau = 0.0;
  double dt = std::min(opt.max_step, std::max(span, opt.min_step) * 0.01 + 1e-3);
  tr.smallest_step = 1e300;
  record(tau);
  while (tau < span) {
    dt = std::min({dt, span - tau, opt.max_step});
    double before = tau, tried = dt;
    auto res = stepper.try_step(rhs, x, tau, dt);
    if (res == odeint::success) {
      ++tr.accepted;
      double taken = tau - before;
      tr.smallest_step = std::min(tr.smallest_step, taken);
      tr.largest_step = std::max(tr.largest_step, taken);
      record(tau);
    } else {
      ++tr.rejected;
      if (dt < opt.min_step || tried < opt.min_step)
        throw std::runtime_error(fmt::format("flow: step size underflow at t={:.6g}", dir * tau));
    }
    for (double v : x)
      if (!std::isfinite(v)) throw std::runtime_error("flow: state left the domain");
  }
  if (tr.accepted == 0) tr.smallest_step = 0.0;
  return tr;
}

State flow_to(const EbSpace& space, const State& z0, double t, double tol) {
  if (t == 0.0) return z0;
  FlowOptions opt;
  opt.tol = tol;
  opt.record_action = false;
  Rhs rhs{&space, t < 0.0 ? -1.0 : 1.0};
  auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_dopri5<Buffer>());
  Buffer x(z0.data(), z0.data() + z0.size());
  double tau = 0.0, span = std::abs(t), dt = std::min(0.1, span);
  while (tau < span) {
    dt = std::min({dt, span - tau, opt.max_step});
    if (stepper.try_step(rhs, x, tau, dt) != odeint::success && dt < opt.min_step)
      throw std::runtime_error("flow: step size underflow");
  }
  return Eigen::Map<const State>(x.data(), Eigen::Index(x.size()));
}

double lipschitz_bound(double K) { return std::sqrt(6.0 * K * K + 3.0); }

double lipschitz_certificate(const EbSpace& space, const std::vector<std::pair<State, State>>& pairs) {
  double best = 0.0;
  for (const auto& [a, b] : pairs) {
    double d = (a - b).norm();
    if (d == 0.0) continue;
    best = std::max(best, (space.zeta(a) - space.zeta(b)).norm() / d);
  }
  return best;
}

namespace {

int sgn(double v) { return std::abs(v) < kSignZero ? 0 : (v > 0.0 ? 1 : -1); }

}  // namespace

bool in_V_prime(const State& z) {
  Eigen::Index n = z.size() / 2;
  auto X = [&](Eigen::Index i) { return z[2 * (((i % n) + n) % n)]; };
  auto Y = [&](Eigen::Index i) { return z[2 * (((i % n) + n) % n) + 1]; };
  for (Eigen::Index i = 0; i < n; ++i) {
    if (sgn(X(i)) == 0 && !(sgn(Y(i - 1)) * sgn(Y(i)) > 0)) return false;
    if (sgn(Y(i)) == 0 && !(sgn(X(i)) * sgn(X(i + 1)) > 0)) return false;
  }
  return true;
}

double linking_form_L(const State& z) {
  if (!in_V_prime(z)) throw std::domain_error("linking form evaluated outside V'");
  Eigen::Index n = z.size() / 2;
  int sum = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index prev = (i + n - 1) % n;
    sum += sgn(z[2 * i]) * (sgn(z[2 * i + 1]) - sgn(z[2 * prev + 1]));
  }
  return sum / 4.0;
}

State sigma_point(const EbSpace& space, double alpha, int a, double turns) {
  double rho = 1.0 + double(a) / space.b() - alpha;
  return space.from_orbit(CoverPoint{turns, rho}.project());
}

std::vector<SingularCircle> singular_circles(const EbSpace& space, double alpha, double beta, int samples) {
  std::vector<SingularCircle> out;
  int b = space.b();
  for (int a = int(std::floor(b * alpha)) + 1; a < b * beta; ++a) {
    if (!(a > b * alpha && a < b * beta)) continue;
    SingularCircle c;
    c.a = a;
    c.radius = 1.0 + double(a) / b - alpha;
    for (int k = 0; k < samples; ++k) {
      State z = sigma_point(space, alpha, a, double(k) / samples);
      c.max_residual = std::max(c.max_residual, space.zeta(z).norm());
      c.points.push_back(std::move(z));
    }
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

void check_ab(double alpha, double beta, int a, int b) {
  if (b <= 0) throw std::domain_error("b must be positive");
  double q = double(a) / b;
  if (!(q > alpha && q < beta)) throw std::domain_error("a/b outside (alpha, beta)");
}

}  // namespace

double c_ab(double alpha, double beta, int a, int b) {
  check_ab(alpha, beta, a, b);
  double u = double(a) / b - alpha;
  return kPi * (a - b * alpha) * (1.0 + u + u * u / 3.0);
}

double a_ab(double alpha, double beta, int a, int b) {
  check_ab(alpha, beta, a, b);
  double rho = 1.0 + double(a) / b - alpha;
  return kPi * rho * rho;
}

}  // namespace ptrot
