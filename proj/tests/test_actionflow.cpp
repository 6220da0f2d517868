#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ptrot/actionflow.hpp"

#include <random>

using namespace ptrot;

namespace {

const FactorChain& band_chain() {
  static FactorChain c = certified_chain(AngularProfile::band(0.3, 0.45), 8, 4.0);
  return c;
}

State random_state(const EbSpace& s, std::mt19937_64& g, double scale) {
  std::normal_distribution<double> N(0.0, scale);
  State z(s.dim());
  for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = N(g);
  return z;
}

}  // namespace

TEST_CASE("zero is singular with zero action") {
  EbSpace s(band_chain(), 3);
  State z = State::Zero(s.dim());
  CHECK(s.zeta(z).norm() == 0.0);
  CHECK(s.action(z) == 0.0);
  for (int i = 1; i <= s.n(); ++i) {
    Projections p = s.projections(z, i);
    CHECK(p.Q.norm() == 0.0);
    CHECK(p.P.norm() == 0.0);
    CHECK(p.Qp.norm() == 0.0);
  }
}

TEST_CASE("orbits of fixed points of f^b are singular") {
  EbSpace s(band_chain(), 7);
  // radius of S_{3/7}
  for (double t : {0.0, 0.13, 0.71}) {
    State z = sigma_point(s, 0.3, 3, t);
    CHECK(s.zeta(z).norm() < 1e-9);
    for (int i = 1; i <= s.n(); ++i) {
      Projections p = s.projections(z, i);
      CHECK((p.Q - p.P).norm() < 1e-9);
      CHECK((p.Qp - p.P).norm() < 1e-9);
    }
  }
}

TEST_CASE("shift equivariance") {
  std::mt19937_64 g(1);
  EbSpace s(band_chain(), 5);
  for (int t = 0; t < 20; ++t) {
    State z = random_state(s, g, 0.5);
    State a = s.zeta(s.shift(z, s.m())), b = s.shift(s.zeta(z), s.m());
    CHECK((a - b).norm() == 0.0);
    CHECK(s.action(s.shift(z, s.m())) == doctest::Approx(s.action(z)).epsilon(1e-10));
  }
}

TEST_CASE("action gradient is zeta") {
  std::mt19937_64 g(2);
  EbSpace s(band_chain(), 5);
  const double h = 1e-5;
  for (int t = 0; t < 100; ++t) {
    State z = random_state(s, g, 0.5), grad(s.dim());
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      State zp = z, zm = z;
      zp[k] += h;
      zm[k] -= h;
      grad[k] = (s.action(zp) - s.action(zm)) / (2 * h);
    }
    State zeta = s.zeta(z);
    CHECK((grad - zeta).norm() / zeta.norm() < 1e-6);
  }
}

TEST_CASE("action by quadrature agrees with the closed form") {
  std::mt19937_64 g(3);
  EbSpace s(band_chain(), 3);
  for (int t = 0; t < 5; ++t) {
    State z = random_state(s, g, 0.5);
    CHECK(s.action_quadrature(z) == doctest::Approx(s.action(z)).epsilon(1e-9));
  }
}

TEST_CASE("projection identities") {
  std::mt19937_64 g(4);
  EbSpace s(band_chain(), 3);
  for (int t = 0; t < 50; ++t) {
    State z = random_state(s, g, 0.6);
    State zeta = s.zeta(z);
    for (int i = 1; i <= s.n(); ++i) {
      Projections p = s.projections(z, i), next = s.projections(z, i + 1);
      Vec2 d = p.Qp - p.Q;
      CHECK(std::abs(zeta[2 * s.slot(i)] + d.y()) < 1e-10);
      CHECK(std::abs(zeta[2 * s.slot(i) + 1] - d.x()) < 1e-10);
      CHECK((s.chain().factor(i).forward(p.Q) - next.Qp).norm() < 1e-10);
      CHECK((p.P - s.point(z, i)).norm() == 0.0);
    }
  }
}

TEST_CASE("flow from a singular point stays put") {
  EbSpace s(band_chain(), 3);
  FlowTrajectory tr = flow(s, State::Zero(s.dim()), 3.0);
  CHECK(tr.back().norm() == 0.0);
  State sig = sigma_point(s, 0.3, 1, 0.2);
  CHECK((flow_to(s, sig, 2.0) - sig).norm() < 1e-8);
  CHECK((flow_to(s, sig, -2.0) - sig).norm() < 1e-8);
}

TEST_CASE("Gronwall sandwich") {
  std::mt19937_64 g(5);
  EbSpace s(band_chain(), 3);
  double A = lipschitz_bound(band_chain().K());
  for (int t = 0; t < 30; ++t) {
    State z = random_state(s, g, 0.5), zp = z + random_state(s, g, 0.05);
    double d0 = (z - zp).norm();
    for (double T : {0.5, -0.5, 1.5}) {
      double d = (flow_to(s, z, T) - flow_to(s, zp, T)).norm();
      CHECK(d <= std::exp(A * std::abs(T)) * d0);
      CHECK(d >= std::exp(-A * std::abs(T)) * d0);
    }
  }
}

TEST_CASE("action increases by the integral of the squared field") {
  std::mt19937_64 g(6);
  EbSpace s(band_chain(), 3);
  FlowOptions o;
  o.max_step = 0.01;
  for (int t = 0; t < 5; ++t) {
    State z = random_state(s, g, 0.5);
    FlowTrajectory tr = flow(s, z, 1.0, o);
    double integral = 0.0;
    for (size_t k = 1; k < tr.t.size(); ++k) {
      CHECK(tr.h[k] >= tr.h[k - 1] - 1e-12);
      double f0 = s.zeta(tr.z[k - 1]).squaredNorm(), f1 = s.zeta(tr.z[k]).squaredNorm();
      integral += 0.5 * (tr.t[k] - tr.t[k - 1]) * (f0 + f1);
    }
    CHECK(tr.h.back() - tr.h.front() == doctest::Approx(integral).epsilon(1e-4));
    FlowTrajectory back = flow(s, z, -1.0, o);
    CHECK(back.t.back() == doctest::Approx(-1.0));
    CHECK(back.h.back() <= back.h.front());
  }
}

TEST_CASE("Lipschitz constant of the field") {
  CHECK(lipschitz_bound(1.0) == 3.0);
  CHECK(lipschitz_bound(1.2) == doctest::Approx(std::sqrt(6 * 1.44 + 3)));
  std::mt19937_64 g(7);
  // identity factors: zeta is linear, its ratio is bounded by the spectral norm
  FactorChain id = certified_chain(AngularProfile::constant(0.0), 2, 1.0);
  EbSpace si(id, 3);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(si.jacobian_dense(State::Zero(si.dim())));
  double spec = svd.singularValues()[0];
  CHECK(spec <= 3.0 + 1e-12);
  std::vector<std::pair<State, State>> pairs;
  for (int t = 0; t < 200; ++t) pairs.emplace_back(random_state(si, g, 1.0), random_state(si, g, 1.0));
  double obs = lipschitz_certificate(si, pairs);
  CHECK(obs <= spec + 1e-12);
  EbSpace sb(band_chain(), 5);
  pairs.clear();
  for (int t = 0; t < 500; ++t) {
    State z = random_state(sb, g, 0.5);
    pairs.emplace_back(z, z + random_state(sb, g, 0.05));
  }
  CHECK(lipschitz_certificate(sb, pairs) <= lipschitz_bound(band_chain().K()));
}

TEST_CASE("linking form") {
  State z(8);
  z << 1, 2, 3, 4, 5, 6, 7, 8;
  CHECK(linking_form_L(z) == 0.0);
  CHECK(linking_form_L(-z) == linking_form_L(z));
  std::mt19937_64 g(8);
  EbSpace s(band_chain(), 7);
  State orbit = sigma_point(s, 0.3, 3, 0.0123);
  CHECK(linking_form_L(orbit) == 3.0);
  CHECK(linking_form_L(-orbit) == 3.0);
  for (int t = 0; t < 100; ++t) {
    State r = random_state(s, g, 1.0);
    CHECK(linking_form_L(-r) == linking_form_L(r));
    CHECK(std::abs(linking_form_L(r)) <= s.n() / 2);
  }
  State bad = State::Ones(8);
  bad[2] = 0.0;  // x_2 = 0 with y_1 y_2 > 0 is allowed
  CHECK_NOTHROW(linking_form_L(bad));
  bad[3] = -1.0;  // now y_1 y_2 < 0
  CHECK_FALSE(in_V_prime(bad));
  CHECK_THROWS_AS(linking_form_L(bad), std::domain_error);
}

TEST_CASE("singular circles and the action gap") {
  EbSpace s7(band_chain(), 7);
  auto cs = singular_circles(s7, 0.3, 0.45);
  REQUIRE(cs.size() == 1);
  CHECK(cs[0].a == 3);
  CHECK(cs[0].radius == doctest::Approx(1.0 + 3.0 / 7 - 0.3));
  CHECK(cs[0].max_residual < 1e-9);
  EbSpace s4(band_chain(), 4);
  CHECK(singular_circles(s4, 0.3, 0.45).empty());
  for (int b : {7, 12, 24}) {
    EbSpace s(band_chain(), b);
    for (const auto& c : singular_circles(s, 0.3, 0.45)) {
      double gap = s.action(c.points[0]) - s.action(State::Zero(s.dim()));
      CHECK(gap == doctest::Approx(c_ab(0.3, 0.45, c.a, b)).epsilon(1e-6));
      for (const auto& p : c.points) CHECK(s.action(p) == doctest::Approx(gap).epsilon(1e-9));
    }
  }
}

TEST_CASE("closed forms of C and A") {
  CHECK(c_ab(0.3, 0.45, 2, 5) == doctest::Approx(kPi * 0.5 * (1 + 0.1 + 0.01 / 3)));
  CHECK(a_ab(0.3, 0.45, 2, 5) == doctest::Approx(kPi * 1.1 * 1.1));
  CHECK(c_ab(0.4 - 1e-12, 0.45, 2, 5) < 1e-10);
  CHECK_THROWS_AS(c_ab(0.3, 0.45, 1, 5), std::domain_error);
  CHECK_THROWS_AS(a_ab(0.3, 0.45, 3, 5), std::domain_error);
}
