#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ptrot/genfun.hpp"

#include <random>

using namespace ptrot;

namespace {

std::mt19937_64& rng() {
  static std::mt19937_64 g(17);
  return g;
}

double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng()); }

}  // namespace

TEST_CASE("implicit solve of a rotation factor") {
  for (double beta : {0.01, 0.05, 0.1}) {
    PolarFactor f(AngularProfile::constant(beta));
    double t = kTwoPi * beta;
    for (int k = 0; k < 50; ++k) {
      double X = uniform(-2, 2), y = uniform(-2, 2);
      ImplicitSolve s = solve_untwisted(f, X, y);
      CHECK(s.x == doctest::Approx((X + y * std::sin(t)) / std::cos(t)).epsilon(1e-12));
      Vec2 img = f.forward(Vec2(s.x, y));
      CHECK(img.x() == doctest::Approx(X).epsilon(1e-12));
      CHECK(img.y() == doctest::Approx(s.Y).epsilon(1e-12));
    }
  }
}

TEST_CASE("implicit solve of the identity") {
  PolarFactor id(AngularProfile::constant(0.0));
  for (int k = 0; k < 20; ++k) {
    double X = uniform(-3, 3), y = uniform(-3, 3);
    ImplicitSolve s = solve_untwisted(id, X, y);
    CHECK(s.x == doctest::Approx(X));
    CHECK(s.Y == doctest::Approx(y));
  }
}

TEST_CASE("round trip through a polar band factor") {
  PolarFactor f(AngularProfile::band(0.3, 0.45).scaled(1.0 / 8));
  for (int k = 0; k < 2000; ++k) {
    Vec2 p(uniform(-1.6, 1.6), uniform(-1.6, 1.6));
    Vec2 q = f.forward(p);
    ImplicitSolve s = solve_untwisted(f, q.x(), p.y());
    CHECK(std::abs(s.x - p.x()) < 1e-10);
    CHECK(std::abs(s.Y - q.y()) < 1e-10);
  }
}

TEST_CASE("implicit solve domain errors") {
  PolarFactor f(AngularProfile::constant(0.1));
  CHECK_THROWS_AS(solve_untwisted(f, std::nan(""), 0.0), std::domain_error);
  // a half turn is not untwisted: pi_1 f(., y) is decreasing
  PolarFactor half(AngularProfile::constant(0.5));
  CHECK_THROWS(solve_untwisted(half, 0.3, 0.2));
}

TEST_CASE("generating value of a rotation") {
  for (double beta : {0.02, 0.07}) {
    PolarFactor f(AngularProfile::constant(beta));
    double t = kTwoPi * beta;
    for (int k = 0; k < 20; ++k) {
      double X = uniform(-1, 1), y = uniform(-1, 1);
      double h = X * y / std::cos(t) + 0.5 * std::tan(t) * (X * X + y * y);
      CHECK(generating_value(f, X, y) == doctest::Approx(h).epsilon(1e-11));
      CHECK(*f.h_closed(X, y) == doctest::Approx(h).epsilon(1e-11));
    }
  }
}

TEST_CASE("generating value of the identity and normalization") {
  PolarFactor id(AngularProfile::constant(0.0));
  CHECK(generating_value(id, 0.7, -0.4) == doctest::Approx(0.7 * -0.4));
  PolarFactor tw(AngularProfile::band(0.3, 0.45).scaled(0.125));
  CHECK(generating_value(tw, 0.0, 0.0) == 0.0);
  CHECK(*tw.h_closed(0.0, 0.0) == doctest::Approx(0.0));
}

TEST_CASE("generating value gradient reproduces the implicit maps") {
  PolarFactor f(AngularProfile::band(0.3, 0.45).scaled(0.125));
  const double d = 1e-5;
  for (int k = 0; k < 50; ++k) {
    double X = uniform(-1.3, 1.3), y = uniform(-1.3, 1.3);
    ImplicitSolve s = solve_untwisted(f, X, y);
    double hX = (generating_value(f, X + d, y) - generating_value(f, X - d, y)) / (2 * d);
    double hy = (generating_value(f, X, y + d) - generating_value(f, X, y - d)) / (2 * d);
    CHECK(std::abs(hX - s.Y) <= 1e-6 * std::max(1.0, std::abs(s.Y)));
    CHECK(std::abs(hy - s.x) <= 1e-6 * std::max(1.0, std::abs(s.x)));
    CHECK(generating_value(f, X, y) == doctest::Approx(*f.h_closed(X, y)).epsilon(1e-9));
  }
}

TEST_CASE("path dependence reveals a non area preserving factor") {
  struct Dilation : Factor {
    Vec2 forward(const Vec2& p) const override { return 1.1 * p; }
    Vec2 inverse(const Vec2& p) const override { return p / 1.1; }
    Mat2 jacobian(const Vec2&) const override { return 1.1 * Mat2::Identity(); }
    std::string describe() const override { return "dilation"; }
  } dil;
  CHECK_THROWS_AS(generating_value(dil, 0.5, 0.5), std::runtime_error);
}

TEST_CASE("equal splitting of a rotation") {
  DecompositionResult r = factor_polar(AngularProfile::constant(0.3), 4, 4.0);
  CHECK(r.pass);
  CHECK(r.chain.m() == 4);
  for (int i = 1; i <= 4; ++i) {
    const auto& pf = dynamic_cast<const PolarFactor&>(r.chain.factor(i));
    CHECK(pf.profile().omega(0.5) == doctest::Approx(0.075));
  }
  CHECK(&r.chain.factor(5) == &r.chain.factor(1));
}

TEST_CASE("certified band chain") {
  DecompositionResult r = factor_polar(AngularProfile::band(0.3, 0.45), 8, 4.0);
  REQUIRE(r.pass);
  const auto& pf = dynamic_cast<const PolarFactor&>(r.chain.factor(1));
  CHECK(pf.profile().omega(5.0) <= 0.45 / 8 + 1e-15);
  for (const auto& rep : r.reports) {
    CHECK(rep.pass);
    CHECK(verify_untwisted_lipschitz(*r.chain.factors()[0], r.chain.K()).pass);
  }
  PolarMap target(AngularProfile::band(0.3, 0.45));
  for (int k = 0; k < 500; ++k) {
    Vec2 p(uniform(-1.6, 1.6), uniform(-1.6, 1.6));
    CHECK((r.chain.compose(p) - target(p)).norm() < 1e-8);
    CHECK(r.chain.factor(1 + k % 8).forward(Vec2::Zero()).norm() == 0.0);
  }
}

TEST_CASE("too few factors fail certification") {
  DecompositionResult r = factor_polar(AngularProfile::band(0.3, 0.45), 1, 4.0);
  CHECK_FALSE(r.pass);
  CHECK_THROWS_AS(certified_chain(AngularProfile::band(0.3, 0.45), 1, 4.0), std::runtime_error);
}

TEST_CASE("certificate of the identity") {
  PolarFactor id(AngularProfile::constant(0.0));
  CertificateReport rep = verify_untwisted_lipschitz(id, 1.0, {2.0, 40, 40});
  CHECK(rep.pass);
  for (const auto& c : rep.conditions) {
    if (c.name == "g_in_y_lipschitz" || c.name == "gprime_in_X_lipschitz")
      CHECK(c.max_ratio < 1e-6);
    else
      CHECK(c.max_ratio == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(rep.to_text().find("not a proof") != std::string::npos);
}

TEST_CASE("rotation certificate below 1/cos fails the implicit condition") {
  double beta = 0.1;
  PolarFactor f(AngularProfile::constant(beta));
  double k = 1.0 / std::cos(kTwoPi * beta);
  CertificateReport lo = verify_untwisted_lipschitz(f, 0.99 * k, {2.0, 40, 40});
  CHECK_FALSE(lo.pass);
  for (const auto& c : lo.conditions)
    if (c.name == "g_in_X_bi_lipschitz") CHECK(c.max_ratio > 0.99 * k);
  CHECK(verify_untwisted_lipschitz(f, 1.01 * k, {2.0, 40, 40}).pass);
}
