#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ptrot/maps.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <random>

using namespace ptrot;

namespace {

double turns_between(const Vec2& p, const Vec2& q) {
  double t = (std::atan2(q.y(), q.x()) - std::atan2(p.y(), p.x())) / kTwoPi;
  return t - std::floor(t);
}

// Area enclosed by the image of a polygon, by Green's formula on the image curve.
double image_area(const PlaneMap& f, const std::vector<Vec2>& poly, int pieces) {
  using GL = boost::math::quadrature::gauss<double, 20>;
  double area = 0.0;
  for (size_t k = 0; k < poly.size(); ++k) {
    Vec2 a = poly[k], b = poly[(k + 1) % poly.size()];
    for (int j = 0; j < pieces; ++j) {
      double s0 = double(j) / pieces, s1 = double(j + 1) / pieces;
      area += GL::integrate(
          [&](double s) {
            const double h = 1e-6;
            Vec2 p = f(a + s * (b - a));
            Vec2 dp = (f(a + (s + h) * (b - a)) - f(a + (s - h) * (b - a))) / (2 * h);
            return 0.5 * (p.x() * dp.y() - p.y() * dp.x());
          },
          s0, s1);
    }
  }
  return area;
}

double polygon_area(const std::vector<Vec2>& poly) {
  double a = 0.0;
  for (size_t k = 0; k < poly.size(); ++k) {
    const Vec2& p = poly[k];
    const Vec2& q = poly[(k + 1) % poly.size()];
    a += 0.5 * (p.x() * q.y() - p.y() * q.x());
  }
  return a;
}

}  // namespace

TEST_CASE("band extension of a rotation") {
  PlaneMap inner = [](const Vec2& p) { return Vec2(rotation(0.3) * p); };
  PlaneMap f = band_extend(inner, 0.3, 0.45);
  Vec2 p = CoverPoint{0.1, 1.1}.project();
  CHECK(turns_between(p, f(p)) == doctest::Approx(0.4).epsilon(1e-12));
  for (double r : {1.15, 1.2, 3.0}) {
    Vec2 q = CoverPoint{0.37, r}.project();
    CHECK(turns_between(q, f(q)) == doctest::Approx(0.45).epsilon(1e-12));
  }
  for (double r : {1.0, 1.15}) {
    Vec2 lo = CoverPoint{0.2, r * (1 - 1e-13)}.project(), hi = CoverPoint{0.2, r * (1 + 1e-13)}.project();
    CHECK((f(lo) - f(hi)).norm() < 1e-9);
  }
}

TEST_CASE("band extension rejects bad input") {
  PlaneMap inner = [](const Vec2& p) { return Vec2(rotation(0.3) * p); };
  CHECK_THROWS_AS(band_extend(inner, 0.3, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(band_extend(inner, 0.3, 0.2), std::invalid_argument);
  PlaneMap wrong = [](const Vec2& p) { return Vec2(rotation(0.31) * p); };
  CHECK_THROWS_AS(band_extend(wrong, 0.3, 0.45), std::invalid_argument);
}

TEST_CASE("profile of the extension") {
  AngularProfile p = AngularProfile::band(0.3, 0.45);
  CHECK(p.omega(0.5) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(p.omega(1.1) == doctest::Approx(0.4));
  CHECK(p.omega(2.0) == doctest::Approx(0.45));
  CHECK(p.band_end() == doctest::Approx(1.15));
  CHECK(AngularProfile::constant(0.2).scaled(0.5).omega(3.0) == doctest::Approx(0.1));
}

TEST_CASE("lift at time zero and rigid rotation lift") {
  IsotopyPath band = polar_isotopy(AngularProfile::band(0.3, 0.45));
  CoverPoint z{2.3, 1.07};
  CoverPoint w = eval_lift(band, 0.0, z);
  CHECK(w.ell == z.ell);
  CHECK(w.r == z.r);
  IsotopyPath rot = polar_isotopy(AngularProfile::constant(0.3));
  CHECK(eval_lift(rot, 1.0, z).ell - z.ell == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("lift is deck equivariant and projects to the family") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  IsotopyPath path = polar_isotopy(AngularProfile::band(0.3, 0.45), 1);
  for (int t = 0; t < 1000; ++t) {
    CoverPoint z{4 * U(rng) - 2, 0.01 + 1.5 * U(rng)};
    double s = U(rng);
    int k = int(U(rng) * 7) - 3;
    CoverPoint a = eval_lift(path, s, z.deck(k)), b = eval_lift(path, s, z).deck(k);
    CHECK(std::abs(a.ell - b.ell) < 1e-12);
    CHECK(a.r == b.r);
    CHECK((eval_lift(path, s, z).project() - path.family(s, z.project())).norm() < 1e-12);
  }
}

TEST_CASE("lift domain errors") {
  IsotopyPath path = polar_isotopy(AngularProfile::constant(0.3), 0, 1.0);
  CHECK_THROWS_AS(eval_lift(path, 0.5, CoverPoint{0.0, 0.0}), std::domain_error);
  CHECK_THROWS_AS(eval_lift(path, 0.5, CoverPoint{0.0, 1.5}), std::domain_error);
  CHECK_THROWS_AS(eval_lift(path, 1.5, CoverPoint{0.0, 0.5}), std::domain_error);
}

TEST_CASE("polar maps preserve area") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1.3, 1.3);
  PolarMap f(AngularProfile::band(0.3, 0.45));
  for (int t = 0; t < 5; ++t) {
    Vec2 c(U(rng) * 0.5, U(rng) * 0.5);
    std::vector<Vec2> poly;
    for (int k = 0; k < 6; ++k) poly.push_back(c + (0.2 + 0.1 * std::abs(U(rng))) * CoverPoint{k / 6.0, 1.0}.project());
    double a0 = polygon_area(poly);
    CHECK(image_area(f, poly, 400) == doctest::Approx(a0).epsilon(1e-9));
  }
  for (int t = 0; t < 200; ++t) {
    Vec2 p(U(rng), U(rng));
    CHECK(f.jacobian(p).determinant() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f(p).norm() == doctest::Approx(p.norm()).epsilon(1e-14));
    CHECK((f.inverse(f(p)) - p).norm() < 1e-14);
  }
}

TEST_CASE("restricted Calabi correction") {
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  double alpha = 0.3;
  double rho = 1.0 + 2.0 / 5.0 - alpha;
  double quad = 4 * kPi * kPi * GK::integrate([&](double r) { return r * r * r * (alpha + r - 1); }, 1.0, rho, 10, 1e-15);
  CHECK(restricted_calabi_closed_form(alpha, 0.45, 2, 5) == doctest::Approx(quad).epsilon(1e-10));
  CHECK(std::abs(restricted_calabi_closed_form(0.4 - 1e-12, 0.45, 2, 5)) < 1e-10);
  double last = 0.0;
  for (int a = 301; a < 450; a += 10) {
    double v = restricted_calabi_closed_form(alpha, 0.45, a, 1000);
    CHECK(v > last);
    last = v;
  }
  CHECK_THROWS_AS(restricted_calabi_closed_form(alpha, 0.45, 1, 5), std::domain_error);
  CHECK_THROWS_AS(restricted_calabi_closed_form(alpha, 0.45, 1, 0), std::domain_error);
}

TEST_CASE("map specification") {
  MapSpec s;
  CHECK(s.disk_radius() == doctest::Approx(1.15));
  s.validate();
  MapSpec bad;
  bad.kind = "shear";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  MapSpec rot{"rotation", 0.3, 0.45, 1, 0.0};
  CHECK(rot.disk_radius() == 1.0);
  CHECK(eval_lift(rot.isotopy(), 1.0, CoverPoint{0.0, 0.5}).ell == doctest::Approx(1.3));
  CHECK(rot.canonical() != s.canonical());
}
