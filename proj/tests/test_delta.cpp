#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ptrot/delta_disk.hpp"

#include <filesystem>
#include <fstream>
#include <random>

using namespace ptrot;

namespace {

const FactorChain& band_chain() {
  static FactorChain c = certified_chain(AngularProfile::band(0.3, 0.45), 8, 4.0);
  return c;
}

const EbSpace& space() {
  static EbSpace s(band_chain(), 3);
  return s;
}

DeltaDiskOptions small_mesh() {
  DeltaDiskOptions o;
  o.orbits = 64;
  o.levels = 64;
  return o;
}

const DeltaDisk& disk() {
  static DeltaDisk d = DeltaDisk::build(space(), 0.3, 1, small_mesh());
  return d;
}

Vec2 f_power(const Vec2& p, int b) {
  Vec2 q = p;
  for (int k = 0; k < b; ++k) q = band_chain().compose(q);
  return q;
}

MeshCoord random_coord(std::mt19937_64& g) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  return {U(g) * disk().orbits(), 0.5 + U(g) * (disk().levels() - 2)};
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("ptrot_test_" + name)).string();
}

}  // namespace

TEST_CASE("disk parameters") {
  const DeltaDisk& d = disk();
  CHECK(d.a() == 1);
  CHECK(d.b() == 3);
  CHECK(d.n() == 24);
  CHECK(d.orbits() % 3 == 0);
  CHECK(d.radius() == doctest::Approx(1.0 + 1.0 / 3 - 0.3));
  CHECK(d.action_gap() == doctest::Approx(c_ab(0.3, 0.45, 1, 3)));
  CHECK(d.stats().max_bvp_residual < 1e-8);
  CHECK(d.stats().max_end_distance < 1e-5);
  CHECK(d.stats().lambda_a > 0.0);
  CHECK(d.resolution() < 0.1);
}

TEST_CASE("levels increase from the origin to the action gap") {
  const DeltaDisk& d = disk();
  CHECK(d.level_value(0) == doctest::Approx(0.0));
  CHECK(d.level_value(d.levels() - 1) == doctest::Approx(d.action_gap()).epsilon(1e-6));
  for (int l = 1; l < d.levels(); ++l) CHECK(d.level_value(l) > d.level_value(l - 1));
  std::mt19937_64 g(1);
  for (int t = 0; t < 50; ++t) {
    int j = int(g() % d.orbits()), l = int(g() % d.levels());
    CHECK(space().action(d.node_state(j, l)) == doctest::Approx(d.level_value(l)).epsilon(1e-7));
  }
}

TEST_CASE("top level lies near the singular circle") {
  const DeltaDisk& d = disk();
  int top = d.levels() - 1;
  for (int j = 0; j < d.orbits(); j += 7) {
    State z = d.node_state(j, top);
    CHECK(space().zeta(z).norm() < 1e-4);
    CHECK(d.node_point(ProjKind::Q, 1, j, top).norm() == doctest::Approx(d.radius()).epsilon(1e-4));
  }
}

TEST_CASE("linking number of node differences is a") {
  const DeltaDisk& d = disk();
  std::mt19937_64 g(2);
  int bad = 0, total = 0;
  for (int t = 0; t < 1000; ++t) {
    int j1 = int(g() % d.orbits()), l1 = 1 + int(g() % (d.levels() - 1));
    int j2 = int(g() % d.orbits()), l2 = 1 + int(g() % (d.levels() - 1));
    if (j1 == j2 && l1 == l2) continue;
    ++total;
    State z = d.node_state(j1, l1) - d.node_state(j2, l2);
    try {
      if (linking_form_L(z) != 1.0) ++bad;
    } catch (const std::domain_error&) {
      ++bad;
    }
  }
  CHECK(total > 900);
  CHECK(bad == 0);
}

TEST_CASE("interpolation reproduces nodes and inverts") {
  const DeltaDisk& d = disk();
  std::mt19937_64 g(3);
  for (int t = 0; t < 40; ++t) {
    int j = int(g() % d.orbits()), l = 1 + int(g() % (d.levels() - 1));
    int i = 1 + int(g() % d.n());
    MeshCoord c{double(j), double(l)};
    CHECK((d.eval(ViewKey{i, false, 0.0}, c) - d.node_point(ProjKind::Q, i, j, l)).norm() < 1e-12);
    CHECK((d.eval(ViewKey{i, false, 1.0}, c) - d.node_point(ProjKind::P, i, j, l)).norm() < 1e-12);
    CHECK((d.eval(ViewKey{i, true, 1.0}, c) - d.node_point(ProjKind::Qp, i, j, l)).norm() < 1e-12);
  }
  for (int t = 0; t < 200; ++t) {
    MeshCoord c = random_coord(g);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    ViewKey key{1 + int(g() % d.n()), U(g) < 0.5, U(g)};
    Vec2 p = d.eval(key, c);
    auto back = d.invert(key, p);
    REQUIRE(back);
    CHECK((d.eval(key, *back) - p).norm() < 1e-10);
  }
  CHECK_FALSE(d.invert(ViewKey{1, false, 0.0}, Vec2(2.0 * d.radius(), 0.0)));
}

TEST_CASE("finite order map") {
  const DeltaDisk& d = disk();
  for (int t = 0; t < 100; ++t) {
    double r = d.radius() * std::sqrt((t + 0.5) / 100.0);
    Vec2 p = CoverPoint{t * 0.618, r}.project(), q = p;
    for (int k = 0; k < 3; ++k) q = finite_order_map(d, q);
    CHECK((q - p).norm() < 1e-9);
    Vec2 s = CoverPoint{t * 0.618, d.radius()}.project();
    CHECK((finite_order_map(d, s) - band_chain().compose(s)).norm() < 1e-6);
  }
  CHECK_THROWS_AS(finite_order_map(d, Vec2(2.0, 0.0)), std::domain_error);
}

TEST_CASE("good isotopy runs from the identity to f^b") {
  const DeltaDisk& d = disk();
  std::mt19937_64 g(4);
  double end = 2.0 * d.n();
  for (int t = 0; t < 30; ++t) {
    MeshCoord c = random_coord(g);
    Vec2 p = d.eval(ViewKey{1, false, 0.0}, c);
    CHECK((good_isotopy_at(d, space(), 0.0, c) - p).norm() < 1e-12);
    CHECK((good_isotopy_at(d, space(), end, c) - f_power(p, 3)).norm() < 1e-9);
    for (double s : {1.0, 2.0, 7.0, 20.0}) {
      Vec2 lo = good_isotopy_at(d, space(), s - 1e-9, c), hi = good_isotopy_at(d, space(), s + 1e-9, c);
      CHECK((lo - hi).norm() < 1e-6);
    }
  }
  CHECK_THROWS_AS(good_isotopy_at(d, space(), end + 0.5, MeshCoord{0.0, 1.0}), std::domain_error);
}

TEST_CASE("cache round trip") {
  const DeltaDisk& d = disk();
  std::string path = temp_path("disk.bin");
  d.save(path);
  DeltaDisk e = DeltaDisk::load(path);
  CHECK(e.orbits() == d.orbits());
  CHECK(e.levels() == d.levels());
  CHECK(e.resolution() == d.resolution());
  std::mt19937_64 g(5);
  for (int t = 0; t < 20; ++t) {
    MeshCoord c = random_coord(g);
    ViewKey key{1 + int(g() % d.n()), false, 0.5};
    CHECK(e.eval(key, c) == d.eval(key, c));
  }
  DeltaDisk f = DeltaDisk::cached(space(), 0.3, 1, small_mesh(), path);
  CHECK(f.level_value(5) == d.level_value(5));
  CHECK_THROWS_WITH_AS(DeltaDisk::cached(space(), 0.31, 1, small_mesh(), path),
                       doctest::Contains("invariant disk cache"), std::runtime_error);
  {
    std::fstream io(path, std::ios::in | std::ios::out | std::ios::binary);
    io.seekp(0);
    io.write("garbage!", 8);
  }
  CHECK_THROWS_WITH_AS(DeltaDisk::load(path), doctest::Contains("invariant disk cache"), std::runtime_error);
  std::filesystem::resize_file(path, 40);
  CHECK_THROWS_AS(DeltaDisk::load(path), std::runtime_error);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(DeltaDisk::load(path), std::runtime_error);
}
