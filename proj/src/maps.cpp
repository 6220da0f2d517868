#include "ptrot/maps.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ptrot {

AngularProfile AngularProfile::constant(double alpha) { return {Kind::constant, alpha, alpha, 1.0}; }

AngularProfile AngularProfile::band(double alpha, double beta) {
  if (!(beta > alpha)) throw std::invalid_argument("band profile needs beta > alpha");
  return {Kind::band, alpha, beta, 1.0};
}

AngularProfile AngularProfile::scaled(double c) const { return {kind_, alpha_, beta_, scale_ * c}; }

double AngularProfile::omega(double r) const {
  if (kind_ == Kind::constant) return scale_ * alpha_;
  return scale_ * (alpha_ + std::clamp(r, 1.0, band_end()) - 1.0);
}

double AngularProfile::domega(double r) const {
  if (kind_ == Kind::constant) return 0.0;
  return (r > 1.0 && r < band_end()) ? scale_ : 0.0;
}

double AngularProfile::s0(double r) const {
  if (kind_ == Kind::constant || r <= 1.0) return 0.0;
  double e = std::min(r, band_end());
  return kPi * scale_ * (e * e * e - 1.0) / 3.0;
}

Mat2 rotation(double turns) {
  double c = std::cos(kTwoPi * turns), s = std::sin(kTwoPi * turns);
  Mat2 m;
  m << c, -s, s, c;
  return m;
}

Vec2 PolarMap::operator()(const Vec2& p) const { return rotation(profile_.omega(p.norm())) * p; }

Vec2 PolarMap::inverse(const Vec2& p) const { return rotation(-profile_.omega(p.norm())) * p; }

Mat2 PolarMap::jacobian(const Vec2& p) const {
  double r = p.norm();
  Mat2 rot = rotation(profile_.omega(r));
  double w = profile_.domega(r);
  if (w == 0.0 || r == 0.0) return rot;
  // d/dp [R(theta(r)) p] = R (I + theta' J p p^T / r)
  Vec2 jp(-p.y(), p.x());
  return rot * (Mat2::Identity() + (kTwoPi * w / r) * jp * p.transpose());
}

Vec2 CoverPoint::project() const { return {r * std::cos(kTwoPi * ell), r * std::sin(kTwoPi * ell)}; }

CoverPoint CoverPoint::lift(const Vec2& p, double near_ell) {
  double a = std::atan2(p.y(), p.x()) / kTwoPi;
  a += std::round(near_ell - a);
  return {a, p.norm()};
}

IsotopyPath polar_isotopy(const AngularProfile& profile, int deck_shift, double r_max) {
  IsotopyPath path;
  path.family = [profile, deck_shift](double s, const Vec2& p) {
    return Vec2(rotation(s * (profile.omega(p.norm()) + deck_shift)) * p);
  };
  path.lift = [profile, deck_shift](double s, const CoverPoint& z) {
    return CoverPoint{z.ell + s * (profile.omega(z.r) + deck_shift), z.r};
  };
  path.r_max = r_max;
  return path;
}

IsotopyPath identity_isotopy(double r_max) {
  IsotopyPath path;
  path.family = [](double, const Vec2& p) { return p; };
  path.lift = [](double, const CoverPoint& z) { return z; };
  path.r_max = r_max;
  return path;
}

CoverPoint eval_lift(const IsotopyPath& path, double s, const CoverPoint& z) {
  if (!(z.r > 0.0) || z.r > path.r_max) throw std::domain_error("cover point outside the punctured disk");
  if (s < 0.0 || s > path.s_max) throw std::domain_error("isotopy parameter out of range");
  return path.lift(s, z);
}

PlaneMap band_extend(PlaneMap inner, double alpha, double beta) {
  if (!(beta > alpha)) throw std::invalid_argument("band_extend: beta must exceed alpha");
  Mat2 ra = rotation(alpha);
  for (int k = 0; k < 256; ++k) {
    Vec2 p = CoverPoint{k / 256.0, 1.0}.project();
    if ((inner(p) - ra * p).norm() > 1e-9)
      throw std::invalid_argument("band_extend: inner map is not the rotation by alpha on the unit circle");
  }
  PolarMap twist(AngularProfile::band(alpha, beta));
  return [inner = std::move(inner), twist](const Vec2& p) -> Vec2 {
    if (p.norm() <= 1.0) return inner(p);
    return twist(p);
  };
}

double restricted_calabi_closed_form(double alpha, double beta, int a, int b) {
  if (b <= 0) throw std::domain_error("b must be positive");
  double q = double(a) / b;
  if (!(q > alpha && q < beta)) throw std::domain_error("a/b outside (alpha, beta)");
  double rho = 1.0 + q - alpha;
  double r4 = rho * rho * rho * rho;
  return 4.0 * kPi * kPi * ((alpha - 1.0) * (r4 - 1.0) / 4.0 + (r4 * rho - 1.0) / 5.0);
}

AngularProfile MapSpec::profile() const {
  if (kind == "identity") return AngularProfile::constant(0.0);
  if (kind == "rotation") return AngularProfile::constant(alpha);
  return AngularProfile::band(alpha, beta);
}

double MapSpec::disk_radius() const {
  if (radius > 0.0) return radius;
  return kind == "band" ? 1.0 + beta - alpha : 1.0;
}

IsotopyPath MapSpec::isotopy() const { return polar_isotopy(profile(), deck_shift, disk_radius()); }

std::string MapSpec::canonical() const {
  return fmt::format("kind={};alpha={:.17g};beta={:.17g};deck_shift={};radius={:.17g}", kind, alpha, beta,
                     deck_shift, disk_radius());
}

void MapSpec::validate() const {
  if (kind != "identity" && kind != "rotation" && kind != "band")
    throw std::invalid_argument("unknown map kind '" + kind + "'");
  if (kind == "band" && !(beta > alpha)) throw std::invalid_argument("band map needs beta > alpha");
  if (radius < 0.0) throw std::invalid_argument("radius must be positive");
}

}  // namespace ptrot
