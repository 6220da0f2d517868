#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace ptrot {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using PlaneMap = std::function<Vec2(const Vec2&)>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Rotation amount as a function of the radius, in turns.
class AngularProfile {
 public:
  enum class Kind { constant, band };

  static AngularProfile constant(double alpha);
  static AngularProfile band(double alpha, double beta);

  // Same shape, every value multiplied by c.
  AngularProfile scaled(double c) const;

  double omega(double r) const;
  double domega(double r) const;
  // Primitive of r^2 theta'(r) / 2 from 0, theta in radians.
  double s0(double r) const;

  Kind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double scale() const { return scale_; }
  double band_end() const { return 1.0 + beta_ - alpha_; }

 private:
  AngularProfile(Kind k, double a, double b, double c) : kind_(k), alpha_(a), beta_(b), scale_(c) {}
  Kind kind_;
  double alpha_;
  double beta_;
  double scale_;
};

// (r, phi) -> (r, phi + omega(r)).
class PolarMap {
 public:
  explicit PolarMap(AngularProfile p) : profile_(p) {}
  Vec2 operator()(const Vec2& p) const;
  Vec2 inverse(const Vec2& p) const;
  Mat2 jacobian(const Vec2& p) const;
  const AngularProfile& profile() const { return profile_; }

 private:
  AngularProfile profile_;
};

Mat2 rotation(double turns);

// Point of the universal cover of the punctured plane: lifted angle in turns and radius.
struct CoverPoint {
  double ell = 0.0;
  double r = 1.0;

  Vec2 project() const;
  static CoverPoint lift(const Vec2& p, double near_ell = 0.0);
  CoverPoint deck(int k) const { return {ell + k, r}; }
};

struct IsotopyPath {
  std::function<Vec2(double, const Vec2&)> family;
  std::function<CoverPoint(double, const CoverPoint&)> lift;
  double s_max = 1.0;
  double max_step = 0.05;
  double r_max = 1e300;
};

// f_s = rotation by s * (omega(r) + k); the lift advances ell by that amount.
IsotopyPath polar_isotopy(const AngularProfile& profile, int deck_shift = 0, double r_max = 1e300);
IsotopyPath identity_isotopy(double r_max = 1e300);

CoverPoint eval_lift(const IsotopyPath& path, double s, const CoverPoint& z);

// Inner map on the unit disk, twist on the band, rotation by beta outside.
PlaneMap band_extend(PlaneMap inner, double alpha, double beta);

double restricted_calabi_closed_form(double alpha, double beta, int a, int b);

// Plain-text key-value description of a map of the supported family.
struct MapSpec {
  std::string kind = "band";  // identity | rotation | band
  double alpha = 0.3;
  double beta = 0.45;
  int deck_shift = 0;
  double radius = 0.0;  // 0: natural radius (1 or the band end)

  AngularProfile profile() const;
  double disk_radius() const;
  IsotopyPath isotopy() const;
  std::string canonical() const;
  void validate() const;
};

}  // namespace ptrot
