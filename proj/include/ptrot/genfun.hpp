#pragma once

#include "ptrot/maps.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ptrot {

// Values and partial derivatives of the implicit maps x = g(X, y), Y = g'(X, y).
struct ImplicitSolve {
  double x = 0.0;
  double Y = 0.0;
  double gX = 0.0;   // dg/dX
  double gy = 0.0;   // dg/dy
  double gpX = 0.0;  // dg'/dX
  double gpy = 0.0;  // dg'/dy
};

class Factor {
 public:
  virtual ~Factor() = default;
  virtual Vec2 forward(const Vec2& p) const = 0;
  virtual Vec2 inverse(const Vec2& p) const = 0;
  virtual Mat2 jacobian(const Vec2& p) const = 0;
  // Initial guess for x in the implicit solve.
  virtual double guess_x(double X, double y) const { return X; }
  // Closed-form generating value, normalized by h(0,0) = 0, when available.
  virtual std::optional<double> h_closed(double X, double y) const { return std::nullopt; }
  // Radii where the factor is only piecewise smooth.
  virtual std::vector<double> kink_radii() const { return {}; }
  virtual std::string describe() const = 0;
};

class PolarFactor : public Factor {
 public:
  explicit PolarFactor(AngularProfile p) : map_(p) {}
  Vec2 forward(const Vec2& p) const override { return map_(p); }
  Vec2 inverse(const Vec2& p) const override { return map_.inverse(p); }
  Mat2 jacobian(const Vec2& p) const override { return map_.jacobian(p); }
  double guess_x(double X, double y) const override;
  std::optional<double> h_closed(double X, double y) const override;
  std::vector<double> kink_radii() const override;
  std::string describe() const override;
  const AngularProfile& profile() const { return map_.profile(); }

 private:
  PolarMap map_;
};

using FactorPtr = std::shared_ptr<const Factor>;

struct SolveOptions {
  double K = 4.0;
  double tol = 1e-12;
  int max_newton = 50;
};

// x with pi_1 f(x, y) = X, and Y = pi_2 f(x, y).
ImplicitSolve solve_untwisted(const Factor& f, double X, double y, const SolveOptions& opt = {});

struct QuadratureOptions {
  int pieces = 4;  // Gauss-Legendre panels per smooth piece
  double path_tol = 1e-8;
  bool check_path = true;
};

// Line integral of x dy + Y dX from the origin.
double generating_value(const Factor& f, double X, double y, const QuadratureOptions& opt = {});

struct ConditionReport {
  std::string name;
  double max_ratio = 0.0;
  long samples = 0;
};

struct CertificateReport {
  double K = 0.0;
  double r_max = 0.0;
  int n_radius = 0;
  int n_angle = 0;
  bool untwisted = true;
  std::vector<ConditionReport> conditions;
  bool pass = false;
  double observed_K() const;
  std::string to_text() const;
};

struct SampleSpec {
  double r_max = 2.0;
  int n_radius = 200;
  int n_angle = 200;
};

CertificateReport verify_untwisted_lipschitz(const Factor& f, double K, const SampleSpec& spec = {});

class FactorChain {
 public:
  FactorChain() = default;
  FactorChain(std::vector<FactorPtr> factors, double K);

  int m() const { return int(factors_.size()); }
  double K() const { return K_; }
  // 1-based, m-periodic.
  const Factor& factor(int i) const;
  bool uniform() const { return uniform_; }
  Vec2 compose(const Vec2& p) const;
  const std::vector<FactorPtr>& factors() const { return factors_; }

 private:
  std::vector<FactorPtr> factors_;
  double K_ = 1.0;
  bool uniform_ = false;
};

struct DecompositionResult {
  FactorChain chain;
  std::vector<CertificateReport> reports;
  bool pass = false;
};

// m equal polar factors with profile omega / m, followed by the extra factors.
DecompositionResult factor_polar(const AngularProfile& profile, int m, double K_target,
                                 const std::vector<FactorPtr>& extra = {}, const SampleSpec& spec = {});

// Same, throwing when certification fails.
FactorChain certified_chain(const AngularProfile& profile, int m, double K_target);

}  // namespace ptrot
