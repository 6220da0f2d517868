#pragma once

#include "ptrot/genfun.hpp"

#include <Eigen/Sparse>

#include <vector>

namespace ptrot {

using State = Eigen::VectorXd;
using SparseMat = Eigen::SparseMatrix<double>;

struct Projections {
  Vec2 Q;
  Vec2 P;
  Vec2 Qp;
};

// Space of mb-periodic sequences (x_i, y_i), stored as [x_1, y_1, ..., x_mb, y_mb].
class EbSpace {
 public:
  EbSpace(FactorChain chain, int b);

  int b() const { return b_; }
  int m() const { return chain_.m(); }
  int n() const { return n_; }
  int dim() const { return 2 * n_; }
  const FactorChain& chain() const { return chain_; }

  // 1-based periodic accessors
  int slot(int i) const { return ((i - 1) % n_ + n_) % n_; }
  double x(const State& z, int i) const { return z[2 * slot(i)]; }
  double y(const State& z, int i) const { return z[2 * slot(i) + 1]; }
  Vec2 point(const State& z, int i) const { return {x(z, i), y(z, i)}; }

  State zeta(const State& z) const;
  double action(const State& z) const;
  // Action through the quadrature route for every factor.
  double action_quadrature(const State& z) const;
  SparseMat jacobian(const State& z) const;
  // zeta and its Jacobian from one pass of implicit solves.
  State zeta_jacobian(const State& z, SparseMat& J) const;
  Eigen::MatrixXd jacobian_dense(const State& z) const { return Eigen::MatrixXd(jacobian(z)); }
  Projections projections(const State& z, int i) const;
  // (shift(z, k))_i = z_{i+k}; the symmetry of the construction is k = m.
  State shift(const State& z, int k) const;
  // z_1 = p, z_{i+1} = f_i(z_i).
  State from_orbit(const Vec2& p) const;
  double norm(const State& z) const { return z.norm(); }

 private:
  FactorChain chain_;
  int b_;
  int n_;
};

struct FlowOptions {
  double tol = 1e-9;
  double max_step = 0.5;
  double min_step = 1e-12;
  bool record_action = true;
};

struct FlowTrajectory {
  std::vector<double> t;
  std::vector<State> z;
  std::vector<double> h;
  long accepted = 0;
  long rejected = 0;
  double smallest_step = 0.0;
  double largest_step = 0.0;
  const State& back() const { return z.back(); }
};

// Adaptive embedded Runge-Kutta integration of dz/dt = zeta(z); negative t_end flows backward.
FlowTrajectory flow(const EbSpace& space, const State& z0, double t_end, const FlowOptions& opt = {});
// End point only.
State flow_to(const EbSpace& space, const State& z0, double t, double tol = 1e-10);

// A = sqrt(6K^2 + 3)
double lipschitz_bound(double K);
double lipschitz_certificate(const EbSpace& space, const std::vector<std::pair<State, State>>& pairs);

// Zero threshold used for V' membership.
inline constexpr double kSignZero = 1e-12;
bool in_V_prime(const State& z);
// (1/4) sum sign(x_i)(sign(y_i) - sign(y_{i-1})); throws std::domain_error outside V'.
double linking_form_L(const State& z);

struct SingularCircle {
  int a = 0;
  double radius = 0.0;
  std::vector<State> points;
  double max_residual = 0.0;
};

std::vector<SingularCircle> singular_circles(const EbSpace& space, double alpha, double beta, int samples = 16);
State sigma_point(const EbSpace& space, double alpha, int a, double turns);

double c_ab(double alpha, double beta, int a, int b);
double a_ab(double alpha, double beta, int a, int b);

}  // namespace ptrot
