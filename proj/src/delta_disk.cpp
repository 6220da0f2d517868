#include "ptrot/delta_disk.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ptrot {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double wrap_half(double t) { return t - std::round(t); }

double turns_of(const Vec2& p) { return std::atan2(p.y(), p.x()) / kTwoPi; }

int pmod(int a, int n) { return ((a % n) + n) % n; }

// Linking number of a two-dimensional eigenspace, probed at a few directions.
std::optional<double> plane_linking(const VectorXd& v1, const VectorXd& v2) {
  for (double t : {0.0, 0.37, 0.91, 1.43, 2.2, 2.9}) {
    VectorXd w = std::cos(t) * v1 + std::sin(t) * v2;
    try {
      return linking_form_L(w);
    } catch (const std::domain_error&) {
    }
  }
  return std::nullopt;
}

struct Spectrum {
  MatrixXd low, plane, high;
  VectorXd lam_low, lam_plane, lam_high;
};

Spectrum split_spectrum(const EbSpace& space, int a) {
  State zero = State::Zero(space.dim());
  MatrixXd M = space.jacobian_dense(zero);
  M = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
  const VectorXd& lam = es.eigenvalues();
  const MatrixXd& V = es.eigenvectors();
  int D = int(lam.size());
  int start = -1;
  for (int j = 0; j < D;) {
    bool pair = j + 1 < D && std::abs(lam[j + 1] - lam[j]) <= 1e-9 * (1.0 + std::abs(lam[j]));
    if (pair) {
      auto L = plane_linking(V.col(j), V.col(j + 1));
      if (L && std::abs(*L - a) < 1e-9) {
        if (start >= 0) throw std::runtime_error("invariant disk: several eigenplanes with linking a");
        start = j;
      }
      j += 2;
    } else {
      ++j;
    }
  }
  if (start < 0) throw std::runtime_error(fmt::format("invariant disk: no eigenplane with linking {} at 0", a));
  if (!(lam[start] > 0.0)) throw std::runtime_error("invariant disk: eigenplane is not unstable");
  Spectrum s;
  s.low = V.leftCols(start);
  s.lam_low = lam.head(start);
  s.plane = V.middleCols(start, 2);
  s.lam_plane = lam.segment(start, 2);
  s.high = V.rightCols(D - start - 2);
  s.lam_high = lam.tail(D - start - 2);
  return s;
}

Vec2 linear_q1(const EbSpace& space, const VectorXd& v) {
  const double eps = 1e-3;
  return space.projections(State(eps * v), 1).Q / eps;
}

double max_projection_radius(const EbSpace& space, const State& z) {
  double r = 0.0;
  for (int i = 1; i <= space.n(); ++i) r = std::max(r, space.projections(z, i).Q.norm());
  return r;
}

struct Builder {
  const EbSpace& sp;
  double alpha;
  int a;
  DeltaDiskOptions opt;
  Spectrum spec;
  int D = 0;

  State sigma_at(double t) const { return sigma_point(sp, alpha, a, t); }

  std::pair<double, State> nearest_sigma(const State& z) const {
    auto d2 = [&](double t) { return (z - sigma_at(t)).squaredNorm(); };
    const int K = 256;
    int best = 0;
    double bv = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
      double v = d2(double(k) / K);
      if (v < bv) bv = v, best = k;
    }
    auto r = boost::math::tools::brent_find_minima(d2, (best - 1.0) / K, (best + 1.0) / K,
                                                   std::numeric_limits<double>::digits / 2);
    return {r.first, sigma_at(r.first)};
  }

  // z' = zeta(z), Phi' = J(z) Phi by fixed-step RK4.
  MatrixXd variational(const State& z0, double tau) const {
    int steps = std::max(1, int(std::ceil(tau / 0.05)));
    double h = tau / steps;
    State z = z0;
    MatrixXd P = MatrixXd::Identity(D, D);
    SparseMat J;
    for (int s = 0; s < steps; ++s) {
      State k1 = sp.zeta_jacobian(z, J);
      MatrixXd K1 = J * P;
      State k2 = sp.zeta_jacobian(z + 0.5 * h * k1, J);
      MatrixXd K2 = J * (P + 0.5 * h * K1);
      State k3 = sp.zeta_jacobian(z + 0.5 * h * k2, J);
      MatrixXd K3 = J * (P + 0.5 * h * K2);
      State k4 = sp.zeta_jacobian(z + h * k3, J);
      MatrixXd K4 = J * (P + h * K3);
      z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      P += h / 6.0 * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
    }
    return P;
  }

  struct Bvp {
    std::vector<State> z;
    State sigma;
    double residual = 0.0;
    int iterations = 0;
  };

  // Multiple shooting from the eigenplane at 0 to the stable manifold of the singular circle.
  Bvp solve(const Vec2& target, double T, int segs) const {
    int nl = int(spec.low.cols()), nh = int(spec.high.cols());
    double tau = T / segs;
    State z0 = spec.plane * target;
    // initial guess: forward flow while the distance to the circle decreases
    std::vector<State> zs(segs + 1);
    zs[0] = z0;
    int last = 0;
    double best = (z0 - nearest_sigma(z0).second).norm();
    for (int k = 1; k <= segs; ++k) {
      State z;
      try {
        z = flow_to(sp, zs[k - 1], tau, 1e-9);
      } catch (const std::exception&) {
        break;
      }
      double d = (z - nearest_sigma(z).second).norm();
      if (!(d < best)) break;
      best = d;
      zs[k] = z;
      last = k;
    }
    Bvp out;
    out.sigma = nearest_sigma(zs[last]).second;
    for (int k = last + 1; k <= segs; ++k) zs[k] = out.sigma;

    for (int round = 0; round < 4; ++round) {
      MatrixXd Js = sp.jacobian_dense(out.sigma);
      Js = 0.5 * (Js + Js.transpose());
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(Js);
      std::vector<int> pos;
      for (int j = 0; j < D; ++j)
        if (es.eigenvalues()[j] > 1e-7) pos.push_back(j);
      if (int(pos.size()) != nh)
        throw std::runtime_error(fmt::format(
            "invariant disk: {} unstable directions at the singular circle, {} expected", pos.size(), nh));
      MatrixXd U(D, nh);
      for (int k = 0; k < nh; ++k) U.col(k) = es.eigenvectors().col(pos[k]);

      int rows = (segs + 1) * D;
      auto residual = [&](const std::vector<State>& z) {
        VectorXd F(rows);
        int r = 0;
        F.segment(r, nl) = spec.low.transpose() * z[0];
        r += nl;
        F.segment(r, 2) = spec.plane.transpose() * z[0] - target;
        r += 2;
        for (int k = 0; k < segs; ++k) {
          F.segment(r, D) = flow_to(sp, z[k], tau, opt.flow_tol) - z[k + 1];
          r += D;
        }
        F.segment(r, nh) = U.transpose() * (z[segs] - out.sigma);
        return F;
      };
      auto safe_norm = [&](const std::vector<State>& z, VectorXd& F) {
        try {
          F = residual(z);
          double v = F.lpNorm<Eigen::Infinity>();
          return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
        } catch (const std::exception&) {
          return std::numeric_limits<double>::infinity();
        }
      };
      VectorXd F;
      double fn = safe_norm(zs, F);
      if (!std::isfinite(fn)) throw std::runtime_error("invariant disk: initial guess leaves the domain");
      int it = 0;
      for (; it < opt.max_newton && fn >= opt.newton_tol; ++it) {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(size_t(segs) * D * (D + 1) + size_t(D) * D);
        int r = 0;
        for (int q = 0; q < nl; ++q, ++r)
          for (int c = 0; c < D; ++c) trip.emplace_back(r, c, spec.low(c, q));
        for (int q = 0; q < 2; ++q, ++r)
          for (int c = 0; c < D; ++c) trip.emplace_back(r, c, spec.plane(c, q));
        for (int k = 0; k < segs; ++k, r += D) {
          MatrixXd P = variational(zs[k], tau);
          for (int c = 0; c < D; ++c)
            for (int q = 0; q < D; ++q)
              if (P(q, c) != 0.0) trip.emplace_back(r + q, k * D + c, P(q, c));
          for (int q = 0; q < D; ++q) trip.emplace_back(r + q, (k + 1) * D + q, -1.0);
        }
        for (int q = 0; q < nh; ++q, ++r)
          for (int c = 0; c < D; ++c) trip.emplace_back(r, segs * D + c, U(c, q));
        SparseMat A(rows, rows);
        A.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<SparseMat> lu;
        lu.compute(A);
        if (lu.info() != Eigen::Success) throw std::runtime_error("invariant disk: singular shooting matrix");
        VectorXd dx = lu.solve(-F);
        double lam = 1.0;
        bool accepted = false;
        for (int h = 0; h < 12; ++h, lam *= 0.5) {
          std::vector<State> trial(zs);
          for (int k = 0; k <= segs; ++k) trial[k] += lam * dx.segment(k * D, D);
          VectorXd Ft;
          double ft = safe_norm(trial, Ft);
          if (ft < fn) {
            zs = std::move(trial);
            F = std::move(Ft);
            fn = ft;
            accepted = true;
            break;
          }
        }
        if (!accepted) break;
      }
      out.iterations += it;
      if (fn >= opt.newton_tol && fn > 1e3 * opt.newton_tol)
        throw std::runtime_error(fmt::format("invariant disk: shooting did not converge, residual {:.3e}", fn));
      out.residual = fn;
      State moved = nearest_sigma(zs[segs]).second;
      double shift = (moved - out.sigma).norm();
      out.sigma = moved;
      if (shift < 1e-10) break;
    }
    out.z = std::move(zs);
    return out;
  }
};

}  // namespace

struct DeltaDisk::Hash {
  double dr = 1.0, rmax = 0.0;
  int nr = 0, na = 0;
  std::vector<std::vector<int>> buckets;
  const std::vector<int>& at(double r, double turns) const {
    int i = std::clamp(int(r / dr), 0, nr - 1);
    int k = pmod(int(std::floor(turns * na)), na);
    return buckets[size_t(i) * na + k];
  }
};

struct DeltaDisk::Tables {
  std::vector<double> landing;             // lifted, size N
  std::vector<std::vector<double>> excur;  // [j][l]
};

double DeltaDisk::level_value(int l) const { return levels_.at(size_t(l)); }

std::pair<int, int> DeltaDisk::decompose(int j) const { return decomp_[size_t(pmod(j, N_))]; }

std::pair<int, int> DeltaDisk::reduce_index(int i) const {
  int r = pmod(i - 1, n_);
  int t = r / shift_step_;
  return {r % shift_step_ + 1, int((long(t) * orbit_shift_) % N_)};
}

State DeltaDisk::node_state(int j, int l) const {
  auto [g, k] = decompose(j);
  const State& z = base_[size_t(g)][size_t(l)];
  if (k == 0) return z;
  State out(z.size());
  int s = k * shift_step_;
  for (int i = 0; i < n_; ++i) {
    int src = pmod(i + s, n_);
    out[2 * i] = z[2 * src];
    out[2 * i + 1] = z[2 * src + 1];
  }
  return out;
}

Vec2 DeltaDisk::node_point(ProjKind kind, int i, int j, int l) const {
  auto [g, k] = decompose(j);
  int slot = pmod(i - 1 + k * shift_step_, n_);
  return proj_[size_t(g)][size_t(l)][size_t(int(kind) * n_ + slot)];
}

Vec2 DeltaDisk::view_node(const ViewKey& key, int j, int l) const {
  ProjKind ka = key.primed ? ProjKind::P : ProjKind::Q;
  ProjKind kb = key.primed ? ProjKind::Qp : ProjKind::P;
  Vec2 A = node_point(ka, key.index, j, l);
  if (key.sigma == 0.0) return A;
  Vec2 B = node_point(kb, key.index, j, l);
  return (1.0 - key.sigma) * A + key.sigma * B;
}

void DeltaDisk::cell_polar(const ViewKey& key, int j, int l, std::array<double, 4>& r,
                           std::array<double, 4>& ell) const {
  const int js[4] = {j, j + 1, j, j + 1};
  const int ls[4] = {l, l, l + 1, l + 1};
  double ref = turns_of(view_node(key, j, l + 1));
  for (int c = 0; c < 4; ++c) {
    if (ls[c] == 0) {
      r[c] = 0.0;
      ell[c] = ref + wrap_half(turns_of(view_node(key, js[c], 1)) - ref);
    } else {
      Vec2 p = view_node(key, js[c], ls[c]);
      r[c] = p.norm();
      ell[c] = ref + wrap_half(turns_of(p) - ref);
    }
  }
}

Vec2 DeltaDisk::eval(const ViewKey& key, const MeshCoord& c) const {
  auto [i0, off] = reduce_index(key.index);
  ViewKey k0{i0, key.primed, key.sigma};
  double u = c.u + off;
  double fl = std::floor(u);
  int j = pmod(int(fl), N_);
  double fu = u - fl;
  double v = std::clamp(c.v, 0.0, double(L_ - 1));
  int l = std::min(int(std::floor(v)), L_ - 2);
  double fv = v - l;
  std::array<double, 4> r, e;
  cell_polar(k0, j, l, r, e);
  double w[4] = {(1 - fu) * (1 - fv), fu * (1 - fv), (1 - fu) * fv, fu * fv};
  double rr = 0.0, ee = 0.0;
  for (int q = 0; q < 4; ++q) rr += w[q] * r[q], ee += w[q] * e[q];
  return CoverPoint{ee, rr}.project();
}

bool DeltaDisk::cell_solve(const ViewKey& key, int j, int l, double rp, double ellp, double& fu, double& fv) const {
  std::array<double, 4> r, e;
  cell_polar(key, j, l, r, e);
  double mean = 0.25 * (e[0] + e[1] + e[2] + e[3]);
  double target = ellp + std::round(mean - ellp);
  fu = 0.5;
  fv = 0.5;
  for (int it = 0; it < 40; ++it) {
    double w[4] = {(1 - fu) * (1 - fv), fu * (1 - fv), (1 - fu) * fv, fu * fv};
    double du[4] = {-(1 - fv), (1 - fv), -fv, fv};
    double dv[4] = {-(1 - fu), -fu, (1 - fu), fu};
    double F0 = -rp, F1 = -target, a = 0, b = 0, c = 0, d = 0;
    for (int q = 0; q < 4; ++q) {
      F0 += w[q] * r[q];
      F1 += w[q] * e[q];
      a += du[q] * r[q];
      b += dv[q] * r[q];
      c += du[q] * e[q];
      d += dv[q] * e[q];
    }
    double det = a * d - b * c;
    if (det == 0.0 || !std::isfinite(det)) return false;
    double su = (d * F0 - b * F1) / det, sv = (a * F1 - c * F0) / det;
    fu -= su;
    fv -= sv;
    if (!std::isfinite(fu) || std::abs(fu) > 64.0 || std::abs(fv) > 64.0) return false;
    if (std::abs(su) + std::abs(sv) < 1e-15) break;
  }
  return true;
}

bool DeltaDisk::cell_invert(const ViewKey& key, int j, int l, double rp, double ellp, MeshCoord& out) const {
  double fu, fv;
  if (!cell_solve(key, j, l, rp, ellp, fu, fv)) return false;
  const double tol = 1e-10;
  if (fu < -tol || fu > 1 + tol || fv < -tol || fv > 1 + tol) return false;
  out.u = j + std::clamp(fu, 0.0, 1.0);
  out.v = l + std::clamp(fv, 0.0, 1.0);
  return true;
}

std::shared_ptr<const DeltaDisk::Hash> DeltaDisk::hash_for(const ViewKey& key) const {
  std::lock_guard<std::mutex> lock(*cache_mutex_);
  auto it = hashes_.find(key);
  if (it != hashes_.end()) return it->second;
  auto h = std::make_shared<Hash>();
  h->nr = 64;
  h->na = 256;
  double rmax = 0.0;
  for (int j = 0; j < N_; ++j) rmax = std::max(rmax, view_node(key, j, L_ - 1).norm());
  for (int j = 0; j < N_; ++j)
    for (int l = 1; l < L_; ++l) rmax = std::max(rmax, view_node(key, j, l).norm());
  h->rmax = rmax;
  h->dr = rmax * (1.0 + 1e-9) / h->nr;
  h->buckets.assign(size_t(h->nr) * h->na, {});
  std::array<double, 4> r, e;
  for (int j = 0; j < N_; ++j) {
    for (int l = 0; l < L_ - 1; ++l) {
      cell_polar(key, j, l, r, e);
      auto [r0, r1] = std::minmax_element(r.begin(), r.end());
      auto [e0, e1] = std::minmax_element(e.begin(), e.end());
      int i0 = std::clamp(int(*r0 / h->dr), 0, h->nr - 1), i1 = std::clamp(int(*r1 / h->dr), 0, h->nr - 1);
      int k0 = int(std::floor(*e0 * h->na)), k1 = int(std::floor(*e1 * h->na));
      if (k1 - k0 >= h->na) k1 = k0 + h->na - 1;
      int id = j * (L_ - 1) + l;
      for (int i = i0; i <= i1; ++i)
        for (int k = k0; k <= k1; ++k) h->buckets[size_t(i) * h->na + pmod(k, h->na)].push_back(id);
    }
  }
  if (hashes_.size() >= 48) {
    for (auto it2 = hashes_.begin(); it2 != hashes_.end();)
      it2 = it2->first.sigma != 0.0 ? hashes_.erase(it2) : std::next(it2);
  }
  hashes_[key] = h;
  return h;
}

std::optional<MeshCoord> DeltaDisk::invert(const ViewKey& key, const Vec2& p, const MeshCoord* guess) const {
  auto [i0, off] = reduce_index(key.index);
  ViewKey k0{i0, key.primed, key.sigma};
  double rp = p.norm();
  if (rp == 0.0) return MeshCoord{0.0, 0.0};
  double ang = turns_of(p);
  auto finish = [&](MeshCoord c) {
    c.u = std::fmod(c.u - off, double(N_));
    if (c.u < 0.0) c.u += N_;
    return c;
  };
  MeshCoord out;
  if (guess) {
    double u = guess->u + off;
    int j0 = int(std::floor(u)), l0 = std::clamp(int(std::floor(guess->v)), 0, L_ - 2);
    for (int dl : {0, -1, 1})
      for (int dj : {0, -1, 1}) {
        int l = l0 + dl;
        if (l < 0 || l > L_ - 2) continue;
        int j = pmod(j0 + dj, N_);
        if (cell_invert(k0, j, l, rp, ang, out)) return finish(out);
      }
    int j = j0, l = l0;
    for (int step = 0; step < 64; ++step) {
      double fu, fv;
      if (!cell_solve(k0, pmod(j, N_), l, rp, ang, fu, fv)) break;
      const double tol = 1e-10;
      if (fu >= -tol && fu <= 1 + tol && fv >= -tol && fv <= 1 + tol) {
        out.u = pmod(j, N_) + std::clamp(fu, 0.0, 1.0);
        out.v = l + std::clamp(fv, 0.0, 1.0);
        return finish(out);
      }
      int dj = std::clamp(int(std::floor(fu)), -8, 8), dl = std::clamp(int(std::floor(fv)), -8, 8);
      int nl = std::clamp(l + dl, 0, L_ - 2);
      if (dj == 0 && nl == l) break;
      j += dj;
      l = nl;
    }
  }
  auto hp = hash_for(k0);
  const Hash& h = *hp;
  if (rp > h.rmax) {
    if (rp > h.rmax * (1.0 + 1e-11)) return std::nullopt;
    rp = h.rmax;
  }
  for (int id : h.at(rp, ang)) {
    if (cell_invert(k0, id / (L_ - 1), id % (L_ - 1), rp, ang, out)) return finish(out);
  }
  return std::nullopt;
}

const DeltaDisk::Tables& DeltaDisk::tables_for(int index, ProjKind kind) const {
  std::lock_guard<std::mutex> lock(*cache_mutex_);
  auto key = std::make_pair(index, int(kind));
  auto it = tables_.find(key);
  if (it != tables_.end()) return *it->second;
  auto t = std::make_shared<Tables>();
  t->landing.resize(size_t(N_));
  t->excur.assign(size_t(N_), std::vector<double>(size_t(L_), 0.0));
  for (int j = 0; j < N_; ++j) {
    double e = turns_of(node_point(kind, index, j, L_ - 1));
    t->landing[size_t(j)] = j == 0 ? e : t->landing[size_t(j - 1)] + wrap_half(e - t->landing[size_t(j - 1)]);
    auto& W = t->excur[size_t(j)];
    for (int l = L_ - 2; l >= 1; --l)
      W[size_t(l)] = W[size_t(l + 1)] + wrap_half(turns_of(node_point(kind, index, j, l + 1)) -
                                                  turns_of(node_point(kind, index, j, l)));
    W[0] = W[1];
  }
  double wind = t->landing.back() + wrap_half(t->landing[0] - t->landing.back()) - t->landing[0];
  if (std::abs(wind - 1.0) > 1e-9)
    throw std::runtime_error(fmt::format("invariant disk: boundary winds {} times", wind));
  tables_[key] = t;
  return *t;
}

double DeltaDisk::landing_angle(const ViewKey& key, double u) const {
  auto [i0, off] = reduce_index(key.index);
  auto lifted = [&](ProjKind kind) {
    const Tables& t = tables_for(i0, kind);
    double x = u + off;
    double k = std::floor(x / N_);
    double xr = x - k * N_;
    int j = std::min(int(xr), N_ - 1);
    double f = xr - j;
    double e0 = t.landing[size_t(j)];
    double e1 = j + 1 < N_ ? t.landing[size_t(j + 1)] : t.landing[0] + 1.0;
    return k + (1 - f) * e0 + f * e1;
  };
  ProjKind ka = key.primed ? ProjKind::P : ProjKind::Q;
  ProjKind kb = key.primed ? ProjKind::Qp : ProjKind::P;
  if (key.sigma == 0.0) return lifted(ka);
  return (1 - key.sigma) * lifted(ka) + key.sigma * lifted(kb);
}

double DeltaDisk::excursion(const ViewKey& key, const MeshCoord& c) const {
  auto [i0, off] = reduce_index(key.index);
  double u = c.u + off;
  double fl = std::floor(u);
  int j = pmod(int(fl), N_), j1 = pmod(j + 1, N_);
  double fu = u - fl;
  double v = std::clamp(c.v, 0.0, double(L_ - 1));
  int l = std::min(int(std::floor(v)), L_ - 2);
  double fv = v - l;
  auto bil = [&](ProjKind kind) {
    const auto& W = tables_for(i0, kind).excur;
    return (1 - fu) * (1 - fv) * W[size_t(j)][size_t(l)] + fu * (1 - fv) * W[size_t(j1)][size_t(l)] +
           (1 - fu) * fv * W[size_t(j)][size_t(l + 1)] + fu * fv * W[size_t(j1)][size_t(l + 1)];
  };
  ProjKind ka = key.primed ? ProjKind::P : ProjKind::Q;
  ProjKind kb = key.primed ? ProjKind::Qp : ProjKind::P;
  if (key.sigma == 0.0) return bil(ka);
  return (1 - key.sigma) * bil(ka) + key.sigma * bil(kb);
}

void DeltaDisk::finalize() {
  decomp_.assign(size_t(N_), {-1, 0});
  int per = N_ / G_;
  for (int g = 0; g < G_; ++g)
    for (int k = 0; k < per; ++k) decomp_[size_t(pmod(int((g + long(k) * orbit_shift_) % N_), N_))] = {g, k};
  for (const auto& d : decomp_)
    if (d.first < 0) throw std::runtime_error("invariant disk: inconsistent orbit symmetry");
  ViewKey q1{1, false, 0.0};
  resolution_ = 0.0;
  for (int j = 0; j < N_; ++j)
    for (int l = 0; l < L_; ++l) {
      Vec2 p = view_node(q1, j, l);
      resolution_ = std::max(resolution_, (view_node(q1, j + 1, l) - p).norm());
      if (l + 1 < L_) resolution_ = std::max(resolution_, (view_node(q1, j, l + 1) - p).norm());
    }
  hashes_.clear();
  tables_.clear();
}

DeltaDisk DeltaDisk::build(const EbSpace& space, double alpha, int a, const DeltaDiskOptions& opt) {
  auto t_start = std::chrono::steady_clock::now();
  if (opt.orbits < 3 || opt.levels < 3 || opt.segments < 1 || !(opt.t_span > 0.0))
    throw std::invalid_argument("invariant disk: bad mesh options");
  int b = space.b(), n = space.n();
  double q = double(a) / b;
  if (!(q > alpha)) throw std::domain_error("invariant disk: a/b must exceed alpha");
  Builder bl{space, alpha, a, opt, split_spectrum(space, a), space.dim()};

  // orientation: the Q_1 view of the eigenplane is positively oriented
  Vec2 e1 = linear_q1(space, bl.spec.plane.col(0)), e2 = linear_q1(space, bl.spec.plane.col(1));
  if (e1.x() * e2.y() - e1.y() * e2.x() < 0.0) bl.spec.plane.col(1) *= -1.0;

  DeltaDisk d;
  d.a_ = a;
  d.b_ = b;
  d.m_ = space.m();
  d.n_ = n;
  d.alpha_ = alpha;
  d.rho_ = 1.0 + q - alpha;
  d.L_ = opt.levels;

  // symmetry of the disk under the index shift
  int p = space.chain().uniform() ? 1 : space.m();
  MatrixXd SV(space.dim(), 2);
  for (int c = 0; c < 2; ++c) SV.col(c) = space.shift(bl.spec.plane.col(c), p);
  Eigen::Matrix2d A1 = bl.spec.plane.transpose() * SV;
  bool sym = A1.determinant() > 0.0 && (A1.transpose() * A1 - Eigen::Matrix2d::Identity()).norm() < 1e-6;
  int order = 0;
  double delta = std::atan2(A1(1, 0), A1(0, 0)) / kTwoPi;
  if (sym)
    for (int k = 1; k <= n / p; ++k)
      if (std::abs(k * delta - std::round(k * delta)) < 1e-6) {
        order = k;
        break;
      }
  if (order == 0) sym = false;
  if (sym) {
    d.N_ = order * ((opt.orbits + order - 1) / order);
    d.shift_step_ = p;
    d.orbit_shift_ = pmod(int(std::lround(delta * d.N_)), d.N_);
    d.G_ = d.orbit_shift_ == 0 ? d.N_ : std::gcd(d.orbit_shift_, d.N_);
  } else {
    d.N_ = opt.orbits;
    d.shift_step_ = n;
    d.orbit_shift_ = 0;
    d.G_ = d.N_;
  }

  // radius of the linear region in each direction of the eigenplane
  auto smax = [&](double psi) {
    VectorXd v = std::cos(psi) * bl.spec.plane.col(0) + std::sin(psi) * bl.spec.plane.col(1);
    double r = 0.0;
    const double eps = 1e-3;
    for (int i = 1; i <= n; ++i) r = std::max(r, space.projections(State(eps * v), i).Q.norm() / eps);
    return 1.0 / r;
  };

  State sigma_ref = sigma_point(space, alpha, a, 0.0);
  d.C_ = space.action(sigma_ref);
  d.levels_.resize(size_t(d.L_));
  for (int l = 0; l < d.L_; ++l) {
    double s = std::sin(kPi * l / (2.0 * (d.L_ - 1)));
    d.levels_[size_t(l)] = d.C_ * s * s;
  }

  int nu = int(bl.spec.high.cols()) + 2;
  MatrixXd Vu(space.dim(), nu);
  VectorXd lu(nu);
  Vu << bl.spec.plane, bl.spec.high;
  lu << bl.spec.lam_plane, bl.spec.lam_high;

  d.stats_ = {};
  d.stats_.lambda_a = bl.spec.lam_plane[0];
  d.stats_.c_start = opt.c_start;
  d.base_.resize(size_t(d.G_));
  d.proj_.resize(size_t(d.G_));
  double tau = opt.t_span / opt.segments;
  for (int g = 0; g < d.G_; ++g) {
    double psi = kTwoPi * g / d.N_;
    Vec2 dir(std::cos(psi), std::sin(psi));
    double c = opt.c_start;
    Builder::Bvp bvp;
    for (int attempt = 0;; ++attempt) {
      bvp = bl.solve(c * smax(psi) * dir, opt.t_span, opt.segments);
      if (max_projection_radius(space, bvp.z[0]) <= 1.0) break;
      if (attempt == 8) throw std::runtime_error("invariant disk: start point outside the linear region");
      c *= 0.8;
    }
    d.stats_.c_start = std::min(d.stats_.c_start, c);
    d.stats_.max_bvp_residual = std::max(d.stats_.max_bvp_residual, bvp.residual);
    d.stats_.newton_iterations += bvp.iterations;

    std::vector<double> H(bvp.z.size());
    for (size_t k = 0; k < H.size(); ++k) H[k] = space.action(bvp.z[k]);
    VectorXd w = Vu.transpose() * bvp.z[0];
    auto hlin = [&](double t) {
      double s = 0.0;
      for (int j = 0; j < nu; ++j) s += 0.5 * lu[j] * w[j] * w[j] * std::exp(2.0 * lu[j] * t);
      return s;
    };
    double h0 = hlin(0.0);
    auto& states = d.base_[size_t(g)];
    states.resize(size_t(d.L_));
    states[0] = State::Zero(space.dim());
    for (int l = 1; l < d.L_ - 1; ++l) {
      double cl = d.levels_[size_t(l)];
      if (cl < h0) {
        double t = std::log(cl / h0) / (2.0 * lu[0]);
        for (int it = 0; it < 60; ++it) {
          double hv = hlin(t), dh = 0.0;
          for (int j = 0; j < nu; ++j) dh += lu[j] * lu[j] * w[j] * w[j] * std::exp(2.0 * lu[j] * t);
          double step = (std::log(hv) - std::log(cl)) / (dh / hv);
          t -= step;
          if (std::abs(step) < 1e-15 * (1.0 + std::abs(t))) break;
        }
        State z = State::Zero(space.dim());
        for (int j = 0; j < nu; ++j) z += w[j] * std::exp(lu[j] * t) * Vu.col(j);
        states[size_t(l)] = z;
        continue;
      }
      int k = 0;
      while (k + 1 < int(H.size()) && H[size_t(k + 1)] <= cl) ++k;
      State z = bvp.z[size_t(k)];
      double cap = k + 1 < int(H.size()) ? tau : 50.0;
      bool ok = false;
      for (int it = 0; it < 200; ++it) {
        double r = cl - space.action(z);
        if (std::abs(r) <= 1e-13 * std::max(1.0, d.C_)) {
          ok = true;
          break;
        }
        State zt = space.zeta(z);
        double dt = std::clamp(r / zt.squaredNorm(), -cap, cap);
        z = flow_to(space, z, dt, opt.flow_tol);
      }
      if (!ok) throw std::runtime_error(fmt::format("invariant disk: level {} not reached", l));
      states[size_t(l)] = z;
    }
    states[size_t(d.L_ - 1)] = bvp.sigma;
    d.stats_.max_end_distance = std::max(d.stats_.max_end_distance, (bvp.z.back() - bvp.sigma).norm());

    auto& pr = d.proj_[size_t(g)];
    pr.assign(size_t(d.L_), std::vector<Vec2>(size_t(3 * n), Vec2::Zero()));
    for (int l = 1; l < d.L_; ++l)
      for (int i = 1; i <= n; ++i) {
        int s = space.slot(i);
        if (l == d.L_ - 1) {
          // singular: all projections coincide
          Vec2 P = space.point(states[size_t(l)], i);
          for (int kind = 0; kind < 3; ++kind) pr[size_t(l)][size_t(kind * n + s)] = P;
          continue;
        }
        Projections P = space.projections(states[size_t(l)], i);
        pr[size_t(l)][size_t(s)] = P.Q;
        pr[size_t(l)][size_t(n + s)] = P.P;
        pr[size_t(l)][size_t(2 * n + s)] = P.Qp;
      }
    if (opt.verbose)
      fmt::print(stderr, "orbit {}/{}: residual {:.2e}, newton {}, c {:.3f}\n", g + 1, d.G_, bvp.residual,
                 bvp.iterations, c);
  }
  d.stats_.base_orbits = d.G_;
  d.stats_.shift_step = d.shift_step_;
  d.stats_.orbit_shift = d.orbit_shift_;
  d.finalize();
  d.stats_.build_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return d;
}

namespace {

constexpr char kMagic[8] = {'P', 'T', 'R', 'O', 'T', 'D', 'S', 'K'};

static_assert(std::endian::native == std::endian::little, "cache format is little-endian");

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("invariant disk cache: truncated file");
  return v;
}

}  // namespace

void DeltaDisk::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.write(kMagic, 8);
  put<std::uint32_t>(os, kCacheVersion);
  for (int v : {N_, L_, G_, a_, b_, m_, n_, shift_step_, orbit_shift_}) put<std::int32_t>(os, v);
  for (double v : {alpha_, rho_, C_, stats_.lambda_a, stats_.max_bvp_residual, stats_.max_end_distance,
                   stats_.c_start, stats_.build_seconds})
    put<double>(os, v);
  put<std::int32_t>(os, stats_.newton_iterations);
  for (double v : levels_) put<double>(os, v);
  for (int g = 0; g < G_; ++g)
    for (int l = 0; l < L_; ++l) {
      for (Eigen::Index k = 0; k < 2 * n_; ++k) put<double>(os, base_[size_t(g)][size_t(l)][k]);
      for (const Vec2& p : proj_[size_t(g)][size_t(l)]) put<double>(os, p.x()), put<double>(os, p.y());
    }
  if (!os) throw std::runtime_error("error writing " + path);
}

DeltaDisk DeltaDisk::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("invariant disk cache: bad magic");
  auto version = get<std::uint32_t>(is);
  if (version != kCacheVersion)
    throw std::runtime_error(
        fmt::format("invariant disk cache: version {} found, version {} expected", version, kCacheVersion));
  DeltaDisk d;
  for (int* v : {&d.N_, &d.L_, &d.G_, &d.a_, &d.b_, &d.m_, &d.n_, &d.shift_step_, &d.orbit_shift_})
    *v = get<std::int32_t>(is);
  if (d.N_ < 1 || d.L_ < 2 || d.G_ < 1 || d.n_ < 1 || d.G_ > d.N_ || d.shift_step_ < 1)
    throw std::runtime_error("invariant disk cache: corrupted header");
  for (double* v : {&d.alpha_, &d.rho_, &d.C_, &d.stats_.lambda_a, &d.stats_.max_bvp_residual,
                    &d.stats_.max_end_distance, &d.stats_.c_start, &d.stats_.build_seconds})
    *v = get<double>(is);
  d.stats_.newton_iterations = get<std::int32_t>(is);
  d.levels_.resize(size_t(d.L_));
  for (double& v : d.levels_) v = get<double>(is);
  d.base_.assign(size_t(d.G_), std::vector<State>(size_t(d.L_)));
  d.proj_.assign(size_t(d.G_), std::vector<std::vector<Vec2>>(size_t(d.L_)));
  for (int g = 0; g < d.G_; ++g)
    for (int l = 0; l < d.L_; ++l) {
      State z(2 * d.n_);
      for (Eigen::Index k = 0; k < 2 * d.n_; ++k) z[k] = get<double>(is);
      d.base_[size_t(g)][size_t(l)] = std::move(z);
      auto& pr = d.proj_[size_t(g)][size_t(l)];
      pr.resize(size_t(3 * d.n_));
      for (Vec2& p : pr) {
        double x = get<double>(is);
        p = Vec2(x, get<double>(is));
      }
    }
  d.stats_.base_orbits = d.G_;
  d.stats_.shift_step = d.shift_step_;
  d.stats_.orbit_shift = d.orbit_shift_;
  d.finalize();
  return d;
}

DeltaDisk DeltaDisk::cached(const EbSpace& space, double alpha, int a, const DeltaDiskOptions& opt,
                            const std::string& path) {
  if (std::filesystem::exists(path)) {
    DeltaDisk d = load(path);
    if (d.a_ != a || d.b_ != space.b() || d.m_ != space.m() || d.L_ != opt.levels || d.alpha_ != alpha)
      throw std::runtime_error("invariant disk cache: parameters of " + path + " differ from the request");
    return d;
  }
  DeltaDisk d = build(space, alpha, a, opt);
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  d.save(path);
  return d;
}

Vec2 finite_order_map(const DeltaDisk& disk, const Vec2& p) {
  auto c = disk.invert(ViewKey{1, false, 0.0}, p);
  if (!c) throw std::domain_error("finite_order_map: point outside the invariant disk");
  return disk.eval(ViewKey{1 + disk.m(), false, 0.0}, *c);
}

Vec2 good_isotopy_at(const DeltaDisk& disk, const EbSpace& space, double s, const MeshCoord& c) {
  int n = disk.n();
  if (s < 0.0 || s > 2.0 * n) throw std::domain_error("good_isotopy: parameter out of range");
  int k = std::min(int(std::floor(s / 2.0)), n - 1);
  double rest = s - 2.0 * k;
  ViewKey key = rest <= 1.0 ? ViewKey{n - k + 1, false, rest} : ViewKey{n - k + 1, true, rest - 1.0};
  Vec2 q = disk.eval(key, c);
  for (int i = n - k + 1; i <= n; ++i) q = space.chain().factor(i).forward(q);
  return q;
}

Vec2 good_isotopy(const DeltaDisk& disk, const EbSpace& space, double s, const Vec2& p) {
  auto c = disk.invert(ViewKey{1, false, 0.0}, p);
  if (!c) throw std::domain_error("good_isotopy: point outside the invariant disk");
  return good_isotopy_at(disk, space, s, *c);
}

}  // namespace ptrot
