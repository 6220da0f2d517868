#pragma once

#include "ptrot/actionflow.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace ptrot {

enum class ProjKind { Q = 0, P = 1, Qp = 2 };

struct DeltaDiskOptions {
  int orbits = 256;  // rounded up to a multiple of the symmetry order
  int levels = 256;
  double c_start = 0.98;
  double t_span = 30.0;
  int segments = 30;
  double newton_tol = 1e-10;
  int max_newton = 25;
  double flow_tol = 1e-11;
  bool verbose = false;
};

struct DeltaDiskStats {
  int base_orbits = 0;
  int shift_step = 1;
  int orbit_shift = 0;
  double lambda_a = 0.0;
  double max_bvp_residual = 0.0;
  double max_end_distance = 0.0;
  double c_start = 0.0;
  int newton_iterations = 0;
  double build_seconds = 0.0;
};

// Mesh coordinates: u in [0, orbits) is periodic, v in [0, levels - 1] from 0 to the singular circle.
struct MeshCoord {
  double u = 0.0;
  double v = 0.0;
};

// Interpolated projection: (1 - sigma) A + sigma B with (A, B) = (Q, P) or (P, Q').
struct ViewKey {
  int index = 1;
  bool primed = false;  // false: q^sigma, true: q'^sigma
  double sigma = 0.0;
  bool operator<(const ViewKey& o) const {
    return std::tie(index, primed, sigma) < std::tie(o.index, o.primed, o.sigma);
  }
};

class DeltaDisk {
 public:
  static DeltaDisk build(const EbSpace& space, double alpha, int a, const DeltaDiskOptions& opt = {});

  int orbits() const { return N_; }
  int levels() const { return L_; }
  int a() const { return a_; }
  int b() const { return b_; }
  int n() const { return n_; }
  int m() const { return m_; }
  double alpha() const { return alpha_; }
  double radius() const { return rho_; }
  double action_gap() const { return C_; }
  const DeltaDiskStats& stats() const { return stats_; }
  double level_value(int l) const;

  // Full state of a mesh node.
  State node_state(int j, int l) const;
  // Projection of kind at index i of node (j, l).
  Vec2 node_point(ProjKind kind, int i, int j, int l) const;
  Vec2 view_node(const ViewKey& key, int j, int l) const;

  // Piecewise polar-bilinear interpolation of a view.
  Vec2 eval(const ViewKey& key, const MeshCoord& c) const;
  // Inverse of eval; nullopt outside the disk.
  std::optional<MeshCoord> invert(const ViewKey& key, const Vec2& p, const MeshCoord* guess = nullptr) const;

  // Lifted landing angle of orbit u on the circle (turns), e(u + N) = e(u) + 1.
  double landing_angle(const ViewKey& key, double u) const;
  // Lifted angle change from node (u, v) to the circle along the orbit.
  double excursion(const ViewKey& key, const MeshCoord& c) const;

  // Spacing of the mesh in the plane (max node-to-neighbor distance of the Q_1 view).
  double resolution() const { return resolution_; }

  void save(const std::string& path) const;
  static DeltaDisk load(const std::string& path);
  // Loads `path` when it exists (checking the parameters), otherwise builds and saves it.
  static DeltaDisk cached(const EbSpace& space, double alpha, int a, const DeltaDiskOptions& opt,
                          const std::string& path);

  static constexpr std::uint32_t kCacheVersion = 3;

 private:
  struct Hash;
  struct Tables;
  std::shared_ptr<const Hash> hash_for(const ViewKey& key) const;
  const Tables& tables_for(int index, ProjKind kind) const;
  // index -> (representative index, orbit offset)
  std::pair<int, int> reduce_index(int i) const;
  // orbit j -> (base orbit, shift count)
  std::pair<int, int> decompose(int j) const;
  // Corners (j,l), (j+1,l), (j,l+1), (j+1,l+1) in polar form with a common lift.
  void cell_polar(const ViewKey& key, int j, int l, std::array<double, 4>& r, std::array<double, 4>& ell) const;
  bool cell_solve(const ViewKey& key, int j, int l, double r, double ell, double& fu, double& fv) const;
  bool cell_invert(const ViewKey& key, int j, int l, double r, double ell, MeshCoord& out) const;
  void finalize();

  int N_ = 0, L_ = 0, G_ = 0;
  int a_ = 0, b_ = 0, m_ = 0, n_ = 0;
  int shift_step_ = 1;  // index shift realizing the symmetry between neighbouring orbit classes
  int orbit_shift_ = 0;
  double alpha_ = 0.0, rho_ = 0.0, C_ = 0.0, resolution_ = 0.0;
  DeltaDiskStats stats_;
  std::vector<double> levels_;
  // base[g][l]: state; proj[g][l][kind * n + slot]
  std::vector<std::vector<State>> base_;
  std::vector<std::vector<std::vector<Vec2>>> proj_;
  std::vector<std::pair<int, int>> decomp_;

  mutable std::shared_ptr<std::mutex> cache_mutex_ = std::make_shared<std::mutex>();
  mutable std::map<ViewKey, std::shared_ptr<Hash>> hashes_;
  mutable std::map<std::pair<int, int>, std::shared_ptr<Tables>> tables_;
};

// f-hat = q_1 phi q_1^{-1}
Vec2 finite_order_map(const DeltaDisk& disk, const Vec2& p);
// Evaluation of the isotopy from the identity to f^b built from interpolated projections, s in [0, 2mb].
Vec2 good_isotopy(const DeltaDisk& disk, const EbSpace& space, double s, const Vec2& p);
// Same with the mesh coordinate of q_1^{-1}(p) already known.
Vec2 good_isotopy_at(const DeltaDisk& disk, const EbSpace& space, double s, const MeshCoord& c);

}  // namespace ptrot
