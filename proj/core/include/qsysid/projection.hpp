#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "qsysid/state_space.hpp"
#include "qsysid/subspace.hpp"
#include "qsysid/types.hpp"

namespace qsysid {

/// Quadratic distance to the target triple:
/// 0.5 (||A - A_hat||_F^2 + ||B - B_hat||_F^2 + ||C - C_hat||_F^2).
double loss(const Matrix& a, const Matrix& b, const Matrix& c_meas, const Matrix& a_hat,
            const Matrix& b_hat, const Matrix& c_hat);

/// Lyapunov certificate P > 0 with A_hat' P + P A_hat = -I.
Matrix init_certificate(const Matrix& a_hat);

/// Rank-constrained LMI feasibility instance: two PSD lifting variables
/// G1 ((10n+3m)^2, rank <= 2n) and G2 ((4n+2m)^2, rank <= 2m), block index
/// maps over the factor layout [I, A', A, B, C', Z', P'] and [I, B', Jm'B'],
/// affine block constraints, epsilon-relaxed cone constraints and the linear
/// loss bound trace[...] <= gamma.
class LiftedProblem {
 public:
  LiftedProblem(const Matrix& a_hat, const Matrix& b_hat, const Matrix& c_hat,
                const Matrix& d_meas, double gamma, double epsilon = 1e-3);

  int modes() const { return n_; }
  int fields() const { return m_; }
  int g1_dim() const { return d1_; }
  int g2_dim() const { return d2_; }
  double gamma() const { return gamma_; }
  void set_gamma(double g) { gamma_ = g; }
  double epsilon() const { return eps_; }
  const Matrix& d_meas() const { return d_meas_; }
  const Matrix& a_hat() const { return a_hat_; }
  const Matrix& b_hat() const { return b_hat_; }
  const Matrix& c_hat() const { return c_hat_; }

  /// Row offset of factor block k (1-based) in G1 / G2.
  int offset1(int k) const { return off1_[k - 1]; }
  int size1(int k) const { return sz1_[k - 1]; }
  int offset2(int k) const { return off2_[k - 1]; }
  int size2(int k) const { return sz2_[k - 1]; }

  Eigen::Block<const Matrix> block1(const Matrix& g1, int k, int l) const;
  Eigen::Block<const Matrix> block2(const Matrix& g2, int k, int l) const;

  /// Exact lifted matrices for given variables: G = F F' with F the stacked
  /// factor; satisfies every auxiliary, cone and rank constraint by
  /// construction.
  void factor_point(const Matrix& a, const Matrix& b, const Matrix& c, const Matrix& z,
                    const Matrix& p, Matrix* g1, Matrix* g2) const;

  /// Loss bound expressed through G1 blocks (linear) plus the target constant.
  double lifted_loss(const Matrix& g1) const;

  /// Named residuals of every constraint at (G1, G2).
  std::map<std::string, double> residuals(const Matrix& g1, const Matrix& g2) const;

 private:
  friend class LiftedSolver;
  int n_, m_, d1_, d2_;
  std::array<int, 7> sz1_, off1_;
  std::array<int, 3> sz2_, off2_;
  Matrix a_hat_, b_hat_, c_hat_, d_meas_;
  double gamma_, eps_;
  Matrix jm_;           // symplectic(m)
  Matrix kmat_;         // Jm D_meas'
  Matrix loss_weight_;  // symmetric W with lifted loss = <W, G1> + c0
  double loss_const_ = 0.0;
  double loss_weight_norm2_ = 0.0;
  Matrix trio_inv_;     // (3I + K K')^-1 for the coupled affine trio
};

/// Feasible certificate: exactly realizable variables with loss <= gamma.
struct FeasiblePoint {
  Matrix a, b, c_meas, z, p;
  double loss = 0.0;
};

struct RankFeasibilityResult {
  bool feasible = false;
  int iterations = 0;
  std::map<std::string, double> residuals;
  Matrix g1, g2;
  std::optional<FeasiblePoint> point;
};

struct RankSolveOptions {
  int max_iter = 2000;
  double tol = 1e-6;        // relative residual target for the G iterates
  int dykstra_cycles = 10;  // inner cycles for the affine-PSD projection
  int anderson_memory = 6;  // 0 disables acceleration
  int stall_window = 120;   // NumericalStall guard
};

/// Alternating projections between the affine-PSD set (exact affine pass +
/// Dykstra over the cone sets) and the rank-bounded PSD set, Anderson
/// accelerated. Feasibility is declared by certificate: variables read from
/// the iterate, Z restored by the Lyapunov solve and C by constraint (II),
/// accepted when the exact point satisfies loss <= gamma. Infeasible is a
/// result, not an error; NumericalStall is thrown when the residual freezes
/// above tolerance.
RankFeasibilityResult solve_rank_feasibility(const LiftedProblem& prob, const Matrix& a0,
                                             const Matrix& b0, const Matrix& c0, const Matrix& z0,
                                             const Matrix& p0,
                                             const RankSolveOptions& opts = {});

enum class SolverKind { lifted, reduced };

struct ProjectionResult {
  QuantumRealization realization;
  double gamma_final = 0.0;
  double loss = 0.0;
  int iterations = 0;
  std::map<std::string, double> residuals;
  SolverKind solver = SolverKind::lifted;
};

struct ReducedSolveOptions {
  int max_iter = 2000;
  double grad_tol = 1e-10;
};

/// Eliminates Z (unique Lyapunov solution) and C (constraint II) and descends
/// the loss over (A, B) with analytic gradients, Barzilai-Borwein steps and a
/// backtracking line search that rejects non-Hurwitz A or near-singular Z.
ProjectionResult reduced_projection(const ClassicalEstimate& target, const Matrix& d_meas,
                                    const std::optional<std::pair<Matrix, Matrix>>& init =
                                        std::nullopt,
                                    const ReducedSolveOptions& opts = {});

/// Loss value and gradients of the reduced parametrization at (A, B).
struct ReducedGradient {
  double loss = 0.0;
  Matrix grad_a, grad_b;
  Matrix z, c_meas;
};
ReducedGradient reduced_loss_gradient(const Matrix& a, const Matrix& b, const Matrix& d_meas,
                                      const Matrix& a_hat, const Matrix& b_hat,
                                      const Matrix& c_hat);

struct BisectionOptions {
  double gamma0 = -1.0;  // <= 0: use 2x the reduced solver's loss
  int rounds = 25;
  RankSolveOptions rank;
  bool init_from_reduced = false;  // warm start the first solve at the reduced solution
};

/// The paper's multiplicative search: halve gamma on feasible, grow by 1.2 on
/// infeasible, warm-starting each solve from the last feasible point.
ProjectionResult bisection_identify(const ClassicalEstimate& target, const Matrix& d_meas,
                                    const BisectionOptions& opts = {});

/// Q from the filter Riccati equation of the realizable triple plus the
/// steady-state gain L.
std::pair<Matrix, Matrix> recover_gain(const Matrix& a, const Matrix& b, const Matrix& c_meas,
                                       const Matrix& d_meas);

/// Similarity transform with V from Z = V Jn V' so that the returned
/// realization satisfies the constraints with Z = Jn exactly.
QuantumRealization to_canonical(const QuantumRealization& real);

}  // namespace qsysid
