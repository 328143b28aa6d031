#pragma once

#include <optional>
#include <string>
#include <vector>

#include "epdiff/diffeo.hpp"
#include "epdiff/operator.hpp"
#include "epdiff/symbol.hpp"

namespace epdiff {

enum class Integrator { rk4, midpoint };

struct SolverConfig {
  double dt = 1e-3;
  double t_end = 1.0;
  Integrator integrator = Integrator::rk4;
  /// Inertia symbol; must validate as positive and elliptic on `grid`.
  SymbolSpec inertia = SymbolSpec::bessel_power(1.0);
  TorusGrid grid{1, 64};
  /// Diagnostics are recorded every `cadence` steps and at t_end.
  int cadence = 1;
  /// Sobolev index of the hq_norm diagnostic; max(2s, d/2 + 1.1) when unset.
  std::optional<double> q;
  /// Blow-up guards: H^q growth factor and the CFL-style bound on dt·max|u|
  /// in grid spacings.
  double growth_limit = 1e6;
  double cfl_limit = 0.5;

  /// Throws InvalidParameter naming the offending field.
  void validate() const;
  double diagnostic_q() const;
  int steps() const;
};

/// m = A u
SpectralField momentum(const SpectralField& u, const SpectralOperator& a);

/// −A⁻¹( ∇_u m + (∇u)^T m + (div u) m ), m = A u, products dealiased.
SpectralField euler_arnold_rhs(const SpectralField& u, const SpectralOperator& a);

/// A⁻¹( [A, ∇_u] u − (∇u)^T A u − (div u) A u )
SpectralField spray(const SpectralField& u, const SpectralOperator& a);

/// ½ ∫ A u · u
double kinetic_energy(const SpectralField& u, const SpectralOperator& a);
/// ∫ m dx per component.
std::vector<double> momentum_integral(const SpectralField& u, const SpectralOperator& a);

struct GeodesicState {
  double t = 0.0;
  std::optional<SpectralField> u;
  std::optional<Diffeo> phi;
  std::optional<SpectralField> v;
};

struct Diagnostics {
  double t = 0.0;
  double energy = 0.0;
  std::vector<double> momentum_int;
  double hq_norm = 0.0;
  double linf_u = 0.0;
  /// L² gap between one RK4 step and one midpoint step from the same state.
  double step_residual = 0.0;
};

struct GeodesicTrajectory {
  std::vector<GeodesicState> states;
  std::vector<Diagnostics> diagnostics;

  const GeodesicState& final_state() const { return states.back(); }
  /// Columns t, energy, momentum_int_1..d, hq_norm, linf_u, step_residual.
  std::string to_csv() const;
};

/// Fixed-step integration of u_t = euler_arnold_rhs(u). Throws
/// BlowUpSuspected when a guard in the config trips.
GeodesicTrajectory integrate_eulerian(const SpectralField& u0, const SolverConfig& cfg);

/// Fixed-step integration of φ_t = v, v_t = R_φ S R_{φ⁻¹} v from (id, v0).
GeodesicTrajectory integrate_lagrangian(const SpectralField& v0, const SolverConfig& cfg);

/// Σ_j (A_φ v1 · v2)(x_j) J_φ(x_j) / N^d
double metric_eval(const Diffeo& phi, const SpectralField& v1, const SpectralField& v2, const SpectralOperator& a);

/// ½ G_id(u, u) along the trajectory.
std::vector<double> energy(const GeodesicTrajectory& traj, const SpectralOperator& a);

struct ShootOptions {
  int max_iter = 50;
  /// Initial Armijo step.
  double step = 0.5;
  /// Stop once the L² displacement mismatch is at most tol.
  double tol = 1e-8;
  /// Velocities are parameterized by modes with |k|_inf <= max_mode.
  int max_mode = 4;
  double fd_step = 1e-6;
};

struct ShootResult {
  SpectralField u0;
  /// L² norm of the wrapped displacement mismatch at t_end.
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Gradient descent on the coefficients of u0 with central-difference
/// gradients; returns the best iterate even without convergence.
ShootResult shoot(const Diffeo& phi_target, const SolverConfig& cfg, const ShootOptions& opt = {});

/// L²-orthonormal real basis of vector fields built from modes |k|_inf <= max_mode.
std::vector<SpectralField> velocity_basis(const TorusGrid& grid, int max_mode);

/// L² norm of the displacement difference wrapped to [−½, ½).
double displacement_distance(const Diffeo& a, const Diffeo& b);

}  // namespace epdiff
