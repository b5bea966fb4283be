#pragma once

// Benchmark kernels and the 2-D Euler solver, built from graphs over tensors.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "weft/errors.hpp"
#include "weft/graph.hpp"
#include "weft/layout.hpp"
#include "weft/scheduler.hpp"
#include "weft/tensor.hpp"

namespace weft::kernels {

// Record schemas ---------------------------------------------------------------

/// position (f64 x3), velocity (f64 x3)
RecordSchema particle_schema(LayoutKind layout);

/// Conserved variables: density, total energy, momentum (f64 x2).
RecordSchema euler_schema(LayoutKind layout);

/// phi (f64), speed (f64), state (i32; see EikonalState)
RecordSchema eikonal_schema(LayoutKind layout);

namespace slot {
inline constexpr std::size_t rho = 0;
inline constexpr std::size_t energy = 1;
inline constexpr std::size_t mom_x = 2;
inline constexpr std::size_t mom_y = 3;

inline constexpr std::size_t phi = 0;
inline constexpr std::size_t speed = 1;
inline constexpr std::size_t state = 2;
}  // namespace slot

enum class EikonalState : std::int32_t { Far = 0, Active = 1, Source = 2 };

// SAXPY / particles -----------------------------------------------------------

/// y <- a * x + y over every interior cell, one node per block.
Graph saxpy_graph(double a, Tensor& x, Tensor& y, ExecutionKind kind = ExecutionKind::Device);

/// position += velocity * dt.
Graph particle_update_graph(Tensor& particles, double dt, ExecutionKind kind = ExecutionKind::Device);

// Euler equations -------------------------------------------------------------

struct Conserved {
  double rho;
  double energy;
  double mom_x;
  double mom_y;
};

struct Primitive {
  double rho;
  double u;
  double v;
  double p;
};

inline double pressure(const Conserved& s, double gamma) {
  return (gamma - 1.0) * (s.energy - 0.5 * (s.mom_x * s.mom_x + s.mom_y * s.mom_y) / s.rho);
}

inline Conserved to_conserved(const Primitive& w, double gamma) {
  return {w.rho, w.p / (gamma - 1.0) + 0.5 * w.rho * (w.u * w.u + w.v * w.v), w.rho * w.u, w.rho * w.v};
}

inline Primitive to_primitive(const Conserved& s, double gamma) {
  return {s.rho, s.mom_x / s.rho, s.mom_y / s.rho, pressure(s, gamma)};
}

/// Physical flux along `dim` (0 = x, 1 = y). Throws NumericalDomainError for
/// nonpositive density or pressure.
Conserved euler_flux(const Conserved& s, std::size_t dim, double gamma);

/// FORCE flux at the face between `left` and `right`: the mean of the
/// Lax-Friedrichs and Richtmyer fluxes.
Conserved force_flux(const Conserved& left, const Conserved& right, std::size_t dim, double dt, double dx,
                     double gamma);

/// |u| + c.
double wavespeed(const Conserved& s, double gamma);

template <class It>
Conserved load_state(const It& it) {
  return {it.template ref<double>(slot::rho), it.template ref<double>(slot::energy),
          it.template ref<double>(slot::mom_x), it.template ref<double>(slot::mom_y)};
}

template <class It>
void store_state(const It& it, const Conserved& s) {
  it.template ref<double>(slot::rho) = s.rho;
  it.template ref<double>(slot::energy) = s.energy;
  it.template ref<double>(slot::mom_x) = s.mom_x;
  it.template ref<double>(slot::mom_y) = s.mom_y;
}

/// Sum over both dimensions of F(i+1/2) - F(i-1/2) at the iterator's cell.
template <class It>
Conserved flux_difference_at(const It& in, double dt, double dx, double gamma) {
  const Conserved c = load_state(in);
  Conserved total{0.0, 0.0, 0.0, 0.0};
  for (std::size_t d = 0; d < 2; ++d) {
    const Conserved lo = load_state(in.offset(d, -1));
    const Conserved hi = load_state(in.offset(d, 1));
    const Conserved f_hi = force_flux(c, hi, d, dt, dx, gamma);
    const Conserved f_lo = force_flux(lo, c, d, dt, dx, gamma);
    total.rho += f_hi.rho - f_lo.rho;
    total.energy += f_hi.energy - f_lo.energy;
    total.mom_x += f_hi.mom_x - f_lo.mom_x;
    total.mom_y += f_hi.mom_y - f_lo.mom_y;
  }
  return total;
}

/// out <- flux difference of `in` (boundary loaded first, then padded split).
Graph flux_difference_graph(Tensor& in, Tensor& out, double dt, double dx, double gamma = 1.4,
                            BoundaryKind boundary = BoundaryKind::clamp(),
                            ExecutionKind kind = ExecutionKind::Device);

struct EulerParams {
  double gamma = 1.4;
  double cfl = 0.9;
  /// Cell width (square cells).
  double h = 1.0;
  std::size_t steps = 1000;
  /// The first `startup_steps` steps use cfl * startup_factor.
  std::size_t startup_steps = 5;
  double startup_factor = 0.2;
  BoundaryKind boundary = BoundaryKind::clamp();
};

/// Run-time state of the solver loop, shared by the graph nodes.
struct EulerControl {
  EulerParams params;
  std::size_t step = 0;
  double dt = 0.0;
  double time = 0.0;
};

/// One node chain per block: wavespeeds -> max reduce -> dt -> boundary ->
/// x update (in -> out) -> boundary -> y update (out -> in), repeated under
/// a conditional until `steps` steps have run. The y update writes back into
/// `in`, so the solution is in `in` afterwards.
Graph euler_solver_graph(Tensor& in, Tensor& out, Tensor& wavespeeds, ReductionResult& max_wavespeed,
                         std::shared_ptr<EulerControl> control, ExecutionKind kind = ExecutionKind::Device);

/// Shock-bubble interaction: a planar shock of Mach `mach` moving in +x into
/// quiescent gas that holds a circular bubble of lower density.
struct ShockBubbleConfig {
  std::size_t nx = 640;
  std::size_t ny = 400;
  double length_x = 1.6;
  double gamma = 1.4;
  double mach = 3.81;
  double ambient_density = 1.0;
  double ambient_pressure = 1.0;
  double shock_x = 0.1;
  double bubble_x = 0.5;
  double bubble_y = 0.5;
  double bubble_radius = 0.2;
  double bubble_density_ratio = 0.1;
  double cfl = 0.9;
  std::size_t steps = 1000;

  double h() const { return length_x / static_cast<double>(nx); }
};

ShockBubbleConfig load_shock_bubble(const std::filesystem::path& path);

/// Post-shock state behind a normal shock of Mach `mach` moving in +x into a
/// gas at rest (Rankine-Hugoniot relations).
Primitive post_shock_state(double mach, double rho_ahead, double p_ahead, double gamma);

/// Fills the interior of `state` with the shock-bubble initial data.
void init_shock_bubble(Tensor& state, const ShockBubbleConfig& cfg);

// Eikonal equation (fast iterative method) ----------------------------------

/// Godunov upwind update from the smaller x-neighbour `a` and y-neighbour `b`.
inline double godunov_update(double a, double b, double h, double speed) {
  const double hf = h / speed;
  if (std::isinf(a) && std::isinf(b)) return std::numeric_limits<double>::infinity();
  if (std::abs(a - b) >= hf) return std::min(a, b) + hf;
  return 0.5 * (a + b + std::sqrt(2.0 * hf * hf - (a - b) * (a - b)));
}

struct FimParams {
  double h = 1.0;
  double tolerance = 1e-12;
  std::size_t max_iterations = 100000;
};

struct FimResult {
  std::size_t iterations = 0;
  bool converged = false;
};

/// Sets phi = inf, speed, state Far everywhere, then marks `sources` (global
/// 2-D indices) with phi 0 and their axis neighbours Active.
void fim_initialize(Tensor& grid, const std::vector<Size3>& sources, double speed = 1.0);

/// Iterates the active-list update (double-buffered through `scratch`) until
/// the largest change of an iteration is at most the tolerance. The result is
/// left in `grid`.
FimResult fim_solve(Executor& executor, Tensor& grid, Tensor& scratch, const FimParams& params,
                    ExecutionKind kind = ExecutionKind::Device);

// Scaling --------------------------------------------------------------------

struct ScalingMetrics {
  double weak_efficiency;
  double strong_efficiency;
};

/// weak = t1 / tN * 100, strong = t1 / (N * tN) * 100.
ScalingMetrics scaling_metrics(double t1, double tn, std::size_t n);

}  // namespace weft::kernels
