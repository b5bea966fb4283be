#include "weft/kernels.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace weft::kernels {

RecordSchema particle_schema(LayoutKind layout) {
  return RecordSchema({vector_of(ScalarKind::F64, 3), vector_of(ScalarKind::F64, 3)}, layout);
}

RecordSchema euler_schema(LayoutKind layout) {
  return RecordSchema({scalar_of(ScalarKind::F64), scalar_of(ScalarKind::F64), vector_of(ScalarKind::F64, 2)},
                      layout);
}

RecordSchema eikonal_schema(LayoutKind layout) {
  return RecordSchema({scalar_of(ScalarKind::F64), scalar_of(ScalarKind::F64), scalar_of(ScalarKind::I32)},
                      layout);
}

Graph saxpy_graph(double a, Tensor& x, Tensor& y, ExecutionKind kind) {
  if (x.global_extents() != y.global_extents() || x.block_grid() != y.block_grid()) {
    throw BuildError("saxpy needs x and y of the same shape and partitioning");
  }
  Graph g(kind);
  g.split([](auto& xi, auto& yi, double alpha) { *yi = alpha * *xi + *yi; }, x, y, a);
  return g;
}

Graph particle_update_graph(Tensor& particles, double dt, ExecutionKind kind) {
  Graph g(kind);
  g.split(
      [](auto& p, double step) {
        for (std::size_t i = 0; i < 3; ++i) p.template ref<double>(i) += p.template ref<double>(3 + i) * step;
      },
      particles, dt);
  return g;
}

Conserved euler_flux(const Conserved& s, std::size_t dim, double gamma) {
  if (!(s.rho > 0.0)) throw NumericalDomainError("nonpositive density " + std::to_string(s.rho));
  const double p = pressure(s, gamma);
  if (!(p > 0.0)) throw NumericalDomainError("nonpositive pressure " + std::to_string(p));
  const double un = (dim == 0 ? s.mom_x : s.mom_y) / s.rho;
  Conserved f{s.rho * un, (s.energy + p) * un, s.mom_x * un, s.mom_y * un};
  if (dim == 0) {
    f.mom_x += p;
  } else {
    f.mom_y += p;
  }
  return f;
}

Conserved force_flux(const Conserved& l, const Conserved& r, std::size_t dim, double dt, double dx, double gamma) {
  const Conserved fl = euler_flux(l, dim, gamma);
  const Conserved fr = euler_flux(r, dim, gamma);
  const double lf = 0.5 * dx / dt;
  const double ri = 0.5 * dt / dx;
  const Conserved lax{0.5 * (fl.rho + fr.rho) - lf * (r.rho - l.rho),
                      0.5 * (fl.energy + fr.energy) - lf * (r.energy - l.energy),
                      0.5 * (fl.mom_x + fr.mom_x) - lf * (r.mom_x - l.mom_x),
                      0.5 * (fl.mom_y + fr.mom_y) - lf * (r.mom_y - l.mom_y)};
  const Conserved mid{0.5 * (l.rho + r.rho) - ri * (fr.rho - fl.rho),
                      0.5 * (l.energy + r.energy) - ri * (fr.energy - fl.energy),
                      0.5 * (l.mom_x + r.mom_x) - ri * (fr.mom_x - fl.mom_x),
                      0.5 * (l.mom_y + r.mom_y) - ri * (fr.mom_y - fl.mom_y)};
  const Conserved rich = euler_flux(mid, dim, gamma);
  return {0.5 * (lax.rho + rich.rho), 0.5 * (lax.energy + rich.energy), 0.5 * (lax.mom_x + rich.mom_x),
          0.5 * (lax.mom_y + rich.mom_y)};
}

double wavespeed(const Conserved& s, double gamma) {
  if (!(s.rho > 0.0)) throw NumericalDomainError("nonpositive density " + std::to_string(s.rho));
  const double p = pressure(s, gamma);
  if (!(p > 0.0)) throw NumericalDomainError("nonpositive pressure " + std::to_string(p));
  const double u = s.mom_x / s.rho;
  const double v = s.mom_y / s.rho;
  return std::sqrt(u * u + v * v) + std::sqrt(gamma * p / s.rho);
}

Graph flux_difference_graph(Tensor& in, Tensor& out, double dt, double dx, double gamma, BoundaryKind boundary,
                            ExecutionKind kind) {
  if (in.padding() < 1) throw BuildError("flux difference needs an input tensor with padding >= 1");
  Graph g(kind);
  g.then_load_boundary(in, boundary);
  g.then_split(
      [dt, dx, gamma](auto& src, auto& dst) { store_state(dst, flux_difference_at(src, dt, dx, gamma)); },
      concurrent_padded_access(in), out);
  return g;
}

namespace {

/// One dimensionally split update: dst <- src - dt/h (F(i+1/2) - F(i-1/2)).
template <class It>
void update_along(const It& src, const It& dst, std::size_t dim, double dt, double h, double gamma) {
  const Conserved c = load_state(src);
  const Conserved lo = load_state(src.offset(dim, -1));
  const Conserved hi = load_state(src.offset(dim, 1));
  const Conserved f_hi = force_flux(c, hi, dim, dt, h, gamma);
  const Conserved f_lo = force_flux(lo, c, dim, dt, h, gamma);
  const double k = dt / h;
  store_state(dst, Conserved{c.rho - k * (f_hi.rho - f_lo.rho), c.energy - k * (f_hi.energy - f_lo.energy),
                             c.mom_x - k * (f_hi.mom_x - f_lo.mom_x), c.mom_y - k * (f_hi.mom_y - f_lo.mom_y)});
}

}  // namespace

Graph euler_solver_graph(Tensor& in, Tensor& out, Tensor& wavespeeds, ReductionResult& max_wavespeed,
                         std::shared_ptr<EulerControl> control, ExecutionKind kind) {
  if (in.dims() != 2) throw BuildError("the Euler solver expects 2-D state tensors");
  if (in.padding() < 1 || out.padding() < 1) throw BuildError("Euler state tensors need padding >= 1");
  if (control->params.steps == 0) throw ConfigError("the Euler solver needs at least one step");
  EulerControl* ctl = control.get();
  const double gamma = ctl->params.gamma;
  ReductionResult* max_ws = &max_wavespeed;

  Graph g(kind);
  g.split([gamma](auto& s, auto& ws) { *ws = wavespeed(load_state(s), gamma); }, in, wavespeeds)
      .then_reduce(wavespeeds, max_wavespeed, MaxReducer{})
      .then(named("set_dt",
                  [control, max_ws] {
                    const double s = max_ws->value_and_reset();
                    if (!(s > 0.0) || !std::isfinite(s)) {
                      throw NumericalDomainError("invalid maximum wavespeed " + std::to_string(s));
                    }
                    const EulerParams& p = control->params;
                    const double cfl = control->step < p.startup_steps ? p.cfl * p.startup_factor : p.cfl;
                    control->dt = cfl * p.h / s;
                  }))
      .then_load_boundary(in, ctl->params.boundary)
      .then_split([ctl, gamma](auto& src, auto& dst) { update_along(src, dst, 0, ctl->dt, ctl->params.h, gamma); },
                  concurrent_padded_access(in), out)
      .then_load_boundary(out, ctl->params.boundary)
      .then_split([ctl, gamma](auto& src, auto& dst) { update_along(src, dst, 1, ctl->dt, ctl->params.h, gamma); },
                  concurrent_padded_access(out), in)
      .conditional([control] {
        control->time += control->dt;
        return ++control->step < control->params.steps;
      });
  return g;
}

ShockBubbleConfig load_shock_bubble(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open shock-bubble config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed shock-bubble config " + path.string() + ": " + e.what());
  }
  ShockBubbleConfig c;
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  read("nx", c.nx);
  read("ny", c.ny);
  read("length_x", c.length_x);
  read("gamma", c.gamma);
  read("mach", c.mach);
  read("ambient_density", c.ambient_density);
  read("ambient_pressure", c.ambient_pressure);
  read("shock_x", c.shock_x);
  read("bubble_x", c.bubble_x);
  read("bubble_y", c.bubble_y);
  read("bubble_radius", c.bubble_radius);
  read("bubble_density_ratio", c.bubble_density_ratio);
  read("cfl", c.cfl);
  read("steps", c.steps);
  if (c.nx == 0 || c.ny == 0 || !(c.length_x > 0.0) || !(c.mach > 1.0) || !(c.gamma > 1.0)) {
    throw ConfigError("shock-bubble config needs nx, ny > 0, length_x > 0, mach > 1 and gamma > 1");
  }
  return c;
}

Primitive post_shock_state(double mach, double rho_ahead, double p_ahead, double gamma) {
  const double m2 = mach * mach;
  const double rho = rho_ahead * (gamma + 1.0) * m2 / ((gamma - 1.0) * m2 + 2.0);
  const double p = p_ahead * (2.0 * gamma * m2 - (gamma - 1.0)) / (gamma + 1.0);
  const double shock_speed = mach * std::sqrt(gamma * p_ahead / rho_ahead);
  const double u = shock_speed * (1.0 - rho_ahead / rho);
  return {rho, u, 0.0, p};
}

void init_shock_bubble(Tensor& state, const ShockBubbleConfig& cfg) {
  if (state.dims() != 2) throw ConfigError("shock-bubble initial data is 2-D");
  const double h = cfg.h();
  const Primitive post = post_shock_state(cfg.mach, cfg.ambient_density, cfg.ambient_pressure, cfg.gamma);
  const Primitive ambient{cfg.ambient_density, 0.0, 0.0, cfg.ambient_pressure};
  const Primitive bubble{cfg.ambient_density * cfg.bubble_density_ratio, 0.0, 0.0, cfg.ambient_pressure};
  for (std::size_t b = 0; b < state.block_count(); ++b) {
    Block& blk = state.block(b);
    BlockStorage& st = blk.storage();
    for_each_cell(blk.interior_box(), [&](const Index3& pos) {
      const double x = (static_cast<double>(blk.origin()[0] + static_cast<std::size_t>(pos[0])) + 0.5) * h;
      const double y = (static_cast<double>(blk.origin()[1] + static_cast<std::size_t>(pos[1])) + 0.5) * h;
      const double dx = x - cfg.bubble_x;
      const double dy = y - cfg.bubble_y;
      const Primitive& w =
          x < cfg.shock_x ? post : (dx * dx + dy * dy < cfg.bubble_radius * cfg.bubble_radius ? bubble : ambient);
      const Conserved s = to_conserved(w, cfg.gamma);
      const std::size_t cell = blk.cell_index(pos);
      st.ref<double>(slot::rho, cell) = s.rho;
      st.ref<double>(slot::energy, cell) = s.energy;
      st.ref<double>(slot::mom_x, cell) = s.mom_x;
      st.ref<double>(slot::mom_y, cell) = s.mom_y;
    });
  }
}

void fim_initialize(Tensor& grid, const std::vector<Size3>& sources, double speed) {
  if (grid.dims() != 2) throw ConfigError("the eikonal solver is 2-D");
  if (sources.empty()) throw ConfigError("the eikonal solver needs at least one source");
  if (!(speed > 0.0)) throw ConfigError("eikonal speed must be positive");
  const double inf = std::numeric_limits<double>::infinity();
  for (auto& blk : grid.blocks()) {
    BlockStorage& st = blk.storage();
    for_each_cell(blk.padded_box(), [&](const Index3& pos) {
      const std::size_t cell = blk.cell_index(pos);
      st.ref<double>(slot::phi, cell) = inf;
      st.ref<double>(slot::speed, cell) = speed;
      st.set<std::int32_t>(slot::state, 0, cell, static_cast<std::int32_t>(EikonalState::Far));
    });
  }
  const auto n0 = static_cast<std::ptrdiff_t>(grid.global_extents()[0]);
  const auto n1 = static_cast<std::ptrdiff_t>(grid.global_extents()[1]);
  for (const Size3& s : sources) {
    if (s[0] >= grid.global_extents()[0] || s[1] >= grid.global_extents()[1]) {
      throw IndexError("eikonal source outside the grid");
    }
    const std::array<std::array<std::ptrdiff_t, 2>, 4> nbrs{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
    for (const auto& d : nbrs) {
      const std::ptrdiff_t i = static_cast<std::ptrdiff_t>(s[0]) + d[0];
      const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(s[1]) + d[1];
      if (i < 0 || j < 0 || i >= n0 || j >= n1) continue;
      const Size3 g{static_cast<std::size_t>(i), static_cast<std::size_t>(j), 0};
      if (grid.get<std::int32_t>(g, slot::state) == static_cast<std::int32_t>(EikonalState::Far)) {
        grid.set<std::int32_t>(g, static_cast<std::int32_t>(EikonalState::Active), slot::state);
      }
    }
  }
  for (const Size3& s : sources) {
    grid.set<double>(s, 0.0, slot::phi);
    grid.set<std::int32_t>(s, static_cast<std::int32_t>(EikonalState::Source), slot::state);
  }
}

namespace {

template <class It>
std::int32_t state_of(const It& it) {
  return it.template ref<std::int32_t>(slot::state);
}

/// One Jacobi sweep of the active-list update: reads `src` (with padding),
/// writes `dst`, and folds the largest change into `delta`.
template <class It, class Dt>
void fim_update(const It& src, const It& dst, Dt& delta, double h, bool first_half) {
  const double old = src.template ref<double>(slot::phi);
  const std::int32_t st = state_of(src);
  double updated = old;
  std::int32_t next = st == static_cast<std::int32_t>(EikonalState::Source) ? st
                                                                             : static_cast<std::int32_t>(EikonalState::Far);
  if (st != static_cast<std::int32_t>(EikonalState::Source)) {
    const It xl = src.offset(0, -1);
    const It xh = src.offset(0, 1);
    const It yl = src.offset(1, -1);
    const It yh = src.offset(1, 1);
    const auto active = static_cast<std::int32_t>(EikonalState::Active);
    const bool evaluate = st == active || state_of(xl) == active || state_of(xh) == active ||
                          state_of(yl) == active || state_of(yh) == active;
    if (evaluate) {
      const double a = std::min(xl.template ref<double>(slot::phi), xh.template ref<double>(slot::phi));
      const double b = std::min(yl.template ref<double>(slot::phi), yh.template ref<double>(slot::phi));
      const double candidate = godunov_update(a, b, h, src.template ref<double>(slot::speed));
      if (candidate < old) {
        updated = candidate;
        next = active;
      }
    }
  }
  double change = old - updated;
  if (std::isnan(change)) change = 0.0;
  dst.template ref<double>(slot::phi) = updated;
  dst.template ref<double>(slot::speed) = src.template ref<double>(slot::speed);
  dst.template ref<std::int32_t>(slot::state) = next;
  *delta = first_half ? change : std::max(*delta, change);
}

}  // namespace

FimResult fim_solve(Executor& executor, Tensor& grid, Tensor& scratch, const FimParams& params, ExecutionKind kind) {
  if (!(params.h > 0.0)) throw ConfigError("eikonal spacing h must be positive");
  if (grid.padding() < 1) throw ConfigError("the eikonal grid needs padding >= 1");
  if (!(grid.schema() == scratch.schema()) || grid.global_extents() != scratch.global_extents() ||
      !(grid.spec() == scratch.spec()) || grid.padding() != scratch.padding()) {
    throw ConfigError("eikonal scratch tensor must match the grid");
  }
  Tensor delta(RecordSchema::scalar(), grid.spec(), 0, grid.global_extents());
  ReductionResult change;
  const double inf = std::numeric_limits<double>::infinity();
  const BoundaryKind far = BoundaryKind::constant({inf, 1.0, static_cast<double>(EikonalState::Far)});
  const double h = params.h;
  auto iterations = std::make_shared<std::size_t>(0);
  auto converged = std::make_shared<bool>(false);
  const double tol = params.tolerance;
  const std::size_t cap = params.max_iterations;

  Graph g(kind);
  g.then_load_boundary(grid, far)
      .then_split([h](auto& src, auto& dst, auto& d) { fim_update(src, dst, d, h, true); },
                  concurrent_padded_access(grid), scratch, delta)
      .then_load_boundary(scratch, far)
      .then_split([h](auto& src, auto& dst, auto& d) { fim_update(src, dst, d, h, false); },
                  concurrent_padded_access(scratch), grid, delta)
      .then_reduce(delta, change, MaxReducer{})
      .conditional([&change, iterations, converged, tol, cap] {
        ++*iterations;
        const double c = change.value_and_reset();
        *converged = c <= tol;
        return !*converged && *iterations < cap;
      });
  g.freeze();
  executor.execute(g);
  return {*iterations, *converged};
}

ScalingMetrics scaling_metrics(double t1, double tn, std::size_t n) {
  if (!(t1 > 0.0) || !(tn > 0.0)) throw ConfigError("scaling metrics need positive times");
  if (n == 0) throw ConfigError("scaling metrics need N >= 1");
  return {t1 / tn * 100.0, t1 / (static_cast<double>(n) * tn) * 100.0};
}

}  // namespace weft::kernels
