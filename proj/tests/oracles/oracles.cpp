#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace oracle {

std::vector<double> saxpy(double a, const std::vector<double>& x, std::vector<double> y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a * x[i] + y[i];
  return y;
}

void particle_update(std::vector<std::array<double, 6>>& particles, double dt) {
  for (auto& p : particles) {
    p[0] += p[3] * dt;
    p[1] += p[4] * dt;
    p[2] += p[5] * dt;
  }
}

std::vector<double> central_difference(const std::vector<double>& in) {
  const std::size_t n = in.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double hi = in[std::min(i + 1, n - 1)];
    const double lo = in[i == 0 ? 0 : i - 1];
    out[i] = hi - lo;
  }
  return out;
}

std::vector<double> forward_smooth_in_place(std::vector<double> u) {
  const std::size_t n = u.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double a = u[std::min(i + 1, n - 1)];
    const double b = u[std::min(i + 2, n - 1)];
    u[i] = 0.25 * u[i] + 0.5 * a + 0.25 * b;
  }
  return u;
}

const State& EulerGrid::clamped(long i, long j) const {
  const long ci = std::clamp(i, 0L, static_cast<long>(nx) - 1);
  const long cj = std::clamp(j, 0L, static_cast<long>(ny) - 1);
  return cells[static_cast<std::size_t>(ci) + nx * static_cast<std::size_t>(cj)];
}

namespace {

State physical_flux(const State& s, int dim, double gamma) {
  const double rho = s[0];
  const double e = s[1];
  const double mx = s[2];
  const double my = s[3];
  const double p = (gamma - 1.0) * (e - 0.5 * (mx * mx + my * my) / rho);
  if (!(rho > 0.0) || !(p > 0.0)) throw std::domain_error("oracle: nonphysical state");
  const double un = (dim == 0 ? mx : my) / rho;
  State f{rho * un, (e + p) * un, mx * un, my * un};
  f[2 + dim] += p;
  return f;
}

State force(const State& l, const State& r, int dim, double dt, double dx, double gamma) {
  const State fl = physical_flux(l, dim, gamma);
  const State fr = physical_flux(r, dim, gamma);
  State lf{}, mid{};
  for (int k = 0; k < 4; ++k) {
    lf[k] = 0.5 * (fl[k] + fr[k]) - 0.5 * dx / dt * (r[k] - l[k]);
    mid[k] = 0.5 * (l[k] + r[k]) - 0.5 * dt / dx * (fr[k] - fl[k]);
  }
  const State ri = physical_flux(mid, dim, gamma);
  State out{};
  for (int k = 0; k < 4; ++k) out[k] = 0.5 * (lf[k] + ri[k]);
  return out;
}

double max_wavespeed(const EulerGrid& g, double gamma) {
  double m = 0.0;
  for (const State& s : g.cells) {
    const double u = s[2] / s[0];
    const double v = s[3] / s[0];
    const double p = (gamma - 1.0) * (s[1] - 0.5 * (s[2] * s[2] + s[3] * s[3]) / s[0]);
    m = std::max(m, std::sqrt(u * u + v * v) + std::sqrt(gamma * p / s[0]));
  }
  return m;
}

}  // namespace

EulerGrid flux_difference(const EulerGrid& in, double dt, double dx, double gamma) {
  EulerGrid out = in;
  for (std::size_t j = 0; j < in.ny; ++j) {
    for (std::size_t i = 0; i < in.nx; ++i) {
      const long li = static_cast<long>(i);
      const long lj = static_cast<long>(j);
      const State& c = in.at(i, j);
      State sum{0.0, 0.0, 0.0, 0.0};
      const State fx_hi = force(c, in.clamped(li + 1, lj), 0, dt, dx, gamma);
      const State fx_lo = force(in.clamped(li - 1, lj), c, 0, dt, dx, gamma);
      for (int k = 0; k < 4; ++k) sum[k] += fx_hi[k] - fx_lo[k];
      const State fy_hi = force(c, in.clamped(li, lj + 1), 1, dt, dx, gamma);
      const State fy_lo = force(in.clamped(li, lj - 1), c, 1, dt, dx, gamma);
      for (int k = 0; k < 4; ++k) sum[k] += fy_hi[k] - fy_lo[k];
      out.at(i, j) = sum;
    }
  }
  return out;
}

void euler_steps(EulerGrid& grid, double h, double gamma, double cfl, std::size_t steps, std::size_t startup_steps,
                 double startup_factor) {
  for (std::size_t step = 0; step < steps; ++step) {
    const double c = step < startup_steps ? cfl * startup_factor : cfl;
    const double dt = c * h / max_wavespeed(grid, gamma);
    const double k = dt / h;
    for (int dim = 0; dim < 2; ++dim) {
      EulerGrid next = grid;
      for (std::size_t j = 0; j < grid.ny; ++j) {
        for (std::size_t i = 0; i < grid.nx; ++i) {
          const long li = static_cast<long>(i);
          const long lj = static_cast<long>(j);
          const State& mid = grid.at(i, j);
          const State& lo = dim == 0 ? grid.clamped(li - 1, lj) : grid.clamped(li, lj - 1);
          const State& hi = dim == 0 ? grid.clamped(li + 1, lj) : grid.clamped(li, lj + 1);
          const State f_hi = force(mid, hi, dim, dt, h, gamma);
          const State f_lo = force(lo, mid, dim, dt, h, gamma);
          for (int q = 0; q < 4; ++q) next.at(i, j)[q] = mid[q] - k * (f_hi[q] - f_lo[q]);
        }
      }
      grid = std::move(next);
    }
  }
}

Grid2 eikonal_sweeping(std::size_t nx, std::size_t ny, const std::vector<std::array<std::size_t, 2>>& sources,
                       double h) {
  const double inf = std::numeric_limits<double>::infinity();
  Grid2 g{nx, ny, std::vector<double>(nx * ny, inf)};
  std::vector<char> fixed(nx * ny, 0);
  for (const auto& s : sources) {
    g.at(s[0], s[1]) = 0.0;
    fixed[s[0] + nx * s[1]] = 1;
  }
  auto value = [&](long i, long j) {
    if (i < 0 || j < 0 || i >= static_cast<long>(nx) || j >= static_cast<long>(ny)) return inf;
    return g.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  };
  auto relax = [&](std::size_t i, std::size_t j) {
    if (fixed[i + nx * j]) return false;
    const long li = static_cast<long>(i);
    const long lj = static_cast<long>(j);
    const double a = std::min(value(li - 1, lj), value(li + 1, lj));
    const double b = std::min(value(li, lj - 1), value(li, lj + 1));
    double candidate = inf;
    if (a < inf || b < inf) {
      const double diff = a - b;
      if (std::fabs(diff) >= h) {
        candidate = std::min(a, b) + h;
      } else {
        candidate = (a + b + std::sqrt(2.0 * h * h - diff * diff)) / 2.0;
      }
    }
    if (candidate < g.at(i, j)) {
      g.at(i, j) = candidate;
      return true;
    }
    return false;
  };
  for (int round = 0; round < 10000; ++round) {
    bool changed = false;
    for (int order = 0; order < 4; ++order) {
      for (std::size_t jj = 0; jj < ny; ++jj) {
        const std::size_t j = (order & 2) ? ny - 1 - jj : jj;
        for (std::size_t ii = 0; ii < nx; ++ii) {
          const std::size_t i = (order & 1) ? nx - 1 - ii : ii;
          changed = relax(i, j) || changed;
        }
      }
    }
    if (!changed) return g;
  }
  throw std::runtime_error("oracle: sweeping did not converge");
}

}  // namespace oracle
