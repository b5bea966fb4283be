#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "weft/kernels.hpp"

using namespace weft;
namespace k = weft::kernels;

namespace {

ExecutorConfig small_executor() {
  ExecutorConfig c;
  c.n_device_workers = 3;
  c.n_host_workers = 1;
  c.scratch_bytes = 1 << 16;
  c.device_arena_bytes = 1 << 16;
  return c;
}

void set_state(Tensor& t, std::size_t x, std::size_t y, const k::Conserved& s) {
  t.set<double>({x, y, 0}, s.rho, 0);
  t.set<double>({x, y, 0}, s.energy, 1);
  t.set<double>({x, y, 0}, s.mom_x, 2, 0);
  t.set<double>({x, y, 0}, s.mom_y, 2, 1);
}

k::Conserved get_state(const Tensor& t, std::size_t x, std::size_t y) {
  return {t.get<double>({x, y, 0}, 0), t.get<double>({x, y, 0}, 1), t.get<double>({x, y, 0}, 2, 0),
          t.get<double>({x, y, 0}, 2, 1)};
}

/// Smooth random-ish initial state, identical in the tensor and the oracle grid.
oracle::EulerGrid fill_euler(Tensor& t, std::uint64_t seed) {
  const auto& e = t.global_extents();
  oracle::EulerGrid g{e[0], e[1], std::vector<oracle::State>(e[0] * e[1])};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t y = 0; y < e[1]; ++y)
    for (std::size_t x = 0; x < e[0]; ++x) {
      const k::Conserved s = k::to_conserved({1.0 + unit(rng), unit(rng) - 0.5, unit(rng) - 0.5, 1.0 + unit(rng)}, 1.4);
      set_state(t, x, y, s);
      g.at(x, y) = {s.rho, s.energy, s.mom_x, s.mom_y};
    }
  return g;
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("saxpy") {
    Executor ex(small_executor());
    Tensor x(RecordSchema::scalar(), PartitionSpec{{4}}, 0, Extents{64});
    Tensor y(RecordSchema::scalar(), PartitionSpec{{4}}, 0, Extents{64});
    fill(x, 1.0);
    fill(y, 1.0);
    Graph zero = k::saxpy_graph(0.0, x, y);
    zero.freeze();
    ex.execute(zero);
    CHECK(gather_field(y) == std::vector<double>(64, 1.0));
    Graph one = k::saxpy_graph(1.0, x, y);
    one.freeze();
    ex.execute(one);
    CHECK(gather_field(y) == std::vector<double>(64, 2.0));
  }

  TEST_CASE("saxpy matches the serial oracle on random data") {
    Executor ex(small_executor());
    const std::size_t n = 4096;
    Tensor x(RecordSchema::scalar(), PartitionSpec{{4}}, 0, Extents{n});
    Tensor y(RecordSchema::scalar(), PartitionSpec{{4}}, 0, Extents{n});
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = d(rng);
      ys[i] = d(rng);
      x.set<double>({i, 0, 0}, xs[i]);
      y.set<double>({i, 0, 0}, ys[i]);
    }
    Graph g = k::saxpy_graph(2.5, x, y);
    g.freeze();
    ex.execute(g);
    CHECK(gather_field(y) == oracle::saxpy(2.5, xs, ys));
  }

  TEST_CASE("particle update") {
    Executor ex(small_executor());
    Tensor p(k::particle_schema(LayoutKind::Strided), PartitionSpec{{2}}, 0, Extents{4});
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t l = 0; l < 3; ++l) p.set<double>({i, 0, 0}, static_cast<double>(l + 1), 1, l);
    }
    Graph still = k::particle_update_graph(p, 0.0);
    still.freeze();
    ex.execute(still);
    CHECK(p.get<double>({3, 0, 0}, 0, 2) == 0.0);
    Graph move = k::particle_update_graph(p, 0.5);
    move.freeze();
    ex.execute(move);
    CHECK(p.get<double>({2, 0, 0}, 0, 0) == 0.5);
    CHECK(p.get<double>({2, 0, 0}, 0, 1) == 1.0);
    CHECK(p.get<double>({2, 0, 0}, 0, 2) == 1.5);
  }

  TEST_CASE("FORCE flux of a uniform state is the physical flux") {
    const k::Conserved s = k::to_conserved({1.2, 0.3, -0.2, 2.0}, 1.4);
    const k::Conserved f = k::force_flux(s, s, 0, 1e-3, 1e-2, 1.4);
    const k::Conserved e = k::euler_flux(s, 0, 1.4);
    CHECK(f.rho == doctest::Approx(e.rho).epsilon(1e-14));
    CHECK(f.mom_x == doctest::Approx(e.mom_x).epsilon(1e-14));
  }

  TEST_CASE("nonphysical states are rejected") {
    const k::Conserved bad{-1.0, 1.0, 0.0, 0.0};
    CHECK_THROWS_AS(k::euler_flux(bad, 0, 1.4), NumericalDomainError);
    const k::Conserved cold{1.0, 0.1, 1.0, 0.0};
    CHECK_THROWS_AS(k::euler_flux(cold, 1, 1.4), NumericalDomainError);
  }

  TEST_CASE("flux difference of a uniform state vanishes") {
    Executor ex(small_executor());
    Tensor in(k::euler_schema(LayoutKind::Strided), PartitionSpec{{2, 2}}, 1, Extents{8, 8});
    Tensor out(k::euler_schema(LayoutKind::Strided), PartitionSpec{{2, 2}}, 0, Extents{8, 8});
    const k::Conserved s = k::to_conserved({1.0, 0.5, 0.25, 1.0}, 1.4);
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x) set_state(in, x, y, s);
    fill(out, 9.0);
    Graph g = k::flux_difference_graph(in, out, 1e-3, 0.1);
    g.freeze();
    ex.execute(g);
    for (double v : gather_field(out, 0)) CHECK(v == 0.0);
    for (double v : gather_field(out, 2, 1)) CHECK(v == 0.0);
  }

  TEST_CASE("flux difference agrees with the serial oracle") {
    Executor ex(small_executor());
    for (auto layout : {LayoutKind::Contiguous, LayoutKind::Strided}) {
      Tensor in(k::euler_schema(layout), PartitionSpec{{2, 2}}, 1, Extents{16, 12});
      Tensor out(k::euler_schema(layout), PartitionSpec{{2, 2}}, 0, Extents{16, 12});
      const oracle::EulerGrid ref = oracle::flux_difference(fill_euler(in, 4), 1e-3, 0.05, 1.4);
      Graph g = k::flux_difference_graph(in, out, 1e-3, 0.05);
      g.freeze();
      ex.execute(g);
      double worst = 0.0;
      for (std::size_t y = 0; y < 12; ++y)
        for (std::size_t x = 0; x < 16; ++x) {
          const k::Conserved c = get_state(out, x, y);
          const auto& r = ref.at(x, y);
          worst = std::max({worst, rel_diff(c.rho, r[0]), rel_diff(c.energy, r[1]), rel_diff(c.mom_x, r[2]),
                            rel_diff(c.mom_y, r[3])});
        }
      CHECK(worst <= 1e-12);
    }
  }

  TEST_CASE("Euler solver keeps a uniform state fixed") {
    Executor ex(small_executor());
    const Extents e{8, 8};
    Tensor in(k::euler_schema(LayoutKind::Strided), PartitionSpec{{2}}, 1, e);
    Tensor out(k::euler_schema(LayoutKind::Strided), PartitionSpec{{2}}, 1, e);
    Tensor ws(RecordSchema::scalar(), PartitionSpec{{2}}, 0, e);
    const k::Conserved s = k::to_conserved({1.0, 0.0, 0.0, 1.0}, 1.4);
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x) set_state(in, x, y, s);
    ReductionResult max_ws;
    auto control = std::make_shared<k::EulerControl>();
    control->params.h = 0.125;
    control->params.steps = 10;
    Graph g = k::euler_solver_graph(in, out, ws, max_ws, control);
    g.freeze();
    ex.execute(g);
    CHECK(control->step == 10);
    CHECK(control->time > 0.0);
    for (double v : gather_field(in, 0)) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
    for (double v : gather_field(in, 2, 0)) CHECK(std::abs(v) < 1e-14);
  }

  TEST_CASE("Euler solver agrees with the serial oracle") {
    Executor ex(small_executor());
    const Extents e{16, 16};
    Tensor in(k::euler_schema(LayoutKind::Contiguous), PartitionSpec{{2, 2}}, 1, e);
    Tensor out(k::euler_schema(LayoutKind::Contiguous), PartitionSpec{{2, 2}}, 1, e);
    Tensor ws(RecordSchema::scalar(), PartitionSpec{{2, 2}}, 0, e);
    oracle::EulerGrid ref = fill_euler(in, 12);
    ReductionResult max_ws;
    auto control = std::make_shared<k::EulerControl>();
    control->params.h = 1.0 / 16.0;
    control->params.steps = 8;
    Graph g = k::euler_solver_graph(in, out, ws, max_ws, control);
    g.freeze();
    ex.execute(g);
    oracle::euler_steps(ref, 1.0 / 16.0, 1.4, 0.9, 8);
    double worst = 0.0;
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) {
        const k::Conserved c = get_state(in, x, y);
        const auto& r = ref.at(x, y);
        worst = std::max({worst, rel_diff(c.rho, r[0]), rel_diff(c.energy, r[1]), rel_diff(c.mom_x, r[2]),
                          rel_diff(c.mom_y, r[3])});
      }
    CHECK(worst <= 1e-12);
  }

  TEST_CASE("post-shock state satisfies Rankine-Hugoniot") {
    const double g = 1.4, m = 3.81;
    const k::Primitive w = k::post_shock_state(m, 1.0, 1.0, g);
    CHECK(w.rho == doctest::Approx((g + 1) * m * m / ((g - 1) * m * m + 2)).epsilon(1e-14));
    CHECK(w.p == doctest::Approx(1.0 + 2 * g / (g + 1) * (m * m - 1)).epsilon(1e-14));
    CHECK(w.u > 0.0);
    CHECK(w.v == 0.0);
  }

  TEST_CASE("shock-bubble config loads from JSON") {
    const auto c = k::load_shock_bubble(WEFT_SOURCE_DIR "/configs/shock_bubble.json");
    CHECK(c.nx == 640);
    CHECK(c.ny == 400);
    CHECK(c.mach == 3.81);
    CHECK(c.h() == doctest::Approx(1.6 / 640));
    CHECK_THROWS_AS(k::load_shock_bubble("/nonexistent/shock.json"), ConfigError);
  }

  TEST_CASE("shock-bubble initial data") {
    k::ShockBubbleConfig c;
    c.nx = 64;
    c.ny = 40;
    c.length_x = 1.6;
    Tensor t(k::euler_schema(LayoutKind::Strided), PartitionSpec{{2, 2}}, 1, Extents{64, 40});
    k::init_shock_bubble(t, c);
    const double behind = k::post_shock_state(c.mach, 1.0, 1.0, c.gamma).rho;
    CHECK(t.get<double>({0, 0, 0}) == doctest::Approx(behind));
    CHECK(t.get<double>({20, 20, 0}) == doctest::Approx(0.1));
    CHECK(t.get<double>({63, 0, 0}) == 1.0);
  }

  TEST_CASE("Godunov update cases") {
    CHECK(k::godunov_update(0.0, std::numeric_limits<double>::infinity(), 0.5, 1.0) == 0.5);
    CHECK(k::godunov_update(0.0, 0.0, 1.0, 1.0) == doctest::Approx(std::sqrt(2.0) / 2.0));
    CHECK(std::isinf(k::godunov_update(INFINITY, INFINITY, 1.0, 1.0)));
  }

  TEST_CASE("eikonal source is zero and axis neighbours are h") {
    Executor ex(small_executor());
    const double h = 0.25;
    Tensor grid(k::eikonal_schema(LayoutKind::Strided), PartitionSpec{{2, 2}}, 1, Extents{16, 16});
    Tensor scratch(k::eikonal_schema(LayoutKind::Strided), PartitionSpec{{2, 2}}, 1, Extents{16, 16});
    k::fim_initialize(grid, {{8, 8, 0}});
    k::FimParams params;
    params.h = h;
    const auto r = k::fim_solve(ex, grid, scratch, params);
    CHECK(r.converged);
    CHECK(grid.get<double>({8, 8, 0}) == 0.0);
    CHECK(grid.get<double>({9, 8, 0}) == h);
    CHECK(grid.get<double>({8, 7, 0}) == h);
    for (std::size_t k = 0; k < 8; ++k) CHECK(grid.get<double>({8 + k, 8, 0}) == static_cast<double>(k) * h);

    const oracle::Grid2 ref = oracle::eikonal_sweeping(16, 16, {{8, 8}}, h);
    double worst = 0.0;
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x)
        worst = std::max(worst, std::abs(grid.get<double>({x, y, 0}) - ref.at(x, y)));
    CHECK(worst <= 1e-10);
  }

  TEST_CASE("scaling metrics") {
    auto a = k::scaling_metrics(10.0, 10.0, 4);
    CHECK(a.weak_efficiency == 100.0);
    auto b = k::scaling_metrics(3.0, 3.0, 1);
    CHECK(b.strong_efficiency == 100.0);
    auto c = k::scaling_metrics(10.0, 1.445, 8);
    CHECK(c.strong_efficiency == doctest::Approx(86.5).epsilon(1e-3));
    CHECK(k::scaling_metrics(8.0, 2.0, 4).strong_efficiency == 100.0);
    CHECK_THROWS_AS(k::scaling_metrics(0.0, 1.0, 2), ConfigError);
    CHECK_THROWS_AS(k::scaling_metrics(1.0, 1.0, 0), ConfigError);
  }
}
