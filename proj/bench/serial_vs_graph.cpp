// Times the plain serial reference loops against the same kernels run as
// graphs on the executor. Prints CSV: kernel,variant,workers,seconds.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "weft/kernels.hpp"

using namespace weft;
namespace k = weft::kernels;

namespace {

using Clock = std::chrono::steady_clock;

template <class F>
double best_of(int repeats, F&& f) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = Clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
  }
  return best;
}

ExecutorConfig workers(std::size_t n) {
  ExecutorConfig c;
  c.n_device_workers = n;
  c.n_host_workers = 0;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 3;
  const std::size_t max_workers = std::max(1u, std::thread::hardware_concurrency());
  std::printf("kernel,variant,workers,seconds\n");

  {
    const std::size_t n = std::size_t{1} << 22;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = d(rng);
      y[i] = d(rng);
    }
    std::printf("saxpy,serial,1,%.6f\n", best_of(repeats, [&] { y = oracle::saxpy(2.0, x, std::move(y)); }));
    Tensor tx(RecordSchema::scalar(), PartitionSpec{{4}}, 0, Extents{n});
    Tensor ty(RecordSchema::scalar(), PartitionSpec{{4}}, 0, Extents{n});
    Graph g = k::saxpy_graph(2.0, tx, ty);
    g.freeze();
    for (std::size_t w = 1; w <= max_workers; w *= 2) {
      Executor ex(workers(w));
      std::printf("saxpy,graph,%zu,%.6f\n", w, best_of(repeats, [&] { ex.execute(g); }));
    }
  }

  {
    const std::size_t n = 512;
    oracle::EulerGrid grid{n, n, std::vector<oracle::State>(n * n)};
    Tensor in(k::euler_schema(LayoutKind::Strided), PartitionSpec{{2, 2}}, 1, Extents{n, n});
    Tensor out(k::euler_schema(LayoutKind::Strided), PartitionSpec{{2, 2}}, 0, Extents{n, n});
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const double r = 1.0 + 0.5 * std::sin(0.01 * static_cast<double>(x * y));
        const k::Conserved s = k::to_conserved({r, 0.1, -0.2, 1.0}, 1.4);
        grid.at(x, y) = {s.rho, s.energy, s.mom_x, s.mom_y};
        in.set<double>({x, y, 0}, s.rho, 0);
        in.set<double>({x, y, 0}, s.energy, 1);
        in.set<double>({x, y, 0}, s.mom_x, 2, 0);
        in.set<double>({x, y, 0}, s.mom_y, 2, 1);
      }
    std::printf("flux,serial,1,%.6f\n", best_of(repeats, [&] { oracle::flux_difference(grid, 1e-4, 1.0 / n, 1.4); }));
    Graph g = k::flux_difference_graph(in, out, 1e-4, 1.0 / n);
    g.freeze();
    for (std::size_t w = 1; w <= max_workers; w *= 2) {
      Executor ex(workers(w));
      std::printf("flux,graph,%zu,%.6f\n", w, best_of(repeats, [&] { ex.execute(g); }));
    }
  }

  {
    const std::size_t n = 256;
    std::printf("eikonal,serial_sweeping,1,%.6f\n",
                best_of(repeats, [&] { oracle::eikonal_sweeping(n, n, {{n / 2, n / 2}}, 1.0); }));
    Tensor grid(k::eikonal_schema(LayoutKind::Strided), PartitionSpec{{2, 2}}, 1, Extents{n, n});
    Tensor scratch(k::eikonal_schema(LayoutKind::Strided), PartitionSpec{{2, 2}}, 1, Extents{n, n});
    for (std::size_t w = 1; w <= max_workers; w *= 2) {
      Executor ex(workers(w));
      std::printf("eikonal,graph_fim,%zu,%.6f\n", w, best_of(repeats, [&] {
                    k::fim_initialize(grid, {{n / 2, n / 2, 0}});
                    k::fim_solve(ex, grid, scratch, k::FimParams{});
                  }));
    }
  }
  return 0;
}
