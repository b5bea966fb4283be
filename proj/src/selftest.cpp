#include <atomic>
#include <chrono>
#include <cstring>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "weft/bench.hpp"
#include "weft/kernels.hpp"
#include "weft/tensor.hpp"

namespace weft {

namespace {

struct FaultGuard {
  explicit FaultGuard(bool on) { testing::set_transfer_fault(on); }
  ~FaultGuard() { testing::set_transfer_fault(false); }
};

bool check_layout_bijection() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  BlockStorage aos(kernels::particle_schema(LayoutKind::Contiguous), 97);
  for (std::size_t cell = 0; cell < 97; ++cell)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t l = 0; l < 3; ++l) aos.set<double>(c, l, cell, dist(rng));
  const BlockStorage soa = convert_layout(aos, LayoutKind::Strided);
  const BlockStorage back = convert_layout(soa, LayoutKind::Contiguous);
  for (std::size_t cell = 0; cell < 97; ++cell)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t l = 0; l < 3; ++l)
        if (aos.get<double>(c, l, cell) != soa.get<double>(c, l, cell)) return false;
  return std::memcmp(aos.bytes().data(), back.bytes().data(), aos.byte_size()) == 0;
}

/// Padding of a 2x2-block tensor after refresh_padding must hold the same
/// values a single block holds at the same global coordinates.
bool check_halo() {
  const Extents e{12, 8};
  const RecordSchema schema = RecordSchema::scalar();
  Tensor whole(schema, PartitionSpec{{1}}, 2, e);
  Tensor split(schema, PartitionSpec{{2, 2}}, 2, e);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (std::size_t y = 0; y < e[1]; ++y)
    for (std::size_t x = 0; x < e[0]; ++x) {
      const double v = dist(rng);
      whole.set<double>({x, y, 0}, v);
      split.set<double>({x, y, 0}, v);
    }
  const BoundaryKind bc = BoundaryKind::first_order();
  refresh_padding(whole, bc);
  refresh_padding(split, bc);
  const Block& w = whole.block(0);
  for (const Block& b : split.blocks()) {
    bool ok = true;
    for_each_cell(b.padded_box(), [&](const Index3& pos) {
      const Index3 g{static_cast<std::ptrdiff_t>(b.origin()[0]) + pos[0],
                     static_cast<std::ptrdiff_t>(b.origin()[1]) + pos[1], 0};
      const double expect = w.storage().ref<double>(0, w.cell_index(g));
      if (b.storage().ref<double>(0, b.cell_index(pos)) != expect) ok = false;
    });
    if (!ok) return false;
  }
  return true;
}

/// In-place forward stencil under exclusive padded access, 4 blocks, against
/// the same sweep over one block.
bool check_exclusive_stencil(Executor& ex) {
  const std::size_t n = 64;
  auto run = [&](std::size_t blocks) {
    Tensor t(RecordSchema::scalar(), PartitionSpec{{blocks}}, 2, Extents{n});
    for (std::size_t i = 0; i < n; ++i) t.set<double>({i, 0, 0}, std::sin(0.37 * static_cast<double>(i)));
    Graph g;
    g.then_load_boundary(t, BoundaryKind::clamp())
        .then_split(
            [](auto& u) { *u = 0.25 * *u + 0.5 * *u.offset(0, 1) + 0.25 * *u.offset(0, 2); },
            exclusive_padded_access(t));
    g.freeze();
    ex.execute(g);
    return gather_field(t);
  };
  const auto reference = run(1);
  for (int rep = 0; rep < 20; ++rep) {
    if (run(4) != reference) return false;
  }
  return true;
}

bool check_diamond(Executor& ex) {
  for (int trial = 0; trial < 100; ++trial) {
    std::atomic<int> step{0};
    int a = -1, b = -1, c = -1, d = -1;
    Graph g;
    g.emplace([&] { a = step++; })
        .then([&] { b = step++; })
        .emplace([&] { c = step++; })
        .then([&] { d = step++; });
    g.freeze();
    ex.execute(g);
    if (a != 0 || d != 3 || b < 1 || c < 1 || b == c) return false;
    for (const auto& n : g.nodes()) {
      if (n->executions() != 1 || n->dependents().load() != n->initial_dependents()) return false;
    }
  }
  return true;
}

bool check_reduction(Executor& ex) {
  const std::size_t n = 100000;
  Tensor x(RecordSchema::scalar(), PartitionSpec{{4}}, 0, Extents{n});
  ReductionResult result;
  Graph g;
  g.split([](auto& it) { *it = 1.0; }, x).then_reduce(x, result, SumReducer{});
  g.freeze();
  ex.execute(g);
  return result.complete() && result.value() == static_cast<double>(n);
}

}  // namespace

int run_selftest(std::ostream& out, bool inject_fault) {
  FaultGuard guard(inject_fault);
  ExecutorConfig cfg;
  cfg.n_device_workers = 2;
  cfg.n_host_workers = 2;
  cfg.steal_strategy = StealStrategy::Random;
  Executor ex(cfg);

  struct Check {
    const char* name;
    std::function<bool()> run;
  };
  const std::vector<Check> checks{
      {"layout_bijection", check_layout_bijection},
      {"halo_soundness", check_halo},
      {"exclusive_stencil", [&] { return check_exclusive_stencil(ex); }},
      {"diamond_stress", [&] { return check_diamond(ex); }},
      {"reduction_sum", [&] { return check_reduction(ex); }},
  };
  int failures = 0;
  for (const auto& c : checks) {
    bool ok = false;
    std::string detail;
    try {
      ok = c.run();
    } catch (const std::exception& e) {
      detail = std::string(" (") + e.what() + ")";
    }
    out << (ok ? "PASS " : "FAIL ") << c.name << detail << '\n';
    if (!ok) ++failures;
  }
  out << (failures == 0 ? "selftest passed" : "selftest failed: " + std::to_string(failures) + " check(s)") << '\n';
  return failures;
}

}  // namespace weft
