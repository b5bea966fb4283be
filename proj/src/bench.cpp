#include "weft/bench.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "weft/kernels.hpp"
#include "weft/tensor.hpp"

namespace weft {

double TimingRecord::min() const {
  if (seconds.empty()) return 0.0;
  return *std::min_element(seconds.begin(), seconds.end());
}

double TimingRecord::median() const {
  if (seconds.empty()) return 0.0;
  std::vector<double> s = seconds;
  std::sort(s.begin(), s.end());
  const std::size_t n = s.size();
  return n % 2 == 1 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

namespace {

using Clock = std::chrono::steady_clock;

struct BenchContext {
  const BenchConfig& config;
  Executor& executor;
  TimingRecord& record;
};

using BenchFn = std::function<void(BenchContext&)>;

PartitionSpec spec_of(const BenchConfig& c) { return PartitionSpec{c.partitions, c.subpartitions}; }

Extents extents_of(const BenchConfig& c, std::vector<std::size_t> fallback, std::size_t dims) {
  std::vector<std::size_t> s = c.size.empty() ? std::move(fallback) : c.size;
  if (dims != 0 && s.size() != dims) {
    throw ConfigError("benchmark '" + c.bench + "' needs a " + std::to_string(dims) + "-d --size, got " +
                      std::to_string(s.size()) + " values");
  }
  return Extents(s);
}

void fill_uniform(Tensor& t, std::mt19937_64& rng, double lo, double hi, std::size_t c = 0, std::size_t l = 0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  const Extents& e = t.global_extents();
  for (std::size_t z = 0; z < e[2]; ++z)
    for (std::size_t y = 0; y < e[1]; ++y)
      for (std::size_t x = 0; x < e[0]; ++x) t.set<double>({x, y, z}, dist(rng), c, l);
}

void copy_contents(Tensor& dst, const Tensor& src) {
  for (std::size_t b = 0; b < dst.block_count(); ++b) {
    auto to = dst.block(b).storage().bytes();
    auto from = src.block(b).storage().bytes();
    std::copy(from.begin(), from.end(), to.begin());
  }
}

void record_shape(BenchContext& ctx, const Tensor& t) {
  ctx.record.extents.assign(t.global_extents().sizes().begin(),
                            t.global_extents().sizes().begin() + static_cast<long>(t.dims()));
  ctx.record.blocks = t.block_count();
}

template <class Prepare, class Run>
void time_runs(BenchContext& ctx, Prepare prepare, Run run) {
  prepare(true);
  run(true);
  for (std::size_t r = 0; r < ctx.config.repeats; ++r) {
    prepare(false);
    const auto t0 = Clock::now();
    run(false);
    const auto t1 = Clock::now();
    ctx.record.seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
}

void maybe_dump(BenchContext& ctx, const Tensor& t, std::size_t c, std::size_t l) {
  if (!ctx.config.dump.empty()) dump_field(t, c, l, ctx.config.dump);
}

void bench_saxpy(BenchContext& ctx) {
  const auto& cfg = ctx.config;
  const Extents e = extents_of(cfg, {std::size_t{1} << 20}, 0);
  const RecordSchema schema = RecordSchema::scalar(ScalarKind::F64, cfg.layout);
  Tensor x(schema, spec_of(cfg), 0, e);
  Tensor y(schema, spec_of(cfg), 0, e);
  record_shape(ctx, x);
  std::mt19937_64 rng(cfg.seed);
  fill_uniform(x, rng, -1.0, 1.0);
  Tensor y0(schema, spec_of(cfg), 0, e);
  fill_uniform(y0, rng, -1.0, 1.0);
  Graph g = kernels::saxpy_graph(4.0, x, y);
  g.freeze();
  auto reset_y = [&](bool) { copy_contents(y, y0); };
  time_runs(ctx, reset_y, [&](bool) { ctx.executor.execute(g); });
  maybe_dump(ctx, y, 0, 0);
}

void bench_particle(BenchContext& ctx) {
  const auto& cfg = ctx.config;
  const Extents e = extents_of(cfg, {std::size_t{1} << 20}, 0);
  Tensor p(kernels::particle_schema(cfg.layout), spec_of(cfg), 0, e);
  Tensor p0(kernels::particle_schema(cfg.layout), spec_of(cfg), 0, e);
  record_shape(ctx, p);
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t l = 0; l < 3; ++l) fill_uniform(p0, rng, -1.0, 1.0, c, l);
  Graph g = kernels::particle_update_graph(p, 0.01);
  g.freeze();
  auto reset = [&](bool) { copy_contents(p, p0); };
  time_runs(ctx, reset, [&](bool) { ctx.executor.execute(g); });
  maybe_dump(ctx, p, 0, 0);
}

void fill_random_euler(Tensor& t, std::uint64_t seed, double gamma) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Extents& e = t.global_extents();
  for (std::size_t y = 0; y < e[1]; ++y) {
    for (std::size_t x = 0; x < e[0]; ++x) {
      const kernels::Primitive w{1.0 + unit(rng), unit(rng) - 0.5, unit(rng) - 0.5, 1.0 + unit(rng)};
      const kernels::Conserved s = kernels::to_conserved(w, gamma);
      t.set<double>({x, y, 0}, s.rho, 0);
      t.set<double>({x, y, 0}, s.energy, 1);
      t.set<double>({x, y, 0}, s.mom_x, 2, 0);
      t.set<double>({x, y, 0}, s.mom_y, 2, 1);
    }
  }
}

void bench_flux(BenchContext& ctx) {
  const auto& cfg = ctx.config;
  const Extents e = extents_of(cfg, {512, 512}, 2);
  const RecordSchema schema = kernels::euler_schema(cfg.layout);
  Tensor in(schema, spec_of(cfg), 1, e);
  Tensor out(schema, spec_of(cfg), 0, e);
  record_shape(ctx, in);
  fill_random_euler(in, cfg.seed, 1.4);
  const double dx = 1.0 / static_cast<double>(e[0]);
  Graph g = kernels::flux_difference_graph(in, out, 1e-4, dx);
  g.freeze();
  time_runs(ctx, [](bool) {}, [&](bool) { ctx.executor.execute(g); });
  maybe_dump(ctx, out, 0, 0);
}

void bench_fim(BenchContext& ctx) {
  const auto& cfg = ctx.config;
  const Extents e = extents_of(cfg, {256, 256}, 2);
  const RecordSchema schema = kernels::eikonal_schema(cfg.layout);
  Tensor grid(schema, spec_of(cfg), 1, e);
  Tensor scratch(schema, spec_of(cfg), 1, e);
  record_shape(ctx, grid);
  const std::vector<Size3> sources{{e[0] / 2, e[1] / 2, 0}};
  kernels::FimParams params;
  params.h = 1.0;
  time_runs(
      ctx, [&](bool) { kernels::fim_initialize(grid, sources); },
      [&](bool) {
        const auto r = kernels::fim_solve(ctx.executor, grid, scratch, params);
        if (!r.converged) throw NumericalDomainError("eikonal solve did not converge");
      });
  maybe_dump(ctx, grid, kernels::slot::phi, 0);
}

void bench_euler(BenchContext& ctx) {
  const auto& cfg = ctx.config;
  kernels::ShockBubbleConfig sb = cfg.config.empty() ? kernels::ShockBubbleConfig{} : kernels::load_shock_bubble(cfg.config);
  if (!cfg.size.empty()) {
    if (cfg.size.size() != 2) throw ConfigError("benchmark 'euler' needs a 2-d --size");
    sb.length_x = sb.length_x / static_cast<double>(sb.nx) * static_cast<double>(cfg.size[0]);
    sb.nx = cfg.size[0];
    sb.ny = cfg.size[1];
  }
  const Extents e{sb.nx, sb.ny};
  const RecordSchema schema = kernels::euler_schema(cfg.layout);
  Tensor in(schema, spec_of(cfg), 1, e);
  Tensor out(schema, spec_of(cfg), 1, e);
  Tensor ws(RecordSchema::scalar(), spec_of(cfg), 0, e);
  record_shape(ctx, in);
  ReductionResult max_ws;
  auto control = std::make_shared<kernels::EulerControl>();
  control->params.gamma = sb.gamma;
  control->params.cfl = sb.cfl;
  control->params.h = sb.h();
  control->params.steps = cfg.steps;
  Graph g = kernels::euler_solver_graph(in, out, ws, max_ws, control);
  g.freeze();
  auto prepare = [&](bool warmup) {
    kernels::init_shock_bubble(in, sb);
    control->step = 0;
    control->time = 0.0;
    control->params.steps = warmup ? 1 : cfg.steps;
  };
  time_runs(ctx, prepare, [&](bool) { ctx.executor.execute(g); });
  maybe_dump(ctx, in, kernels::slot::rho, 0);
}

const std::map<std::string, BenchFn>& registry() {
  static const std::map<std::string, BenchFn> r{
      {"euler", bench_euler}, {"fim", bench_fim}, {"flux", bench_flux},
      {"particle", bench_particle}, {"saxpy", bench_saxpy},
  };
  return r;
}

std::string join(const std::vector<std::size_t>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace

std::vector<std::string> bench_names() {
  std::vector<std::string> names;
  for (const auto& [k, v] : registry()) names.push_back(k);
  return names;
}

TimingRecord run_bench(const BenchConfig& config) {
  const auto& reg = registry();
  auto it = reg.find(config.bench);
  if (it == reg.end()) {
    std::string known;
    for (const auto& n : bench_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown benchmark '" + config.bench + "'; registered: " + known);
  }
  if (config.repeats == 0) throw ConfigError("--repeats must be at least 1");
  if (config.partitions.empty()) throw ConfigError("--partitions needs at least one value");

  std::size_t devices = 1;
  for (std::size_t p : config.partitions) devices *= p;
  ExecutorConfig ec = ExecutorConfig::defaults(devices);
  if (config.device_workers != 0) ec.n_device_workers = config.device_workers;
  if (config.host_workers >= 0) ec.n_host_workers = static_cast<std::size_t>(config.host_workers);
  ec.steal_strategy = config.steal;
  ec.seed = config.seed;
  if (config.host_arena_mib != 0) ec.scratch_bytes = config.host_arena_mib << 20;
  if (config.device_arena_mib != 0) ec.device_arena_bytes = config.device_arena_mib << 20;

  TimingRecord record;
  record.config = config;
  record.device_workers = ec.n_device_workers;
  record.host_workers = ec.n_host_workers;
  Executor executor(ec);
  BenchContext ctx{config, executor, record};
  it->second(ctx);
  return record;
}

std::string timing_csv_header() { return "bench,layout,extents,blocks,device_workers,host_workers,steps,repeat,seconds\n"; }

std::string timing_csv_rows(const TimingRecord& r) {
  std::ostringstream os;
  for (std::size_t i = 0; i < r.seconds.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", r.seconds[i]);
    os << r.config.bench << ',' << to_string(r.config.layout) << ',' << join(r.extents, 'x') << ',' << r.blocks << ','
       << r.device_workers << ',' << r.host_workers << ',' << r.config.steps << ',' << i << ',' << buf << '\n';
  }
  return os.str();
}

ScalingMode parse_scaling_mode(const std::string& name) {
  if (name == "strong") return ScalingMode::Strong;
  if (name == "weak") return ScalingMode::Weak;
  throw ConfigError("unknown scaling mode '" + name + "' (expected strong or weak)");
}

std::string scaling_report(const std::vector<std::pair<std::size_t, double>>& timings, ScalingMode mode) {
  auto base = std::find_if(timings.begin(), timings.end(), [](const auto& p) { return p.first == 1; });
  if (base == timings.end()) throw ConfigError("scaling report needs a baseline run with N = 1");
  std::ostringstream os;
  os << "n,seconds,strong_efficiency,weak_efficiency\n";
  for (const auto& [n, t] : timings) {
    const auto m = kernels::scaling_metrics(base->second, t, n);
    char buf[128];
    if (mode == ScalingMode::Strong) {
      std::snprintf(buf, sizeof buf, "%zu,%.9f,%.4f,\n", n, t, m.strong_efficiency);
    } else {
      std::snprintf(buf, sizeof buf, "%zu,%.9f,,%.4f\n", n, t, m.weak_efficiency);
    }
    os << buf;
  }
  return os.str();
}

}  // namespace weft
