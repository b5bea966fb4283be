#pragma once

// Benchmark runner behind the command-line tool.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "weft/layout.hpp"
#include "weft/scheduler.hpp"

namespace weft {

struct BenchConfig {
  std::string bench = "saxpy";
  /// Empty means the benchmark's default size.
  std::vector<std::size_t> size;
  LayoutKind layout = LayoutKind::Strided;
  std::vector<std::size_t> partitions{1};
  std::vector<std::size_t> subpartitions;
  /// 0 means one more than the number of partitions.
  std::size_t device_workers = 0;
  /// Negative means the remaining hardware threads.
  long host_workers = -1;
  std::size_t steps = 1000;
  std::size_t repeats = 3;
  std::uint64_t seed = 1;
  StealStrategy steal = StealStrategy::RoundRobin;
  /// Optional CSV field dump of the benchmark's main output.
  std::string dump;
  /// Shock-bubble parameters for the euler benchmark (JSON).
  std::string config;
  /// Arena capacities in MiB; 0 keeps the defaults (64 host, 256 device).
  std::size_t host_arena_mib = 0;
  std::size_t device_arena_mib = 0;
};

struct TimingRecord {
  BenchConfig config;
  std::vector<std::size_t> extents;
  std::size_t blocks = 0;
  std::size_t device_workers = 0;
  std::size_t host_workers = 0;
  std::vector<double> seconds;

  double min() const;
  double median() const;
};

/// Registered benchmark names, sorted.
std::vector<std::string> bench_names();

/// Validates `config`, builds tensors and graph, runs one warm-up activation
/// and then times `repeats` activations.
TimingRecord run_bench(const BenchConfig& config);

/// bench,layout,extents,blocks,device_workers,host_workers,steps,repeat,seconds
std::string timing_csv_header();
/// One row per repeat.
std::string timing_csv_rows(const TimingRecord& record);

enum class ScalingMode : std::uint8_t { Strong, Weak };

ScalingMode parse_scaling_mode(const std::string& name);

/// CSV `n,seconds,strong_efficiency,weak_efficiency` from (N, t_N) pairs;
/// the efficiency that does not apply to `mode` is left empty. Needs N = 1.
std::string scaling_report(const std::vector<std::pair<std::size_t, double>>& timings, ScalingMode mode);

/// Fast invariant checks; prints one line per check and returns the number
/// of failures. `inject_fault` breaks halo transfers to prove detection.
int run_selftest(std::ostream& out, bool inject_fault = false);

}  // namespace weft
