#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "weft/bench.hpp"
#include "weft/errors.hpp"

namespace {

std::vector<std::size_t> parse_list(const std::string& text, const char* flag) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw weft::ConfigError(std::string(flag) + " expects positive integers separated by commas, got '" + text +
                              "'");
    }
  }
  if (out.empty()) throw weft::ConfigError(std::string(flag) + " needs at least one value");
  return out;
}

void write_text(const std::string& path, const std::string& text, bool append) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw weft::ConfigError("cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weft benchmark runner"};
  app.set_help_flag("-h,--help", "Show this help");

  weft::BenchConfig cfg;
  std::string size, layout = "soa", partitions = "1", subpartitions, steal = "roundrobin";
  std::string csv, scaling, scale_counts;
  bool selftest = false, inject_fault = false, list = false;

  app.add_option("--bench", cfg.bench, "Benchmark: euler, fim, flux, particle, saxpy");
  app.add_option("--size", size, "Extents n0[,n1[,n2]]");
  app.add_option("--layout", layout, "aos or soa")->check(CLI::IsMember({"aos", "soa"}));
  app.add_option("--partitions", partitions, "Partitions per dimension p0[,p1]");
  app.add_option("--subpartitions", subpartitions, "Sub-partitions per dimension s0[,s1]");
  app.add_option("--device-workers", cfg.device_workers, "Device-priority workers (default: partitions + 1)");
  app.add_option("--host-workers", cfg.host_workers, "Host workers (default: remaining hardware threads)");
  app.add_option("--steps", cfg.steps, "Time steps for the euler benchmark")->capture_default_str();
  app.add_option("--repeats", cfg.repeats, "Timed repeats after one warm-up")->capture_default_str();
  app.add_option("--seed", cfg.seed, "Seed for random inputs and stealing")->capture_default_str();
  app.add_option("--steal", steal, "random or roundrobin")->check(CLI::IsMember({"random", "roundrobin", "round_robin"}));
  app.add_option("--dump", cfg.dump, "Write the main output field as CSV");
  app.add_option("--csv", csv, "Append timing rows to this CSV (header written when new)");
  app.add_option("--config", cfg.config, "Shock-bubble JSON for the euler benchmark");
  app.add_option("--scaling", scaling, "strong or weak: sweep --scale-counts devices")
      ->check(CLI::IsMember({"strong", "weak"}));
  app.add_option("--scale-counts", scale_counts, "Device counts for --scaling, e.g. 1,2,4");
  app.add_option("--host-arena-mib", cfg.host_arena_mib, "Per-worker host arena (default 64)");
  app.add_option("--device-arena-mib", cfg.device_arena_mib, "Per-device arena (default 256)");
  app.add_flag("--selftest", selftest, "Run the fast invariant suite and exit");
  app.add_flag("--inject-fault", inject_fault, "With --selftest: break halo transfers on purpose");
  app.add_flag("--list", list, "List registered benchmarks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list) {
      for (const auto& n : weft::bench_names()) std::cout << n << '\n';
      return 0;
    }
    if (selftest) return weft::run_selftest(std::cout, inject_fault) == 0 ? 0 : 1;

    if (!size.empty()) cfg.size = parse_list(size, "--size");
    cfg.layout = layout == "aos" ? weft::LayoutKind::Contiguous : weft::LayoutKind::Strided;
    cfg.partitions = parse_list(partitions, "--partitions");
    if (!subpartitions.empty()) cfg.subpartitions = parse_list(subpartitions, "--subpartitions");
    cfg.steal = weft::parse_steal_strategy(steal == "roundrobin" ? "round_robin" : steal);

    if (!scaling.empty()) {
      const auto mode = weft::parse_scaling_mode(scaling);
      const auto counts = parse_list(scale_counts.empty() ? "1" : scale_counts, "--scale-counts");
      std::vector<std::pair<std::size_t, double>> timings;
      std::string rows;
      for (std::size_t n : counts) {
        weft::BenchConfig run = cfg;
        // Split the last dimension over n virtual devices, as in {1, n}.
        std::vector<std::size_t> parts(std::max<std::size_t>(1, run.size.empty() ? 1 : run.size.size()), 1);
        parts.back() = n;
        run.partitions = parts;
        run.device_workers = cfg.device_workers != 0 ? cfg.device_workers * n : n + 1;
        if (mode == weft::ScalingMode::Weak && !run.size.empty()) run.size.back() *= n;
        const auto record = weft::run_bench(run);
        timings.emplace_back(n, record.min());
        rows += weft::timing_csv_rows(record);
        std::fprintf(stderr, "n=%zu min=%.6fs median=%.6fs\n", n, record.min(), record.median());
      }
      std::cout << "# timings: min over repeats\n" << weft::scaling_report(timings, mode);
      if (!csv.empty()) {
        const bool fresh = !std::ifstream(csv).good();
        write_text(csv, (fresh ? weft::timing_csv_header() : std::string()) + rows, true);
      }
      return 0;
    }

    const auto record = weft::run_bench(cfg);
    std::cout << "# statistic: min and median over " << record.seconds.size() << " timed repeats (after 1 warm-up)\n";
    std::cout << weft::timing_csv_header() << weft::timing_csv_rows(record);
    std::printf("# min %.6f s, median %.6f s\n", record.min(), record.median());
    if (!csv.empty()) {
      const bool fresh = !std::ifstream(csv).good();
      write_text(csv, (fresh ? weft::timing_csv_header() : std::string()) + weft::timing_csv_rows(record), true);
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
