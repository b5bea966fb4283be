#pragma once

// Dual-domain work-stealing executor. Device workers own a device queue and a
// host queue and prefer device work; host workers own a host queue only.

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "weft/alloc.hpp"
#include "weft/graph.hpp"
#include "weft/steal_deque.hpp"

namespace weft {

enum class StealStrategy : std::uint8_t { Random, RoundRobin };

const char* to_string(StealStrategy s) noexcept;
/// Parses "random" or "round_robin" (also "rr"); throws ConfigError otherwise.
StealStrategy parse_steal_strategy(const std::string& name);

struct ExecutorConfig {
  std::size_t n_device_workers = 2;
  std::size_t n_host_workers = 0;
  StealStrategy steal_strategy = StealStrategy::RoundRobin;
  /// Victims probed per steal() call; 0 means one per other worker.
  std::size_t steal_attempts = 0;
  /// Consecutive failed rounds before a worker parks.
  std::size_t park_after = 4;
  std::uint64_t seed = 0x5eedULL;
  /// Per-worker host arena; the shared access modifiers take scratch from it.
  std::size_t scratch_bytes = MultiarchAllocator::kDefaultHostCapacity;
  /// Arena per device worker.
  std::size_t device_arena_bytes = MultiarchAllocator::kDefaultDeviceCapacity;
  /// Called by a worker right before it runs a node's callable (stress tests).
  std::function<void(std::size_t worker)> before_node;

  /// One more device worker than virtual devices; host workers take the
  /// remaining hardware threads.
  static ExecutorConfig defaults(std::size_t virtual_devices = 1);
};

struct WorkerStats {
  std::size_t worker_id = 0;
  ExecutionKind domain = ExecutionKind::Host;
  std::uint64_t processed_nodes = 0;
  std::uint64_t steals_ok = 0;
  std::uint64_t steals_failed = 0;
};

/// Per-run state shared by the nodes of one graph activation.
class Activation {
 public:
  explicit Activation(std::int64_t pending) : pending_(pending), finished_(pending == 0) {}

  bool failed() const noexcept { return failed_.load(std::memory_order_acquire); }
  void fail(std::exception_ptr error);
  void add_pending(std::int64_t n) noexcept { pending_.fetch_add(n, std::memory_order_acq_rel); }
  /// Marks one node execution finished; wakes waiters on the last one.
  void complete_one();

  bool done() const noexcept { return pending_.load(std::memory_order_acquire) == 0; }
  /// Blocks until every node execution finished; rethrows the first error.
  void wait();

 private:
  friend class Executor;

  std::atomic<std::int64_t> pending_;
  std::atomic<bool> failed_{false};
  std::exception_ptr error_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool finished_;
};

/// Completion handle returned by Executor::run_graph().
class RunHandle {
 public:
  RunHandle() = default;
  explicit RunHandle(std::shared_ptr<Activation> a) : activation_(std::move(a)) {}

  bool done() const noexcept { return !activation_ || activation_->done(); }
  void wait() const {
    if (activation_) activation_->wait();
  }

 private:
  std::shared_ptr<Activation> activation_;
};

class Executor {
 public:
  explicit Executor(ExecutorConfig config = ExecutorConfig::defaults());
  ~Executor();

  Executor(const Executor&) = delete;
  Executor& operator=(const Executor&) = delete;

  /// Seeds the zero-dependency nodes of a frozen graph. A graph may only have
  /// one activation in flight.
  RunHandle run_graph(Graph& graph);
  static void wait_done(const RunHandle& handle) { handle.wait(); }
  /// run_graph + wait_done.
  void execute(Graph& graph) { run_graph(graph).wait(); }

  /// Stops workers from taking new nodes until resume().
  void pause();
  void resume();
  bool paused() const noexcept { return paused_.load(std::memory_order_acquire); }
  /// Workers currently parked for lack of work.
  std::size_t parked_workers() const noexcept { return parked_.load(std::memory_order_acquire); }

  std::size_t worker_count() const noexcept { return workers_.size(); }
  const ExecutorConfig& config() const noexcept { return config_; }
  MultiarchAllocator& allocator() noexcept { return *allocator_; }

  std::vector<WorkerStats> stats() const;
  void reset_stats();
  /// CSV with header worker_id,domain,processed_nodes,steals_ok,steals_failed.
  std::string stats_csv() const;
  void write_stats_csv(const std::filesystem::path& path) const;

  /// Victim order a RoundRobin thief `self` probes among `workers` workers.
  static std::vector<std::size_t> round_robin_order(std::size_t self, std::size_t workers);

 private:
  struct Inbox {
    std::mutex mutex;
    std::vector<Node*> items;
  };

  struct Worker {
    std::size_t id = 0;
    ExecutionKind priority = ExecutionKind::Host;
    StealDeque<Node> host_queue;
    StealDeque<Node> device_queue;
    Inbox host_inbox;
    Inbox device_inbox;
    std::atomic<bool> has_mail{false};
    std::atomic<std::uint64_t> processed{0};
    std::atomic<std::uint64_t> steals_ok{0};
    std::atomic<std::uint64_t> steals_failed{0};
    std::mt19937_64 rng;
    std::size_t rr_cursor = 0;
    Arena* scratch = nullptr;
    std::thread thread;

    bool owns(ExecutionKind kind) const noexcept {
      return kind == ExecutionKind::Host || priority == ExecutionKind::Device;
    }
    StealDeque<Node>& queue(ExecutionKind kind) noexcept {
      return kind == ExecutionKind::Device ? device_queue : host_queue;
    }
    Inbox& inbox(ExecutionKind kind) noexcept { return kind == ExecutionKind::Device ? device_inbox : host_inbox; }
  };

  void worker_loop(Worker& w);
  bool execute_work(Worker& w, ExecutionKind kind);
  bool try_execute(Worker& w, Node& node);
  bool steal(Worker& w, ExecutionKind kind);
  std::size_t next_victim(Worker& w);
  void drain_inbox(Worker& w);
  /// Makes `node` runnable: onto the caller's own queue when it owns that
  /// kind, otherwise into another worker's inbox.
  void enqueue_ready(Worker* self, Node& node);
  void post(Worker& target, Node& node);
  void wake();

  ExecutorConfig config_;
  std::unique_ptr<MultiarchAllocator> allocator_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::vector<std::size_t> device_workers_;
  std::atomic<std::size_t> device_rr_{0};
  std::atomic<std::size_t> host_rr_{0};
  std::atomic<bool> shutdown_{false};
  std::atomic<bool> paused_{false};
  std::atomic<std::size_t> parked_{0};
  std::mutex park_mutex_;
  std::condition_variable park_cv_;
  std::atomic<std::uint64_t> wake_epoch_{0};
};

}  // namespace weft
