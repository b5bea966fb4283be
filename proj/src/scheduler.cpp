#include "weft/scheduler.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "weft/errors.hpp"

namespace weft {

const char* to_string(StealStrategy s) noexcept {
  return s == StealStrategy::Random ? "random" : "round_robin";
}

StealStrategy parse_steal_strategy(const std::string& name) {
  if (name == "random") return StealStrategy::Random;
  if (name == "round_robin" || name == "rr" || name == "roundrobin") return StealStrategy::RoundRobin;
  throw ConfigError("unknown steal strategy '" + name + "' (expected random or round_robin)");
}

ExecutorConfig ExecutorConfig::defaults(std::size_t virtual_devices) {
  ExecutorConfig cfg;
  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  cfg.n_device_workers = virtual_devices + 1;
  cfg.n_host_workers = hw > cfg.n_device_workers ? hw - cfg.n_device_workers : 0;
  return cfg;
}

void Activation::fail(std::exception_ptr error) {
  bool expected = false;
  if (failed_.compare_exchange_strong(expected, true, std::memory_order_acq_rel)) {
    std::lock_guard lock(mutex_);
    error_ = std::move(error);
  }
}

void Activation::complete_one() {
  if (pending_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
    std::lock_guard lock(mutex_);
    finished_ = true;
    cv_.notify_all();
  }
}

void Activation::wait() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return finished_; });
  if (error_) std::rethrow_exception(error_);
}

Executor::Executor(ExecutorConfig config) : config_(std::move(config)) {
  const std::size_t n = config_.n_device_workers + config_.n_host_workers;
  if (n == 0) throw ConfigError("an executor needs at least one worker");
  allocator_ = std::make_unique<MultiarchAllocator>(n, config_.n_device_workers, config_.scratch_bytes,
                                                   config_.device_arena_bytes);
  for (std::size_t i = 0; i < n; ++i) {
    auto w = std::make_unique<Worker>();
    w->id = i;
    w->priority = i < config_.n_device_workers ? ExecutionKind::Device : ExecutionKind::Host;
    w->rng.seed(config_.seed + 0x9e3779b97f4a7c15ULL * (i + 1));
    w->scratch = &allocator_->host_allocator(i);
    if (w->priority == ExecutionKind::Device) device_workers_.push_back(i);
    workers_.push_back(std::move(w));
  }
  for (auto& w : workers_) {
    Worker* raw = w.get();
    w->thread = std::thread([this, raw] { worker_loop(*raw); });
  }
}

Executor::~Executor() {
  shutdown_.store(true, std::memory_order_release);
  {
    std::lock_guard lock(park_mutex_);
    wake_epoch_.fetch_add(1, std::memory_order_acq_rel);
  }
  park_cv_.notify_all();
  for (auto& w : workers_) {
    if (w->thread.joinable()) w->thread.join();
  }
}

RunHandle Executor::run_graph(Graph& graph) {
  if (!graph.frozen()) throw UsageError("run_graph() needs a frozen graph; call freeze() first");
  bool has_device = false;
  for (const auto& n : graph.nodes()) {
    if (n->activation() != nullptr && !n->activation()->done()) {
      throw UsageError("graph is already running on an executor");
    }
    has_device = has_device || n->kind() == ExecutionKind::Device;
  }
  if (has_device && device_workers_.empty()) {
    throw UsageError("graph has device nodes but the executor has no device workers");
  }
  auto activation = std::make_shared<Activation>(static_cast<std::int64_t>(graph.size()));
  for (const auto& n : graph.nodes()) n->set_activation(activation);
  for (const auto& n : graph.nodes()) {
    if (n->initial_dependents() == 0) enqueue_ready(nullptr, *n);
  }
  return RunHandle(activation);
}

void Executor::pause() { paused_.store(true, std::memory_order_release); }

void Executor::resume() {
  {
    std::lock_guard lock(park_mutex_);
    paused_.store(false, std::memory_order_release);
    wake_epoch_.fetch_add(1, std::memory_order_acq_rel);
  }
  park_cv_.notify_all();
}

void Executor::wake() {
  wake_epoch_.fetch_add(1, std::memory_order_acq_rel);
  if (parked_.load(std::memory_order_acquire) > 0) {
    std::lock_guard lock(park_mutex_);
    park_cv_.notify_all();
  }
}

void Executor::post(Worker& target, Node& node) {
  Inbox& box = target.inbox(node.kind());
  {
    std::lock_guard lock(box.mutex);
    box.items.push_back(&node);
  }
  target.has_mail.store(true, std::memory_order_release);
  wake();
}

void Executor::enqueue_ready(Worker* self, Node& node) {
  const ExecutionKind kind = node.kind();
  if (self != nullptr && self->owns(kind)) {
    self->queue(kind).push(&node);
    wake();
    return;
  }
  if (kind == ExecutionKind::Device) {
    const std::size_t i = device_rr_.fetch_add(1, std::memory_order_relaxed) % device_workers_.size();
    post(*workers_[device_workers_[i]], node);
  } else {
    const std::size_t i = host_rr_.fetch_add(1, std::memory_order_relaxed) % workers_.size();
    post(*workers_[i], node);
  }
}

void Executor::drain_inbox(Worker& w) {
  if (!w.has_mail.exchange(false, std::memory_order_acq_rel)) return;
  std::vector<Node*> items;
  for (ExecutionKind kind : {ExecutionKind::Device, ExecutionKind::Host}) {
    if (!w.owns(kind)) continue;
    Inbox& box = w.inbox(kind);
    {
      std::lock_guard lock(box.mutex);
      items.swap(box.items);
    }
    for (Node* n : items) w.queue(kind).push(n);
    items.clear();
  }
}

void Executor::worker_loop(Worker& w) {
  std::size_t idle_rounds = 0;
  while (!shutdown_.load(std::memory_order_acquire)) {
    if (paused_.load(std::memory_order_acquire)) {
      std::unique_lock lock(park_mutex_);
      park_cv_.wait(lock, [&] { return !paused_.load() || shutdown_.load(); });
      continue;
    }
    const std::uint64_t epoch = wake_epoch_.load(std::memory_order_acquire);
    drain_inbox(w);
    bool did = execute_work(w, w.priority);
    if (!did && w.priority == ExecutionKind::Device) did = execute_work(w, ExecutionKind::Host);
    if (did) {
      idle_rounds = 0;
      continue;
    }
    if (++idle_rounds < config_.park_after) {
      std::this_thread::yield();
      continue;
    }
    std::unique_lock lock(park_mutex_);
    parked_.fetch_add(1, std::memory_order_acq_rel);
    park_cv_.wait_for(lock, std::chrono::milliseconds(2), [&] {
      return shutdown_.load() || paused_.load() || wake_epoch_.load() != epoch;
    });
    parked_.fetch_sub(1, std::memory_order_acq_rel);
    idle_rounds = 0;
  }
}

bool Executor::execute_work(Worker& w, ExecutionKind kind) {
  if (Node* n = w.queue(kind).pop()) {
    if (try_execute(w, *n)) return true;
    w.queue(kind).push(n);
  }
  return steal(w, kind);
}

bool Executor::try_execute(Worker& w, Node& node) {
  if (node.dependents().load(std::memory_order_acquire) != 0) return false;
  node.dependents().store(node.initial_dependents(), std::memory_order_release);

  Activation* act = node.activation();
  if (!act->failed()) {
    try {
      if (config_.before_node) config_.before_node(w.id);
      ExecContext ctx{w.id, w.scratch};
      node.execute(ctx);
    } catch (...) {
      act->fail(std::current_exception());
    }
    if (w.scratch->cursor() != 0) w.scratch->reset();
  }

  bool loop_again = false;
  if (node.node_class() == NodeClass::Conditional && !act->failed()) {
    try {
      loop_again = node.evaluate_predicate();
    } catch (...) {
      act->fail(std::current_exception());
    }
  }
  if (loop_again) {
    act->add_pending(static_cast<std::int64_t>(node.loop_body_size()));
    for (Node* r : node.loop_roots()) {
      r->dependents().store(0, std::memory_order_release);
      enqueue_ready(&w, *r);
    }
  } else {
    for (Node* s : node.successors()) {
      if (s->dependents().fetch_sub(1, std::memory_order_acq_rel) == 1) enqueue_ready(&w, *s);
    }
  }
  w.processed.fetch_add(1, std::memory_order_relaxed);
  act->complete_one();
  return true;
}

std::vector<std::size_t> Executor::round_robin_order(std::size_t self, std::size_t workers) {
  std::vector<std::size_t> order;
  for (std::size_t i = 1; i < workers; ++i) order.push_back((self + i) % workers);
  return order;
}

std::size_t Executor::next_victim(Worker& w) {
  const std::size_t n = workers_.size();
  if (config_.steal_strategy == StealStrategy::Random) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 2);
    const std::size_t v = pick(w.rng);
    return v >= w.id ? v + 1 : v;
  }
  const std::size_t v = (w.id + 1 + w.rr_cursor) % n;
  w.rr_cursor = (w.rr_cursor + 1) % (n - 1);
  return v;
}

bool Executor::steal(Worker& w, ExecutionKind kind) {
  const std::size_t n = workers_.size();
  if (n < 2) return false;
  const std::size_t attempts = config_.steal_attempts != 0 ? config_.steal_attempts : n - 1;
  w.rr_cursor = 0;
  for (std::size_t i = 0; i < attempts; ++i) {
    Worker& victim = *workers_[next_victim(w)];
    if (!victim.owns(kind)) continue;
    Node* node = victim.queue(kind).steal();
    if (node == nullptr && victim.has_mail.load(std::memory_order_acquire)) {
      Inbox& box = victim.inbox(kind);
      std::unique_lock lock(box.mutex, std::try_to_lock);
      if (lock.owns_lock() && !box.items.empty()) {
        node = box.items.back();
        box.items.pop_back();
      }
    }
    if (node == nullptr) {
      w.steals_failed.fetch_add(1, std::memory_order_relaxed);
      continue;
    }
    w.steals_ok.fetch_add(1, std::memory_order_relaxed);
    if (try_execute(w, *node)) return true;
    w.queue(kind).push(node);
  }
  return false;
}

std::vector<WorkerStats> Executor::stats() const {
  std::vector<WorkerStats> out;
  for (const auto& w : workers_) {
    out.push_back({w->id, w->priority, w->processed.load(), w->steals_ok.load(), w->steals_failed.load()});
  }
  return out;
}

void Executor::reset_stats() {
  for (auto& w : workers_) {
    w->processed.store(0);
    w->steals_ok.store(0);
    w->steals_failed.store(0);
  }
}

std::string Executor::stats_csv() const {
  std::ostringstream os;
  os << "worker_id,domain,processed_nodes,steals_ok,steals_failed\n";
  for (const auto& s : stats()) {
    os << s.worker_id << ',' << to_string(s.domain) << ',' << s.processed_nodes << ',' << s.steals_ok << ','
       << s.steals_failed << '\n';
  }
  return os.str();
}

void Executor::write_stats_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write stats to " + path.string());
  out << stats_csv();
}

}  // namespace weft
