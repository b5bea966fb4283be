#pragma once

// Computation graphs built from a fluent API. Tensor operations are split into
// one node per block; padded access modifiers insert halo-transfer nodes and
// the edges that make the split race free.

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <type_traits>
#include <utility>
#include <vector>

#include "weft/alloc.hpp"
#include "weft/errors.hpp"
#include "weft/iterator.hpp"
#include "weft/tensor.hpp"

namespace weft {

enum class ExecutionKind : std::uint8_t { Host, Device };

const char* to_string(ExecutionKind kind) noexcept;

enum class NodeClass : std::uint8_t { Compute, Transfer, Reduce, Sync, Conditional };

const char* to_string(NodeClass cls) noexcept;

/// Per-invocation context handed to node work.
struct ExecContext {
  std::size_t worker_id = 0;
  /// Worker-local scratch arena; null when run outside an executor.
  Arena* scratch = nullptr;
};

class Activation;

/// A unit of work plus its position in the graph.
class Node {
 public:
  using Work = std::function<void(ExecContext&)>;

  Node(std::string name, ExecutionKind kind, NodeClass cls, Work work)
      : name_(std::move(name)), kind_(kind), class_(cls), work_(std::move(work)) {}

  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  const std::string& name() const noexcept { return name_; }
  ExecutionKind kind() const noexcept { return kind_; }
  NodeClass node_class() const noexcept { return class_; }
  std::size_t level() const noexcept { return level_; }

  const std::vector<Node*>& successors() const noexcept { return successors_; }
  const std::vector<Node*>& predecessors() const noexcept { return predecessors_; }

  std::int64_t initial_dependents() const noexcept { return initial_dependents_; }
  std::atomic<std::int64_t>& dependents() noexcept { return dependents_; }
  const std::atomic<std::int64_t>& dependents() const noexcept { return dependents_; }

  /// Number of completed executions since the graph was frozen.
  std::uint64_t executions() const noexcept { return executions_.load(std::memory_order_acquire); }

  /// Runs the node's callable.
  void execute(ExecContext& ctx) {
    if (work_) work_(ctx);
    executions_.fetch_add(1, std::memory_order_acq_rel);
  }

  /// Conditional nodes: true when the owning loop body must run again.
  bool evaluate_predicate() const { return predicate_ ? predicate_() : false; }
  const std::vector<Node*>& loop_roots() const noexcept { return loop_roots_; }
  /// Nodes re-run per loop iteration, this node included.
  std::size_t loop_body_size() const noexcept { return loop_body_size_; }

  /// Block indices the node reads or writes (empty for non-tensor nodes) and
  /// the block count of the tensor they refer to.
  const std::vector<std::size_t>& partitions() const noexcept { return partitions_; }
  std::size_t partition_grid() const noexcept { return partition_grid_; }

  Activation* activation() const noexcept { return activation_.get(); }
  void set_activation(std::shared_ptr<Activation> a) noexcept { activation_ = std::move(a); }

 private:
  friend class Graph;

  std::string name_;
  ExecutionKind kind_;
  NodeClass class_;
  Work work_;
  std::function<bool()> predicate_;
  std::vector<Node*> loop_roots_;
  std::size_t loop_body_size_ = 0;
  std::vector<Node*> successors_;
  std::vector<Node*> predecessors_;
  std::vector<std::size_t> partitions_;
  std::size_t partition_grid_ = 0;
  /// Id of the split or reduce that generated the node; npos for user nodes.
  std::size_t op_id_ = static_cast<std::size_t>(-1);
  std::size_t level_ = 0;
  std::int64_t initial_dependents_ = 0;
  std::atomic<std::int64_t> dependents_{0};
  std::atomic<std::uint64_t> executions_{0};
  std::shared_ptr<Activation> activation_;
};

/// How a split kernel touches a tensor.
enum class AccessMode : std::uint8_t {
  Plain,
  ConcurrentPadded,
  ExclusivePadded,
  SharedPlain,
  SharedConcurrentPadded,
  SharedExclusivePadded,
};

constexpr bool is_padded(AccessMode m) noexcept {
  return m == AccessMode::ConcurrentPadded || m == AccessMode::ExclusivePadded ||
         m == AccessMode::SharedConcurrentPadded || m == AccessMode::SharedExclusivePadded;
}
constexpr bool is_exclusive(AccessMode m) noexcept {
  return m == AccessMode::ExclusivePadded || m == AccessMode::SharedExclusivePadded;
}
constexpr bool is_shared(AccessMode m) noexcept {
  return m == AccessMode::SharedPlain || m == AccessMode::SharedConcurrentPadded ||
         m == AccessMode::SharedExclusivePadded;
}

/// A tensor wrapped with an access modifier.
struct Access {
  Tensor* tensor;
  AccessMode mode;
};

/// The kernel reads padding but writes no data another block reads.
inline Access concurrent_padded_access(Tensor& t) { return {&t, AccessMode::ConcurrentPadded}; }
/// The kernel reads padding and writes data neighbouring blocks copy.
inline Access exclusive_padded_access(Tensor& t) { return {&t, AccessMode::ExclusivePadded}; }
/// Kernel runs on a per-task scratch copy of the block.
inline Access in_shared(Tensor& t) { return {&t, AccessMode::SharedPlain}; }
inline Access concurrent_padded_access_in_shared(Tensor& t) { return {&t, AccessMode::SharedConcurrentPadded}; }
inline Access exclusive_padded_access_in_shared(Tensor& t) { return {&t, AccessMode::SharedExclusivePadded}; }

/// Result of an asynchronous reduction: a value plus a completion flag.
class ReductionResult {
 public:
  explicit ReductionResult(double initial = 0.0) : value_(initial) {}

  bool complete() const noexcept { return complete_.load(std::memory_order_acquire); }

  /// Throws UsageError when the reduction has not completed.
  double value() const {
    if (!complete()) throw UsageError("reduction result read before the reduction completed");
    return value_;
  }

  /// Returns the value and clears the completion flag.
  double value_and_reset() {
    const double v = value();
    complete_.store(false, std::memory_order_release);
    return v;
  }

  /// Publishes a finished reduction. Publishing over an unconsumed result
  /// throws StaleResultError.
  void publish(double v) {
    if (complete()) throw StaleResultError("reduction result published twice without value_and_reset()");
    value_ = v;
    complete_.store(true, std::memory_order_release);
  }

  void reset() noexcept { complete_.store(false, std::memory_order_release); }

 private:
  double value_;
  std::atomic<bool> complete_{false};
};

inline ReductionResult make_reduction_result(double initial = 0.0) { return ReductionResult(initial); }

struct SumReducer {
  static constexpr double identity() noexcept { return 0.0; }
  double operator()(double a, double b) const noexcept { return a + b; }
};

struct MaxReducer {
  static constexpr double identity() noexcept { return -std::numeric_limits<double>::infinity(); }
  double operator()(double a, double b) const noexcept { return a < b ? b : a; }
};

struct MinReducer {
  static constexpr double identity() noexcept { return std::numeric_limits<double>::infinity(); }
  double operator()(double a, double b) const noexcept { return b < a ? b : a; }
};

template <class F>
struct NamedCallable {
  std::string name;
  F callable;
};

/// Gives a node a name so it can be found after the graph is built.
template <class F>
NamedCallable<std::decay_t<F>> named(std::string name, F&& f) {
  return {std::move(name), std::forward<F>(f)};
}

/// Binds arguments to a callable, for emplacing several nodes in one call.
template <class F, class... Args>
auto make_node(F&& f, Args&&... args) {
  return [f = std::forward<F>(f), ... args = std::forward<Args>(args)]() mutable { f(args...); };
}

namespace detail {

struct TensorArg {
  Tensor* tensor;
  AccessMode mode;
};

template <class T>
struct ValueArg {
  T value;
};

template <class A>
auto store_arg(A&& a) {
  using D = std::remove_cvref_t<A>;
  if constexpr (std::is_same_v<D, Tensor>) {
    static_assert(!std::is_const_v<std::remove_reference_t<A>>, "split tensors must be mutable");
    return TensorArg{&a, AccessMode::Plain};
  } else if constexpr (std::is_same_v<D, Access>) {
    return TensorArg{a.tensor, a.mode};
  } else {
    return ValueArg<D>{std::forward<A>(a)};
  }
}

inline void collect_tensor(std::vector<TensorArg>& out, const TensorArg& a) { out.push_back(a); }
template <class T>
void collect_tensor(std::vector<TensorArg>&, const ValueArg<T>&) {}

/// A tensor argument resolved for one block.
struct BlockBinding {
  const Block* block = nullptr;
  BlockStorage* storage = nullptr;
  const Extents* global = nullptr;
  std::optional<BlockStorage> scratch;
  BlockStorage* target = nullptr;
  AccessMode mode = AccessMode::Plain;
};

BlockBinding bind_block(const TensorArg& arg, std::size_t b, ExecContext& ctx);
void finish_binding(BlockBinding& binding);

template <class T>
const T* bind_block(const ValueArg<T>& arg, std::size_t, ExecContext&) {
  return &arg.value;
}
inline void finish_binding(const void*) {}

inline IndexedIterator cursor_at(BlockBinding& b, const Index3& pos) {
  return IndexedIterator(*b.block, *b.storage, pos, *b.global);
}
template <class T>
const T* cursor_at(const T* value, const Index3&) {
  return value;
}

inline IndexedIterator& deref(IndexedIterator& it) { return it; }
template <class T>
const T& deref(const T* value) {
  return *value;
}

inline void advance(IndexedIterator& it) { it.shift(0, 1); }
template <class T>
void advance(const T*) {}

template <class F, class Args, std::size_t... I>
void run_split_block(F& f, Args& args, const Block& geometry, std::size_t b, ExecContext& ctx,
                     std::index_sequence<I...>) {
  auto bindings = std::make_tuple(bind_block(std::get<I>(args), b, ctx)...);
  const auto nx = static_cast<std::ptrdiff_t>(geometry.interior(0));
  const auto ny = static_cast<std::ptrdiff_t>(geometry.interior(1));
  const auto nz = static_cast<std::ptrdiff_t>(geometry.interior(2));
  for (std::ptrdiff_t z = 0; z < nz; ++z) {
    for (std::ptrdiff_t y = 0; y < ny; ++y) {
      auto cursors = std::make_tuple(cursor_at(std::get<I>(bindings), Index3{0, y, z})...);
      for (std::ptrdiff_t x = 0; x < nx; ++x) {
        f(deref(std::get<I>(cursors))...);
        (advance(std::get<I>(cursors)), ...);
      }
    }
  }
  (finish_binding(std::get<I>(bindings)), ...);
}

template <class T>
struct is_named : std::false_type {};
template <class F>
struct is_named<NamedCallable<F>> : std::true_type {};

}  // namespace detail

/// Directed acyclic graph of nodes grouped in levels.
///
/// emplace() adds nodes to the current level (depending on the previous
/// level); then() opens a new level. The split family creates one node per
/// tensor block; then_split() narrows dependencies to the same block when the
/// previous level was also split over a grid of the same size.
class Graph {
 public:
  explicit Graph(ExecutionKind default_kind = ExecutionKind::Host) : default_kind_(default_kind) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) noexcept = default;
  Graph& operator=(Graph&&) noexcept = default;

  ExecutionKind default_kind() const noexcept { return default_kind_; }

  // Non-tensor operations ----------------------------------------------------

  template <class... F>
  Graph& emplace(F&&... fs) {
    return emplace(default_kind_, std::forward<F>(fs)...);
  }
  template <class... F>
  Graph& emplace(ExecutionKind kind, F&&... fs) {
    check_mutable();
    const auto prev = previous_level();
    ensure_level();
    (add_callable(kind, prev, std::forward<F>(fs)), ...);
    return *this;
  }

  template <class F>
    requires(!std::is_same_v<std::remove_cvref_t<F>, Graph>)
  Graph& then(F&& f) {
    return then(default_kind_, std::forward<F>(f));
  }
  template <class F>
    requires(!std::is_same_v<std::remove_cvref_t<F>, Graph>)
  Graph& then(ExecutionKind kind, F&& f) {
    check_mutable();
    const auto prev = last_level();
    open_level();
    add_callable(kind, prev, std::forward<F>(f));
    return *this;
  }

  /// Appends `sub` after the last level; `sub` is consumed.
  Graph& then(Graph&& sub);
  /// Merges `sub` into the current level; `sub` is consumed.
  Graph& emplace(Graph&& sub);

  Graph& then_subgraph(Graph&& sub) { return then(std::move(sub)); }
  Graph& emplace_subgraph(Graph&& sub) { return emplace(std::move(sub)); }

  // Tensor operations --------------------------------------------------------

  /// One node per block; `f` is called for every interior cell with an
  /// IndexedIterator per tensor argument and the remaining arguments as is.
  template <class F, class... Args>
  Graph& split(F&& f, Args&&... args) {
    if constexpr (std::is_same_v<std::remove_cvref_t<F>, ExecutionKind>) {
      return split_cells(false, f, std::forward<Args>(args)...);
    } else {
      return split_cells(false, default_kind_, std::forward<F>(f), std::forward<Args>(args)...);
    }
  }
  template <class F, class... Args>
  Graph& then_split(F&& f, Args&&... args) {
    if constexpr (std::is_same_v<std::remove_cvref_t<F>, ExecutionKind>) {
      return split_cells(true, f, std::forward<Args>(args)...);
    } else {
      return split_cells(true, default_kind_, std::forward<F>(f), std::forward<Args>(args)...);
    }
  }

  /// Like split(), but `f(block_index, ctx)` is called once per block. The
  /// tensors (or Access modifiers) only drive dependency inference.
  template <class F, class... T>
  Graph& split_per_block(ExecutionKind kind, F&& f, T&&... tensors) {
    return add_per_block(false, kind, std::forward<F>(f), {detail::store_arg(std::forward<T>(tensors))...});
  }
  template <class F, class... T>
  Graph& then_split_per_block(ExecutionKind kind, F&& f, T&&... tensors) {
    return add_per_block(true, kind, std::forward<F>(f), {detail::store_arg(std::forward<T>(tensors))...});
  }

  /// Per-block boundary loading of `tensor` (same-partition chained).
  Graph& then_load_boundary(Tensor& tensor, BoundaryKind kind);

  /// Reduces slot `accessor` of `tensor` into `result`: one node per block
  /// plus a finalize node that combines partials in block order.
  template <class Reducer>
  Graph& reduce(Tensor& tensor, ReductionResult& result, Reducer reducer, Accessor accessor = {}) {
    return add_reduce(false, tensor, result, accessor, make_reducer(reducer), Reducer::identity());
  }
  template <class Reducer>
  Graph& then_reduce(Tensor& tensor, ReductionResult& result, Reducer reducer, Accessor accessor = {}) {
    return add_reduce(true, tensor, result, accessor, make_reducer(reducer), Reducer::identity());
  }

  // Control ------------------------------------------------------------------

  /// Joins every node without successors, then runs `f`.
  template <class F>
  Graph& sync(F&& f) {
    check_mutable();
    return add_join(NodeClass::Sync, "sync", to_work(std::forward<F>(f)), {});
  }
  Graph& sync() { return sync([] {}); }

  /// Appends a node that re-runs this graph's body while `predicate()` is true.
  Graph& conditional(std::function<bool()> predicate);

  /// Adds an explicit edge between named nodes.
  void add_dependency(const std::string& before, const std::string& after);

  /// Computes dependency counts and levels, validates acyclicity and forbids
  /// further mutation.
  Graph& freeze();
  bool frozen() const noexcept { return frozen_; }

  // Inspection ---------------------------------------------------------------

  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }
  const std::vector<std::unique_ptr<Node>>& nodes() const noexcept { return nodes_; }
  /// Display levels (longest-path depth), available after freeze().
  const std::vector<std::vector<Node*>>& levels() const;
  /// First node with `name` in insertion order.
  Node* find(const std::string& name) const noexcept;
  std::vector<Node*> nodes_of_class(NodeClass cls) const;
  /// Nodes with no predecessors.
  std::vector<Node*> roots() const;

  std::string to_dot() const;

 private:
  using Level = std::vector<Node*>;
  using ReduceFn = std::function<double(double, double)>;

  template <class R>
  static ReduceFn make_reducer(R reducer) {
    return [reducer](double a, double b) { return reducer(a, b); };
  }

  template <class F>
  static Node::Work to_work(F&& f) {
    using D = std::decay_t<F>;
    if constexpr (std::is_invocable_v<D&, ExecContext&>) {
      return [fn = std::forward<F>(f)](ExecContext& ctx) mutable { fn(ctx); };
    } else {
      return [fn = std::forward<F>(f)](ExecContext&) mutable { fn(); };
    }
  }

  template <class F>
  void add_callable(ExecutionKind kind, const Level& prev, F&& f) {
    if constexpr (detail::is_named<std::decay_t<F>>::value) {
      Node* n = make_node(f.name, kind, NodeClass::Compute, to_work(std::move(f.callable)));
      for (Node* p : prev) add_edge(p, n);
      logical_.back().push_back(n);
    } else {
      Node* n = make_node("", kind, NodeClass::Compute, to_work(std::forward<F>(f)));
      for (Node* p : prev) add_edge(p, n);
      logical_.back().push_back(n);
    }
  }

  template <class F, class... Args>
  Graph& split_cells(bool then, ExecutionKind kind, F&& f, Args&&... args) {
    auto bundle = std::make_shared<std::tuple<decltype(detail::store_arg(std::forward<Args>(args)))...>>(
        detail::store_arg(std::forward<Args>(args))...);
    std::vector<detail::TensorArg> tensors;
    std::apply([&](auto&... a) { (detail::collect_tensor(tensors, a), ...); }, *bundle);
    auto fn = std::make_shared<std::decay_t<F>>(std::forward<F>(f));
    Tensor* first = tensors.empty() ? nullptr : tensors.front().tensor;
    auto make_work = [bundle, fn, first](std::size_t b) -> Node::Work {
      return [bundle, fn, first, b](ExecContext& ctx) {
        detail::run_split_block(*fn, *bundle, first->block(b), b, ctx,
                                std::make_index_sequence<std::tuple_size_v<std::decay_t<decltype(*bundle)>>>{});
      };
    };
    return add_split(then, kind, tensors, make_work, "S");
  }

  template <class F>
  Graph& add_per_block(bool then, ExecutionKind kind, F&& f, std::vector<detail::TensorArg> tensors) {
    auto fn = std::make_shared<std::decay_t<F>>(std::forward<F>(f));
    auto make_work = [fn](std::size_t b) -> Node::Work {
      return [fn, b](ExecContext& ctx) {
        if constexpr (std::is_invocable_v<std::decay_t<F>&, std::size_t, ExecContext&>) {
          (*fn)(b, ctx);
        } else {
          (*fn)(b);
        }
      };
    };
    return add_split(then, kind, tensors, make_work, "B");
  }

  Graph& add_split(bool then, ExecutionKind kind, const std::vector<detail::TensorArg>& tensors,
                   const std::function<Node::Work(std::size_t)>& make_work, const std::string& prefix);
  Graph& add_reduce(bool then, Tensor& tensor, ReductionResult& result, Accessor accessor, ReduceFn reducer,
                    double identity);
  Graph& add_join(NodeClass cls, const std::string& name, Node::Work work, std::function<bool()> predicate);

  Node* make_node(std::string name, ExecutionKind kind, NodeClass cls, Node::Work work);
  /// Moves the nodes of `sub` into this graph, renumbering generated names.
  void adopt_nodes(Graph& sub);
  static void add_edge(Node* from, Node* to);
  /// Nodes of `prev` a node touching `partitions` of a `grid`-block tensor
  /// must follow under the same-partition rule.
  static std::vector<Node*> narrowed(const Level& prev, const std::vector<std::size_t>& partitions,
                                     std::size_t grid);

  void check_mutable() const;
  void ensure_level();
  void open_level();
  Level last_level() const { return logical_.empty() ? Level{} : logical_.back(); }
  /// Level preceding the current one (the one emplace() adds to).
  Level previous_level() const { return logical_.size() < 2 ? Level{} : logical_[logical_.size() - 2]; }

  ExecutionKind default_kind_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<Level> logical_;
  std::vector<std::vector<Node*>> levels_;
  bool frozen_ = false;
  std::size_t split_counter_ = 0;
};

}  // namespace weft
