#include "weft/graph.hpp"

#include <algorithm>
#include <cstring>
#include <deque>
#include <map>
#include <sstream>

namespace weft {

const char* to_string(ExecutionKind kind) noexcept {
  return kind == ExecutionKind::Host ? "host" : "device";
}

const char* to_string(NodeClass cls) noexcept {
  switch (cls) {
    case NodeClass::Compute: return "compute";
    case NodeClass::Transfer: return "transfer";
    case NodeClass::Reduce: return "reduce";
    case NodeClass::Sync: return "sync";
    case NodeClass::Conditional: return "conditional";
  }
  return "?";
}

namespace detail {

BlockBinding bind_block(const TensorArg& arg, std::size_t b, ExecContext& ctx) {
  BlockBinding out;
  Block& blk = arg.tensor->block(b);
  out.block = &blk;
  out.global = &arg.tensor->global_extents();
  out.mode = arg.mode;
  if (!is_shared(arg.mode)) {
    out.storage = &blk.storage();
    return out;
  }
  const BlockStorage& real = blk.storage();
  bool placed = false;
  if (ctx.scratch != nullptr) {
    try {
      out.scratch.emplace(real.schema(), real.element_count(), *ctx.scratch);
      placed = true;
    } catch (const ArenaExhausted&) {
      placed = false;
    }
  }
  if (!placed) out.scratch.emplace(real.schema(), real.element_count());
  std::memcpy(out.scratch->bytes().data(), real.bytes().data(), real.byte_size());
  out.storage = &*out.scratch;
  out.target = &blk.storage();
  return out;
}

void finish_binding(BlockBinding& binding) {
  if (!binding.scratch || binding.mode == AccessMode::SharedConcurrentPadded) return;
  const Block& blk = *binding.block;
  for_each_cell(blk.interior_box(), [&](const Index3& pos) {
    const std::size_t cell = blk.cell_index(pos);
    binding.target->copy_cell_from(*binding.scratch, cell, cell);
  });
}

}  // namespace detail

void Graph::check_mutable() const {
  if (frozen_) throw BuildError("graph is frozen; no further nodes or edges can be added");
}

void Graph::ensure_level() {
  if (logical_.empty()) logical_.emplace_back();
}

void Graph::open_level() { logical_.emplace_back(); }

Node* Graph::make_node(std::string name, ExecutionKind kind, NodeClass cls, Node::Work work) {
  nodes_.push_back(std::make_unique<Node>(std::move(name), kind, cls, std::move(work)));
  return nodes_.back().get();
}

void Graph::adopt_nodes(Graph& sub) {
  const std::size_t offset = split_counter_;
  for (auto& n : sub.nodes_) {
    if (n->op_id_ != static_cast<std::size_t>(-1)) {
      const std::string old_id = std::to_string(n->op_id_);
      n->op_id_ += offset;
      n->name_ = n->name_.substr(0, 1) + std::to_string(n->op_id_) + n->name_.substr(1 + old_id.size());
    }
    nodes_.push_back(std::move(n));
  }
  split_counter_ += sub.split_counter_;
}

void Graph::add_edge(Node* from, Node* to) {
  if (from == to) throw BuildError("node '" + from->name_ + "' cannot depend on itself");
  if (std::find(to->predecessors_.begin(), to->predecessors_.end(), from) != to->predecessors_.end()) return;
  to->predecessors_.push_back(from);
  from->successors_.push_back(to);
}

std::vector<Node*> Graph::narrowed(const Level& prev, const std::vector<std::size_t>& partitions,
                                   std::size_t grid) {
  if (partitions.empty()) return prev;
  std::vector<Node*> out;
  for (Node* m : prev) {
    if (m->partitions_.empty() || m->partition_grid_ != grid) {
      out.push_back(m);
      continue;
    }
    for (std::size_t p : m->partitions_) {
      if (std::find(partitions.begin(), partitions.end(), p) != partitions.end()) {
        out.push_back(m);
        break;
      }
    }
  }
  return out;
}

Graph& Graph::then(Graph&& sub) {
  check_mutable();
  if (&sub == this) throw BuildError("a graph cannot be composed with itself");
  if (sub.nodes_.empty()) return *this;
  const Level prev = last_level();
  for (Node* r : sub.roots()) {
    for (Node* p : narrowed(prev, r->partitions_, r->partition_grid_)) add_edge(p, r);
  }
  adopt_nodes(sub);
  for (auto& lvl : sub.logical_) logical_.push_back(std::move(lvl));
  sub.nodes_.clear();
  sub.logical_.clear();
  sub.frozen_ = false;
  return *this;
}

Graph& Graph::emplace(Graph&& sub) {
  check_mutable();
  if (&sub == this) throw BuildError("a graph cannot be composed with itself");
  if (sub.nodes_.empty()) return *this;
  const Level prev = previous_level();
  for (Node* r : sub.roots()) {
    for (Node* p : narrowed(prev, r->partitions_, r->partition_grid_)) add_edge(p, r);
  }
  ensure_level();
  adopt_nodes(sub);
  auto& current = logical_.back();
  for (std::size_t i = 0; i < sub.logical_.size(); ++i) {
    if (i == 0) {
      current.insert(current.end(), sub.logical_[0].begin(), sub.logical_[0].end());
    } else {
      logical_.push_back(std::move(sub.logical_[i]));
    }
  }
  sub.nodes_.clear();
  sub.logical_.clear();
  sub.frozen_ = false;
  return *this;
}

Graph& Graph::add_split(bool then, ExecutionKind kind, const std::vector<detail::TensorArg>& tensors,
                        const std::function<Node::Work(std::size_t)>& make_work, const std::string& prefix) {
  check_mutable();
  if (tensors.empty()) throw BuildError("a split operation needs at least one tensor argument");
  const Tensor& first = *tensors.front().tensor;
  for (const auto& t : tensors) {
    if (t.tensor->block_grid() != first.block_grid() || t.tensor->global_extents() != first.global_extents()) {
      throw BuildError("split tensors must share extents and block grid (" + first.global_extents().to_string() +
                       " vs " + t.tensor->global_extents().to_string() + ")");
    }
    if (is_padded(t.mode) && t.tensor->padding() == 0) {
      throw BuildError("padded access modifier used on a tensor without padding");
    }
  }
  const std::size_t grid = first.block_count();
  const std::size_t id = split_counter_++;

  const Level base = then ? last_level() : previous_level();
  if (then) {
    open_level();
  } else {
    ensure_level();
  }
  auto deps_for = [&](const std::vector<std::size_t>& parts) { return then ? narrowed(base, parts, grid) : base; };

  // One entry per distinct padded tensor; exclusive wins if requested twice.
  std::vector<std::pair<Tensor*, bool>> padded;
  for (const auto& t : tensors) {
    if (!is_padded(t.mode)) continue;
    auto it = std::find_if(padded.begin(), padded.end(), [&](const auto& p) { return p.first == t.tensor; });
    if (it == padded.end()) {
      padded.emplace_back(t.tensor, is_exclusive(t.mode));
    } else {
      it->second = it->second || is_exclusive(t.mode);
    }
  }

  std::vector<std::vector<Node*>> incoming(grid), outgoing(grid);
  for (auto [tensor, exclusive] : padded) {
    // (dst block, pass) -> transfers writing into that block during the pass
    std::map<std::pair<std::size_t, std::size_t>, std::vector<Node*>> into;
    for (const TransferEdge& edge : halo_plan(*tensor)) {
      std::ostringstream name;
      name << "T" << id << ".d" << edge.dim << (edge.face == Face::Low ? "L" : "H") << "." << edge.src_block << ">"
           << edge.dst_block;
      Node* n = make_node(name.str(), kind, NodeClass::Transfer,
                          [tensor, edge](ExecContext&) { execute_transfer(*tensor, edge); });
      n->op_id_ = id;
      n->partitions_ = {edge.src_block, edge.dst_block};
      n->partition_grid_ = grid;
      for (Node* p : deps_for(n->partitions_)) add_edge(p, n);
      for (std::size_t pass = 0; pass < edge.dim; ++pass) {
        auto found = into.find({edge.src_block, pass});
        if (found == into.end()) continue;
        for (Node* p : found->second) add_edge(p, n);
      }
      into[{edge.dst_block, edge.dim}].push_back(n);
      incoming[edge.dst_block].push_back(n);
      if (exclusive) outgoing[edge.src_block].push_back(n);
    }
  }

  for (std::size_t b = 0; b < grid; ++b) {
    Node* n = make_node(prefix + std::to_string(id) + "[" + std::to_string(b) + "]", kind, NodeClass::Compute,
                        make_work(b));
    n->op_id_ = id;
    n->partitions_ = {b};
    n->partition_grid_ = grid;
    for (Node* p : deps_for(n->partitions_)) add_edge(p, n);
    for (Node* p : incoming[b]) add_edge(p, n);
    for (Node* p : outgoing[b]) add_edge(p, n);
    logical_.back().push_back(n);
  }
  return *this;
}

Graph& Graph::then_load_boundary(Tensor& tensor, BoundaryKind kind) {
  Tensor* t = &tensor;
  return then_split_per_block(
      default_kind_, [t, kind](std::size_t b) { load_block_boundary(*t, b, kind); }, tensor);
}

Graph& Graph::add_reduce(bool then, Tensor& tensor, ReductionResult& result, Accessor accessor, ReduceFn reducer,
                         double identity) {
  check_mutable();
  const std::size_t slot = tensor.schema().slot_index(accessor.component, accessor.lane);
  const bool fast = tensor.schema().components().at(accessor.component).scalar_kind == ScalarKind::F64;
  const std::size_t grid = tensor.block_count();
  const std::size_t id = split_counter_++;
  auto partials = std::make_shared<std::vector<double>>(grid, identity);
  auto fn = std::make_shared<ReduceFn>(std::move(reducer));

  const Level base = then ? last_level() : previous_level();
  if (then) {
    open_level();
  } else {
    ensure_level();
  }
  Tensor* t = &tensor;
  std::vector<Node*> reducers;
  for (std::size_t b = 0; b < grid; ++b) {
    auto work = [t, b, slot, fast, accessor, identity, partials, fn](ExecContext&) {
      const Block& blk = t->block(b);
      const BlockStorage& st = blk.storage();
      double acc = identity;
      for_each_cell(blk.interior_box(), [&](const Index3& pos) {
        const std::size_t cell = blk.cell_index(pos);
        const double v = fast ? const_cast<BlockStorage&>(st).ref<double>(slot, cell)
                              : read_as_double(st, accessor.component, accessor.lane, cell);
        acc = (*fn)(acc, v);
      });
      (*partials)[b] = acc;
    };
    Node* n = make_node("R" + std::to_string(id) + "[" + std::to_string(b) + "]", default_kind_, NodeClass::Reduce,
                        std::move(work));
    n->op_id_ = id;
    n->partitions_ = {b};
    n->partition_grid_ = grid;
    for (Node* p : then ? narrowed(base, n->partitions_, grid) : base) add_edge(p, n);
    logical_.back().push_back(n);
    reducers.push_back(n);
  }

  ReductionResult* res = &result;
  auto finalize = [partials, fn, identity, res](ExecContext&) {
    double total = identity;
    for (double p : *partials) total = (*fn)(total, p);
    res->publish(total);
  };
  Node* f = make_node("F" + std::to_string(id), default_kind_, NodeClass::Reduce, std::move(finalize));
  f->op_id_ = id;
  for (Node* r : reducers) add_edge(r, f);
  open_level();
  logical_.back().push_back(f);
  return *this;
}

Graph& Graph::add_join(NodeClass cls, const std::string& name, Node::Work work, std::function<bool()> predicate) {
  check_mutable();
  std::vector<Node*> sinks;
  for (const auto& n : nodes_) {
    if (n->successors_.empty()) sinks.push_back(n.get());
  }
  std::vector<Node*> loop_roots;
  if (cls == NodeClass::Conditional) loop_roots = roots();
  const std::size_t body = nodes_.size() + 1;
  Node* j = make_node(name, default_kind_, cls, std::move(work));
  if (cls == NodeClass::Conditional) j->loop_body_size_ = body;
  j->predicate_ = std::move(predicate);
  j->loop_roots_ = std::move(loop_roots);
  for (Node* s : sinks) add_edge(s, j);
  open_level();
  logical_.back().push_back(j);
  return *this;
}

Graph& Graph::conditional(std::function<bool()> predicate) {
  check_mutable();
  if (nodes_.empty()) throw BuildError("conditional() needs a graph with at least one node");
  if (!predicate) throw BuildError("conditional() needs a predicate");
  return add_join(NodeClass::Conditional, "conditional", {}, std::move(predicate));
}

void Graph::add_dependency(const std::string& before, const std::string& after) {
  check_mutable();
  Node* a = find(before);
  Node* b = find(after);
  if (a == nullptr || b == nullptr) {
    throw BuildError("no node named '" + (a == nullptr ? before : after) + "'");
  }
  add_edge(a, b);
}

Graph& Graph::freeze() {
  if (frozen_) return *this;
  std::map<const Node*, std::int64_t> remaining;
  std::map<const Node*, std::size_t> depth;
  std::deque<Node*> ready;
  for (const auto& n : nodes_) {
    remaining[n.get()] = static_cast<std::int64_t>(n->predecessors_.size());
    if (n->predecessors_.empty()) {
      ready.push_back(n.get());
      depth[n.get()] = 0;
    }
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    Node* n = ready.front();
    ready.pop_front();
    ++visited;
    for (Node* s : n->successors_) {
      depth[s] = std::max(depth[s], depth[n] + 1);
      if (--remaining[s] == 0) ready.push_back(s);
    }
  }
  if (visited != nodes_.size()) throw BuildError("graph contains a dependency cycle");

  levels_.clear();
  for (const auto& n : nodes_) {
    n->level_ = depth[n.get()];
    n->initial_dependents_ = static_cast<std::int64_t>(n->predecessors_.size());
    n->dependents_.store(n->initial_dependents_, std::memory_order_relaxed);
    if (levels_.size() <= n->level_) levels_.resize(n->level_ + 1);
    levels_[n->level_].push_back(n.get());
  }
  frozen_ = true;
  return *this;
}

const std::vector<std::vector<Node*>>& Graph::levels() const {
  if (!frozen_) throw UsageError("graph levels are available after freeze()");
  return levels_;
}

Node* Graph::find(const std::string& name) const noexcept {
  for (const auto& n : nodes_) {
    if (n->name_ == name) return n.get();
  }
  return nullptr;
}

std::vector<Node*> Graph::nodes_of_class(NodeClass cls) const {
  std::vector<Node*> out;
  for (const auto& n : nodes_) {
    if (n->class_ == cls) out.push_back(n.get());
  }
  return out;
}

std::vector<Node*> Graph::roots() const {
  std::vector<Node*> out;
  for (const auto& n : nodes_) {
    if (n->predecessors_.empty()) out.push_back(n.get());
  }
  return out;
}

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string Graph::to_dot() const {
  std::map<const Node*, std::size_t> ids;
  for (std::size_t i = 0; i < nodes_.size(); ++i) ids[nodes_[i].get()] = i;
  std::ostringstream os;
  os << "digraph weft {\n";
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = *nodes_[i];
    const std::string name = n.name_.empty() ? "n" + std::to_string(i) : n.name_;
    os << "  n" << i << " [label=\"" << dot_escape(name) << "\\n" << to_string(n.class_) << " L" << n.level_
       << "\"";
    if (n.class_ == NodeClass::Transfer) os << " shape=box";
    if (n.kind_ == ExecutionKind::Device) os << " style=filled fillcolor=lightgrey";
    os << "];\n";
  }
  for (const auto& n : nodes_) {
    for (const Node* s : n->successors_) os << "  n" << ids[n.get()] << " -> n" << ids[s] << ";\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace weft
