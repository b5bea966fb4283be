#include <algorithm>
#include <atomic>
#include <string>

#include "doctest.h"
#include "weft/errors.hpp"
#include "weft/graph.hpp"

using namespace weft;

namespace {

std::int64_t deps(const Graph& g, const std::string& name) {
  const Node* n = g.find(name);
  REQUIRE(n != nullptr);
  return n->initial_dependents();
}

bool has_edge(const Graph& g, const std::string& from, const std::string& to) {
  const Node* a = g.find(from);
  const Node* b = g.find(to);
  REQUIRE(a != nullptr);
  REQUIRE(b != nullptr);
  return std::find(a->successors().begin(), a->successors().end(), b) != a->successors().end();
}

std::size_t edge_count(const Graph& g) {
  std::size_t n = 0;
  for (const auto& node : g.nodes()) n += node->successors().size();
  return n;
}

Tensor line(std::size_t blocks, std::size_t padding) {
  return Tensor(RecordSchema::scalar(), PartitionSpec{{blocks}}, padding, Extents{16});
}

}  // namespace

TEST_SUITE("graph") {
  TEST_CASE("emplace and then build levels") {
    Graph g;
    g.emplace(named("A", [] {}))
        .then(named("B", [] {}))
        .emplace(named("C", [] {}), named("D", [] {}))
        .then(named("E", [] {}));
    g.freeze();
    CHECK(deps(g, "A") == 0);
    CHECK(deps(g, "B") == 1);
    CHECK(deps(g, "C") == 1);
    CHECK(deps(g, "D") == 1);
    CHECK(deps(g, "E") == 3);
    CHECK(g.roots().size() == 1);
    CHECK(g.find("A")->level() == 0);
    CHECK(g.find("E")->level() == 2);
    CHECK(g.levels().size() == 3);
  }

  TEST_CASE("emplace on an empty graph has no dependents") {
    Graph g;
    g.emplace([] {});
    g.freeze();
    CHECK(g.nodes().front()->initial_dependents() == 0);
  }

  TEST_CASE("emplace after a two-node level depends on both") {
    Graph g;
    g.emplace([] {}, [] {}).then(named("X", [] {})).emplace(named("P", [] {}), named("Q", [] {}), named("R", [] {}));
    g.freeze();
    CHECK(deps(g, "P") == 2);
    CHECK(deps(g, "Q") == 2);
    CHECK(deps(g, "R") == 2);
  }

  TEST_CASE("split creates one node per block") {
    Tensor x = line(4, 0);
    Tensor y = line(4, 0);
    Graph g;
    g.split([](auto& a, auto& b) { *b += 2.0 * *a; }, x, y);
    g.freeze();
    CHECK(g.size() == 4);
    CHECK(g.roots().size() == 4);
  }

  TEST_CASE("split after two emplaced nodes depends on both") {
    Tensor x = line(4, 0);
    Graph g;
    g.emplace(named("A", [] {}), named("B", [] {})).then_split([](auto& it) { *it = 1.0; }, x);
    g.freeze();
    for (int b = 0; b < 4; ++b) {
      const std::string s = "S0[" + std::to_string(b) + "]";
      CHECK(deps(g, s) == 2);
      CHECK(has_edge(g, "A", s));
      CHECK(has_edge(g, "B", s));
    }
  }

  TEST_CASE("chained splits on the same tensor stay per partition") {
    Tensor x = line(4, 0);
    Graph g;
    g.split([](auto& it) { *it = 1.0; }, x).then_split([](auto& it) { *it += 1.0; }, x);
    g.freeze();
    for (int b = 0; b < 4; ++b) CHECK(deps(g, "S1[" + std::to_string(b) + "]") == 1);
    CHECK(has_edge(g, "S0[2]", "S1[2]"));
    CHECK_FALSE(has_edge(g, "S0[1]", "S1[2]"));
  }

  TEST_CASE("then_split after a single node depends on it") {
    Tensor x = line(4, 0);
    Graph g;
    g.emplace(named("X", [] {})).then_split([](auto& it) { *it = 0.0; }, x);
    g.freeze();
    for (int b = 0; b < 4; ++b) CHECK(has_edge(g, "X", "S0[" + std::to_string(b) + "]"));
  }

  TEST_CASE("concurrent padded access inserts six transfers for four blocks") {
    Tensor in = line(4, 1);
    Tensor out = line(4, 0);
    Graph g;
    g.split([](auto& a, auto& b) { *b = *a.offset(0, 1) - *a.offset(0, -1); }, concurrent_padded_access(in), out);
    g.freeze();
    CHECK(g.nodes_of_class(NodeClass::Transfer).size() == 6);
    CHECK(deps(g, "S0[0]") == 1);
    CHECK(deps(g, "S0[1]") == 2);
    CHECK(deps(g, "S0[2]") == 2);
    CHECK(deps(g, "S0[3]") == 1);
    CHECK(has_edge(g, "T0.d0L.0>1", "S0[1]"));
    CHECK(has_edge(g, "T0.d0H.1>0", "S0[0]"));
    CHECK(edge_count(g) == 6);
  }

  TEST_CASE("exclusive padded access also waits on outgoing transfers") {
    Tensor u = line(4, 1);
    Graph g;
    g.split([](auto& a) { *a = *a.offset(0, 1); }, exclusive_padded_access(u));
    g.freeze();
    CHECK(deps(g, "S0[0]") == 2);
    CHECK(deps(g, "S0[1]") == 4);
    CHECK(deps(g, "S0[2]") == 4);
    CHECK(deps(g, "S0[3]") == 2);
    CHECK(has_edge(g, "T0.d0L.1>2", "S0[1]"));
  }

  TEST_CASE("transfers after a split follow the producing blocks") {
    Tensor u = line(4, 1);
    Graph g;
    g.split([](auto& a) { *a = 1.0; }, u).then_split([](auto& a) { *a += *a.offset(0, -1); },
                                                   concurrent_padded_access(u));
    g.freeze();
    CHECK(deps(g, "T1.d0L.0>1") == 2);
    CHECK(has_edge(g, "S0[0]", "T1.d0L.0>1"));
    CHECK(has_edge(g, "S0[1]", "T1.d0L.0>1"));
    CHECK(deps(g, "S1[0]") == 2);
    CHECK(deps(g, "S1[1]") == 3);
  }

  TEST_CASE("two-dimensional transfers chain passes for corners") {
    Tensor t(RecordSchema::scalar(), PartitionSpec{{2, 2}}, 1, Extents{8, 8});
    Graph g;
    g.split([](auto& a) { *a = *a.offset(1, 1); }, concurrent_padded_access(t));
    g.freeze();
    const auto transfers = g.nodes_of_class(NodeClass::Transfer);
    CHECK(transfers.size() == 8);
    // the y-pass copy out of block 0 waits for x-pass data arriving in block 0
    CHECK(has_edge(g, "T0.d0H.1>0", "T0.d1L.0>2"));
    CHECK(deps(g, "S0[0]") == 2);
  }

  TEST_CASE("padding-free tensor with plain access has no transfers") {
    Tensor x = line(4, 0);
    Graph g;
    g.split([](auto& it) { *it = 1.0; }, x);
    g.freeze();
    CHECK(g.nodes_of_class(NodeClass::Transfer).empty());
    CHECK_THROWS_AS(Graph().split([](auto& it) { *it = 1.0; }, concurrent_padded_access(x)), BuildError);
  }

  TEST_CASE("mismatched block grids are rejected") {
    Tensor a = line(4, 0);
    Tensor b = line(2, 0);
    Graph g;
    CHECK_THROWS_AS(g.split([](auto& x, auto& y) { *x = *y; }, a, b), BuildError);
  }

  TEST_CASE("reduce adds per-block nodes and a finalize node") {
    Tensor x = line(4, 0);
    ReductionResult r;
    Graph g;
    g.split([](auto& it) { *it = 1.0; }, x).then_reduce(x, r, SumReducer{});
    g.freeze();
    CHECK(g.nodes_of_class(NodeClass::Reduce).size() == 5);
    CHECK(deps(g, "R1[2]") == 1);
    CHECK(deps(g, "F1") == 4);
  }

  TEST_CASE("reduction result state") {
    ReductionResult r;
    CHECK_FALSE(r.complete());
    CHECK_THROWS_AS(r.value(), UsageError);
    r.publish(3.0);
    CHECK(r.value() == 3.0);
    CHECK_THROWS_AS(r.publish(4.0), StaleResultError);
    CHECK(r.value_and_reset() == 3.0);
    CHECK_FALSE(r.complete());
    CHECK(MaxReducer{}(MaxReducer::identity(), 2.0) == 2.0);
    CHECK(MinReducer{}(5.0, 2.0) == 2.0);
  }

  TEST_CASE("sync joins divergent chains") {
    Graph g;
    g.emplace(named("a", [] {}), named("b", [] {})).then(named("c", [] {})).emplace(named("d", [] {}));
    g.sync();
    g.freeze();
    CHECK(g.nodes_of_class(NodeClass::Sync).size() == 1);
    CHECK(deps(g, "sync") == 2);
    Graph empty;
    empty.sync();
    empty.freeze();
    CHECK(deps(empty, "sync") == 0);
  }

  TEST_CASE("conditional records the loop body") {
    Graph g;
    g.emplace(named("a", [] {})).then(named("b", [] {}));
    g.conditional([] { return false; });
    g.freeze();
    const Node* c = g.find("conditional");
    REQUIRE(c != nullptr);
    CHECK(c->node_class() == NodeClass::Conditional);
    CHECK(c->loop_body_size() == 3);
    CHECK(c->loop_roots().size() == 1);
    CHECK(c->initial_dependents() == 1);
  }

  TEST_CASE("subgraph after a split connects per partition") {
    Tensor x = line(4, 0);
    Graph g;
    g.split([](auto& it) { *it = 1.0; }, x);
    Graph sub;
    sub.split([](auto& it) { *it *= 2.0; }, x);
    g.then(std::move(sub));
    g.freeze();
    CHECK(g.size() == 8);
    std::size_t second = 0;
    for (const auto& n : g.nodes()) {
      if (n->predecessors().empty()) continue;
      CHECK(n->initial_dependents() == 1);
      ++second;
    }
    CHECK(second == 4);
    CHECK(has_edge(g, "S0[3]", "S1[3]"));
  }

  TEST_CASE("emplaced subgraph shares the previous level") {
    Graph g;
    g.emplace(named("a", [] {})).then(named("b", [] {}));
    Graph sub;
    sub.emplace(named("s", [] {})).then(named("t", [] {}));
    g.emplace(std::move(sub));
    g.freeze();
    CHECK(has_edge(g, "a", "s"));
    CHECK(deps(g, "t") == 1);
  }

  TEST_CASE("self composition and frozen mutation are build errors") {
    Graph g;
    g.emplace([] {});
    CHECK_THROWS_AS(g.then(std::move(g)), BuildError);
    g.freeze();
    CHECK_THROWS_AS(g.emplace([] {}), BuildError);
    CHECK_THROWS_AS(g.then([] {}), BuildError);
  }

  TEST_CASE("explicit dependencies and cycle detection") {
    Graph g;
    g.emplace(named("a", [] {})).then(named("b", [] {}));
    g.add_dependency("b", "a");
    CHECK_THROWS_AS(g.freeze(), BuildError);
    Graph h;
    h.emplace(named("a", [] {}), named("b", [] {}));
    h.add_dependency("a", "b");
    h.freeze();
    CHECK(deps(h, "b") == 1);
    CHECK_THROWS_AS(Graph().add_dependency("x", "y"), BuildError);
  }

  TEST_CASE("levels need a frozen graph") {
    Graph g;
    g.emplace([] {});
    CHECK_THROWS_AS(g.levels(), UsageError);
  }

  TEST_CASE("dot output lists every node") {
    Tensor x = line(2, 1);
    Graph g;
    g.split([](auto& it) { *it = *it.offset(0, 1); }, concurrent_padded_access(x));
    g.freeze();
    const std::string dot = g.to_dot();
    CHECK(dot.rfind("digraph weft", 0) == 0);
    CHECK(dot.find("T0.d0L.0>1") != std::string::npos);
    CHECK(dot.find("->") != std::string::npos);
  }
}
