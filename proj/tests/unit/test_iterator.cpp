#include "doctest.h"
#include "weft/errors.hpp"
#include "weft/iterator.hpp"

using namespace weft;

namespace {

IndexedIterator at(Tensor& t, std::size_t b, Index3 pos) {
  Block& blk = t.block(b);
  return IndexedIterator(blk, blk.storage(), pos, t.global_extents());
}

}  // namespace

TEST_SUITE("iterator") {
  TEST_CASE("central difference of i squared") {
    Tensor t(RecordSchema::scalar(), PartitionSpec{{1}}, 1, Extents{8});
    for (std::size_t i = 0; i < 8; ++i) t.set<double>({i, 0, 0}, static_cast<double>(i * i));
    auto it = at(t, 0, {3, 0, 0});
    CHECK(*it.offset(0, 1) - *it.offset(0, -1) == 12.0);
  }

  TEST_CASE("offset stays within the padding") {
    Tensor t(RecordSchema::scalar(), PartitionSpec{{2}}, 2, Extents{8});
    auto it = at(t, 0, {0, 0, 0});
    CHECK_NOTHROW(it.offset(0, -2));
    CHECK_THROWS_AS(it.offset(0, -3), IndexError);
    CHECK_NOTHROW(it.offset(0, 5));
    CHECK_THROWS_AS(it.offset(0, 6), IndexError);
    CHECK_THROWS_AS(it.offset(1, 1), IndexError);
  }

  TEST_CASE("valid_in_domain") {
    Tensor t(RecordSchema::scalar(), PartitionSpec{{2, 2}}, 1, Extents{8, 8});
    CHECK(at(t, 3, {0, 0, 0}).valid_in_domain());
    CHECK_FALSE(at(t, 3, {4, 0, 0}).valid_in_domain());
    CHECK_FALSE(at(t, 3, {0, -1, 0}).valid_in_domain());
  }

  TEST_CASE("global index adds the block origin") {
    Tensor t(RecordSchema::scalar(), PartitionSpec{{2}}, 0, Extents{16});
    CHECK(at(t, 1, {0, 0, 0}).global_index(0) == 8);
    CHECK(at(t, 1, {3, 0, 0}).global_index(0) == 11);
    CHECK(at(t, 0, {0, 0, 0}).global_size(0) == 16);
    static_assert(GlobalIndexable<IndexedIterator>);
    static_assert(!GlobalIndexable<BlockIterator>);
  }

  TEST_CASE("iterators address records in both layouts") {
    for (auto layout : {LayoutKind::Contiguous, LayoutKind::Strided}) {
      const RecordSchema s({scalar_of(ScalarKind::F64), vector_of(ScalarKind::F64, 2)}, layout);
      Tensor t(s, PartitionSpec{{1}}, 1, Extents{4, 4});
      auto it = at(t, 0, {2, 1, 0});
      it.ref(Accessor{1, 1}) = 5.0;
      CHECK(t.get<double>({2, 1, 0}, 1, 1) == 5.0);
      CHECK(it.offset(1, 1).ref<double>(2) == 0.0);
    }
  }

  TEST_CASE("dim loops") {
    int calls = 0;
    dim_loop(0, [&](std::size_t) { ++calls; });
    CHECK(calls == 0);
    std::size_t sum = 0;
    dim_loop(3, [&](std::size_t d) { sum += 1 + 0 * d; });
    CHECK(sum == 3);
    std::size_t dims = 0;
    unrolled_for<3>([&](auto d) { dims += decltype(d)::value; });
    CHECK(dims == 3);
  }
}
