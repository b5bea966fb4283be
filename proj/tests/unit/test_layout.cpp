#include <cstring>
#include <random>
#include <set>

#include "doctest.h"
#include "weft/errors.hpp"
#include "weft/layout.hpp"

using namespace weft;

namespace {

RecordSchema f64x3_bool(LayoutKind layout) {
  return RecordSchema({vector_of(ScalarKind::F64, 3), scalar_of(ScalarKind::Bool)}, layout);
}

}  // namespace

TEST_SUITE("layout") {
  TEST_CASE("storage extent counts scalars per record") {
    CHECK(storage_extent(f64x3_bool(LayoutKind::Contiguous), 10) == 40);
    CHECK(storage_extent(f64x3_bool(LayoutKind::Strided), 0) == 0);
    const RecordSchema four({vector_of(ScalarKind::F64, 4)}, LayoutKind::Strided);
    CHECK(storage_extent(four, 250 * 250) == 250000);
  }

  TEST_CASE("component offsets for both layouts") {
    const RecordSchema aos({vector_of(ScalarKind::F64, 2)}, LayoutKind::Contiguous);
    const RecordSchema soa({vector_of(ScalarKind::F64, 2)}, LayoutKind::Strided);
    CHECK(component_offset(aos, 0, 1, 0, 8) == 1);
    CHECK(component_offset(soa, 0, 1, 0, 8) == 8);
    CHECK(component_offset(f64x3_bool(LayoutKind::Strided), 1, 0, 5, 100) == 305);
    CHECK(component_offset(f64x3_bool(LayoutKind::Contiguous), 1, 0, 5, 100) == 5 * 4 + 3);
  }

  TEST_CASE("offsets are distinct for every triple") {
    for (auto kind : {LayoutKind::Contiguous, LayoutKind::Strided}) {
      const RecordSchema s = f64x3_bool(kind);
      std::set<std::size_t> seen;
      const std::size_t n = 17;
      for (std::size_t cell = 0; cell < n; ++cell)
        for (std::size_t c = 0; c < s.component_count(); ++c)
          for (std::size_t l = 0; l < s.arity(c); ++l) seen.insert(component_offset(s, c, l, cell, n));
      CHECK(seen.size() == storage_extent(s, n));
      CHECK(*seen.rbegin() == storage_extent(s, n) - 1);
    }
  }

  TEST_CASE("out of range indices throw") {
    const RecordSchema s = f64x3_bool(LayoutKind::Contiguous);
    CHECK_THROWS_AS(component_offset(s, 2, 0, 0, 4), IndexError);
    CHECK_THROWS_AS(component_offset(s, 0, 3, 0, 4), IndexError);
    CHECK_THROWS_AS(component_offset(s, 0, 0, 4, 4), IndexError);
    BlockStorage b(s, 4);
    CHECK_THROWS_AS(b.get<double>(0, 0, 4), IndexError);
    CHECK_THROWS_AS(b.set<double>(1, 1, 0, 1.0), IndexError);
  }

  TEST_CASE("set then get round-trips through a view") {
    for (auto kind : {LayoutKind::Contiguous, LayoutKind::Strided}) {
      BlockStorage b(f64x3_bool(kind), 6);
      RecordView v = b.view(0);
      v.set<double>(0, 0, 3.5);
      CHECK(v.get<double>(0, 0) == 3.5);
      v.set<bool>(1, 0, true);
      CHECK(v.get<bool>(1) == true);
      CHECK(b.get<double>(0, 0, 1) == 0.0);
    }
  }

  TEST_CASE("narrow kinds share the widest slot width") {
    const RecordSchema s({scalar_of(ScalarKind::F64), scalar_of(ScalarKind::I32)}, LayoutKind::Strided);
    CHECK(s.slot_width() == 8);
    BlockStorage b(s, 3);
    b.set<std::int32_t>(1, 0, 2, -7);
    CHECK(b.get<std::int32_t>(1, 0, 2) == -7);
    CHECK(b.byte_size() == 3 * 2 * 8);
  }

  TEST_CASE("layout conversion is an involution") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    BlockStorage x(f64x3_bool(LayoutKind::Contiguous), 33);
    for (std::size_t cell = 0; cell < 33; ++cell) {
      for (std::size_t l = 0; l < 3; ++l) x.set<double>(0, l, cell, dist(rng));
      x.set<bool>(1, 0, cell, cell % 3 == 0);
    }
    const BlockStorage same = convert_layout(x, LayoutKind::Contiguous);
    CHECK(std::memcmp(same.bytes().data(), x.bytes().data(), x.byte_size()) == 0);
    const BlockStorage soa = convert_layout(x, LayoutKind::Strided);
    CHECK(soa.layout() == LayoutKind::Strided);
    for (std::size_t cell = 0; cell < 33; ++cell) {
      CHECK(soa.get<double>(0, 2, cell) == x.get<double>(0, 2, cell));
      CHECK(soa.get<bool>(1, 0, cell) == x.get<bool>(1, 0, cell));
    }
    const BlockStorage back = convert_layout(soa, LayoutKind::Contiguous);
    CHECK(std::memcmp(back.bytes().data(), x.bytes().data(), x.byte_size()) == 0);
  }

  TEST_CASE("swap_buffers exchanges contents without copying") {
    BlockStorage a(RecordSchema::scalar(), 4);
    BlockStorage b(RecordSchema::scalar(), 4);
    a.set<double>(0, 0, 0, 1.0);
    b.set<double>(0, 0, 0, 2.0);
    const std::byte* pa = a.bytes().data();
    a.swap_buffers(b);
    CHECK(a.get<double>(0, 0, 0) == 2.0);
    CHECK(b.bytes().data() == pa);
    a.swap_buffers(b);
    CHECK(a.get<double>(0, 0, 0) == 1.0);
  }
}
