#pragma once

// Layout-agnostic cursors over the padded cell space of one block.

#include <cstddef>
#include <string>
#include <type_traits>
#include <utility>

#include "weft/errors.hpp"
#include "weft/layout.hpp"
#include "weft/tensor.hpp"

namespace weft {

/// Cursor over one block. Dereferencing touches only the record at the
/// current position; offset() returns a displaced copy.
class BlockIterator {
 public:
  BlockIterator(const Block& block, BlockStorage& storage, const Index3& pos) noexcept
      : block_(&block), storage_(&storage), cell_(block.cell_index(pos)), pos_(pos) {}

  std::size_t dims() const noexcept { return block_->dims(); }

  /// Cursor displaced by `amount` cells along `dim`. Reaching further than
  /// the padding width from the interior throws IndexError.
  BlockIterator offset(std::size_t dim, std::ptrdiff_t amount) const {
    BlockIterator out = *this;
    out.move_checked(dim, amount);
    return out;
  }

  /// In-place unchecked move, used by the per-block execution loops.
  void shift(std::size_t dim, std::ptrdiff_t amount) noexcept {
    pos_[dim] += amount;
    cell_ = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(cell_) +
                                     amount * static_cast<std::ptrdiff_t>(block_->strides()[dim]));
  }

  /// Slot 0 of the record as a double (scalar tensors).
  double& operator*() const noexcept { return storage_->ref<double>(0, cell_); }

  /// Unchecked reference to a flat slot whose width equals sizeof(T).
  template <class T = double>
  T& ref(std::size_t slot) const noexcept {
    return storage_->ref<T>(slot, cell_);
  }
  template <class T = double>
  T& ref(Accessor a) const noexcept {
    return storage_->ref<T>(storage_->schema().prefix(a.component) + a.lane, cell_);
  }
  template <class T>
  T get(std::size_t component, std::size_t lane = 0) const {
    return storage_->get<T>(component, lane, cell_);
  }
  template <class T>
  void set(std::size_t component, std::size_t lane, T value) const {
    storage_->set<T>(component, lane, cell_, value);
  }

  RecordView record() const { return RecordView(*storage_, cell_); }

  /// Block-local interior position (negative or >= size(dim) in padding).
  std::ptrdiff_t index(std::size_t dim) const noexcept { return pos_[dim]; }
  const Index3& position() const noexcept { return pos_; }
  /// Interior size of the block along `dim`.
  std::size_t size(std::size_t dim) const noexcept { return block_->interior(dim); }
  std::size_t padding() const noexcept { return block_->padding(); }
  std::size_t cell() const noexcept { return cell_; }

  BlockStorage& storage() const noexcept { return *storage_; }
  const Block& block() const noexcept { return *block_; }

  /// True iff the position lies inside the interior in every dimension.
  bool valid_in_domain() const noexcept {
    for (std::size_t d = 0; d < kMaxDims; ++d) {
      if (pos_[d] < 0 || pos_[d] >= static_cast<std::ptrdiff_t>(block_->interior(d))) return false;
    }
    return true;
  }

 protected:
  void move_checked(std::size_t dim, std::ptrdiff_t amount) {
    if (dim >= block_->dims()) {
      throw IndexError("offset along dimension " + std::to_string(dim) + " of a " +
                       std::to_string(block_->dims()) + "-d block");
    }
    const std::ptrdiff_t target = pos_[dim] + amount;
    const auto pad = static_cast<std::ptrdiff_t>(block_->padding());
    const auto n = static_cast<std::ptrdiff_t>(block_->interior(dim));
    if (target < -pad || target >= n + pad) {
      throw IndexError("iterator offset " + std::to_string(amount) + " along dimension " + std::to_string(dim) +
                       " reaches beyond padding " + std::to_string(pad));
    }
    shift(dim, amount);
  }

  const Block* block_;
  BlockStorage* storage_;
  std::size_t cell_;
  Index3 pos_;
};

/// BlockIterator that also knows where its block sits in the global space.
class IndexedIterator : public BlockIterator {
 public:
  IndexedIterator(const Block& block, BlockStorage& storage, const Index3& pos, const Extents& global) noexcept
      : BlockIterator(block, storage, pos), global_(&global) {}

  IndexedIterator offset(std::size_t dim, std::ptrdiff_t amount) const {
    IndexedIterator out = *this;
    out.move_checked(dim, amount);
    return out;
  }

  /// Global index along `dim` (block origin + local position).
  std::ptrdiff_t global_index(std::size_t dim) const noexcept {
    return static_cast<std::ptrdiff_t>(block_->origin()[dim]) + pos_[dim];
  }
  std::size_t global_size(std::size_t dim) const noexcept { return (*global_)[dim]; }
  const Size3& block_coords() const noexcept { return block_->coords(); }

 private:
  const Extents* global_;
};

template <class It>
concept GlobalIndexable = requires(const It& it) {
  { it.global_index(std::size_t{0}) };
};

/// Calls body(dim) for dim = 0 .. count-1, in order.
template <class F>
void dim_loop(std::size_t count, F&& body) {
  for (std::size_t d = 0; d < count; ++d) body(d);
}

/// Compile-time unrolled dim_loop; body receives std::integral_constant.
template <std::size_t N, class F>
constexpr void unrolled_for(F&& body) {
  [&]<std::size_t... I>(std::index_sequence<I...>) {
    (body(std::integral_constant<std::size_t, I>{}), ...);
  }(std::make_index_sequence<N>{});
}

}  // namespace weft
