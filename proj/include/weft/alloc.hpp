#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <new>
#include <vector>

namespace weft {

/// Linear (bump) allocator over one fixed buffer.
///
/// Allocation is a single CAS on the cursor, so an arena may be shared by the
/// threads of one worker or one virtual device. Nothing is freed individually;
/// reset() rewinds the cursor and invalidates every outstanding allocation.
class Arena {
 public:
  static constexpr std::size_t kBaseAlignment = 64;

  explicit Arena(std::size_t capacity);

  Arena(const Arena&) = delete;
  Arena& operator=(const Arena&) = delete;
  Arena(Arena&&) = delete;
  Arena& operator=(Arena&&) = delete;

  /// Returns the byte offset of a block of `size` bytes aligned to `align`
  /// (a power of two). Throws ArenaExhausted when the block does not fit.
  std::size_t allocate(std::size_t size, std::size_t align = alignof(std::max_align_t));

  /// Same as allocate() but returns the address.
  std::byte* allocate_bytes(std::size_t size, std::size_t align = alignof(std::max_align_t)) {
    return base_.get() + allocate(size, align);
  }

  void reset() noexcept { cursor_.store(0, std::memory_order_release); }

  std::byte* data() noexcept { return base_.get(); }
  const std::byte* data() const noexcept { return base_.get(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t cursor() const noexcept { return cursor_.load(std::memory_order_acquire); }

 private:
  struct AlignedDelete {
    void operator()(std::byte* p) const noexcept {
      ::operator delete[](p, std::align_val_t{kBaseAlignment});
    }
  };

  std::unique_ptr<std::byte[], AlignedDelete> base_;
  std::size_t capacity_;
  std::atomic<std::size_t> cursor_{0};
};

/// Per-worker host arenas and per-virtual-device arenas.
class MultiarchAllocator {
 public:
  static constexpr std::size_t kDefaultHostCapacity = std::size_t{64} << 20;
  static constexpr std::size_t kDefaultDeviceCapacity = std::size_t{256} << 20;

  MultiarchAllocator(std::size_t host_arenas, std::size_t device_arenas,
                     std::size_t host_capacity = kDefaultHostCapacity,
                     std::size_t device_capacity = kDefaultDeviceCapacity);

  Arena& host_allocator(std::size_t worker);
  Arena& device_allocator(std::size_t device);

  std::size_t host_count() const noexcept { return host_.size(); }
  std::size_t device_count() const noexcept { return device_.size(); }

  void reset_all() noexcept;

 private:
  std::vector<std::unique_ptr<Arena>> host_;
  std::vector<std::unique_ptr<Arena>> device_;
};

}  // namespace weft
