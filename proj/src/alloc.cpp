#include "weft/alloc.hpp"

#include <bit>
#include <cstdint>
#include <string>

#include "weft/errors.hpp"

namespace weft {

Arena::Arena(std::size_t capacity)
    : base_(static_cast<std::byte*>(
          ::operator new[](capacity == 0 ? 1 : capacity, std::align_val_t{kBaseAlignment}))),
      capacity_(capacity) {}

std::size_t Arena::allocate(std::size_t size, std::size_t align) {
  if (align == 0 || !std::has_single_bit(align)) {
    throw ConfigError("arena alignment must be a power of two, got " + std::to_string(align));
  }
  const auto base = reinterpret_cast<std::uintptr_t>(base_.get());
  std::size_t current = cursor_.load(std::memory_order_relaxed);
  std::size_t aligned = 0;
  for (;;) {
    const std::uintptr_t address = base + current;
    aligned = static_cast<std::size_t>(((address + align - 1) & ~(std::uintptr_t{align} - 1)) - base);
    if (aligned > capacity_ || size > capacity_ - aligned) {
      throw ArenaExhausted("arena exhausted: requested " + std::to_string(size) + " bytes at offset " +
                           std::to_string(aligned) + " of " + std::to_string(capacity_));
    }
    if (cursor_.compare_exchange_weak(current, aligned + size, std::memory_order_acq_rel,
                                      std::memory_order_relaxed)) {
      return aligned;
    }
  }
}

MultiarchAllocator::MultiarchAllocator(std::size_t host_arenas, std::size_t device_arenas,
                                       std::size_t host_capacity, std::size_t device_capacity) {
  host_.reserve(host_arenas);
  for (std::size_t i = 0; i < host_arenas; ++i) host_.push_back(std::make_unique<Arena>(host_capacity));
  device_.reserve(device_arenas);
  for (std::size_t i = 0; i < device_arenas; ++i) device_.push_back(std::make_unique<Arena>(device_capacity));
}

Arena& MultiarchAllocator::host_allocator(std::size_t worker) {
  if (worker >= host_.size()) throw IndexError("no host arena for worker " + std::to_string(worker));
  return *host_[worker];
}

Arena& MultiarchAllocator::device_allocator(std::size_t device) {
  if (device >= device_.size()) throw IndexError("no arena for virtual device " + std::to_string(device));
  return *device_[device];
}

void MultiarchAllocator::reset_all() noexcept {
  for (auto& a : host_) a->reset();
  for (auto& a : device_) a->reset();
}

}  // namespace weft
