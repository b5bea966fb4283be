#pragma once

// Polymorphic record storage: the same record schema can be laid out
// contiguously (AoS) or strided (SoA) inside a block buffer.

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace weft {

class Arena;

enum class ScalarKind : std::uint8_t { F64, F32, I64, I32, Bool };

constexpr std::size_t scalar_width(ScalarKind kind) noexcept {
  switch (kind) {
    case ScalarKind::F64:
    case ScalarKind::I64:
      return 8;
    case ScalarKind::F32:
    case ScalarKind::I32:
      return 4;
    case ScalarKind::Bool:
      return 1;
  }
  return 8;
}

/// Contiguous = array of structures, Strided = structure of arrays.
enum class LayoutKind : std::uint8_t { Contiguous, Strided };

const char* to_string(LayoutKind kind) noexcept;

struct ComponentDescriptor {
  ScalarKind scalar_kind = ScalarKind::F64;
  std::size_t arity = 1;

  friend bool operator==(const ComponentDescriptor&, const ComponentDescriptor&) = default;
};

/// A scalar component.
constexpr ComponentDescriptor scalar_of(ScalarKind kind) noexcept { return {kind, 1}; }
/// A component holding `n` values of one kind (the `Vector<T, N>` role).
constexpr ComponentDescriptor vector_of(ScalarKind kind, std::size_t n) noexcept { return {kind, n}; }

/// Ordered list of record components plus the layout kind.
///
/// Every scalar slot is stored at the widest width present in the schema, so
/// plane arithmetic is uniform; narrower kinds round-trip through the slot.
class RecordSchema {
 public:
  RecordSchema(std::vector<ComponentDescriptor> components, LayoutKind layout);
  RecordSchema(std::initializer_list<ComponentDescriptor> components, LayoutKind layout)
      : RecordSchema(std::vector<ComponentDescriptor>(components), layout) {}

  /// Single f64 component; the layout kind is irrelevant for one slot.
  static RecordSchema scalar(ScalarKind kind = ScalarKind::F64,
                             LayoutKind layout = LayoutKind::Contiguous) {
    return RecordSchema({scalar_of(kind)}, layout);
  }

  const std::vector<ComponentDescriptor>& components() const noexcept { return components_; }
  std::size_t component_count() const noexcept { return components_.size(); }
  std::size_t arity(std::size_t component) const { return components_.at(component).arity; }
  LayoutKind layout() const noexcept { return layout_; }
  std::size_t total_scalars() const noexcept { return total_; }
  /// Number of scalars preceding `component` within a record.
  std::size_t prefix(std::size_t component) const { return prefix_.at(component); }
  std::size_t slot_width() const noexcept { return slot_width_; }

  /// Flat slot index of (component, lane); throws IndexError when out of range.
  std::size_t slot_index(std::size_t component, std::size_t lane) const;

  RecordSchema with_layout(LayoutKind layout) const { return RecordSchema(components_, layout); }

  friend bool operator==(const RecordSchema& a, const RecordSchema& b) {
    return a.layout_ == b.layout_ && a.components_ == b.components_;
  }

 private:
  std::vector<ComponentDescriptor> components_;
  std::vector<std::size_t> prefix_;
  LayoutKind layout_;
  std::size_t total_ = 0;
  std::size_t slot_width_ = 1;
};

/// Scalar slots needed for `element_count` records; layout independent.
std::size_t storage_extent(const RecordSchema& schema, std::size_t element_count) noexcept;

/// Slot index of (component, lane) for `cell` in a buffer of `element_count`
/// records. Contiguous: cell * total + prefix + lane. Strided: the plane of
/// each scalar spans all `element_count` cells.
std::size_t component_offset(const RecordSchema& schema, std::size_t component, std::size_t lane,
                             std::size_t cell, std::size_t element_count);

/// Named (component, lane) pair, e.g. `constexpr Accessor density{0}`.
struct Accessor {
  std::uint32_t component = 0;
  std::uint32_t lane = 0;
};

class RecordView;

/// Raw scalar storage for the cells of one block.
class BlockStorage {
 public:
  BlockStorage() = default;
  /// Heap-owned, zero-filled buffer.
  BlockStorage(RecordSchema schema, std::size_t element_count);
  /// Buffer carved from `arena`; zero-filled, lifetime bound to the arena.
  BlockStorage(RecordSchema schema, std::size_t element_count, Arena& arena);

  BlockStorage(const BlockStorage& other);
  BlockStorage& operator=(const BlockStorage& other);
  BlockStorage(BlockStorage&& other) noexcept;
  BlockStorage& operator=(BlockStorage&& other) noexcept;
  ~BlockStorage();

  const RecordSchema& schema() const noexcept { return schema_; }
  LayoutKind layout() const noexcept { return schema_.layout(); }
  std::size_t element_count() const noexcept { return element_count_; }
  std::size_t slot_count() const noexcept { return element_count_ * schema_.total_scalars(); }
  std::size_t byte_size() const noexcept { return slot_count() * schema_.slot_width(); }

  std::span<std::byte> bytes() noexcept { return {data_, byte_size()}; }
  std::span<const std::byte> bytes() const noexcept { return {data_, byte_size()}; }

  /// Unchecked slot address for a flat slot index (see RecordSchema::slot_index).
  std::size_t offset_of(std::size_t slot, std::size_t cell) const noexcept {
    return cell * cell_stride_ + slot * slot_stride_;
  }
  std::byte* slot_address(std::size_t slot, std::size_t cell) noexcept {
    return data_ + offset_of(slot, cell) * schema_.slot_width();
  }
  const std::byte* slot_address(std::size_t slot, std::size_t cell) const noexcept {
    return data_ + offset_of(slot, cell) * schema_.slot_width();
  }

  /// Checked read of any scalar type that fits the slot.
  template <class T>
  T get(std::size_t component, std::size_t lane, std::size_t cell) const {
    static_assert(std::is_trivially_copyable_v<T>);
    const std::byte* p = checked_address(component, lane, cell, sizeof(T));
    T value;
    std::memcpy(&value, p, sizeof(T));
    return value;
  }

  /// Checked write; the unused tail of a wide slot is zeroed.
  template <class T>
  void set(std::size_t component, std::size_t lane, std::size_t cell, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::byte* p = const_cast<std::byte*>(checked_address(component, lane, cell, sizeof(T)));
    std::memset(p, 0, schema_.slot_width());
    std::memcpy(p, &value, sizeof(T));
  }

  /// Reference to a slot whose width equals sizeof(T) (e.g. double in an
  /// f64 schema). Unchecked: the hot path of kernels.
  template <class T>
  T& ref(std::size_t slot, std::size_t cell) noexcept {
    return *reinterpret_cast<T*>(slot_address(slot, cell));
  }
  template <class T>
  const T& ref(std::size_t slot, std::size_t cell) const noexcept {
    return *reinterpret_cast<const T*>(slot_address(slot, cell));
  }

  /// Copies every slot of `src_cell` in `src` into `dst_cell` of this storage.
  /// Schemas must have identical components (layouts may differ).
  void copy_cell_from(const BlockStorage& src, std::size_t src_cell, std::size_t dst_cell) noexcept;

  RecordView view(std::size_t cell);

  /// Exchanges buffers (and ownership) with `other`; no element is copied.
  void swap_buffers(BlockStorage& other) noexcept;

  void fill_zero() noexcept;

 private:
  const std::byte* checked_address(std::size_t component, std::size_t lane, std::size_t cell,
                                   std::size_t value_width) const;
  void update_strides() noexcept;
  void release() noexcept;

  RecordSchema schema_{{scalar_of(ScalarKind::F64)}, LayoutKind::Contiguous};
  std::size_t element_count_ = 0;
  std::size_t cell_stride_ = 1;
  std::size_t slot_stride_ = 0;
  std::byte* data_ = nullptr;
  bool owned_ = false;
};

/// One cell of a BlockStorage. Reads and writes only touch that cell.
class RecordView {
 public:
  RecordView(BlockStorage& storage, std::size_t cell);

  std::size_t cell() const noexcept { return cell_; }
  BlockStorage& storage() const noexcept { return *storage_; }

  template <class T>
  T get(std::size_t component, std::size_t lane = 0) const {
    return storage_->get<T>(component, lane, cell_);
  }
  template <class T>
  void set(std::size_t component, std::size_t lane, T value) const {
    storage_->set<T>(component, lane, cell_, value);
  }
  template <class T>
  T get(Accessor a) const {
    return get<T>(a.component, a.lane);
  }
  template <class T>
  void set(Accessor a, T value) const {
    set<T>(a.component, a.lane, value);
  }

 private:
  BlockStorage* storage_;
  std::size_t cell_;
};

/// Copy of `src` re-laid out as `target`. Converting back to the original
/// kind reproduces `src` bit for bit.
BlockStorage convert_layout(const BlockStorage& src, LayoutKind target);

}  // namespace weft
