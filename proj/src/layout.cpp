#include "weft/layout.hpp"

#include <algorithm>
#include <new>
#include <utility>

#include "weft/alloc.hpp"
#include "weft/errors.hpp"

namespace weft {

namespace {

constexpr std::size_t kBufferAlignment = 64;

std::byte* allocate_zeroed(std::size_t bytes) {
  auto* p = static_cast<std::byte*>(::operator new[](bytes == 0 ? 1 : bytes, std::align_val_t{kBufferAlignment}));
  std::memset(p, 0, bytes);
  return p;
}

void free_buffer(std::byte* p) noexcept { ::operator delete[](p, std::align_val_t{kBufferAlignment}); }

}  // namespace

const char* to_string(LayoutKind kind) noexcept {
  return kind == LayoutKind::Contiguous ? "aos" : "soa";
}

RecordSchema::RecordSchema(std::vector<ComponentDescriptor> components, LayoutKind layout)
    : components_(std::move(components)), layout_(layout) {
  if (components_.empty()) throw ConfigError("record schema needs at least one component");
  prefix_.reserve(components_.size());
  for (const auto& c : components_) {
    if (c.arity == 0) throw ConfigError("record component arity must be >= 1");
    prefix_.push_back(total_);
    total_ += c.arity;
    slot_width_ = std::max(slot_width_, scalar_width(c.scalar_kind));
  }
}

std::size_t RecordSchema::slot_index(std::size_t component, std::size_t lane) const {
  if (component >= components_.size()) {
    throw IndexError("component " + std::to_string(component) + " out of range (" +
                     std::to_string(components_.size()) + " components)");
  }
  if (lane >= components_[component].arity) {
    throw IndexError("lane " + std::to_string(lane) + " out of range for component " +
                     std::to_string(component) + " of arity " + std::to_string(components_[component].arity));
  }
  return prefix_[component] + lane;
}

std::size_t storage_extent(const RecordSchema& schema, std::size_t element_count) noexcept {
  return element_count * schema.total_scalars();
}

std::size_t component_offset(const RecordSchema& schema, std::size_t component, std::size_t lane,
                             std::size_t cell, std::size_t element_count) {
  const std::size_t slot = schema.slot_index(component, lane);
  if (cell >= element_count) {
    throw IndexError("cell " + std::to_string(cell) + " out of range (" + std::to_string(element_count) + " cells)");
  }
  if (schema.layout() == LayoutKind::Contiguous) return cell * schema.total_scalars() + slot;
  return slot * element_count + cell;
}

// BlockStorage ---------------------------------------------------------------

BlockStorage::BlockStorage(RecordSchema schema, std::size_t element_count)
    : schema_(std::move(schema)), element_count_(element_count) {
  data_ = allocate_zeroed(byte_size());
  owned_ = true;
  update_strides();
}

BlockStorage::BlockStorage(RecordSchema schema, std::size_t element_count, Arena& arena)
    : schema_(std::move(schema)), element_count_(element_count) {
  data_ = arena.allocate_bytes(byte_size(), kBufferAlignment);
  std::memset(data_, 0, byte_size());
  owned_ = false;
  update_strides();
}

BlockStorage::BlockStorage(const BlockStorage& other)
    : schema_(other.schema_), element_count_(other.element_count_) {
  data_ = allocate_zeroed(byte_size());
  owned_ = true;
  std::memcpy(data_, other.data_, byte_size());
  update_strides();
}

BlockStorage& BlockStorage::operator=(const BlockStorage& other) {
  if (this != &other) {
    BlockStorage copy(other);
    *this = std::move(copy);
  }
  return *this;
}

BlockStorage::BlockStorage(BlockStorage&& other) noexcept
    : schema_(std::move(other.schema_)),
      element_count_(std::exchange(other.element_count_, 0)),
      cell_stride_(other.cell_stride_),
      slot_stride_(other.slot_stride_),
      data_(std::exchange(other.data_, nullptr)),
      owned_(std::exchange(other.owned_, false)) {}

BlockStorage& BlockStorage::operator=(BlockStorage&& other) noexcept {
  if (this != &other) {
    release();
    schema_ = std::move(other.schema_);
    element_count_ = std::exchange(other.element_count_, 0);
    cell_stride_ = other.cell_stride_;
    slot_stride_ = other.slot_stride_;
    data_ = std::exchange(other.data_, nullptr);
    owned_ = std::exchange(other.owned_, false);
  }
  return *this;
}

BlockStorage::~BlockStorage() { release(); }

void BlockStorage::release() noexcept {
  if (owned_ && data_ != nullptr) free_buffer(data_);
  data_ = nullptr;
  owned_ = false;
}

void BlockStorage::update_strides() noexcept {
  if (schema_.layout() == LayoutKind::Contiguous) {
    cell_stride_ = schema_.total_scalars();
    slot_stride_ = 1;
  } else {
    cell_stride_ = 1;
    slot_stride_ = element_count_;
  }
}

const std::byte* BlockStorage::checked_address(std::size_t component, std::size_t lane, std::size_t cell,
                                               std::size_t value_width) const {
  const std::size_t slot = schema_.slot_index(component, lane);
  if (cell >= element_count_) {
    throw IndexError("cell " + std::to_string(cell) + " out of range (" + std::to_string(element_count_) +
                     " cells)");
  }
  if (value_width > schema_.slot_width()) {
    throw IndexError("value of " + std::to_string(value_width) + " bytes does not fit a " +
                     std::to_string(schema_.slot_width()) + "-byte slot");
  }
  return slot_address(slot, cell);
}

void BlockStorage::copy_cell_from(const BlockStorage& src, std::size_t src_cell, std::size_t dst_cell) noexcept {
  const std::size_t width = schema_.slot_width();
  const std::size_t slots = schema_.total_scalars();
  if (layout() == LayoutKind::Contiguous && src.layout() == LayoutKind::Contiguous) {
    std::memcpy(slot_address(0, dst_cell), src.slot_address(0, src_cell), width * slots);
    return;
  }
  for (std::size_t s = 0; s < slots; ++s) {
    std::memcpy(slot_address(s, dst_cell), src.slot_address(s, src_cell), width);
  }
}

RecordView BlockStorage::view(std::size_t cell) { return RecordView(*this, cell); }

void BlockStorage::swap_buffers(BlockStorage& other) noexcept {
  std::swap(data_, other.data_);
  std::swap(owned_, other.owned_);
}

void BlockStorage::fill_zero() noexcept {
  if (data_ != nullptr) std::memset(data_, 0, byte_size());
}

RecordView::RecordView(BlockStorage& storage, std::size_t cell) : storage_(&storage), cell_(cell) {
  if (cell >= storage.element_count()) {
    throw IndexError("record view cell " + std::to_string(cell) + " out of range (" +
                     std::to_string(storage.element_count()) + " cells)");
  }
}

BlockStorage convert_layout(const BlockStorage& src, LayoutKind target) {
  if (src.layout() == target) return src;
  BlockStorage out(src.schema().with_layout(target), src.element_count());
  for (std::size_t cell = 0; cell < src.element_count(); ++cell) out.copy_cell_from(src, cell, cell);
  return out;
}

}  // namespace weft
