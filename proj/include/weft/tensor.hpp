#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "weft/layout.hpp"

namespace weft {

class MultiarchAllocator;

inline constexpr std::size_t kMaxDims = 3;

using Index3 = std::array<std::ptrdiff_t, kMaxDims>;
using Size3 = std::array<std::size_t, kMaxDims>;

/// Per-dimension cell counts of a 1-3 dimensional space.
class Extents {
 public:
  Extents() = default;
  Extents(std::initializer_list<std::size_t> sizes);
  explicit Extents(const std::vector<std::size_t>& sizes);

  std::size_t dims() const noexcept { return dims_; }
  /// Size of `dim`; dimensions past dims() report 1.
  std::size_t operator[](std::size_t dim) const noexcept { return dim < kMaxDims ? sizes_[dim] : 1; }
  std::size_t count() const noexcept { return sizes_[0] * sizes_[1] * sizes_[2]; }
  const Size3& sizes() const noexcept { return sizes_; }
  std::string to_string(char sep = ',') const;

  friend bool operator==(const Extents&, const Extents&) = default;

 private:
  Size3 sizes_{1, 1, 1};
  std::size_t dims_ = 0;
};

/// Partitions (virtual devices) and sub-partitions per dimension. Missing
/// trailing entries default to 1.
struct PartitionSpec {
  std::vector<std::size_t> partitions{1};
  std::vector<std::size_t> subpartitions{};

  std::size_t partitions_in(std::size_t dim) const noexcept {
    return dim < partitions.size() ? partitions[dim] : 1;
  }
  std::size_t subpartitions_in(std::size_t dim) const noexcept {
    return dim < subpartitions.size() ? subpartitions[dim] : 1;
  }
  std::size_t blocks_in(std::size_t dim) const noexcept { return partitions_in(dim) * subpartitions_in(dim); }

  friend bool operator==(const PartitionSpec& a, const PartitionSpec& b);
};

/// Half-open cell box in block-local coordinates, where 0 is the first
/// interior cell and padding cells have negative or >= interior indices.
struct Box {
  Index3 lo{0, 0, 0};
  Index3 hi{1, 1, 1};

  std::size_t count() const noexcept;
  friend bool operator==(const Box&, const Box&) = default;
};

enum class Face : std::uint8_t { Low, High };

/// Copy of an interior strip of `src_block` into the padding of `dst_block`.
/// `face` is the face of the destination block that receives the data and
/// `dim` the axis crossed. Edges along dim d form transfer pass d.
struct TransferEdge {
  std::size_t src_block = 0;
  std::size_t dst_block = 0;
  std::size_t dim = 0;
  Face face = Face::Low;
  Box src_region;
  Box dst_region;
};

/// One partition (or sub-partition) of a tensor.
class Block {
 public:
  Block(const RecordSchema& schema, std::size_t dims, const Size3& interior, std::size_t padding,
        std::size_t device_id, const Size3& coords, const Size3& origin, MultiarchAllocator* allocator);

  std::size_t dims() const noexcept { return dims_; }
  const Size3& interior() const noexcept { return interior_; }
  std::size_t interior(std::size_t dim) const noexcept { return interior_[dim]; }
  std::size_t padding() const noexcept { return padding_; }
  /// Padding along `dim`; zero for dimensions the tensor does not have.
  std::size_t padding_in(std::size_t dim) const noexcept { return dim < dims_ ? padding_ : 0; }
  std::size_t padded(std::size_t dim) const noexcept { return interior_[dim] + 2 * padding_in(dim); }
  std::size_t device_id() const noexcept { return device_id_; }
  const Size3& coords() const noexcept { return coords_; }
  /// Global index of interior cell 0 along each dimension.
  const Size3& origin() const noexcept { return origin_; }
  /// Linear-index step for a unit move along each dimension.
  const Size3& strides() const noexcept { return strides_; }

  /// Linear cell index for block-local coordinates (padding included).
  std::size_t cell_index(const Index3& pos) const noexcept {
    return static_cast<std::size_t>((pos[0] + static_cast<std::ptrdiff_t>(padding_in(0))) +
                                    (pos[1] + static_cast<std::ptrdiff_t>(padding_in(1))) *
                                        static_cast<std::ptrdiff_t>(strides_[1]) +
                                    (pos[2] + static_cast<std::ptrdiff_t>(padding_in(2))) *
                                        static_cast<std::ptrdiff_t>(strides_[2]));
  }

  Box interior_box() const noexcept;
  Box padded_box() const noexcept;

  BlockStorage& storage() noexcept { return storage_; }
  const BlockStorage& storage() const noexcept { return storage_; }

 private:
  std::size_t dims_;
  Size3 interior_;
  std::size_t padding_;
  std::size_t device_id_;
  Size3 coords_;
  Size3 origin_;
  Size3 strides_;
  BlockStorage storage_;
};

/// How padding on the global domain faces is filled.
struct BoundaryKind {
  enum class Kind : std::uint8_t { Constant, FirstOrderExtrapolation, Clamp };

  Kind kind = Kind::Clamp;
  /// Constant: one value per (component, lane), in slot order.
  std::vector<double> values{};

  static BoundaryKind constant(std::vector<double> per_slot_values) {
    return {Kind::Constant, std::move(per_slot_values)};
  }
  static BoundaryKind clamp() { return {Kind::Clamp, {}}; }
  static BoundaryKind first_order() { return {Kind::FirstOrderExtrapolation, {}}; }
};

/// N-dimensional data space split into blocks over virtual devices.
class Tensor {
 public:
  Tensor(RecordSchema schema, PartitionSpec spec, std::size_t padding, Extents extents,
         MultiarchAllocator* allocator = nullptr);

  Tensor(const Tensor&) = delete;
  Tensor& operator=(const Tensor&) = delete;
  Tensor(Tensor&&) noexcept = default;
  Tensor& operator=(Tensor&&) noexcept = default;

  std::size_t dims() const noexcept { return extents_.dims(); }
  const Extents& global_extents() const noexcept { return extents_; }
  std::size_t padding() const noexcept { return padding_; }
  const PartitionSpec& spec() const noexcept { return spec_; }
  const RecordSchema& schema() const noexcept { return schema_; }

  std::size_t block_count() const noexcept { return blocks_.size(); }
  const Size3& block_grid() const noexcept { return grid_; }
  Block& block(std::size_t b) { return blocks_.at(b); }
  const Block& block(std::size_t b) const { return blocks_.at(b); }
  std::vector<Block>& blocks() noexcept { return blocks_; }
  const std::vector<Block>& blocks() const noexcept { return blocks_; }

  std::size_t block_index(const Size3& coords) const noexcept {
    return coords[0] + grid_[0] * (coords[1] + grid_[1] * coords[2]);
  }
  /// Neighbour across `face` of `dim`, if that face is interior to the domain.
  std::optional<std::size_t> neighbor(std::size_t b, std::size_t dim, Face face) const;
  /// True when `face` of block `b` along `dim` lies on the global boundary.
  bool on_domain_face(std::size_t b, std::size_t dim, Face face) const;

  /// Number of distinct virtual devices used by the blocks.
  std::size_t device_count() const noexcept;

  /// Block and cell holding a global interior coordinate.
  std::pair<std::size_t, std::size_t> locate(const Size3& global) const;

  template <class T>
  T get(const Size3& global, std::size_t component = 0, std::size_t lane = 0) const {
    auto [b, cell] = locate(global);
    return blocks_[b].storage().get<T>(component, lane, cell);
  }
  template <class T>
  void set(const Size3& global, T value, std::size_t component = 0, std::size_t lane = 0) {
    auto [b, cell] = locate(global);
    blocks_[b].storage().set<T>(component, lane, cell, value);
  }

  /// Recreates all blocks for new extents; contents are not preserved.
  void resize(Extents extents);

 private:
  void build(MultiarchAllocator* allocator);

  RecordSchema schema_;
  PartitionSpec spec_;
  std::size_t padding_;
  Extents extents_;
  Size3 grid_{1, 1, 1};
  MultiarchAllocator* allocator_;
  std::vector<Block> blocks_;
};

inline Tensor create_tensor(RecordSchema schema, PartitionSpec spec, std::size_t padding, Extents extents,
                            MultiarchAllocator* allocator = nullptr) {
  return Tensor(std::move(schema), std::move(spec), padding, extents, allocator);
}

/// Calls fn(pos) for every cell of `box`, dimension 0 fastest.
template <class F>
void for_each_cell(const Box& box, F&& fn) {
  for (std::ptrdiff_t z = box.lo[2]; z < box.hi[2]; ++z)
    for (std::ptrdiff_t y = box.lo[1]; y < box.hi[1]; ++y)
      for (std::ptrdiff_t x = box.lo[0]; x < box.hi[0]; ++x) fn(Index3{x, y, z});
}

/// Padding transfers between neighbouring blocks, ordered by pass (axis).
/// Pass d strips span the full padded range of axes < d, and for axes > d the
/// interior plus any domain-face padding, so running the passes in order also
/// fills corner padding.
std::vector<TransferEdge> halo_plan(const Tensor& tensor);

void execute_transfer(Tensor& tensor, const TransferEdge& edge);

/// Runs every edge of halo_plan() in pass order.
void exchange_halo(Tensor& tensor);

/// Fills padding on global-domain faces of block `b` along `dim` only.
void load_block_boundary(Tensor& tensor, std::size_t b, const BoundaryKind& kind, std::size_t dim);
/// Fills padding on all global-domain faces of block `b`, axis by axis.
void load_block_boundary(Tensor& tensor, std::size_t b, const BoundaryKind& kind);
/// Fills padding on all global-domain faces of every block.
void load_boundary(Tensor& tensor, const BoundaryKind& kind);

/// Boundary loading and halo exchange interleaved axis by axis, which
/// reproduces the padding a single-block tensor would hold (corners included).
void refresh_padding(Tensor& tensor, const BoundaryKind& kind);

/// Exchanges the block buffers of two identically shaped tensors.
void swap(Tensor& a, Tensor& b);

/// Sets (component, lane) of every cell (padding included) to `value`.
void fill(Tensor& tensor, double value, std::size_t component = 0, std::size_t lane = 0);

/// Reads any scalar slot as double.
double read_as_double(const BlockStorage& storage, std::size_t component, std::size_t lane, std::size_t cell);
/// Writes a double into a slot, converting to the component's scalar kind.
void write_from_double(BlockStorage& storage, std::size_t component, std::size_t lane, std::size_t cell,
                       double value);

/// Global interior values of (component, lane), dimension 0 fastest.
std::vector<double> gather_field(const Tensor& tensor, std::size_t component = 0, std::size_t lane = 0);

struct FieldData {
  Extents extents;
  std::vector<double> values;
};

/// CSV dump: `# extents: n0[,n1[,n2]]`, then one line per row along axis 0
/// with 17 significant digits.
void dump_field(const Tensor& tensor, std::size_t component, std::size_t lane, const std::filesystem::path& path);
void write_field(const FieldData& field, const std::filesystem::path& path);
FieldData read_field(const std::filesystem::path& path);

namespace testing {
/// When set, execute_transfer skips the last cell of every strip. Used only by
/// the self-test to prove that its checks detect a broken transfer.
void set_transfer_fault(bool enabled) noexcept;
bool transfer_fault() noexcept;
}  // namespace testing

}  // namespace weft
