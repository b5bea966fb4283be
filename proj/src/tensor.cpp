#include "weft/tensor.hpp"

#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "weft/alloc.hpp"
#include "weft/errors.hpp"

namespace weft {

namespace {

std::atomic<bool> g_transfer_fault{false};

std::size_t checked_dims(std::size_t n) {
  if (n < 1 || n > kMaxDims) throw ConfigError("tensors have 1 to 3 dimensions, got " + std::to_string(n));
  return n;
}

}  // namespace

namespace testing {
void set_transfer_fault(bool enabled) noexcept { g_transfer_fault.store(enabled); }
bool transfer_fault() noexcept { return g_transfer_fault.load(); }
}  // namespace testing

// Extents --------------------------------------------------------------------

Extents::Extents(std::initializer_list<std::size_t> sizes) : Extents(std::vector<std::size_t>(sizes)) {}

Extents::Extents(const std::vector<std::size_t>& sizes) : dims_(checked_dims(sizes.size())) {
  for (std::size_t d = 0; d < dims_; ++d) {
    if (sizes[d] < 1) throw ConfigError("every extent must be >= 1");
    sizes_[d] = sizes[d];
  }
}

std::string Extents::to_string(char sep) const {
  std::string out;
  for (std::size_t d = 0; d < dims_; ++d) {
    if (d > 0) out += sep;
    out += std::to_string(sizes_[d]);
  }
  return out;
}

bool operator==(const PartitionSpec& a, const PartitionSpec& b) {
  for (std::size_t d = 0; d < kMaxDims; ++d) {
    if (a.partitions_in(d) != b.partitions_in(d) || a.subpartitions_in(d) != b.subpartitions_in(d)) return false;
  }
  return true;
}

std::size_t Box::count() const noexcept {
  std::size_t n = 1;
  for (std::size_t d = 0; d < kMaxDims; ++d) n *= hi[d] > lo[d] ? static_cast<std::size_t>(hi[d] - lo[d]) : 0;
  return n;
}

// Block ----------------------------------------------------------------------

Block::Block(const RecordSchema& schema, std::size_t dims, const Size3& interior, std::size_t padding,
             std::size_t device_id, const Size3& coords, const Size3& origin, MultiarchAllocator* allocator)
    : dims_(dims), interior_(interior), padding_(padding), device_id_(device_id), coords_(coords), origin_(origin) {
  strides_ = {1, padded(0), padded(0) * padded(1)};
  const std::size_t cells = padded(0) * padded(1) * padded(2);
  storage_ = allocator != nullptr ? BlockStorage(schema, cells, allocator->device_allocator(device_id))
                                  : BlockStorage(schema, cells);
}

Box Block::interior_box() const noexcept {
  Box box;
  for (std::size_t d = 0; d < kMaxDims; ++d) box.hi[d] = static_cast<std::ptrdiff_t>(interior_[d]);
  return box;
}

Box Block::padded_box() const noexcept {
  Box box;
  for (std::size_t d = 0; d < kMaxDims; ++d) {
    const auto p = static_cast<std::ptrdiff_t>(padding_in(d));
    box.lo[d] = -p;
    box.hi[d] = static_cast<std::ptrdiff_t>(interior_[d]) + p;
  }
  return box;
}

// Tensor ---------------------------------------------------------------------

Tensor::Tensor(RecordSchema schema, PartitionSpec spec, std::size_t padding, Extents extents,
               MultiarchAllocator* allocator)
    : schema_(std::move(schema)), spec_(std::move(spec)), padding_(padding), extents_(extents), allocator_(allocator) {
  build(allocator_);
}

void Tensor::resize(Extents extents) {
  blocks_.clear();
  extents_ = extents;
  build(allocator_);
}

void Tensor::build(MultiarchAllocator* allocator) {
  const std::size_t dims = extents_.dims();
  if (dims == 0) throw ConfigError("tensor extents are empty");
  if (spec_.partitions.size() > dims || spec_.subpartitions.size() > dims) {
    throw ConfigError("partition spec has more entries than the tensor has dimensions");
  }
  Size3 interior{1, 1, 1};
  Size3 parts{1, 1, 1};
  for (std::size_t d = 0; d < kMaxDims; ++d) {
    if (spec_.partitions_in(d) < 1 || spec_.subpartitions_in(d) < 1) {
      throw ConfigError("partition and sub-partition counts must be >= 1");
    }
    grid_[d] = spec_.blocks_in(d);
    parts[d] = spec_.partitions_in(d);
    if (extents_[d] % grid_[d] != 0) {
      throw ConfigError("extent " + std::to_string(extents_[d]) + " in dimension " + std::to_string(d) +
                        " is not divisible by " + std::to_string(grid_[d]) + " blocks");
    }
    interior[d] = extents_[d] / grid_[d];
    if (d < dims && grid_[d] > 1 && interior[d] < padding_) {
      throw ConfigError("block interior " + std::to_string(interior[d]) + " in dimension " + std::to_string(d) +
                        " is narrower than the padding " + std::to_string(padding_));
    }
  }
  blocks_.reserve(grid_[0] * grid_[1] * grid_[2]);
  for (std::size_t bz = 0; bz < grid_[2]; ++bz) {
    for (std::size_t by = 0; by < grid_[1]; ++by) {
      for (std::size_t bx = 0; bx < grid_[0]; ++bx) {
        const Size3 coords{bx, by, bz};
        Size3 origin{};
        Size3 pcoord{};
        for (std::size_t d = 0; d < kMaxDims; ++d) {
          origin[d] = coords[d] * interior[d];
          pcoord[d] = coords[d] / spec_.subpartitions_in(d);
        }
        const std::size_t device = pcoord[0] + parts[0] * (pcoord[1] + parts[1] * pcoord[2]);
        blocks_.emplace_back(schema_, dims, interior, padding_, device, coords, origin, allocator);
      }
    }
  }
}

std::optional<std::size_t> Tensor::neighbor(std::size_t b, std::size_t dim, Face face) const {
  Size3 coords = blocks_.at(b).coords();
  if (face == Face::Low) {
    if (coords[dim] == 0) return std::nullopt;
    --coords[dim];
  } else {
    if (coords[dim] + 1 >= grid_[dim]) return std::nullopt;
    ++coords[dim];
  }
  return block_index(coords);
}

bool Tensor::on_domain_face(std::size_t b, std::size_t dim, Face face) const {
  return dim < dims() && !neighbor(b, dim, face).has_value();
}

std::size_t Tensor::device_count() const noexcept {
  return spec_.partitions_in(0) * spec_.partitions_in(1) * spec_.partitions_in(2);
}

std::pair<std::size_t, std::size_t> Tensor::locate(const Size3& global) const {
  Size3 coords{};
  Index3 local{};
  for (std::size_t d = 0; d < kMaxDims; ++d) {
    if (global[d] >= extents_[d]) throw IndexError("global index out of range in dimension " + std::to_string(d));
    const std::size_t interior = extents_[d] / grid_[d];
    coords[d] = global[d] / interior;
    local[d] = static_cast<std::ptrdiff_t>(global[d] % interior);
  }
  const std::size_t b = block_index(coords);
  return {b, blocks_[b].cell_index(local)};
}

// Halo -----------------------------------------------------------------------

std::vector<TransferEdge> halo_plan(const Tensor& tensor) {
  std::vector<TransferEdge> plan;
  const auto p = static_cast<std::ptrdiff_t>(tensor.padding());
  if (p == 0) return plan;
  for (std::size_t dim = 0; dim < tensor.dims(); ++dim) {
    for (std::size_t b = 0; b < tensor.block_count(); ++b) {
      const Block& dst = tensor.block(b);
      for (Face face : {Face::Low, Face::High}) {
        auto src = tensor.neighbor(b, dim, face);
        if (!src) continue;
        const Block& sb = tensor.block(*src);
        TransferEdge edge{*src, b, dim, face, {}, {}};
        for (std::size_t e = 0; e < kMaxDims; ++e) {
          const auto n = static_cast<std::ptrdiff_t>(dst.interior(e));
          const auto pe = static_cast<std::ptrdiff_t>(dst.padding_in(e));
          if (e == dim) continue;
          // Earlier passes have filled the padding of lower axes already.
          // Higher axes: only domain-face padding, which no later pass
          // writes; interior-face corners arrive with the later pass.
          const bool lo_face = e < dim || (pe > 0 && tensor.on_domain_face(b, e, Face::Low));
          const bool hi_face = e < dim || (pe > 0 && tensor.on_domain_face(b, e, Face::High));
          edge.dst_region.lo[e] = lo_face ? -pe : 0;
          edge.dst_region.hi[e] = hi_face ? n + pe : n;
          edge.src_region.lo[e] = edge.dst_region.lo[e];
          edge.src_region.hi[e] = edge.dst_region.hi[e];
        }
        const auto n_dst = static_cast<std::ptrdiff_t>(dst.interior(dim));
        const auto n_src = static_cast<std::ptrdiff_t>(sb.interior(dim));
        if (face == Face::Low) {
          edge.dst_region.lo[dim] = -p;
          edge.dst_region.hi[dim] = 0;
          edge.src_region.lo[dim] = n_src - p;
          edge.src_region.hi[dim] = n_src;
        } else {
          edge.dst_region.lo[dim] = n_dst;
          edge.dst_region.hi[dim] = n_dst + p;
          edge.src_region.lo[dim] = 0;
          edge.src_region.hi[dim] = p;
        }
        plan.push_back(edge);
      }
    }
  }
  return plan;
}

void execute_transfer(Tensor& tensor, const TransferEdge& edge) {
  const Block& src = tensor.block(edge.src_block);
  Block& dst = tensor.block(edge.dst_block);
  const Index3 shift{edge.src_region.lo[0] - edge.dst_region.lo[0], edge.src_region.lo[1] - edge.dst_region.lo[1],
                     edge.src_region.lo[2] - edge.dst_region.lo[2]};
  const bool fault = g_transfer_fault.load(std::memory_order_relaxed);
  const Index3 last{edge.dst_region.hi[0] - 1, edge.dst_region.hi[1] - 1, edge.dst_region.hi[2] - 1};
  for_each_cell(edge.dst_region, [&](const Index3& pos) {
    if (fault && pos == last) return;
    const Index3 from{pos[0] + shift[0], pos[1] + shift[1], pos[2] + shift[2]};
    dst.storage().copy_cell_from(src.storage(), src.cell_index(from), dst.cell_index(pos));
  });
}

void exchange_halo(Tensor& tensor) {
  for (const auto& edge : halo_plan(tensor)) execute_transfer(tensor, edge);
}

// Boundaries -----------------------------------------------------------------

double read_as_double(const BlockStorage& storage, std::size_t component, std::size_t lane, std::size_t cell) {
  switch (storage.schema().components().at(component).scalar_kind) {
    case ScalarKind::F64:
      return storage.get<double>(component, lane, cell);
    case ScalarKind::F32:
      return storage.get<float>(component, lane, cell);
    case ScalarKind::I64:
      return static_cast<double>(storage.get<std::int64_t>(component, lane, cell));
    case ScalarKind::I32:
      return storage.get<std::int32_t>(component, lane, cell);
    case ScalarKind::Bool:
      return storage.get<bool>(component, lane, cell) ? 1.0 : 0.0;
  }
  return 0.0;
}

void write_from_double(BlockStorage& storage, std::size_t component, std::size_t lane, std::size_t cell,
                       double value) {
  switch (storage.schema().components().at(component).scalar_kind) {
    case ScalarKind::F64:
      storage.set<double>(component, lane, cell, value);
      break;
    case ScalarKind::F32:
      storage.set<float>(component, lane, cell, static_cast<float>(value));
      break;
    case ScalarKind::I64:
      storage.set<std::int64_t>(component, lane, cell, static_cast<std::int64_t>(value));
      break;
    case ScalarKind::I32:
      storage.set<std::int32_t>(component, lane, cell, static_cast<std::int32_t>(value));
      break;
    case ScalarKind::Bool:
      storage.set<bool>(component, lane, cell, value != 0.0);
      break;
  }
}

namespace {

bool is_floating(ScalarKind kind) { return kind == ScalarKind::F64 || kind == ScalarKind::F32; }

void fill_face(Tensor& tensor, std::size_t b, const BoundaryKind& kind, std::size_t dim, Face face) {
  Block& block = tensor.block(b);
  BlockStorage& storage = block.storage();
  const RecordSchema& schema = tensor.schema();
  const auto p = static_cast<std::ptrdiff_t>(tensor.padding());
  const auto n = static_cast<std::ptrdiff_t>(block.interior(dim));

  if (kind.kind == BoundaryKind::Kind::Constant && kind.values.size() != schema.total_scalars()) {
    throw ConfigError("constant boundary needs " + std::to_string(schema.total_scalars()) + " values, got " +
                      std::to_string(kind.values.size()));
  }

  Box face_box;
  for (std::size_t e = 0; e < kMaxDims; ++e) {
    const auto ne = static_cast<std::ptrdiff_t>(block.interior(e));
    const auto pe = static_cast<std::ptrdiff_t>(block.padding_in(e));
    face_box.lo[e] = e < dim ? -pe : 0;
    face_box.hi[e] = e < dim ? ne + pe : ne;
  }
  face_box.lo[dim] = face == Face::Low ? -p : n;
  face_box.hi[dim] = face == Face::Low ? 0 : n + p;

  const std::ptrdiff_t edge = face == Face::Low ? 0 : n - 1;
  const std::ptrdiff_t inward = face == Face::Low ? 1 : -1;

  for_each_cell(face_box, [&](const Index3& pos) {
    const std::size_t cell = block.cell_index(pos);
    Index3 near = pos;
    near[dim] = edge;
    const std::size_t near_cell = block.cell_index(near);
    switch (kind.kind) {
      case BoundaryKind::Kind::Constant:
        for (std::size_t c = 0; c < schema.component_count(); ++c)
          for (std::size_t l = 0; l < schema.arity(c); ++l)
            write_from_double(storage, c, l, cell, kind.values[schema.prefix(c) + l]);
        break;
      case BoundaryKind::Kind::Clamp:
        storage.copy_cell_from(storage, near_cell, cell);
        break;
      case BoundaryKind::Kind::FirstOrderExtrapolation: {
        storage.copy_cell_from(storage, near_cell, cell);
        if (n < 2) break;
        Index3 next = near;
        next[dim] = edge + inward;
        const std::size_t next_cell = block.cell_index(next);
        const double k = static_cast<double>(face == Face::Low ? -pos[dim] : pos[dim] - (n - 1));
        for (std::size_t c = 0; c < schema.component_count(); ++c) {
          if (!is_floating(schema.components()[c].scalar_kind)) continue;
          for (std::size_t l = 0; l < schema.arity(c); ++l) {
            const double a = read_as_double(storage, c, l, near_cell);
            const double bval = read_as_double(storage, c, l, next_cell);
            write_from_double(storage, c, l, cell, a + k * (a - bval));
          }
        }
        break;
      }
    }
  });
}

}  // namespace

void load_block_boundary(Tensor& tensor, std::size_t b, const BoundaryKind& kind, std::size_t dim) {
  if (tensor.padding() == 0 || dim >= tensor.dims()) return;
  for (Face face : {Face::Low, Face::High}) {
    if (tensor.on_domain_face(b, dim, face)) fill_face(tensor, b, kind, dim, face);
  }
}

void load_block_boundary(Tensor& tensor, std::size_t b, const BoundaryKind& kind) {
  for (std::size_t dim = 0; dim < tensor.dims(); ++dim) load_block_boundary(tensor, b, kind, dim);
}

void load_boundary(Tensor& tensor, const BoundaryKind& kind) {
  for (std::size_t b = 0; b < tensor.block_count(); ++b) load_block_boundary(tensor, b, kind);
}

void refresh_padding(Tensor& tensor, const BoundaryKind& kind) {
  const auto plan = halo_plan(tensor);
  for (std::size_t dim = 0; dim < tensor.dims(); ++dim) {
    for (std::size_t b = 0; b < tensor.block_count(); ++b) load_block_boundary(tensor, b, kind, dim);
    for (const auto& edge : plan) {
      if (edge.dim == dim) execute_transfer(tensor, edge);
    }
  }
}

void swap(Tensor& a, Tensor& b) {
  if (!(a.schema() == b.schema()) || !(a.global_extents() == b.global_extents()) || !(a.spec() == b.spec()) ||
      a.padding() != b.padding()) {
    throw ConfigError("swap requires tensors with identical schema, extents, partitioning and padding");
  }
  for (std::size_t i = 0; i < a.block_count(); ++i) a.block(i).storage().swap_buffers(b.block(i).storage());
}

void fill(Tensor& tensor, double value, std::size_t component, std::size_t lane) {
  for (auto& block : tensor.blocks()) {
    for (std::size_t cell = 0; cell < block.storage().element_count(); ++cell) {
      write_from_double(block.storage(), component, lane, cell, value);
    }
  }
}

// Field I/O ------------------------------------------------------------------

std::vector<double> gather_field(const Tensor& tensor, std::size_t component, std::size_t lane) {
  const Extents& ext = tensor.global_extents();
  std::vector<double> out(ext.count());
  for (const auto& block : tensor.blocks()) {
    for_each_cell(block.interior_box(), [&](const Index3& pos) {
      const std::size_t gx = block.origin()[0] + static_cast<std::size_t>(pos[0]);
      const std::size_t gy = block.origin()[1] + static_cast<std::size_t>(pos[1]);
      const std::size_t gz = block.origin()[2] + static_cast<std::size_t>(pos[2]);
      out[gx + ext[0] * (gy + ext[1] * gz)] = read_as_double(block.storage(), component, lane, block.cell_index(pos));
    });
  }
  return out;
}

void dump_field(const Tensor& tensor, std::size_t component, std::size_t lane, const std::filesystem::path& path) {
  tensor.schema().slot_index(component, lane);
  write_field(FieldData{tensor.global_extents(), gather_field(tensor, component, lane)}, path);
}

void write_field(const FieldData& field, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open field dump " + path.string());
  out << "# extents: " << field.extents.to_string() << '\n';
  const std::size_t row = field.extents[0];
  char buf[40];
  std::string line;
  for (std::size_t start = 0; start < field.values.size(); start += row) {
    line.clear();
    for (std::size_t i = 0; i < row; ++i) {
      if (i > 0) line += ',';
      std::snprintf(buf, sizeof buf, "%.17g", field.values[start + i]);
      line += buf;
    }
    out << line << '\n';
  }
  if (!out) throw std::runtime_error("failed writing field dump " + path.string());
}

FieldData read_field(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open field dump " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("# extents: ", 0) != 0) {
    throw std::runtime_error("field dump " + path.string() + " lacks an extents header");
  }
  std::vector<std::size_t> sizes;
  std::stringstream header(line.substr(11));
  for (std::string tok; std::getline(header, tok, ',');) sizes.push_back(std::stoull(tok));
  FieldData field{Extents(sizes), {}};
  field.values.reserve(field.extents.count());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const char* p = line.c_str();
    while (*p != '\0') {
      char* end = nullptr;
      field.values.push_back(std::strtod(p, &end));
      if (end == p) throw std::runtime_error("malformed value in field dump " + path.string());
      p = *end == ',' ? end + 1 : end;
    }
  }
  if (field.values.size() != field.extents.count()) {
    throw std::runtime_error("field dump " + path.string() + " has " + std::to_string(field.values.size()) +
                             " values, header says " + std::to_string(field.extents.count()));
  }
  return field;
}

}  // namespace weft
