#include "cryofit/mapio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "cryofit/errors.hpp"
#include "cryofit/parallel.hpp"

namespace cryofit {

VoxelGrid::VoxelGrid(Index3 dims, Vec3 spacing, Vec3 origin, double fill)
    : dims_(dims), spacing_(spacing), origin_(origin) {
  for (int d : dims_)
    if (d <= 0) throw std::invalid_argument("VoxelGrid: dimensions must be positive");
  if (spacing_.x <= 0 || spacing_.y <= 0 || spacing_.z <= 0)
    throw std::invalid_argument("VoxelGrid: spacing must be positive");
  values_.assign(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2], fill);
}

VoxelGrid::VoxelGrid(Index3 dims, Vec3 spacing, Vec3 origin, std::vector<double> values)
    : VoxelGrid(dims, spacing, origin) {
  if (values.size() != values_.size())
    throw std::invalid_argument("VoxelGrid: value count does not match dimensions");
  values_ = std::move(values);
}

Index3 VoxelGrid::unlinear(std::size_t n) const {
  const auto nx = static_cast<std::size_t>(dims_[0]);
  const auto ny = static_cast<std::size_t>(dims_[1]);
  return {static_cast<int>(n % nx), static_cast<int>((n / nx) % ny), static_cast<int>(n / (nx * ny))};
}

bool VoxelGrid::same_lattice(const VoxelGrid& other) const {
  return dims_ == other.dims_ && spacing_ == other.spacing_ && origin_ == other.origin_;
}

double VoxelGrid::max_value() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

double sample_clamped(const VoxelGrid& grid, const Vec3& point) {
  const auto& n = grid.dims();
  int i0[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    if (n[a] == 1) {
      i0[a] = 0;
      f[a] = 0.0;
      continue;
    }
    double u = (point[a] - grid.origin()[a]) / grid.spacing()[a];
    u = std::clamp(u, 0.0, static_cast<double>(n[a] - 1));
    int i = static_cast<int>(std::floor(u));
    if (i >= n[a] - 1) i = n[a] - 2;
    i0[a] = i;
    f[a] = u - i;
  }
  double value = 0.0;
  for (int dz = 0; dz < 2; ++dz) {
    const double wz = dz ? f[2] : 1.0 - f[2];
    if (wz == 0.0) continue;
    for (int dy = 0; dy < 2; ++dy) {
      const double wy = dy ? f[1] : 1.0 - f[1];
      if (wy == 0.0) continue;
      for (int dx = 0; dx < 2; ++dx) {
        const double wx = dx ? f[0] : 1.0 - f[0];
        if (wx == 0.0) continue;
        value += wx * wy * wz * grid.at(i0[0] + dx, i0[1] + dy, i0[2] + dz);
      }
    }
  }
  return value;
}

namespace {

constexpr std::size_t kHeaderBytes = 1024;

constexpr std::uint32_t bswap32(std::uint32_t w) {
  return (w >> 24) | ((w >> 8) & 0x0000ff00u) | ((w << 8) & 0x00ff0000u) | (w << 24);
}

// Byte offsets of header words (word n lives at 4*(n-1)).
constexpr std::size_t kNx = 0, kMode = 12, kNxStart = 16, kMx = 28, kCellA = 40, kCellB = 52,
                      kMapC = 64, kDMin = 76, kDMax = 80, kDMean = 84, kIspg = 88, kNsymbt = 92,
                      kNversion = 108, kOrigin = 196, kMapTag = 208, kMachst = 212, kRms = 216;

class HeaderReader {
 public:
  HeaderReader(std::span<const std::uint8_t> bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  std::uint32_t word(std::size_t offset) const {
    std::uint32_t w;
    std::memcpy(&w, bytes_.data() + offset, 4);
    return swap_ ? bswap32(w) : w;
  }
  std::int32_t i32(std::size_t offset) const { return static_cast<std::int32_t>(word(offset)); }
  float f32(std::size_t offset) const { return std::bit_cast<float>(word(offset)); }

 private:
  std::span<const std::uint8_t> bytes_;
  bool swap_;
};

void put_word(std::vector<std::uint8_t>& out, std::size_t offset, std::uint32_t w) {
  if constexpr (std::endian::native == std::endian::big) w = bswap32(w);
  std::memcpy(out.data() + offset, &w, 4);
}
void put_i32(std::vector<std::uint8_t>& out, std::size_t offset, std::int32_t v) {
  put_word(out, offset, static_cast<std::uint32_t>(v));
}
void put_f32(std::vector<std::uint8_t>& out, std::size_t offset, float v) {
  put_word(out, offset, std::bit_cast<std::uint32_t>(v));
}

bool file_is_little_endian(std::span<const std::uint8_t> bytes) {
  const std::uint8_t stamp = bytes[kMachst];
  if (stamp == 0x44) return true;
  if (stamp == 0x11) return false;
  // No machine stamp: pick the byte order that yields a plausible MODE.
  std::uint32_t mode;
  std::memcpy(&mode, bytes.data() + kMode, 4);
  if constexpr (std::endian::native == std::endian::big) mode = bswap32(mode);
  return mode <= 16;
}

}  // namespace

VoxelGrid parse_mrc(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes)
    throw DataError("MRC: truncated header (" + std::to_string(bytes.size()) + " bytes)");

  const bool little = file_is_little_endian(bytes);
  const bool swap = (std::endian::native == std::endian::little) != little;
  const HeaderReader h(bytes, swap);

  const std::int32_t n_file[3] = {h.i32(kNx), h.i32(kNx + 4), h.i32(kNx + 8)};
  for (int k = 0; k < 3; ++k)
    if (n_file[k] <= 0) throw DataError("MRC: non-positive grid dimension");

  const std::int32_t mode = h.i32(kMode);
  if (mode != 2) throw DataError("MRC: unsupported MODE " + std::to_string(mode) + " (only MODE 2 float32)");

  int axis[3];
  bool seen[3] = {false, false, false};
  for (int k = 0; k < 3; ++k) {
    const std::int32_t m = h.i32(kMapC + 4 * k);
    if (m < 1 || m > 3 || seen[m - 1]) throw DataError("MRC: MAPC/MAPR/MAPS is not a permutation of 1,2,3");
    seen[m - 1] = true;
    axis[k] = m - 1;
  }

  Index3 dims{};
  for (int k = 0; k < 3; ++k) dims[axis[k]] = n_file[k];

  Vec3 spacing;
  for (int a = 0; a < 3; ++a) {
    const double cell = h.f32(kCellA + 4 * a);
    if (!(cell > 0.0) || !std::isfinite(cell)) throw DataError("MRC: non-positive cell dimension");
    const std::int32_t sampling = h.i32(kMx + 4 * a);
    spacing[a] = cell / (sampling > 0 ? sampling : dims[a]);
  }

  Vec3 origin{h.f32(kOrigin), h.f32(kOrigin + 4), h.f32(kOrigin + 8)};
  if (!std::isfinite(origin.x) || !std::isfinite(origin.y) || !std::isfinite(origin.z))
    throw DataError("MRC: non-finite ORIGIN");
  if (origin == Vec3{}) {
    // Legacy convention: origin carried by N[XYZ]START in file-axis order.
    for (int k = 0; k < 3; ++k) origin[axis[k]] = h.i32(kNxStart + 4 * k) * spacing[axis[k]];
  }

  const std::int32_t nsymbt = h.i32(kNsymbt);
  if (nsymbt < 0) throw DataError("MRC: negative NSYMBT");
  const std::size_t count = static_cast<std::size_t>(n_file[0]) * n_file[1] * n_file[2];
  const std::size_t data_offset = kHeaderBytes + static_cast<std::size_t>(nsymbt);
  if (data_offset + 4 * count > bytes.size())
    throw DataError("MRC: payload shorter than header dimensions imply");

  const HeaderReader data(bytes.subspan(data_offset), swap);
  std::vector<double> values(count);
  const std::size_t stride[3] = {1, static_cast<std::size_t>(dims[0]),
                                 static_cast<std::size_t>(dims[0]) * dims[1]};
  std::size_t n = 0;
  for (std::int32_t s = 0; s < n_file[2]; ++s) {
    for (std::int32_t r = 0; r < n_file[1]; ++r) {
      for (std::int32_t c = 0; c < n_file[0]; ++c, ++n) {
        const float v = data.f32(4 * n);
        if (!std::isfinite(v)) throw DataError("MRC: non-finite voxel value");
        values[c * stride[axis[0]] + r * stride[axis[1]] + s * stride[axis[2]]] = v;
      }
    }
  }
  return VoxelGrid(dims, spacing, origin, std::move(values));
}

std::vector<std::uint8_t> write_mrc(const VoxelGrid& grid) {
  const auto& d = grid.dims();
  const auto values = grid.values();
  std::vector<std::uint8_t> out(kHeaderBytes + 4 * values.size(), 0);

  for (int a = 0; a < 3; ++a) {
    put_i32(out, kNx + 4 * a, d[a]);
    put_i32(out, kMx + 4 * a, d[a]);
    put_f32(out, kCellA + 4 * a, static_cast<float>(grid.spacing()[a] * d[a]));
    put_f32(out, kCellB + 4 * a, 90.0f);
    put_i32(out, kMapC + 4 * a, a + 1);
    put_f32(out, kOrigin + 4 * a, static_cast<float>(grid.origin()[a]));
  }
  put_i32(out, kMode, 2);

  double lo = values.empty() ? 0.0 : values[0];
  double hi = lo;
  std::vector<float> stored(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    stored[i] = static_cast<float>(values[i]);
    lo = std::min<double>(lo, stored[i]);
    hi = std::max<double>(hi, stored[i]);
  }
  const double n = static_cast<double>(stored.size());
  const double mean = deterministic_sum(stored.size(), [&](std::size_t i) { return double(stored[i]); }) / n;
  const double var =
      deterministic_sum(stored.size(), [&](std::size_t i) { return (stored[i] - mean) * (stored[i] - mean); }) / n;

  put_f32(out, kDMin, static_cast<float>(lo));
  put_f32(out, kDMax, static_cast<float>(hi));
  put_f32(out, kDMean, static_cast<float>(mean));
  put_i32(out, kIspg, 1);
  put_i32(out, kNsymbt, 0);
  put_i32(out, kNversion, 20140);
  std::memcpy(out.data() + kMapTag, "MAP ", 4);
  out[kMachst] = 0x44;
  out[kMachst + 1] = 0x44;
  put_f32(out, kRms, static_cast<float>(std::sqrt(var)));

  for (std::size_t i = 0; i < stored.size(); ++i) put_f32(out, kHeaderBytes + 4 * i, stored[i]);
  return out;
}

VoxelGrid read_mrc_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open map file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_mrc(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_mrc_file(const std::filesystem::path& path, const VoxelGrid& grid) {
  const auto bytes = write_mrc(grid);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write map file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

VoxelGrid resample(const VoxelGrid& grid, const Vec3& target_spacing) {
  if (!(target_spacing.x > 0 && target_spacing.y > 0 && target_spacing.z > 0))
    throw std::invalid_argument("resample: target spacing must be positive");
  Index3 dims{};
  for (int a = 0; a < 3; ++a) {
    const double extent = (grid.dims()[a] - 1) * grid.spacing()[a];
    dims[a] = static_cast<int>(std::floor(extent / target_spacing[a] + 1e-9)) + 1;
  }
  VoxelGrid out(dims, target_spacing, grid.origin());
  auto values = out.values();
  parallel_for(static_cast<std::size_t>(dims[2]), [&](std::size_t k0, std::size_t k1) {
    for (auto k = static_cast<int>(k0); k < static_cast<int>(k1); ++k)
      for (int j = 0; j < dims[1]; ++j)
        for (int i = 0; i < dims[0]; ++i) values[out.linear(i, j, k)] = sample_clamped(grid, out.position(i, j, k));
  });
  return out;
}

std::vector<Chunk> crop_chunks(const VoxelGrid& grid, int chunk_dim, int stride) {
  if (chunk_dim < 1 || stride < 1) throw std::invalid_argument("crop_chunks: chunk_dim and stride must be >= 1");
  const auto& d = grid.dims();
  int count[3];
  for (int a = 0; a < 3; ++a) {
    const int overhang = std::max(d[a] - chunk_dim, 0);
    count[a] = (overhang + stride - 1) / stride + 1;
  }
  std::vector<Chunk> chunks;
  chunks.reserve(static_cast<std::size_t>(count[0]) * count[1] * count[2]);
  for (int cz = 0; cz < count[2]; ++cz) {
    for (int cy = 0; cy < count[1]; ++cy) {
      for (int cx = 0; cx < count[0]; ++cx) {
        const Index3 corner{cx * stride, cy * stride, cz * stride};
        VoxelGrid chunk({chunk_dim, chunk_dim, chunk_dim}, grid.spacing(), grid.position(corner[0], corner[1], corner[2]));
        for (int k = 0; k < chunk_dim; ++k)
          for (int j = 0; j < chunk_dim; ++j)
            for (int i = 0; i < chunk_dim; ++i) {
              const int pi = corner[0] + i, pj = corner[1] + j, pk = corner[2] + k;
              if (grid.contains_index(pi, pj, pk)) chunk.at(i, j, k) = grid.at(pi, pj, pk);
            }
        chunks.push_back({std::move(chunk), corner});
      }
    }
  }
  return chunks;
}

}  // namespace cryofit
