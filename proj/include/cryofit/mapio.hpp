#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "cryofit/geometry.hpp"

namespace cryofit {

/// Scalar field sampled on a regular lattice. Voxel (i, j, k) sits at the
/// physical point origin + (i*sx, j*sy, k*sz); values are stored x-fastest.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  VoxelGrid(Index3 dims, Vec3 spacing, Vec3 origin, double fill = 0.0);
  VoxelGrid(Index3 dims, Vec3 spacing, Vec3 origin, std::vector<double> values);

  const Index3& dims() const { return dims_; }
  const Vec3& spacing() const { return spacing_; }
  const Vec3& origin() const { return origin_; }
  std::size_t size() const { return values_.size(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  std::size_t linear(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k));
  }
  Index3 unlinear(std::size_t n) const;

  double at(int i, int j, int k) const { return values_[linear(i, j, k)]; }
  double& at(int i, int j, int k) { return values_[linear(i, j, k)]; }

  bool contains_index(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims_[0] && j < dims_[1] && k < dims_[2];
  }

  Vec3 position(int i, int j, int k) const {
    return {origin_.x + i * spacing_.x, origin_.y + j * spacing_.y, origin_.z + k * spacing_.z};
  }

  // Same dims, spacing and origin (exact comparison).
  bool same_lattice(const VoxelGrid& other) const;

  double max_value() const;

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

 private:
  Index3 dims_{0, 0, 0};
  Vec3 spacing_{1.0, 1.0, 1.0};
  Vec3 origin_{};
  std::vector<double> values_;
};

// Trilinear sample with the grid clamped to its lattice extent. Used by
// resampling, where every query lies inside the extent by construction.
double sample_clamped(const VoxelGrid& grid, const Vec3& point);

/// Reads an MRC2014 map held in memory. Only MODE 2 (float32) is accepted;
/// the result is always reordered to x-fastest regardless of MAPC/MAPR/MAPS.
/// Throws DataError on truncated or inconsistent input.
VoxelGrid parse_mrc(std::span<const std::uint8_t> bytes);

/// MODE 2, little-endian, MAPC/MAPR/MAPS = 1,2,3, header statistics recomputed.
std::vector<std::uint8_t> write_mrc(const VoxelGrid& grid);

VoxelGrid read_mrc_file(const std::filesystem::path& path);
void write_mrc_file(const std::filesystem::path& path, const VoxelGrid& grid);

/// Trilinear resampling onto a lattice with the requested spacing covering
/// the same physical extent; the origin is kept.
VoxelGrid resample(const VoxelGrid& grid, const Vec3& target_spacing);

struct Chunk {
  VoxelGrid grid;
  Index3 corner;
};

/// Cubic chunks of side chunk_dim taken every `stride` voxels, zero-padded
/// past the parent boundary so every voxel lands in at least one chunk.
std::vector<Chunk> crop_chunks(const VoxelGrid& grid, int chunk_dim = 32, int stride = 32);

}  // namespace cryofit
