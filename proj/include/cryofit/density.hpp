#pragma once

#include <map>
#include <span>
#include <string>

#include "cryofit/geometry.hpp"
#include "cryofit/mapio.hpp"
#include "cryofit/structio.hpp"

namespace cryofit {

struct SimulationSpec {
  double resolution = 4.0;  // Å, read as the Gaussian FWHM
  Index3 dims{1, 1, 1};
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{};
  std::map<std::string, double> element_weight;  // missing elements weigh 1.0
  double truncation_sigmas = 4.0;

  double kernel_sigma() const;
  double weight_for(const std::string& element) const;
  // Throws std::invalid_argument when resolution/spacing are inconsistent.
  void validate() const;

  static SimulationSpec on_lattice_of(const VoxelGrid& grid, double resolution);
};

struct KernelValue {
  double value = 0.0;
  double d_dr2 = 0.0;  // derivative with respect to the squared distance
};

/// Gaussian exp(-r^2 / 2 sigma^2) truncated at truncation_sigmas * sigma. Over
/// the last half sigma a quintic switch takes it smoothly to zero, so
/// simulated maps are twice differentiable in the atom positions.
KernelValue density_kernel(double r2, const SimulationSpec& spec);

/// Sum of truncated isotropic Gaussians, one per atom, sampled at voxel
/// centers of the spec lattice.
VoxelGrid simulate_density(const Structure& structure, const SimulationSpec& spec);
VoxelGrid simulate_density(std::span<const Vec3> positions, std::span<const double> weights,
                           const SimulationSpec& spec);

struct Sample {
  double value = 0.0;
  Vec3 gradient{};
};

/// Trilinear value and the analytic gradient of the trilinear interpolant.
/// Points outside the lattice extent give value 0 and zero gradient. On a
/// lattice plane the one-sided derivatives are averaged, which equals the
/// central difference of the neighbouring voxels.
Sample interpolate(const VoxelGrid& grid, const Vec3& point);

/// Cross-correlation coefficient sum(a*b)/sqrt(sum(a^2)*sum(b^2)) over all
/// voxels, with no mean subtraction unless `mean_centered` is set. Both
/// grids must share a lattice; an all-zero grid is a DataError.
double ccc(const VoxelGrid& a, const VoxelGrid& b, bool mean_centered = false);

}  // namespace cryofit
