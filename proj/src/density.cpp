#include "cryofit/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "cryofit/errors.hpp"
#include "cryofit/parallel.hpp"

namespace cryofit {

double SimulationSpec::kernel_sigma() const { return resolution / (2.0 * std::sqrt(2.0 * std::numbers::ln2)); }

double SimulationSpec::weight_for(const std::string& element) const {
  const auto it = element_weight.find(element);
  return it == element_weight.end() ? 1.0 : it->second;
}

void SimulationSpec::validate() const {
  if (!(resolution > 0.0)) throw std::invalid_argument("SimulationSpec: resolution must be positive");
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw std::invalid_argument("SimulationSpec: dims must be positive");
    if (!(spacing[a] > 0.0)) throw std::invalid_argument("SimulationSpec: spacing must be positive");
    if (spacing[a] > resolution) throw std::invalid_argument("SimulationSpec: grid spacing coarser than resolution");
  }
  if (!(truncation_sigmas > 0.0)) throw std::invalid_argument("SimulationSpec: truncation must be positive");
}

SimulationSpec SimulationSpec::on_lattice_of(const VoxelGrid& grid, double resolution) {
  SimulationSpec spec;
  spec.resolution = resolution;
  spec.dims = grid.dims();
  spec.spacing = grid.spacing();
  spec.origin = grid.origin();
  return spec;
}

KernelValue density_kernel(double r2, const SimulationSpec& spec) {
  const double sigma = spec.kernel_sigma();
  const double rc = spec.truncation_sigmas * sigma;
  if (r2 >= rc * rc) return {};
  const double g = std::exp(-r2 / (2.0 * sigma * sigma));
  KernelValue out{g, -g / (2.0 * sigma * sigma)};
  const double rs = std::max(rc - 0.5 * sigma, 0.0);
  if (r2 <= rs * rs) return out;
  const double r = std::sqrt(r2);
  const double w = rc - rs;
  const double t = (r - rs) / w;
  const double sw = 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
  const double dsw_dr = -30.0 * t * t * (1.0 - t) * (1.0 - t) / w;
  out.value = g * sw;
  out.d_dr2 = out.d_dr2 * sw + g * dsw_dr / (2.0 * r);
  return out;
}

VoxelGrid simulate_density(std::span<const Vec3> positions, std::span<const double> weights,
                           const SimulationSpec& spec) {
  spec.validate();
  if (positions.empty()) throw DataError("simulate_density: empty atom set");
  if (weights.size() != positions.size()) throw std::invalid_argument("simulate_density: weight count mismatch");

  VoxelGrid grid(spec.dims, spec.spacing, spec.origin);
  const double sigma = spec.kernel_sigma();
  const double cutoff = spec.truncation_sigmas * sigma;
  const double cutoff2 = cutoff * cutoff;
  const auto& d = spec.dims;
  auto values = grid.values();

  // Slabs along z: each voxel accumulates atoms in input order, so the
  // result does not depend on how slabs are distributed over threads.
  parallel_for(static_cast<std::size_t>(d[2]), [&](std::size_t k_begin, std::size_t k_end) {
    for (std::size_t a = 0; a < positions.size(); ++a) {
      const Vec3& r = positions[a];
      int lo[3], hi[3];
      for (int ax = 0; ax < 3; ++ax) {
        lo[ax] = std::max(0, static_cast<int>(std::ceil((r[ax] - cutoff - spec.origin[ax]) / spec.spacing[ax])));
        hi[ax] = std::min(d[ax] - 1, static_cast<int>(std::floor((r[ax] + cutoff - spec.origin[ax]) / spec.spacing[ax])));
      }
      lo[2] = std::max(lo[2], static_cast<int>(k_begin));
      hi[2] = std::min(hi[2], static_cast<int>(k_end) - 1);
      for (int k = lo[2]; k <= hi[2]; ++k) {
        const double dz = spec.origin.z + k * spec.spacing.z - r.z;
        for (int j = lo[1]; j <= hi[1]; ++j) {
          const double dy = spec.origin.y + j * spec.spacing.y - r.y;
          const double dyz2 = dy * dy + dz * dz;
          if (dyz2 > cutoff2) continue;
          for (int i = lo[0]; i <= hi[0]; ++i) {
            const double dx = spec.origin.x + i * spec.spacing.x - r.x;
            const double d2 = dx * dx + dyz2;
            if (d2 > cutoff2) continue;
            values[grid.linear(i, j, k)] += weights[a] * density_kernel(d2, spec).value;
          }
        }
      }
    }
  });
  return grid;
}

VoxelGrid simulate_density(const Structure& structure, const SimulationSpec& spec) {
  std::vector<Vec3> positions;
  std::vector<double> weights;
  for (const auto& chain : structure.chains)
    for (const auto& res : chain.residues)
      for (const auto& atom : res.atoms) {
        positions.push_back(atom.position);
        weights.push_back(spec.weight_for(atom.element));
      }
  return simulate_density(positions, weights, spec);
}

namespace {

// Stencil along one axis: up to three lattice indices with weights for the
// value and for the derivative.
struct AxisStencil {
  int count = 0;
  int index[3] = {0, 0, 0};
  double value_w[3] = {0, 0, 0};
  double deriv_w[3] = {0, 0, 0};
};

bool axis_stencil(double coord, double origin, double spacing, int n, AxisStencil& st) {
  const double u = (coord - origin) / spacing;
  if (n == 1) {
    if (std::abs(u) > 0.5) return false;
    st.count = 1;
    st.index[0] = 0;
    st.value_w[0] = 1.0;
    return true;
  }
  if (u < 0.0 || u > n - 1) return false;
  // Lattice positions rarely divide back to exact integers.
  const double r = std::round(u);
  if (std::abs(u - r) < 1e-9 && r > 0 && r < n - 1) {
    const int i = static_cast<int>(r);
    st.count = 3;
    st.index[0] = i - 1;
    st.index[1] = i;
    st.index[2] = i + 1;
    st.value_w[1] = 1.0;
    st.deriv_w[0] = -0.5 / spacing;
    st.deriv_w[2] = 0.5 / spacing;
    return true;
  }
  const int i0 = std::min(static_cast<int>(std::floor(u)), n - 2);
  const double f = u - i0;
  st.count = 2;
  st.index[0] = i0;
  st.index[1] = i0 + 1;
  st.value_w[0] = 1.0 - f;
  st.value_w[1] = f;
  st.deriv_w[0] = -1.0 / spacing;
  st.deriv_w[1] = 1.0 / spacing;
  return true;
}

}  // namespace

Sample interpolate(const VoxelGrid& grid, const Vec3& point) {
  AxisStencil sx, sy, sz;
  const auto& n = grid.dims();
  if (!axis_stencil(point.x, grid.origin().x, grid.spacing().x, n[0], sx) ||
      !axis_stencil(point.y, grid.origin().y, grid.spacing().y, n[1], sy) ||
      !axis_stencil(point.z, grid.origin().z, grid.spacing().z, n[2], sz))
    return {};
  Sample s;
  for (int c = 0; c < sz.count; ++c) {
    for (int b = 0; b < sy.count; ++b) {
      for (int a = 0; a < sx.count; ++a) {
        const double v = grid.at(sx.index[a], sy.index[b], sz.index[c]);
        s.value += sx.value_w[a] * sy.value_w[b] * sz.value_w[c] * v;
        s.gradient.x += sx.deriv_w[a] * sy.value_w[b] * sz.value_w[c] * v;
        s.gradient.y += sx.value_w[a] * sy.deriv_w[b] * sz.value_w[c] * v;
        s.gradient.z += sx.value_w[a] * sy.value_w[b] * sz.deriv_w[c] * v;
      }
    }
  }
  return s;
}

double ccc(const VoxelGrid& a, const VoxelGrid& b, bool mean_centered) {
  if (!a.same_lattice(b)) throw std::invalid_argument("ccc: maps are on different lattices");
  const auto va = a.values();
  const auto vb = b.values();
  const std::size_t n = va.size();
  double ma = 0.0, mb = 0.0;
  if (mean_centered) {
    ma = deterministic_sum(n, [&](std::size_t i) { return va[i]; }) / n;
    mb = deterministic_sum(n, [&](std::size_t i) { return vb[i]; }) / n;
  }
  const double ab = deterministic_sum(n, [&](std::size_t i) { return (va[i] - ma) * (vb[i] - mb); });
  const double aa = deterministic_sum(n, [&](std::size_t i) { return (va[i] - ma) * (va[i] - ma); });
  const double bb = deterministic_sum(n, [&](std::size_t i) { return (vb[i] - mb) * (vb[i] - mb); });
  if (aa == 0.0 || bb == 0.0) throw DataError("ccc: undefined for an all-zero map");
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

}  // namespace cryofit
