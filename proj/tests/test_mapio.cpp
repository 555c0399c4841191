#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include "cryofit/errors.hpp"
#include "cryofit/mapio.hpp"

using namespace cryofit;

namespace {

void put_i32(std::vector<std::uint8_t>& b, std::size_t off, std::int32_t v) { std::memcpy(&b[off], &v, 4); }
void put_f32(std::vector<std::uint8_t>& b, std::size_t off, float v) { std::memcpy(&b[off], &v, 4); }
float get_f32(const std::vector<std::uint8_t>& b, std::size_t off) {
  float v;
  std::memcpy(&v, &b[off], 4);
  return v;
}
std::int32_t get_i32(const std::vector<std::uint8_t>& b, std::size_t off) {
  std::int32_t v;
  std::memcpy(&v, &b[off], 4);
  return v;
}

// Hand-built little-endian MODE 2 file; `dims` are along columns, rows, sections.
std::vector<std::uint8_t> raw_mrc(std::array<int, 3> crs_dims, std::array<int, 3> mapcrs, const std::vector<float>& data,
                                  std::array<float, 3> cell) {
  std::vector<std::uint8_t> b(1024 + 4 * data.size(), 0);
  for (int a = 0; a < 3; ++a) put_i32(b, 4 * a, crs_dims[a]);
  put_i32(b, 12, 2);
  // MX/MY/MZ and CELLA are in x,y,z order.
  std::array<int, 3> xyz_dims{};
  for (int a = 0; a < 3; ++a) xyz_dims[mapcrs[a] - 1] = crs_dims[a];
  for (int a = 0; a < 3; ++a) put_i32(b, 28 + 4 * a, xyz_dims[a]);
  for (int a = 0; a < 3; ++a) put_f32(b, 40 + 4 * a, cell[a]);
  for (int a = 0; a < 3; ++a) put_f32(b, 52 + 4 * a, 90.0f);
  for (int a = 0; a < 3; ++a) put_i32(b, 64 + 4 * a, mapcrs[a]);
  std::memcpy(&b[208], "MAP ", 4);
  b[212] = 0x44;
  b[213] = 0x44;
  std::memcpy(&b[1024], data.data(), 4 * data.size());
  return b;
}

VoxelGrid random_grid(std::mt19937_64& rng, Index3 d) {
  std::uniform_real_distribution<double> u(-2, 2);
  std::vector<double> v(static_cast<std::size_t>(d[0] * d[1] * d[2]));
  // Values representable in float32 so the round trip can be exact.
  for (auto& x : v) x = static_cast<float>(u(rng));
  return VoxelGrid(d, {1.1, 0.9, 1.3}, {-3.5, 2.25, 10.0}, v);
}

}  // namespace

TEST_CASE("mrc: minimal one-voxel map") {
  const auto b = raw_mrc({1, 1, 1}, {1, 2, 3}, {0.5f}, {1, 1, 1});
  const VoxelGrid g = parse_mrc(b);
  CHECK(g.dims() == Index3{1, 1, 1});
  CHECK(g.at(0, 0, 0) == 0.5);
}

TEST_CASE("mrc: round trips are bit exact") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 5; ++t) {
    const VoxelGrid g = random_grid(rng, {3 + t, 4, 5 + 2 * t});
    const auto bytes = write_mrc(g);
    const VoxelGrid back = parse_mrc(bytes);
    CHECK(back.dims() == g.dims());
    CHECK(std::equal(back.values().begin(), back.values().end(), g.values().begin()));
    for (int a = 0; a < 3; ++a) {
      CHECK(back.spacing()[a] == doctest::Approx(g.spacing()[a]).epsilon(1e-6));
      CHECK(back.origin()[a] == doctest::Approx(g.origin()[a]).epsilon(1e-6));
    }
    CHECK(write_mrc(back) == bytes);
  }
}

TEST_CASE("mrc: header statistics") {
  const VoxelGrid zeros({2, 2, 2}, {1, 1, 1}, {0, 0, 0}, 0.0);
  const auto zb = write_mrc(zeros);
  CHECK(get_f32(zb, 76) == 0.0f);
  CHECK(get_f32(zb, 80) == 0.0f);
  CHECK(get_f32(zb, 84) == 0.0f);
  CHECK(get_i32(zb, 12) == 2);
  CHECK(get_i32(zb, 64) == 1);
  CHECK(get_i32(zb, 68) == 2);
  CHECK(get_i32(zb, 72) == 3);

  std::mt19937_64 rng(3);
  const VoxelGrid g = random_grid(rng, {8, 8, 8});
  const auto b = write_mrc(g);
  const double mean = std::accumulate(g.values().begin(), g.values().end(), 0.0) / g.size();
  CHECK(get_f32(b, 84) == doctest::Approx(mean).epsilon(1e-6));
  CHECK(get_f32(b, 76) == *std::min_element(g.values().begin(), g.values().end()));
  CHECK(get_f32(b, 80) == *std::max_element(g.values().begin(), g.values().end()));
}

TEST_CASE("mrc: permuted axis order gives the same field") {
  // Field f(x,y,z) on a 2x3x4 lattice.
  const int nx = 2, ny = 3, nz = 4;
  auto f = [](int x, int y, int z) { return static_cast<float>(x + 10 * y + 100 * z); };
  std::vector<float> xyz;
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) xyz.push_back(f(x, y, z));
  // Columns along y, rows along x, sections along z.
  std::vector<float> yxz;
  for (int z = 0; z < nz; ++z)
    for (int x = 0; x < nx; ++x)
      for (int y = 0; y < ny; ++y) yxz.push_back(f(x, y, z));
  const VoxelGrid a = parse_mrc(raw_mrc({nx, ny, nz}, {1, 2, 3}, xyz, {2, 3, 4}));
  const VoxelGrid b = parse_mrc(raw_mrc({ny, nx, nz}, {2, 1, 3}, yxz, {2, 3, 4}));
  CHECK(b.dims() == a.dims());
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) CHECK(b.at(x, y, z) == f(x, y, z));
  CHECK(a == b);
}

TEST_CASE("mrc: malformed input is rejected") {
  const auto good = raw_mrc({2, 2, 2}, {1, 2, 3}, std::vector<float>(8, 1.0f), {2, 2, 2});
  CHECK_THROWS_AS(parse_mrc(std::span(good).first(100)), DataError);
  auto mode = good;
  put_i32(mode, 12, 0);
  CHECK_THROWS_AS(parse_mrc(mode), DataError);
  auto shortp = good;
  shortp.resize(shortp.size() - 4);
  CHECK_THROWS_AS(parse_mrc(shortp), DataError);
  auto cell = good;
  put_f32(cell, 40, 0.0f);
  CHECK_THROWS_AS(parse_mrc(cell), DataError);
  auto nan = good;
  put_f32(nan, 1024, std::nanf(""));
  CHECK_THROWS_AS(parse_mrc(nan), DataError);
  auto perm = good;
  put_i32(perm, 64, 2);
  CHECK_THROWS_AS(parse_mrc(perm), DataError);
}

TEST_CASE("resample") {
  std::mt19937_64 rng(11);
  const VoxelGrid g = random_grid(rng, {5, 6, 7});
  const VoxelGrid same = resample(g, g.spacing());
  REQUIRE(same.dims() == g.dims());
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(same.values()[i] == doctest::Approx(g.values()[i]).epsilon(1e-6));

  const VoxelGrid c({4, 4, 4}, {1, 1, 1}, {0, 0, 0}, 2.5);
  for (double s : {0.3, 0.7, 1.9}) {
    const VoxelGrid r = resample(c, {s, s, s});
    for (double v : r.values()) CHECK(v == doctest::Approx(2.5));
  }

  // Linear ramp is reproduced exactly by trilinear sampling.
  VoxelGrid ramp({5, 5, 5}, {2, 2, 2}, {1, -1, 0});
  for (int k = 0; k < 5; ++k)
    for (int j = 0; j < 5; ++j)
      for (int i = 0; i < 5; ++i) {
        const Vec3 p = ramp.position(i, j, k);
        ramp.at(i, j, k) = 0.5 * p.x - 2 * p.y + 3 * p.z + 1;
      }
  const VoxelGrid half = resample(ramp, {1, 1, 1});
  CHECK(half.dims() == Index3{9, 9, 9});
  CHECK(half.origin() == ramp.origin());
  for (int k = 0; k < 9; ++k)
    for (int j = 0; j < 9; ++j)
      for (int i = 0; i < 9; ++i) {
        const Vec3 p = half.position(i, j, k);
        CHECK(half.at(i, j, k) == doctest::Approx(0.5 * p.x - 2 * p.y + 3 * p.z + 1).epsilon(1e-12));
      }

  // Commutes with scaling.
  VoxelGrid scaled = g;
  for (double& v : scaled.values()) v *= 3.0;
  const VoxelGrid r1 = resample(scaled, {0.7, 0.7, 0.7});
  const VoxelGrid r2 = resample(g, {0.7, 0.7, 0.7});
  for (std::size_t i = 0; i < r1.size(); ++i) CHECK(r1.values()[i] == doctest::Approx(3.0 * r2.values()[i]));
}

TEST_CASE("crop_chunks") {
  VoxelGrid g({32, 32, 32}, {1, 1, 1}, {0, 0, 0});
  std::iota(g.values().begin(), g.values().end(), 0.0);
  auto one = crop_chunks(g, 32, 32);
  REQUIRE(one.size() == 1);
  CHECK(one[0].grid.values().size() == g.size());
  CHECK(std::equal(g.values().begin(), g.values().end(), one[0].grid.values().begin()));
  CHECK(one[0].corner == Index3{0, 0, 0});

  VoxelGrid h({33, 33, 33}, {1, 1, 1}, {0, 0, 0});
  std::iota(h.values().begin(), h.values().end(), 1.0);
  const auto chunks = crop_chunks(h, 32, 32);
  CHECK(chunks.size() == 8);
  VoxelGrid rebuilt({33, 33, 33}, {1, 1, 1}, {0, 0, 0});
  std::vector<int> cover(h.size(), 0);
  for (const auto& c : chunks)
    for (int k = 0; k < 32; ++k)
      for (int j = 0; j < 32; ++j)
        for (int i = 0; i < 32; ++i) {
          const int x = c.corner[0] + i, y = c.corner[1] + j, z = c.corner[2] + k;
          if (!h.contains_index(x, y, z)) {
            CHECK(c.grid.at(i, j, k) == 0.0);
            continue;
          }
          rebuilt.at(x, y, z) = c.grid.at(i, j, k);
          ++cover[h.linear(x, y, z)];
        }
  CHECK(rebuilt == h);
  CHECK(std::all_of(cover.begin(), cover.end(), [](int c) { return c == 1; }));
}
