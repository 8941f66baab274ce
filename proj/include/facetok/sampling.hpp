#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "facetok/mesh.hpp"

namespace facetok {

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // unit length, from face winding

  size_t size() const { return points.size(); }
};

// Area-weighted barycentric surface sampling; the normal of each point is
// the (normalized) face normal. Deterministic per seed. Throws data_error
// when the mesh has no area.
PointCloud sample_surface(const RawMesh& mesh, int count, uint64_t seed);

// Greedy farthest point sampling on positions. The start index is
// seed % size (0 for the default seed); every later pick maximizes the
// minimum distance to the picked set, ties broken by lowest index.
std::vector<int> fps(const PointCloud& cloud, int k, uint64_t seed = 0);

// Binary dump, little-endian: "FPC1" u64 m, then m * 6 f32 (position,
// normal).
std::vector<uint8_t> fpc_bytes(const PointCloud& cloud);
PointCloud fpc_parse(const std::vector<uint8_t>& bytes);
void save_fpc(const PointCloud& cloud, const std::string& path);
PointCloud load_fpc(const std::string& path);

}  // namespace facetok
