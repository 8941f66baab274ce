#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "facetok/mesh.hpp"

namespace facetok {

// Inverse of normalize(): x_original = x_normalized * scale + center.
struct NormRecord {
  Vec3 center;
  double scale = 1.0;

  Vec3 apply(const Vec3& v) const { return (v - center) / scale; }
  Vec3 invert(const Vec3& v) const { return v * scale + center; }
};

// Integer-coordinate mesh on the [0, R-1]^3 grid. After construction no two
// vertices share a cell, no face repeats a vertex, and no two faces use the
// same unordered vertex set.
struct QuantizedMesh {
  int resolution = 0;
  std::vector<std::array<int, 3>> vertices;
  std::vector<std::array<int, 3>> faces;
  NormRecord norm;
  int dropped_degenerate = 0;  // faces collapsed by vertex merging
  int dropped_duplicate = 0;

  void validate() const;
};

enum class OrderMode { zyx, zyx_component, dfs, bfs };

const char* order_mode_name(OrderMode mode);
OrderMode order_mode_from_name(const std::string& name);  // throws usage_error

// Sequence of 9-slot faces (v0.x v0.y v0.z v1.x ... v2.z), canonically
// rotated and ordered.
struct OrderedFaceSequence {
  std::vector<std::array<int, 9>> faces;
  OrderMode order_mode = OrderMode::zyx;
  int resolution = 0;
};

// Center on the bbox midpoint and scale the largest extent to 1, so all
// coordinates land in [-0.5, 0.5]. Throws data_error on empty or
// zero-extent input.
std::pair<RawMesh, NormRecord> normalize(const RawMesh& mesh);

// q = clamp(round_half_up((x + 0.5) * (R - 1)), 0, R-1) per axis. Expects a
// normalized mesh. Merges coincident vertices, drops collapsed and duplicate
// faces (duplicates keep the copy with the smallest canonical key so the
// result is independent of input face order).
QuantizedMesh quantize(const RawMesh& mesh, int resolution);

// x = q / (R - 1) - 0.5 per axis; optionally applies the stored NormRecord
// inverse to return to original coordinates.
RawMesh dequantize(const QuantizedMesh& qmesh, bool denormalize = false);

// (z, y, x)-lexicographic canonical key of a face: the minimal vertex is
// rotated to the front (winding preserved) and each vertex contributes
// (z, y, x).
std::array<int, 9> canonical_face_key(const std::array<int, 3>& v0,
                                      const std::array<int, 3>& v1,
                                      const std::array<int, 3>& v2);

OrderedFaceSequence order_faces(const QuantizedMesh& qmesh, OrderMode mode);

struct AugmentParams {
  bool rotate = true;  // about the vertical axis, angle uniform in [0, 2pi)
  bool flip = true;    // independent per-axis mirror, p = 0.5 each
  bool scale = true;   // independent per-axis factor uniform in [0.75, 1.25]
  int rotation_axis = 2;  // 0=x 1=y 2=z

  // Test hooks: when set they replace the random draws.
  std::optional<double> forced_angle;
  std::optional<std::array<bool, 3>> forced_flips;
  std::optional<std::array<double, 3>> forced_scales;
};

// Rotation, flips, per-axis scaling (in that order), then re-normalization.
// Fully determined by the seed. With everything disabled this is exactly
// normalize(mesh).
RawMesh augment(const RawMesh& mesh, uint64_t seed, const AugmentParams& params);

}  // namespace facetok
