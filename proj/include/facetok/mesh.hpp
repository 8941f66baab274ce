#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "facetok/common.hpp"

namespace facetok {

// Triangle mesh with continuous coordinates, indices 0-based.
struct RawMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;

  void validate() const;  // throws data_error on bad indices or degenerate arity
};

struct MeshReport {
  int degenerate_face_count = 0;
  int duplicate_face_count = 0;
  int component_count = 0;
  Vec3 bbox_min;
  Vec3 bbox_max;
};

struct ObjParseStats {
  int skipped_line_count = 0;  // vt/vn/usemtl/... lines ignored for geometry
};

// Wavefront OBJ subset: `v x y z`, `f i j k ...` (1-based, negative indices
// relative to the current vertex count, `i/t/n` attribute forms accepted),
// `#` comments and blank lines. Everything else bumps the skip counter.
// Polygons with more than 3 vertices are fan-triangulated from their first
// vertex. Throws data_error on malformed input.
RawMesh parse_obj(std::istream& in, ObjParseStats* stats = nullptr);
RawMesh parse_obj(const std::string& text, ObjParseStats* stats = nullptr);
RawMesh load_obj(const std::string& path, ObjParseStats* stats = nullptr);

// Deterministic output: vertices then faces in stored order, 6 decimals.
std::string write_obj(const RawMesh& mesh);
void save_obj(const RawMesh& mesh, const std::string& path);

// Connected components via union-find over shared vertices; a face is
// degenerate when it repeats a vertex index, duplicate when an earlier face
// uses the same unordered vertex set.
MeshReport analyze(const RawMesh& mesh);

}  // namespace facetok
