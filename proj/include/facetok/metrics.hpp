#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "facetok/mesh.hpp"
#include "facetok/sampling.hpp"

namespace facetok {

struct EvalResult {
  double chamfer = 0;
  double hausdorff = 0;
  int n_samples = 0;
  uint64_t seed = 0;
};

// 0.5 * (mean_a min_b |a-b| + mean_b min_a |a-b|), plain L2 distances.
double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// max(max_a min_b |a-b|, max_b min_a |a-b|)
double hausdorff(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// Both meshes are mapped through the ground truth's NormRecord, then
// surface-sampled with n points each from one seed stream; CD/HD on
// positions only.
EvalResult eval_reconstruction(const RawMesh& gt, const RawMesh& pred, int n_samples,
                               uint64_t seed);

struct CompressionRow {
  std::string name;
  long faces = 0;       // -1 for published reference rows
  long face_tokens = 0;
  long baseline_tokens = 0;
  double ratio = 0;
  bool published = false;
};

struct CompressionReport {
  std::vector<CompressionRow> rows;  // per-mesh, then aggregate, then published
  std::string to_csv() const;
  std::string to_text() const;
};

// Per-mesh and aggregate token counts at resolution R, plus the published
// reference ratios appended as literal rows (never recomputed).
CompressionReport compression_report(const std::vector<std::string>& names,
                                     const std::vector<RawMesh>& meshes, int resolution);

const std::vector<CompressionRow>& published_compression_rows();

}  // namespace facetok
