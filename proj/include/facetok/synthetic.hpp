#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "facetok/mesh.hpp"

namespace facetok {

enum class ShapeKind { cube, icosphere, cylinder, torus, multi_component };

// Face counts by construction: cube 12, icosphere(s) 20*4^s,
// cylinder(n) 4n-4, torus(a,b) 2ab, multi_component(p) 12p.
struct SyntheticSpec {
  ShapeKind kind = ShapeKind::cube;
  int subdiv = 0;      // icosphere
  int segments = 8;    // cylinder
  int seg_major = 8;   // torus
  int seg_minor = 6;   // torus
  int parts = 2;       // multi_component
  double scale_jitter = 0.0;  // per-axis factor uniform in [1-j, 1+j]
  double noise = 0.0;         // per-axis vertex displacement, object units
  uint64_t seed = 0;

  // One line per mesh: "kind key=value ...", e.g. "torus major=8 minor=6 seed=3".
  static SyntheticSpec parse(const std::string& line);
  std::string to_line() const;
};

RawMesh gen_synthetic(const SyntheticSpec& spec);

std::vector<SyntheticSpec> parse_spec_file(const std::string& text);

}  // namespace facetok
