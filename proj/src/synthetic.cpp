#include "facetok/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace facetok {

namespace {

constexpr double kPi = 3.14159265358979323846;

RawMesh make_cube() {
  RawMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.push_back({(i & 1) ? 0.5 : -0.5, (i & 2) ? 0.5 : -0.5, (i & 4) ? 0.5 : -0.5});
  m.faces = {{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6}, {0, 1, 5}, {0, 5, 4},
             {2, 6, 7}, {2, 7, 3}, {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};
  return m;
}

RawMesh make_icosphere(int subdiv) {
  if (subdiv < 0 || subdiv > 4) throw data_error("icosphere subdiv must be in [0, 4]");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  RawMesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : m.vertices) v = normalized(v) * 0.5;
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdiv; ++s) {
    std::map<std::pair<int, int>, int> midpoints;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      const int id = int(m.vertices.size());
      m.vertices.push_back(normalized(m.vertices[a] + m.vertices[b]) * 0.5);
      midpoints.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
      const int ab = midpoint(f[0], f[1]);
      const int bc = midpoint(f[1], f[2]);
      const int ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.faces = std::move(next);
  }
  return m;
}

RawMesh make_cylinder(int segments) {
  if (segments < 3 || segments > 256) throw data_error("cylinder segments must be in [3, 256]");
  RawMesh m;
  for (int ring = 0; ring < 2; ++ring) {
    const double z = ring == 0 ? -0.5 : 0.5;
    for (int i = 0; i < segments; ++i) {
      const double a = 2.0 * kPi * i / segments;
      m.vertices.push_back({0.5 * std::cos(a), 0.5 * std::sin(a), z});
    }
  }
  const int top = segments;
  for (int i = 0; i < segments; ++i) {
    const int j = (i + 1) % segments;
    m.faces.push_back({i, j, top + j});
    m.faces.push_back({i, top + j, top + i});
  }
  for (int i = 1; i + 1 < segments; ++i) {
    m.faces.push_back({0, i + 1, i});                       // bottom cap, -z
    m.faces.push_back({top, top + i, top + i + 1});         // top cap, +z
  }
  return m;
}

RawMesh make_torus(int seg_major, int seg_minor) {
  if (seg_major < 3 || seg_minor < 3 || seg_major > 128 || seg_minor > 128)
    throw data_error("torus segments must be in [3, 128]");
  const double major = 0.35, minor = 0.15;
  RawMesh m;
  for (int i = 0; i < seg_major; ++i) {
    const double u = 2.0 * kPi * i / seg_major;
    for (int j = 0; j < seg_minor; ++j) {
      const double v = 2.0 * kPi * j / seg_minor;
      const double ring = major + minor * std::cos(v);
      m.vertices.push_back({ring * std::cos(u), ring * std::sin(u), minor * std::sin(v)});
    }
  }
  auto id = [&](int i, int j) { return (i % seg_major) * seg_minor + (j % seg_minor); };
  for (int i = 0; i < seg_major; ++i)
    for (int j = 0; j < seg_minor; ++j) {
      m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return m;
}

RawMesh make_multi(int parts, Rng& rng) {
  if (parts < 1 || parts > 16) throw data_error("multi_component parts must be in [1, 16]");
  RawMesh m;
  for (int p = 0; p < parts; ++p) {
    RawMesh part = make_cube();
    const double size = 0.5 + 0.5 * rng.uniform();  // half extent in [0.25, 0.5]
    const double spacing = 2.5;
    const int base = int(m.vertices.size());
    for (const auto& v : part.vertices)
      m.vertices.push_back({v.x * size + p * spacing, v.y * size, v.z * size});
    for (const auto& f : part.faces)
      m.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
  }
  return m;
}

}  // namespace

RawMesh gen_synthetic(const SyntheticSpec& spec) {
  Rng rng(seed_combine(spec.seed, 0x5e));
  RawMesh m;
  switch (spec.kind) {
    case ShapeKind::cube: m = make_cube(); break;
    case ShapeKind::icosphere: m = make_icosphere(spec.subdiv); break;
    case ShapeKind::cylinder: m = make_cylinder(spec.segments); break;
    case ShapeKind::torus: m = make_torus(spec.seg_major, spec.seg_minor); break;
    case ShapeKind::multi_component: m = make_multi(spec.parts, rng); break;
  }
  if (spec.scale_jitter > 0) {
    if (spec.scale_jitter >= 1.0) throw data_error("scale jitter must be < 1");
    for (int a = 0; a < 3; ++a) {
      const double f = rng.uniform(1.0 - spec.scale_jitter, 1.0 + spec.scale_jitter);
      for (auto& v : m.vertices) v[a] *= f;
    }
  }
  if (spec.noise > 0) {
    for (auto& v : m.vertices)
      for (int a = 0; a < 3; ++a) v[a] += rng.uniform(-spec.noise, spec.noise);
  }
  m.validate();
  return m;
}

namespace {

ShapeKind kind_from_name(const std::string& name) {
  if (name == "cube") return ShapeKind::cube;
  if (name == "icosphere") return ShapeKind::icosphere;
  if (name == "cylinder") return ShapeKind::cylinder;
  if (name == "torus") return ShapeKind::torus;
  if (name == "multi") return ShapeKind::multi_component;
  throw data_error("unknown shape kind '" + name + "'");
}

const char* kind_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::cube: return "cube";
    case ShapeKind::icosphere: return "icosphere";
    case ShapeKind::cylinder: return "cylinder";
    case ShapeKind::torus: return "torus";
    case ShapeKind::multi_component: return "multi";
  }
  return "?";
}

}  // namespace

SyntheticSpec SyntheticSpec::parse(const std::string& line) {
  std::istringstream in(line);
  std::string kind_token;
  in >> kind_token;
  SyntheticSpec spec;
  spec.kind = kind_from_name(kind_token);
  std::string kv;
  while (in >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw data_error("expected key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    try {
      if (key == "subdiv") spec.subdiv = std::stoi(value);
      else if (key == "segments") spec.segments = std::stoi(value);
      else if (key == "major") spec.seg_major = std::stoi(value);
      else if (key == "minor") spec.seg_minor = std::stoi(value);
      else if (key == "parts") spec.parts = std::stoi(value);
      else if (key == "jitter") spec.scale_jitter = std::stod(value);
      else if (key == "noise") spec.noise = std::stod(value);
      else if (key == "seed") spec.seed = std::stoull(value);
      else throw data_error("unknown shape parameter '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw data_error("bad value for '" + key + "': " + value);
    }
  }
  return spec;
}

std::string SyntheticSpec::to_line() const {
  std::ostringstream out;
  out << kind_name(kind);
  switch (kind) {
    case ShapeKind::icosphere: out << " subdiv=" << subdiv; break;
    case ShapeKind::cylinder: out << " segments=" << segments; break;
    case ShapeKind::torus: out << " major=" << seg_major << " minor=" << seg_minor; break;
    case ShapeKind::multi_component: out << " parts=" << parts; break;
    case ShapeKind::cube: break;
  }
  if (scale_jitter > 0) out << " jitter=" << scale_jitter;
  if (noise > 0) out << " noise=" << noise;
  out << " seed=" << seed;
  return out.str();
}

std::vector<SyntheticSpec> parse_spec_file(const std::string& text) {
  std::vector<SyntheticSpec> specs;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    specs.push_back(SyntheticSpec::parse(line.substr(first)));
  }
  return specs;
}

}  // namespace facetok
