#include "facetok/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace facetok {

void RawMesh::validate() const {
  const int nv = int(vertices.size());
  for (const auto& f : faces) {
    for (int idx : f) {
      if (idx < 0 || idx >= nv)
        throw data_error("face index " + std::to_string(idx) + " out of range [0, " +
                         std::to_string(nv) + ")");
    }
  }
}

namespace {

// Leading token of an `f` entry: vertex index before any '/': "12/3/4" -> 12.
int parse_face_index(std::string_view entry, int vertex_count) {
  const size_t slash = entry.find('/');
  if (slash != std::string_view::npos) entry = entry.substr(0, slash);
  int value = 0;
  auto [ptr, ec] = std::from_chars(entry.data(), entry.data() + entry.size(), value);
  if (ec != std::errc() || ptr != entry.data() + entry.size())
    throw data_error("malformed face index '" + std::string(entry) + "'");
  if (value == 0) throw data_error("face index 0 is invalid (OBJ indices are 1-based)");
  int idx = value > 0 ? value - 1 : vertex_count + value;
  if (idx < 0 || idx >= vertex_count)
    throw data_error("face index " + std::string(entry) + " out of range with " +
                     std::to_string(vertex_count) + " vertices");
  return idx;
}

double parse_coord(std::string_view tok, int line_no) {
  double value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw data_error("malformed numeric literal '" + std::string(tok) + "' on line " +
                     std::to_string(line_no));
  return value;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

RawMesh parse_obj(std::istream& in, ObjParseStats* stats) {
  RawMesh mesh;
  std::string line;
  int line_no = 0;
  int skipped = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = split_ws(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks[0] == "v") {
      if (toks.size() < 4)
        throw data_error("vertex with fewer than 3 coordinates on line " +
                         std::to_string(line_no));
      mesh.vertices.push_back({parse_coord(toks[1], line_no), parse_coord(toks[2], line_no),
                               parse_coord(toks[3], line_no)});
    } else if (toks[0] == "f") {
      if (toks.size() < 4)
        throw data_error("face with fewer than 3 vertices on line " + std::to_string(line_no));
      std::vector<int> poly;
      poly.reserve(toks.size() - 1);
      for (size_t t = 1; t < toks.size(); ++t)
        poly.push_back(parse_face_index(toks[t], int(mesh.vertices.size())));
      for (size_t t = 1; t + 1 < poly.size(); ++t)
        mesh.faces.push_back({poly[0], poly[t], poly[t + 1]});
    } else {
      ++skipped;
    }
  }
  if (stats) stats->skipped_line_count = skipped;
  if (skipped > 0)
    log_debug("parse_obj: skipped " + std::to_string(skipped) + " non-geometry lines");
  mesh.validate();
  return mesh;
}

RawMesh parse_obj(const std::string& text, ObjParseStats* stats) {
  std::istringstream in(text);
  return parse_obj(in, stats);
}

RawMesh load_obj(const std::string& path, ObjParseStats* stats) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open '" + path + "'");
  return parse_obj(in, stats);
}

std::string write_obj(const RawMesh& mesh) {
  std::string out;
  out.reserve(mesh.vertices.size() * 40 + mesh.faces.size() * 20);
  char buf[128];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.6f %.6f %.6f\n", v.x, v.y, v.z);
    out += buf;
  }
  for (const auto& f : mesh.faces) {
    std::snprintf(buf, sizeof(buf), "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
    out += buf;
  }
  return out;
}

void save_obj(const RawMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write '" + path + "'");
  out << write_obj(mesh);
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

MeshReport analyze(const RawMesh& mesh) {
  mesh.validate();
  MeshReport report;
  if (!mesh.vertices.empty()) {
    report.bbox_min = report.bbox_max = mesh.vertices[0];
    for (const auto& v : mesh.vertices)
      for (int a = 0; a < 3; ++a) {
        report.bbox_min[a] = std::min(report.bbox_min[a], v[a]);
        report.bbox_max[a] = std::max(report.bbox_max[a], v[a]);
      }
  }

  UnionFind uf(int(mesh.vertices.size()));
  std::map<std::array<int, 3>, int> seen;
  std::vector<char> referenced(mesh.vertices.size(), 0);
  for (const auto& f : mesh.faces) {
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) ++report.degenerate_face_count;
    std::array<int, 3> key = f;
    std::sort(key.begin(), key.end());
    if (++seen[key] > 1) ++report.duplicate_face_count;
    uf.unite(f[0], f[1]);
    uf.unite(f[1], f[2]);
    for (int idx : f) referenced[idx] = 1;
  }

  std::vector<char> root_seen(mesh.vertices.size(), 0);
  for (size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (!referenced[v]) continue;
    int r = uf.find(int(v));
    if (!root_seen[r]) {
      root_seen[r] = 1;
      ++report.component_count;
    }
  }
  return report;
}

}  // namespace facetok
