#include "facetok/prep.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <queue>

namespace facetok {

void QuantizedMesh::validate() const {
  if (resolution < 2) throw data_error("resolution must be >= 2");
  for (const auto& v : vertices)
    for (int c : v)
      if (c < 0 || c >= resolution) throw data_error("quantized coordinate out of range");
  const int nv = int(vertices.size());
  for (const auto& f : faces) {
    for (int idx : f)
      if (idx < 0 || idx >= nv) throw data_error("face index out of range");
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
      throw data_error("degenerate face in quantized mesh");
  }
}

const char* order_mode_name(OrderMode mode) {
  switch (mode) {
    case OrderMode::zyx: return "zyx";
    case OrderMode::zyx_component: return "zyx-component";
    case OrderMode::dfs: return "dfs";
    case OrderMode::bfs: return "bfs";
  }
  return "?";
}

OrderMode order_mode_from_name(const std::string& name) {
  if (name == "zyx") return OrderMode::zyx;
  if (name == "zyx-component") return OrderMode::zyx_component;
  if (name == "dfs") return OrderMode::dfs;
  if (name == "bfs") return OrderMode::bfs;
  throw usage_error("unknown order mode '" + name + "' (zyx|zyx-component|dfs|bfs)");
}

std::pair<RawMesh, NormRecord> normalize(const RawMesh& mesh) {
  if (mesh.vertices.empty()) throw data_error("cannot normalize a mesh with no vertices");
  Vec3 lo = mesh.vertices[0], hi = mesh.vertices[0];
  for (const auto& v : mesh.vertices)
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], v[a]);
      hi[a] = std::max(hi[a], v[a]);
    }
  NormRecord record;
  record.center = (lo + hi) * 0.5;
  record.scale = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
  if (record.scale <= 0.0) throw data_error("zero-extent mesh cannot be normalized");
  RawMesh out;
  out.vertices.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) out.vertices.push_back(record.apply(v));
  out.faces = mesh.faces;
  return {std::move(out), record};
}

namespace {

int quantize_coord(double x, int resolution) {
  // round-half-up, then clamp
  const double scaled = (x + 0.5) * double(resolution - 1);
  int q = int(std::floor(scaled + 0.5));
  return std::clamp(q, 0, resolution - 1);
}

}  // namespace

std::array<int, 9> canonical_face_key(const std::array<int, 3>& v0,
                                      const std::array<int, 3>& v1,
                                      const std::array<int, 3>& v2) {
  const std::array<int, 3>* vs[3] = {&v0, &v1, &v2};
  auto zyx_less = [](const std::array<int, 3>& a, const std::array<int, 3>& b) {
    if (a[2] != b[2]) return a[2] < b[2];
    if (a[1] != b[1]) return a[1] < b[1];
    return a[0] < b[0];
  };
  int first = 0;
  for (int i = 1; i < 3; ++i)
    if (zyx_less(*vs[i], *vs[first])) first = i;
  std::array<int, 9> key;
  for (int i = 0; i < 3; ++i) {
    const auto& v = *vs[(first + i) % 3];
    key[3 * i + 0] = v[2];
    key[3 * i + 1] = v[1];
    key[3 * i + 2] = v[0];
  }
  return key;
}

QuantizedMesh quantize(const RawMesh& mesh, int resolution) {
  if (resolution < 2) throw data_error("resolution must be >= 2");
  mesh.validate();

  QuantizedMesh out;
  out.resolution = resolution;

  // merge vertices by grid cell, first occurrence wins
  std::map<std::array<int, 3>, int> cell_to_id;
  std::vector<int> remap(mesh.vertices.size());
  for (size_t v = 0; v < mesh.vertices.size(); ++v) {
    std::array<int, 3> q = {quantize_coord(mesh.vertices[v].x, resolution),
                            quantize_coord(mesh.vertices[v].y, resolution),
                            quantize_coord(mesh.vertices[v].z, resolution)};
    auto [it, inserted] = cell_to_id.try_emplace(q, int(out.vertices.size()));
    if (inserted) out.vertices.push_back(q);
    remap[v] = it->second;
  }

  // drop collapsed faces; among duplicates keep the canonically smallest
  std::map<std::array<int, 3>, std::pair<std::array<int, 3>, std::array<int, 9>>> best;
  for (const auto& f : mesh.faces) {
    std::array<int, 3> m = {remap[f[0]], remap[f[1]], remap[f[2]]};
    if (m[0] == m[1] || m[1] == m[2] || m[0] == m[2]) {
      ++out.dropped_degenerate;
      continue;
    }
    std::array<int, 3> set_key = m;
    std::sort(set_key.begin(), set_key.end());
    auto key = canonical_face_key(out.vertices[m[0]], out.vertices[m[1]], out.vertices[m[2]]);
    auto it = best.find(set_key);
    if (it == best.end()) {
      best.emplace(set_key, std::make_pair(m, key));
    } else {
      ++out.dropped_duplicate;
      if (key < it->second.second) it->second = {m, key};
    }
  }
  out.faces.reserve(best.size());
  for (auto& [set_key, entry] : best) out.faces.push_back(entry.first);
  return out;
}

RawMesh dequantize(const QuantizedMesh& qmesh, bool denormalize) {
  qmesh.validate();
  RawMesh out;
  out.vertices.reserve(qmesh.vertices.size());
  const double inv = 1.0 / double(qmesh.resolution - 1);
  for (const auto& q : qmesh.vertices) {
    Vec3 v = {q[0] * inv - 0.5, q[1] * inv - 0.5, q[2] * inv - 0.5};
    out.vertices.push_back(denormalize ? qmesh.norm.invert(v) : v);
  }
  out.faces = qmesh.faces;
  return out;
}

namespace {

// rotate so the (z,y,x)-minimal vertex leads; winding preserved
std::array<int, 3> rotate_min_first(const QuantizedMesh& q, const std::array<int, 3>& f) {
  auto zyx_less = [&](int a, int b) {
    const auto& va = q.vertices[a];
    const auto& vb = q.vertices[b];
    if (va[2] != vb[2]) return va[2] < vb[2];
    if (va[1] != vb[1]) return va[1] < vb[1];
    return va[0] < vb[0];
  };
  int first = 0;
  for (int i = 1; i < 3; ++i)
    if (zyx_less(f[i], f[first])) first = i;
  return {f[first], f[(first + 1) % 3], f[(first + 2) % 3]};
}

std::array<int, 9> face_entry(const QuantizedMesh& q, const std::array<int, 3>& rotated) {
  std::array<int, 9> e;
  for (int i = 0; i < 3; ++i) {
    const auto& v = q.vertices[rotated[i]];
    e[3 * i + 0] = v[0];
    e[3 * i + 1] = v[1];
    e[3 * i + 2] = v[2];
  }
  return e;
}

std::array<int, 9> key_of_entry(const std::array<int, 9>& e) {
  // re-arrange each vertex as (z, y, x) for lexicographic comparison
  std::array<int, 9> k;
  for (int i = 0; i < 3; ++i) {
    k[3 * i + 0] = e[3 * i + 2];
    k[3 * i + 1] = e[3 * i + 1];
    k[3 * i + 2] = e[3 * i + 0];
  }
  return k;
}

struct FaceRec {
  std::array<int, 3> rotated;
  std::array<int, 9> entry;
  std::array<int, 9> key;
};

std::vector<FaceRec> canonical_faces(const QuantizedMesh& q) {
  std::vector<FaceRec> recs;
  recs.reserve(q.faces.size());
  for (const auto& f : q.faces) {
    FaceRec r;
    r.rotated = rotate_min_first(q, f);
    r.entry = face_entry(q, r.rotated);
    r.key = key_of_entry(r.entry);
    recs.push_back(r);
  }
  return recs;
}

// union-find over shared vertices, matching analyze()
std::vector<int> vertex_components(const QuantizedMesh& q) {
  std::vector<int> parent(q.vertices.size());
  for (size_t i = 0; i < parent.size(); ++i) parent[i] = int(i);
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const auto& f : q.faces) {
    parent[find(f[0])] = find(f[1]);
    parent[find(f[1])] = find(f[2]);
  }
  std::vector<int> root(q.vertices.size());
  for (size_t i = 0; i < root.size(); ++i) root[i] = find(int(i));
  return root;
}

// faces adjacent iff they share an edge
std::vector<std::vector<int>> edge_adjacency(const QuantizedMesh& q,
                                             const std::vector<int>& order_rank) {
  std::map<std::pair<int, int>, std::vector<int>> edge_faces;
  for (size_t fi = 0; fi < q.faces.size(); ++fi) {
    const auto& f = q.faces[fi];
    for (int e = 0; e < 3; ++e) {
      int a = f[e], b = f[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      edge_faces[{a, b}].push_back(int(fi));
    }
  }
  std::vector<std::vector<int>> adj(q.faces.size());
  for (const auto& [edge, fs] : edge_faces)
    for (size_t i = 0; i < fs.size(); ++i)
      for (size_t j = 0; j < fs.size(); ++j)
        if (i != j) adj[fs[i]].push_back(fs[j]);
  for (auto& nbrs : adj) {
    std::sort(nbrs.begin(), nbrs.end(),
              [&](int a, int b) { return order_rank[a] < order_rank[b]; });
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
  return adj;
}

}  // namespace

OrderedFaceSequence order_faces(const QuantizedMesh& qmesh, OrderMode mode) {
  qmesh.validate();
  OrderedFaceSequence out;
  out.order_mode = mode;
  out.resolution = qmesh.resolution;

  auto recs = canonical_faces(qmesh);
  const int n = int(recs.size());

  // indices sorted by canonical key; keys are distinct because duplicate
  // faces were dropped at quantization
  std::vector<int> by_key(n);
  for (int i = 0; i < n; ++i) by_key[i] = i;
  std::sort(by_key.begin(), by_key.end(),
            [&](int a, int b) { return recs[a].key < recs[b].key; });
  std::vector<int> rank(n);
  for (int i = 0; i < n; ++i) rank[by_key[i]] = i;

  std::vector<int> sequence;
  sequence.reserve(n);

  switch (mode) {
    case OrderMode::zyx:
      sequence = by_key;
      break;
    case OrderMode::zyx_component: {
      auto root = vertex_components(qmesh);
      // order components by their minimal face key
      std::map<int, std::vector<int>> comps;  // root -> faces in key order
      for (int i : by_key) comps[root[qmesh.faces[i][0]]].push_back(i);
      std::vector<const std::vector<int>*> ordered;
      for (const auto& [r, faces] : comps) ordered.push_back(&faces);
      std::sort(ordered.begin(), ordered.end(), [&](const auto* a, const auto* b) {
        return rank[a->front()] < rank[b->front()];
      });
      for (const auto* faces : ordered)
        sequence.insert(sequence.end(), faces->begin(), faces->end());
      break;
    }
    case OrderMode::dfs:
    case OrderMode::bfs: {
      auto adj = edge_adjacency(qmesh, rank);
      std::vector<char> visited(n, 0);
      size_t next_unvisited = 0;  // cursor into by_key
      while (int(sequence.size()) < n) {
        while (next_unvisited < by_key.size() && visited[by_key[next_unvisited]])
          ++next_unvisited;
        const int start = by_key[next_unvisited];
        if (mode == OrderMode::bfs) {
          std::queue<int> frontier;
          frontier.push(start);
          visited[start] = 1;
          while (!frontier.empty()) {
            int f = frontier.front();
            frontier.pop();
            sequence.push_back(f);
            for (int nb : adj[f])
              if (!visited[nb]) {
                visited[nb] = 1;
                frontier.push(nb);
              }
          }
        } else {
          std::vector<int> stack = {start};
          while (!stack.empty()) {
            int f = stack.back();
            stack.pop_back();
            if (visited[f]) continue;
            visited[f] = 1;
            sequence.push_back(f);
            for (auto it = adj[f].rbegin(); it != adj[f].rend(); ++it)
              if (!visited[*it]) stack.push_back(*it);
          }
        }
      }
      break;
    }
  }

  out.faces.reserve(n);
  for (int i : sequence) out.faces.push_back(recs[i].entry);
  return out;
}

RawMesh augment(const RawMesh& mesh, uint64_t seed, const AugmentParams& params) {
  mesh.validate();
  Rng rng(seed);
  RawMesh work = mesh;

  if (params.rotate) {
    double angle = params.forced_angle ? *params.forced_angle
                                       : rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    const double c = std::cos(angle), s = std::sin(angle);
    const int axis = params.rotation_axis;
    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
    for (auto& p : work.vertices) {
      const double pu = p[u], pv = p[v];
      p[u] = c * pu - s * pv;
      p[v] = s * pu + c * pv;
    }
  }

  int flipped_axes = 0;
  if (params.flip) {
    std::array<bool, 3> flips;
    for (int a = 0; a < 3; ++a)
      flips[a] = params.forced_flips ? (*params.forced_flips)[a] : rng.coin();
    for (int a = 0; a < 3; ++a) {
      if (!flips[a]) continue;
      ++flipped_axes;
      for (auto& p : work.vertices) p[a] = -p[a];
    }
  }
  if (flipped_axes % 2 == 1) {
    // mirroring inverts orientation; reverse winding to keep normals outward
    for (auto& f : work.faces) std::swap(f[1], f[2]);
  }

  if (params.scale) {
    std::array<double, 3> factors;
    for (int a = 0; a < 3; ++a)
      factors[a] = params.forced_scales ? (*params.forced_scales)[a] : rng.uniform(0.75, 1.25);
    for (auto& p : work.vertices)
      for (int a = 0; a < 3; ++a) p[a] *= factors[a];
  }

  return normalize(work).first;
}

}  // namespace facetok
