#include "facetok/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace facetok {

PointCloud sample_surface(const RawMesh& mesh, int count, uint64_t seed) {
  mesh.validate();
  if (mesh.faces.empty()) throw data_error("cannot sample a mesh with no faces");

  std::vector<double> cumulative(mesh.faces.size());
  std::vector<Vec3> face_normals(mesh.faces.size());
  double total = 0.0;
  for (size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    const Vec3 e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
    const Vec3 e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
    const Vec3 c = cross(e1, e2);
    const double area2 = norm(c);
    total += 0.5 * area2;
    cumulative[i] = total;
    face_normals[i] = area2 > 0 ? c / area2 : Vec3{0, 0, 1};
  }
  if (total <= 0.0) throw data_error("mesh has zero total surface area");

  PointCloud cloud;
  cloud.points.reserve(count);
  cloud.normals.reserve(count);
  Rng rng(seed);
  for (int p = 0; p < count; ++p) {
    const double pick = rng.uniform() * total;
    const size_t fi = std::lower_bound(cumulative.begin(), cumulative.end(), pick) -
                      cumulative.begin();
    const auto& f = mesh.faces[std::min(fi, mesh.faces.size() - 1)];
    double u = rng.uniform();
    double v = rng.uniform();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const Vec3& a = mesh.vertices[f[0]];
    cloud.points.push_back(a + (mesh.vertices[f[1]] - a) * u + (mesh.vertices[f[2]] - a) * v);
    cloud.normals.push_back(face_normals[std::min(fi, mesh.faces.size() - 1)]);
  }
  return cloud;
}

std::vector<int> fps(const PointCloud& cloud, int k, uint64_t seed) {
  const int m = int(cloud.size());
  if (k > m) throw data_error("fps: k exceeds point count");
  std::vector<int> picked;
  if (k <= 0) return picked;
  picked.reserve(k);

  const int start = m > 0 ? int(seed % uint64_t(m)) : 0;
  picked.push_back(start);

  std::vector<double> min_dist2(m, std::numeric_limits<double>::infinity());
  int last = start;
  for (int round = 1; round < k; ++round) {
    int best = -1;
    double best_dist2 = -1.0;
    for (int i = 0; i < m; ++i) {
      const Vec3 d = cloud.points[i] - cloud.points[last];
      const double dist2 = dot(d, d);
      if (dist2 < min_dist2[i]) min_dist2[i] = dist2;
      if (min_dist2[i] > best_dist2) {  // strict comparison keeps lowest index on ties
        best_dist2 = min_dist2[i];
        best = i;
      }
    }
    picked.push_back(best);
    last = best;
  }
  return picked;
}

namespace {

void put_f32(std::vector<uint8_t>& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t(bits >> (8 * i)));
}

}  // namespace

std::vector<uint8_t> fpc_bytes(const PointCloud& cloud) {
  std::vector<uint8_t> out;
  out.reserve(12 + cloud.size() * 24);
  out.insert(out.end(), {'F', 'P', 'C', '1'});
  const uint64_t m = cloud.size();
  for (int i = 0; i < 8; ++i) out.push_back(uint8_t(m >> (8 * i)));
  for (size_t p = 0; p < cloud.size(); ++p) {
    for (int a = 0; a < 3; ++a) put_f32(out, float(cloud.points[p][a]));
    for (int a = 0; a < 3; ++a) put_f32(out, float(cloud.normals[p][a]));
  }
  return out;
}

PointCloud fpc_parse(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "FPC1", 4) != 0)
    throw data_error("bad point cloud dump magic");
  uint64_t m = 0;
  for (int i = 0; i < 8; ++i) m |= uint64_t(bytes[4 + i]) << (8 * i);
  if (bytes.size() != 12 + m * 24) throw data_error("point cloud dump size mismatch");
  PointCloud cloud;
  cloud.points.resize(m);
  cloud.normals.resize(m);
  size_t pos = 12;
  auto f32 = [&]() {
    uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= uint32_t(bytes[pos++]) << (8 * i);
    float v;
    std::memcpy(&v, &bits, 4);
    return double(v);
  };
  for (uint64_t p = 0; p < m; ++p) {
    for (int a = 0; a < 3; ++a) cloud.points[p][a] = f32();
    for (int a = 0; a < 3; ++a) cloud.normals[p][a] = f32();
  }
  return cloud;
}

void save_fpc(const PointCloud& cloud, const std::string& path) {
  auto bytes = fpc_bytes(cloud);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

PointCloud load_fpc(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return fpc_parse(bytes);
}

}  // namespace facetok
