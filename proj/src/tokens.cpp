#include "facetok/tokens.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>

namespace facetok {

FaceTokenSequence encode(const OrderedFaceSequence& seq) {
  FaceTokenSequence out;
  out.resolution = seq.resolution;
  out.tokens.reserve(seq.faces.size() + 1);
  for (const auto& f : seq.faces) {
    FaceToken t;
    for (int s = 0; s < 9; ++s) {
      if (f[s] < 0 || f[s] >= seq.resolution)
        throw data_error("coordinate " + std::to_string(f[s]) + " outside [0, " +
                         std::to_string(seq.resolution) + ")");
      t.slots[s] = f[s];
    }
    out.tokens.push_back(t);
  }
  out.tokens.push_back(FaceToken::eos(out.vocab()));
  return out;
}

QuantizedMesh decode(const FaceTokenSequence& tokens, DecodeStats* stats) {
  if (tokens.tokens.empty()) throw data_error("cannot decode an empty token stream");
  const Vocabulary vocab = tokens.vocab();

  QuantizedMesh mesh;
  mesh.resolution = tokens.resolution;
  std::map<std::array<int, 3>, int> vertex_ids;
  DecodeStats local;

  for (size_t i = 0; i < tokens.tokens.size(); ++i) {
    const FaceToken& t = tokens.tokens[i];
    if (t.is_eos(vocab)) {
      if (i + 1 != tokens.tokens.size())
        throw data_error("EOS token before end of stream");
      break;
    }
    std::array<int, 3> ids;
    for (int v = 0; v < 3; ++v) {
      std::array<int, 3> coord;
      for (int a = 0; a < 3; ++a) {
        const int slot = 3 * v + a;
        const int value = t.slots[slot];
        if (value == vocab.eos_id() && slot != 0)
          throw data_error("EOS id in slot " + std::to_string(slot) + " of face " +
                           std::to_string(i));
        if (value < 0 || value >= vocab.size())
          throw data_error("token id out of vocabulary range");
        coord[a] = value;
      }
      auto [it, inserted] = vertex_ids.try_emplace(coord, int(mesh.vertices.size()));
      if (inserted) mesh.vertices.push_back(coord);
      ids[v] = it->second;
    }
    if (ids[0] == ids[1] || ids[1] == ids[2] || ids[0] == ids[2]) {
      ++local.dropped_degenerate;
      continue;
    }
    mesh.faces.push_back(ids);
  }
  if (stats) *stats = local;
  mesh.validate();
  return mesh;
}

std::vector<int> flatten_baseline(const OrderedFaceSequence& seq) {
  std::vector<int> out;
  out.reserve(seq.faces.size() * 9);
  for (const auto& f : seq.faces)
    for (int s = 0; s < 9; ++s) out.push_back(f[s]);
  return out;
}

double compression_ratio(const FaceTokenSequence& tokens) {
  const int n = tokens.content_faces();
  if (n < 1) throw data_error("compression ratio undefined for empty meshes");
  return double(tokens.tokens.size()) / (9.0 * double(n));
}

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}
void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}
void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(uint8_t(v));
  out.push_back(uint8_t(v >> 8));
}

struct ByteReader {
  const std::vector<uint8_t>& bytes;
  size_t pos = 0;
  uint8_t u8() {
    if (pos >= bytes.size()) throw data_error("truncated token dump");
    return bytes[pos++];
  }
  uint16_t u16() { return uint16_t(u8()) | uint16_t(u8()) << 8; }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(u8()) << (8 * i);
    return v;
  }
  uint64_t u64() {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(u8()) << (8 * i);
    return v;
  }
};

constexpr uint32_t kFtokVersion = 1;

}  // namespace

std::vector<uint8_t> ftok_bytes(const FaceTokenSequence& tokens) {
  std::vector<uint8_t> out;
  out.reserve(20 + tokens.tokens.size() * 18);
  out.insert(out.end(), {'F', 'T', 'O', 'K'});
  put_u32(out, kFtokVersion);
  put_u32(out, uint32_t(tokens.resolution));
  put_u64(out, tokens.tokens.size());
  for (const auto& t : tokens.tokens)
    for (int s = 0; s < 9; ++s) put_u16(out, uint16_t(t.slots[s]));
  return out;
}

FaceTokenSequence ftok_parse(const std::vector<uint8_t>& bytes) {
  ByteReader r{bytes};
  char magic[4];
  for (char& c : magic) c = char(r.u8());
  if (std::memcmp(magic, "FTOK", 4) != 0) throw data_error("bad token dump magic");
  const uint32_t version = r.u32();
  if (version != kFtokVersion)
    throw data_error("unsupported token dump version " + std::to_string(version));
  FaceTokenSequence out;
  out.resolution = int(r.u32());
  const uint64_t count = r.u64();
  out.tokens.resize(count);
  for (uint64_t i = 0; i < count; ++i)
    for (int s = 0; s < 9; ++s) out.tokens[i].slots[s] = int(r.u16());
  return out;
}

void save_ftok(const FaceTokenSequence& tokens, const std::string& path) {
  auto bytes = ftok_bytes(tokens);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

FaceTokenSequence load_ftok(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return ftok_parse(bytes);
}

std::vector<std::array<int, 9>> canonical_face_multiset(const QuantizedMesh& mesh) {
  std::vector<std::array<int, 9>> keys;
  keys.reserve(mesh.faces.size());
  for (const auto& f : mesh.faces)
    keys.push_back(
        canonical_face_key(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]));
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace facetok
