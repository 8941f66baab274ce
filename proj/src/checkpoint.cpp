#include "facetok/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "facetok/common.hpp"

namespace facetok {

namespace {

constexpr char kMagic[8] = {'F', 'A', 'C', 'E', 'A', 'R', 'A', 'E'};
constexpr uint32_t kVersion = 1;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}
void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

struct Reader {
  const std::vector<uint8_t>& bytes;
  size_t pos = 0;
  void need(size_t n) const {
    if (pos + n > bytes.size()) throw data_error("truncated checkpoint");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(bytes[pos++]) << (8 * i);
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(bytes[pos++]) << (8 * i);
    return v;
  }
  std::string str(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
};

}  // namespace

const Tensor<float>* CheckpointData::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

std::vector<uint8_t> checkpoint_bytes(const CheckpointData& data) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 8);
  put_u32(out, kVersion);
  put_u64(out, data.config_text.size());
  out.insert(out.end(), data.config_text.begin(), data.config_text.end());
  put_u64(out, data.tensors.size());
  for (const auto& [name, tensor] : data.tensors) {
    put_u32(out, uint32_t(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(0);  // dtype 0 = f32
    put_u32(out, uint32_t(tensor.shape.size()));
    for (int d : tensor.shape) put_u32(out, uint32_t(d));
    for (float v : tensor.data) {
      uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_u32(out, bits);
    }
  }
  return out;
}

CheckpointData checkpoint_parse(const std::vector<uint8_t>& bytes) {
  Reader r{bytes};
  r.need(8);
  if (std::memcmp(bytes.data(), kMagic, 8) != 0) throw data_error("bad checkpoint magic");
  r.pos = 8;
  const uint32_t version = r.u32();
  if (version != kVersion)
    throw data_error("unsupported checkpoint version " + std::to_string(version));
  CheckpointData data;
  data.config_text = r.str(size_t(r.u64()));
  const uint64_t count = r.u64();
  data.tensors.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    const std::string name = r.str(r.u32());
    r.need(1);
    const uint8_t dtype = bytes[r.pos++];
    if (dtype != 0) throw data_error("unsupported tensor dtype in checkpoint");
    const uint32_t rank = r.u32();
    std::vector<int> shape(rank);
    for (uint32_t d = 0; d < rank; ++d) shape[d] = int(r.u32());
    Tensor<float> tensor(shape);
    for (int64_t e = 0; e < tensor.size(); ++e) {
      const uint32_t bits = r.u32();
      std::memcpy(&tensor.data[size_t(e)], &bits, 4);
    }
    data.tensors.emplace_back(name, std::move(tensor));
  }
  return data;
}

void save_checkpoint(const std::string& path, const CheckpointData& data) {
  const auto bytes = checkpoint_bytes(data);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) throw data_error("short write to '" + path + "'");
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return checkpoint_parse(bytes);
}

}  // namespace facetok
