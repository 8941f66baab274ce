#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "facetok/prep.hpp"

namespace facetok {

// Coordinate ids 0..R-1 plus one reserved end-of-sequence id R.
struct Vocabulary {
  int resolution = 0;

  int eos_id() const { return resolution; }
  int size() const { return resolution + 1; }
};

struct FaceToken {
  std::array<int, 9> slots = {};

  bool is_eos(const Vocabulary& vocab) const { return slots[0] == vocab.eos_id(); }

  static FaceToken eos(const Vocabulary& vocab) {
    FaceToken t;
    t.slots[0] = vocab.eos_id();
    return t;
  }
};

// N content faces followed by exactly one EOS token.
struct FaceTokenSequence {
  std::vector<FaceToken> tokens;
  int resolution = 0;

  Vocabulary vocab() const { return Vocabulary{resolution}; }
  int content_faces() const { return int(tokens.size()) - 1; }
};

struct DecodeStats {
  int dropped_degenerate = 0;
};

// One token per face, slots in (v0.x v0.y v0.z v1.x ... v2.z) order, EOS
// appended. Throws data_error on out-of-range coordinates.
FaceTokenSequence encode(const OrderedFaceSequence& seq);

// Inverse: deduplicate coordinate triples into vertices, drop faces that
// collapse, reject streams with EOS anywhere but a final token's slot 0.
// A missing EOS (sampling stopped at the face limit) is accepted.
QuantizedMesh decode(const FaceTokenSequence& tokens, DecodeStats* stats = nullptr);

// Baseline representation: one token per coordinate, length 9N.
std::vector<int> flatten_baseline(const OrderedFaceSequence& seq);

// (N+1) / (9N); the EOS-free ratio is exactly 1/9.
double compression_ratio(const FaceTokenSequence& tokens);

// Binary dump, little-endian: "FTOK" u32 version u32 R u64 count, then nine
// u16 slots per token (EOS face stored as slot0=R, slots1..8=0).
std::vector<uint8_t> ftok_bytes(const FaceTokenSequence& tokens);
FaceTokenSequence ftok_parse(const std::vector<uint8_t>& bytes);
void save_ftok(const FaceTokenSequence& tokens, const std::string& path);
FaceTokenSequence load_ftok(const std::string& path);

// Multiset of canonical face keys; equality of two meshes' multisets is the
// round-trip test.
std::vector<std::array<int, 9>> canonical_face_multiset(const QuantizedMesh& mesh);

}  // namespace facetok
