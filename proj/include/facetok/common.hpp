#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace facetok {

// Exit-code mapping: usage_error -> 1, data_error -> 2, numeric_error -> 3.
struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

// Level comes from FACE_LOG (quiet|info|debug), default info.
LogLevel log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  bool operator==(const Vec3& o) const = default;
};

inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) { return a / norm(a); }

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic RNG, identical streams on every platform. The std
// distributions are implementation-defined, so everything is hand-rolled.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {
    // warm up so nearby seeds diverge
    splitmix64(state_);
    splitmix64(state_);
  }

  uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t below(uint64_t n) { return next_u64() % n; }

  bool coin() { return (next_u64() & 1u) != 0; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  // independent child stream
  Rng child(uint64_t tag) const {
    uint64_t s = state_ ^ (0xd1342543de82ef95ULL * (tag + 1));
    return Rng(s);
  }

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0;
};

// Stable seed derivation for (seed, stream, index) tuples.
inline uint64_t seed_combine(uint64_t seed, uint64_t stream, uint64_t index = 0) {
  uint64_t s = seed;
  splitmix64(s);
  s ^= 0x9e3779b97f4a7c15ULL * (stream + 1);
  splitmix64(s);
  s ^= 0xc2b2ae3d27d4eb4fULL * (index + 1);
  return s;
}

}  // namespace facetok
