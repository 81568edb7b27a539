#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowcast {

// Error taxonomy shared by the whole library. The C API and the CLI map
// these onto status/exit codes, so every throw site picks the category
// deliberately: parse/validation/data -> bad input, config -> bad setup,
// param -> caller contract violation.
enum class errc {
  parse,
  validation,
  config,
  data,
  param,
  io,
  internal,
};

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void throw_parse(const std::string& msg) { throw error(errc::parse, msg); }
[[noreturn]] inline void throw_validation(const std::string& msg) { throw error(errc::validation, msg); }
[[noreturn]] inline void throw_config(const std::string& msg) { throw error(errc::config, msg); }
[[noreturn]] inline void throw_data(const std::string& msg) { throw error(errc::data, msg); }
[[noreturn]] inline void throw_param(const std::string& msg) { throw error(errc::param, msg); }
[[noreturn]] inline void throw_io(const std::string& msg) { throw error(errc::io, msg); }

// 64-bit FNV-1a, keyed by xor-folding the seed into the offset basis.
// Used for feature hashing and config fingerprints; must stay stable
// across platforms and releases.
inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed = 0) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t seed = 0) {
  return fnv1a64(s.data(), s.size(), seed);
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic xoshiro256** generator. std::mt19937 would also be
// reproducible, but the distributions on top of it are not specified by
// the standard; everything here is derived from raw 64-bit draws so the
// stream is identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1). 53 significant bits, exact arithmetic only.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Unbiased integer in [0, n) via rejection sampling.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw_param("next_below: n must be positive");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  bool bernoulli(double p) { return next_double() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
};

// Derives an independent stream for a subcomponent (fold index, task
// index, ...) without correlating with the parent stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL + salt * 0xd1342543de82ef95ULL);
  return splitmix64(s);
}

}  // namespace flowcast
