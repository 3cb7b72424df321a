#pragma once

#include <array>
#include <bit>
#include <cstdint>

namespace spmbd::rng {

/// What a stream is used for. Combined with the step index into a stream id.
enum class Purpose : std::uint64_t {
  kInitialSampling = 1,
  kBirthCount = 2,
  kBirths = 3,
  kDiffusion = 4,
  kAnnihilation = 5,
  kResample = 6,
  kTest = 15,
};

/// Stream id for a purpose at a given time step.
constexpr std::uint64_t stream_id(Purpose purpose, std::uint64_t step = 0) {
  return (static_cast<std::uint64_t>(purpose) << 56) ^ step;
}

/// Philox4x32-10 block function. Exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Counter-based random stream.
///
/// The key is derived from (seed, stream id) and the chunk id occupies the high
/// half of the 128-bit counter, so every (seed, id, chunk) triple addresses its
/// own sequence without shared state. Streams are cheap to construct and
/// single-owner.
namespace detail {

struct ZigguratTable {
  static constexpr int kLayers = 256;
  static constexpr double kTailStart = 3.6541528853610088;
  static constexpr double kLayerArea = 0.00492867323399;

  ZigguratTable();

  std::array<double, kLayers + 1> x{};
  std::array<double, kLayers + 1> f{};
};

extern const ZigguratTable kZiggurat;

// Eight consecutive Philox blocks of one stream as sixteen 64-bit words; the
// simd variant must agree bit for bit with the scalar one.
void philox8_scalar(std::array<std::uint32_t, 2> key, std::uint64_t chunk, std::uint64_t first_block,
                    std::uint64_t* out);
void philox8_simd(std::array<std::uint32_t, 2> key, std::uint64_t chunk, std::uint64_t first_block,
                  std::uint64_t* out);
bool simd_supported();

}  // namespace detail

class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t id, std::uint64_t chunk);

  std::uint64_t next_u64() {
    if (next_ == kWords) refill();
    return buffer_[next_++];
  }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(static_cast<std::int64_t>(next_u64() >> 11)) * 0x1.0p-53; }
  /// Uniform on (0, 1).
  double uniform_open() { return (static_cast<double>(static_cast<std::int64_t>(next_u64() >> 11)) + 0.5) * 0x1.0p-53; }
  /// Standard normal (ziggurat).
  double normal() {
    const std::uint64_t bits = next_u64();
    const auto layer = static_cast<int>(bits & 0xFF);
    const bool negative = (bits >> 8) & 1;
    const double x = static_cast<double>(static_cast<std::int64_t>(bits >> 11)) * 0x1.0p-53 * detail::kZiggurat.x[layer];
    if (x < detail::kZiggurat.x[layer + 1]) {
      // sign applied without a branch; the sign bit is a coin flip
      return std::bit_cast<double>(std::bit_cast<std::uint64_t>(x) ^ ((bits & 0x100) << 55));
    }
    return normal_edge(layer, negative, x);
  }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  void refill();
  double normal_edge(int layer, bool negative, double x);

  std::array<std::uint32_t, 2> key_{};
  std::uint64_t block_ = 0;
  std::uint64_t chunk_ = 0;
  static constexpr int kBlocks = 8;  // matches philox8_*
  static constexpr int kWords = 2 * kBlocks;

  std::array<std::uint64_t, kWords> buffer_{};
  int next_ = kWords;
};

/// All streams of one (seed, purpose, step) family; chunk k gets stream(k).
class StreamFamily {
 public:
  StreamFamily(std::uint64_t seed, std::uint64_t id) : seed_(seed), id_(id) {}

  Stream stream(std::uint64_t chunk) const { return {seed_, id_, chunk}; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t id() const { return id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t id_;
};

/// Returns the stream for (seed, purpose id, chunk id).
inline Stream split(std::uint64_t seed, std::uint64_t id, std::uint64_t chunk) {
  return {seed, id, chunk};
}

}  // namespace spmbd::rng
