#include "spmbd/rng.hpp"

#include <array>
#include <cmath>

#if defined(__x86_64__)
#include <immintrin.h>
#endif

namespace spmbd::rng {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

Stream::Stream(std::uint64_t seed, std::uint64_t id, std::uint64_t chunk) : chunk_(chunk) {
  const std::uint64_t k = splitmix64(seed ^ splitmix64(id));
  key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

namespace detail {

void philox8_scalar(std::array<std::uint32_t, 2> key, std::uint64_t chunk, std::uint64_t first_block,
                    std::uint64_t* out) {
  for (std::uint64_t j = 0; j < 8; ++j) {
    const std::uint64_t block = first_block + j;
    const auto r = philox4x32({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                               static_cast<std::uint32_t>(chunk), static_cast<std::uint32_t>(chunk >> 32)},
                              key);
    out[2 * j] = (static_cast<std::uint64_t>(r[1]) << 32) | r[0];
    out[2 * j + 1] = (static_cast<std::uint64_t>(r[3]) << 32) | r[2];
  }
}

#if defined(__x86_64__)
namespace {

// Full 32x32 -> 64 products of all eight lanes, split into high and low halves.
__attribute__((target("avx2"))) inline void mulhilo8(__m256i a, __m256i m, __m256i& hi, __m256i& lo) {
  const __m256i even = _mm256_mul_epu32(a, m);
  const __m256i odd = _mm256_mul_epu32(_mm256_srli_epi64(a, 32), m);
  hi = _mm256_blend_epi32(_mm256_srli_epi64(even, 32), odd, 0xAA);
  lo = _mm256_blend_epi32(even, _mm256_slli_epi64(odd, 32), 0xAA);
}

}  // namespace

__attribute__((target("avx2"))) void philox8_simd(std::array<std::uint32_t, 2> key, std::uint64_t chunk,
                                                  std::uint64_t first_block, std::uint64_t* out) {
  alignas(32) std::uint32_t lo_block[8], hi_block[8];
  for (int j = 0; j < 8; ++j) {
    const std::uint64_t block = first_block + static_cast<std::uint64_t>(j);
    lo_block[j] = static_cast<std::uint32_t>(block);
    hi_block[j] = static_cast<std::uint32_t>(block >> 32);
  }
  __m256i c0 = _mm256_load_si256(reinterpret_cast<const __m256i*>(lo_block));
  __m256i c1 = _mm256_load_si256(reinterpret_cast<const __m256i*>(hi_block));
  __m256i c2 = _mm256_set1_epi32(static_cast<int>(static_cast<std::uint32_t>(chunk)));
  __m256i c3 = _mm256_set1_epi32(static_cast<int>(static_cast<std::uint32_t>(chunk >> 32)));
  const __m256i m0 = _mm256_set1_epi32(static_cast<int>(kMul0));
  const __m256i m1 = _mm256_set1_epi32(static_cast<int>(kMul1));
  std::uint32_t k0 = key[0], k1 = key[1];
  for (int round = 0; round < 10; ++round) {
    __m256i hi0, lo0, hi1, lo1;
    mulhilo8(c0, m0, hi0, lo0);
    mulhilo8(c2, m1, hi1, lo1);
    c0 = _mm256_xor_si256(_mm256_xor_si256(hi1, c1), _mm256_set1_epi32(static_cast<int>(k0)));
    c1 = lo1;
    c2 = _mm256_xor_si256(_mm256_xor_si256(hi0, c3), _mm256_set1_epi32(static_cast<int>(k1)));
    c3 = lo0;
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  alignas(32) std::uint32_t w0[8], w1[8], w2[8], w3[8];
  _mm256_store_si256(reinterpret_cast<__m256i*>(w0), c0);
  _mm256_store_si256(reinterpret_cast<__m256i*>(w1), c1);
  _mm256_store_si256(reinterpret_cast<__m256i*>(w2), c2);
  _mm256_store_si256(reinterpret_cast<__m256i*>(w3), c3);
  for (int j = 0; j < 8; ++j) {
    out[2 * j] = (static_cast<std::uint64_t>(w1[j]) << 32) | w0[j];
    out[2 * j + 1] = (static_cast<std::uint64_t>(w3[j]) << 32) | w2[j];
  }
}

bool simd_supported() {
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported;
}
#else
void philox8_simd(std::array<std::uint32_t, 2> key, std::uint64_t chunk, std::uint64_t first_block,
                  std::uint64_t* out) {
  philox8_scalar(key, chunk, first_block, out);
}

bool simd_supported() { return false; }
#endif

}  // namespace detail

void Stream::refill() {
  if (detail::simd_supported()) {
    detail::philox8_simd(key_, chunk_, block_, buffer_.data());
  } else {
    detail::philox8_scalar(key_, chunk_, block_, buffer_.data());
  }
  block_ += kBlocks;
  next_ = 0;
}

namespace detail {

// 256-layer ziggurat for the standard normal (Marsaglia & Tsang layout).
ZigguratTable::ZigguratTable() {
  const auto density = [](double v) { return std::exp(-0.5 * v * v); };
  x[0] = kLayerArea / density(kTailStart);
  x[1] = kTailStart;
  for (int i = 1; i < kLayers - 1; ++i) x[i + 1] = std::sqrt(-2.0 * std::log(kLayerArea / x[i] + density(x[i])));
  x[kLayers] = 0.0;
  for (int i = 0; i <= kLayers; ++i) f[i] = density(x[i]);
}

const ZigguratTable kZiggurat;

}  // namespace detail

double Stream::normal_edge(int layer, bool negative, double x) {
  using detail::kZiggurat;
  constexpr double r = detail::ZigguratTable::kTailStart;
  while (true) {
    if (layer == 0) {
      double a, b;
      do {
        a = -std::log(uniform_open()) / r;
        b = -std::log(uniform_open());
      } while (b + b < a * a);
      return negative ? -(r + a) : r + a;
    }
    if (kZiggurat.f[layer + 1] + uniform() * (kZiggurat.f[layer] - kZiggurat.f[layer + 1]) < std::exp(-0.5 * x * x)) {
      return negative ? -x : x;
    }
    const std::uint64_t bits = next_u64();
    layer = static_cast<int>(bits & 0xFF);
    negative = (bits >> 8) & 1;
    x = static_cast<double>(static_cast<std::int64_t>(bits >> 11)) * 0x1.0p-53 * kZiggurat.x[layer];
    if (x < kZiggurat.x[layer + 1]) return negative ? -x : x;
  }
}

}  // namespace spmbd::rng
