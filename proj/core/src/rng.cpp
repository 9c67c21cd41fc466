#include "amfir/rng.hpp"

namespace amfir {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t key, std::uint64_t stream) {
  return splitmix64(splitmix64(key) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix(seed, stream)), engine_(key_) {}

Rng Rng::substream(std::uint64_t index) const { return Rng(key_, index); }

double Rng::normal() { return normal_(engine_); }

double Rng::uniform() {
  return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
}

std::size_t Rng::uniform_index(std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

}  // namespace amfir
