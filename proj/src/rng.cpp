#include "rankgan/rng.hpp"

namespace rankgan {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, Stream purpose,
                          std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  for (std::uint64_t c : coords) h = splitmix64(h ^ c);
  return h;
}

int sample_categorical(std::span<const double> probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  int last_nonzero = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) last_nonzero = static_cast<int>(i);
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return last_nonzero;
}

}  // namespace rankgan
