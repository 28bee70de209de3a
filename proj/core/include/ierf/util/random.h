#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace ierf {

// Mixes a root seed with stream identifiers (stage, image id, pass, ...) so
// every consumer gets an independent, reproducible stream.
std::uint64_t derive_seed(std::uint64_t root,
                          std::initializer_list<std::uint64_t> stream);

// mt19937_64 with distribution code written out by hand: the standard
// <random> distributions are implementation-defined, which would break
// byte-identical reruns across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ierf
