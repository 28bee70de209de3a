#pragma once

#include <cstddef>
#include <vector>

#include "ierf/tensor/network.h"
#include "ierf/tensor/tensor.h"

namespace ierf {

struct TapeEntry {
  std::size_t node;
  std::vector<int> inputs;
  int output;
};

// Record of one forward pass: every intermediate value (pre- and
// post-activation alike) indexed by value id, plus the max-pool routing that
// the backward pass and SRD need. Holds a non-owning pointer to the network,
// which must outlive the tape.
class Tape {
 public:
  Tape() = default;

  const NetworkGraph& net() const { return *net_; }
  bool recorded() const { return !values_.empty(); }
  const Tensor& value(int id) const { return values_.at(id); }
  const std::vector<Tensor>& values() const { return values_; }
  const std::vector<TapeEntry>& entries() const { return entries_; }
  const Tensor& output() const { return values_.back(); }
  // For a max-pool output value: flat input index chosen for each output
  // element. Empty for other kinds.
  const std::vector<std::size_t>& routing(int value) const {
    return routes_.at(value);
  }

 private:
  friend struct TapeAccess;

  const NetworkGraph* net_ = nullptr;
  std::vector<Tensor> values_;
  std::vector<TapeEntry> entries_;
  std::vector<std::vector<std::size_t>> routes_;
};

struct ForwardResult {
  Tensor logits;
  Tape tape;
};

// Runs the network. Throws ConfigError naming the offending layer when the
// input or any parameter shape is inconsistent.
ForwardResult forward(const NetworkGraph& net, const Tensor& input,
                      bool record = true);

// Logits only.
Tensor evaluate(const NetworkGraph& net, const Tensor& input);

// Reverse-mode pass seeded at the terminal output. Returns one gradient per
// value id (index 0 is the network input); values that do not reach the
// output get zero gradients. Throws UnsupportedOperation for unknown op kinds.
std::vector<Tensor> backward(const Tape& tape, const Tensor& seed);

// Copies the part of the network that maps value `from` to value `to`.
// `from` must precede `to` and every path into `to` must pass through it;
// otherwise RangeError.
NetworkGraph subnetwork(const NetworkGraph& net, int from, int to);

}  // namespace ierf
