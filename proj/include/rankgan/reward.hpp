#pragma once

#include <cstddef>
#include <span>

namespace rankgan {

// Scores complete sequences. Implementations are read-only over their model
// state, so one instance may be shared by concurrent rollout workers.
class SequenceReward {
 public:
  virtual ~SequenceReward() = default;
  // ids is row-major [count, len]; writes one reward per row into out.
  virtual void score(std::span<const int> ids, std::size_t count, std::size_t len,
                     std::span<double> out) const = 0;
};

}  // namespace rankgan
