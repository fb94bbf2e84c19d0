// Records the outcome of non-differentiable choices (argmax indices, rank
// matrices, sign indicators) so a later evaluation can replay them. Finite
// difference checks use this to hold discrete decisions fixed while values
// are perturbed.

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace dcfm::tl {

class DecisionTape {
 public:
  enum class Mode { Record, Replay };

  explicit DecisionTape(Mode mode = Mode::Record) : mode_(mode) {}

  Mode mode() const { return mode_; }
  void replay() {
    mode_ = Mode::Replay;
    cursor_ = 0;
  }
  std::size_t size() const { return entries_.size(); }

  std::vector<std::int64_t> resolve(const std::function<std::vector<std::int64_t>()>& compute) {
    if (mode_ == Mode::Replay) {
      if (cursor_ >= entries_.size()) throw std::logic_error("decision tape exhausted on replay");
      return entries_[cursor_++];
    }
    entries_.push_back(compute());
    return entries_.back();
  }

 private:
  Mode mode_;
  std::size_t cursor_ = 0;
  std::vector<std::vector<std::int64_t>> entries_;
};

// Runs `compute` directly when no tape is attached.
inline std::vector<std::int64_t> decide(DecisionTape* tape,
                                        const std::function<std::vector<std::int64_t>()>& compute) {
  return tape ? tape->resolve(compute) : compute();
}

}  // namespace dcfm::tl
