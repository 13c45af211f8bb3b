#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "ctdqn/rng.hpp"

namespace ctdqn::agent {

template <class Obs>
struct Transition {
  Obs state;
  int action = 0;
  double reward = 0.0;
  Obs next_state;
  bool terminal = false;
};

// Fixed-capacity FIFO ring. Storage grows on demand up to the capacity, then
// the write cursor wraps and the oldest entries are overwritten.
template <class Obs>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay buffer: capacity 0");
  }

  void push(Transition<Obs> t) {
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[cursor_] = std::move(t);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }

  const Transition<Obs>& at(std::size_t i) const { return storage_.at(i); }

  // Uniform sample with replacement. Returns false (a skip signal, not an
  // error) while the buffer holds fewer than n transitions.
  bool try_sample(Rng& rng, int n, std::vector<const Transition<Obs>*>& out) const {
    if (storage_.size() < static_cast<std::size_t>(n)) return false;
    out.clear();
    out.reserve(n);
    for (int i = 0; i < n; ++i)
      out.push_back(&storage_[rng.uniform_int(storage_.size())]);
    return true;
  }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition<Obs>> storage_;
};

}  // namespace ctdqn::agent
