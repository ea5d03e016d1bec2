#pragma once

#include "cesd/reward.hpp"

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cesd {

/// A sampled start transition together with the transitions that follow it
/// inside the same episode and skill segment (chain.front() is the start;
/// chain.size() <= n_step).
using TransitionChain = std::vector<Transition>;

/// Fixed-capacity FIFO of transitions tagged with episode and skill-segment
/// ids. N-step windows are truncated at episode or segment boundaries.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be > 0");
    items_.reserve(capacity);
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }

  void push(const Transition& t, std::int64_t episode, std::int64_t segment) {
    Item item{t, episode, segment};
    item.t.z_clu = -1;
    if (items_.size() < capacity_) {
      items_.push_back(item);
    } else {
      items_[head_] = item;
      head_ = (head_ + 1) % capacity_;
    }
  }

  /// Logical index 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const { return items_[physical(i)].t; }

  TransitionChain chain_from(std::size_t start, int n_step) const {
    TransitionChain chain;
    const Item& first = items_[physical(start)];
    chain.push_back(first.t);
    for (std::size_t i = start + 1; i < items_.size() && chain.size() < static_cast<std::size_t>(n_step); ++i) {
      const Item& it = items_[physical(i)];
      if (it.episode != first.episode || it.segment != first.segment) break;
      chain.push_back(it.t);
    }
    return chain;
  }

  std::vector<TransitionChain> sample(std::size_t batch_size, int n_step, Rng& rng) const {
    if (n_step < 1) throw std::invalid_argument("n_step must be >= 1");
    if (items_.size() < batch_size + static_cast<std::size_t>(n_step))
      throw std::runtime_error("replay buffer holds " + std::to_string(items_.size()) + " transitions; need at least " +
                               std::to_string(batch_size + static_cast<std::size_t>(n_step)));
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<TransitionChain> out;
    out.reserve(batch_size);
    for (std::size_t b = 0; b < batch_size; ++b) out.push_back(chain_from(pick(rng), n_step));
    return out;
  }

 private:
  struct Item {
    Transition t;
    std::int64_t episode;
    std::int64_t segment;
  };

  std::size_t physical(std::size_t logical) const {
    return items_.size() < capacity_ ? logical : (head_ + logical) % capacity_;
  }

  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Item> items_;
};

}  // namespace cesd
