#pragma once

#include <cstddef>
#include <deque>
#include <random>
#include <span>
#include <vector>

#include "dynnet/excite/dataset.hpp"

namespace dynnet::train {

// A rollout start: dataset entry index and time step.
struct StartPoint {
  std::size_t traj = 0;
  std::size_t step = 0;
  bool operator==(const StartPoint&) const = default;
};

// FIFO bag of start points that were predicted badly. Duplicates are kept.
class HardSampleBag {
 public:
  explicit HardSampleBag(std::size_t capacity = 8192);

  void push(const StartPoint& s);
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::size_t capacity() const { return capacity_; }
  const StartPoint& operator[](std::size_t i) const { return items_[i]; }
  const std::deque<StartPoint>& items() const { return items_; }

 private:
  std::size_t capacity_;
  std::deque<StartPoint> items_;
};

using Rng = std::mt19937_64;

// Every start of a training trajectory that leaves at least `horizon` steps.
std::vector<StartPoint> eligible_starts(const excite::Dataset& ds,
                                        std::span<const std::size_t> entries,
                                        std::size_t horizon);

// floor(r * b) draws from the bag and the rest uniformly from `eligible`.
// An empty bag makes the whole batch random.
std::vector<StartPoint> sample_batch(std::span<const StartPoint> eligible,
                                     const HardSampleBag& bag, double r, std::size_t b,
                                     Rng& rng);

// Number of bag draws sample_batch makes for a non-empty bag.
std::size_t bag_draws(double r, std::size_t b);

// Appends the `top` highest-loss starts (ties broken by batch position) and
// returns them in insertion order.
std::vector<StartPoint> update_hardsamples(HardSampleBag& bag,
                                           std::span<const StartPoint> starts,
                                           std::span<const double> losses, std::size_t top);

}  // namespace dynnet::train
