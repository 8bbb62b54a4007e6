#include "dynnet/train/hardsample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dynnet/errors.hpp"

namespace dynnet::train {

HardSampleBag::HardSampleBag(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw DomainError("HardSampleBag: capacity must be >= 1");
}

void HardSampleBag::push(const StartPoint& s) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(s);
}

std::vector<StartPoint> eligible_starts(const excite::Dataset& ds,
                                        std::span<const std::size_t> entries,
                                        std::size_t horizon) {
  std::vector<StartPoint> out;
  for (std::size_t e : entries) {
    const std::size_t steps = ds.entries.at(e).steps();
    for (std::size_t k = 0; k + horizon < steps; ++k) out.push_back({e, k});
  }
  return out;
}

std::size_t bag_draws(double r, std::size_t b) {
  return static_cast<std::size_t>(std::floor(r * static_cast<double>(b)));
}

std::vector<StartPoint> sample_batch(std::span<const StartPoint> eligible,
                                     const HardSampleBag& bag, double r, std::size_t b,
                                     Rng& rng) {
  if (b == 0) throw DomainError("sample_batch: batch size must be >= 1");
  if (!(r >= 0.0 && r < 1.0)) throw DomainError("sample_batch: r must lie in [0, 1)");
  if (eligible.empty()) throw DomainError("sample_batch: no eligible start points");
  const std::size_t b2 = bag.empty() ? 0 : bag_draws(r, b);
  std::vector<StartPoint> out;
  out.reserve(b);
  if (b2 > 0) {
    std::uniform_int_distribution<std::size_t> pick(0, bag.size() - 1);
    for (std::size_t i = 0; i < b2; ++i) out.push_back(bag[pick(rng)]);
  }
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  while (out.size() < b) out.push_back(eligible[pick(rng)]);
  return out;
}

std::vector<StartPoint> update_hardsamples(HardSampleBag& bag,
                                           std::span<const StartPoint> starts,
                                           std::span<const double> losses, std::size_t top) {
  if (starts.size() != losses.size()) throw DomainError("update_hardsamples: size mismatch");
  std::vector<std::size_t> order(starts.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t k = std::min(top, order.size());
  auto key = [&](std::size_t i) { return std::isnan(losses[i]) ? HUGE_VAL : losses[i]; };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return key(a) != key(b) ? key(a) > key(b) : a < b;
                    });
  std::vector<StartPoint> added;
  for (std::size_t i = 0; i < k; ++i) {
    bag.push(starts[order[i]]);
    added.push_back(starts[order[i]]);
  }
  return added;
}

}  // namespace dynnet::train
