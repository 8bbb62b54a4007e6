#pragma once

// Projection loss: mean squared error, over all normalized channels and L
// steps, of a free-running rollout started from the measured state at each
// start point. A column that leaves |x| <= 1e6 is masked from then on and
// charged the per-element cap for every remaining step, so the loss and its
// derivatives stay finite.

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "dynnet/ad/tape.hpp"
#include "dynnet/excite/dataset.hpp"
#include "dynnet/model/dynnet.hpp"
#include "dynnet/train/hardsample.hpp"
#include "dynnet/train/trust_region.hpp"

namespace dynnet::train {

inline constexpr double kLossCap = 1e6;

struct ProjectionOptions {
  std::size_t chunk = 64;  // columns per tape
  std::size_t threads = 1;
  double cap = kLossCap;
};

struct ProjectionLoss {
  double loss = 0.0;
  // Mean squared error of each start over its L steps and 4n channels.
  std::vector<double> per_start;
  std::size_t diverged = 0;
};

// Forward-only evaluation.
ProjectionLoss projection_loss(const model::DynNetParams& params, const excite::Dataset& ds,
                               std::span<const StartPoint> starts, std::size_t length,
                               const ProjectionOptions& opts = {});

// Records the loss of `starts[first, first + count)` on `tape`, with each
// element weighted by 1 / (length * 4n * total). Returns diverged columns.
std::size_t record_projection(ad::Tape& tape, const model::DynNetLayout& layout,
                              const model::DynNetHyper& hyper, const excite::Dataset& ds,
                              std::span<const StartPoint> starts, std::size_t length,
                              std::size_t total, double cap);

// The projection loss on a fixed batch as a trust-region objective. The
// tapes of the last linearize() are kept, so each Hessian-vector product
// costs one tangent sweep and one reverse sweep.
class ProjectionObjective final : public TrustRegionObjective {
 public:
  ProjectionObjective(const model::DynNetHyper& hyper, const excite::Dataset& ds,
                      std::vector<StartPoint> starts, std::size_t length,
                      ProjectionOptions opts = {});
  ~ProjectionObjective() override;

  std::size_t size() const override { return size_; }
  double linearize(std::span<const double> w, std::span<double> grad) override;
  void hessian_vector(std::span<const double> v, std::span<double> hv) override;
  double value(std::span<const double> w) override;

  // From the last linearize().
  const std::vector<double>& per_start_losses() const { return per_start_; }
  std::size_t diverged() const { return diverged_; }
  const std::vector<StartPoint>& starts() const { return starts_; }

 private:
  std::size_t chunks() const;

  model::DynNetHyper hyper_;
  model::DynNetLayout layout_;
  const excite::Dataset& ds_;
  std::vector<StartPoint> starts_;
  std::size_t length_;
  ProjectionOptions opts_;
  std::size_t size_;
  std::vector<double> point_;
  std::vector<std::unique_ptr<ad::Tape>> tapes_;
  std::vector<double> per_start_;
  std::size_t diverged_ = 0;
};

}  // namespace dynnet::train
