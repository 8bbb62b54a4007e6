#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dynnet/eval/metrics.hpp"
#include "dynnet/excite/dataset.hpp"
#include "dynnet/model/dynnet.hpp"

namespace dynnet::eval {

struct Prediction {
  std::size_t entry = 0;
  std::size_t start = 0;
  // Physical states start..start+steps; after divergence only the states
  // before it are kept.
  sim::Trajectory traj;
  std::optional<std::size_t> diverged_at;  // transition count at divergence
};

// Batched rollouts from the measured (noisy) state of each entry at `start`
// for min(steps, entry length - 1 - start) transitions.
std::vector<Prediction> predict(const model::DynNetParams& params, const excite::Dataset& ds,
                                const std::vector<std::size_t>& entries, std::size_t start,
                                std::size_t steps);

struct PccRecord {
  std::string signal;
  Quantity quantity = Quantity::u;
  std::size_t dof = 0;
  double value = 0.0;  // NaN when diverged or undefined
  bool diverged = false;
};

// PCC of each (test signal, DOF, quantity) over rollouts of `length`
// transitions from the start of every test signal.
std::vector<PccRecord> pcc_table(const model::DynNetParams& params, const excite::Dataset& ds,
                                 std::size_t length = 2000);

struct MseCurve {
  std::vector<std::size_t> lengths;
  std::vector<double> mse;  // all channels, physical units; inf if any rollout diverged
  std::vector<std::vector<double>> per_quantity;  // [length][u, v, a, S]
  std::vector<std::size_t> signals;   // test signals long enough for the length
  std::vector<std::size_t> diverged;  // of those, how many diverged within it
};

// Rollout MSE vs projection length from the start of every test signal.
MseCurve mse_vs_length(const model::DynNetParams& params, const excite::Dataset& ds,
                       const std::vector<std::size_t>& lengths);

struct MagnitudeCase {
  double factor = 1.0;
  sim::Trajectory truth;
  sim::Trajectory pred;
  std::optional<std::size_t> diverged_at;
};

// Simulates and predicts the response to `gm` scaled by each factor, from rest.
std::vector<MagnitudeCase> magnitude_study(const model::DynNetParams& params,
                                           const sim::StructureModel& model,
                                           const excite::GroundMotion& gm,
                                           const excite::NormalizationStats& stats,
                                           const std::vector<double>& factors = {0.5, 0.85,
                                                                                 1.0, 1.2});

struct SummaryRow {
  std::string quantity;  // "u", "a", "S" or "all"
  std::size_t count = 0;
  std::size_t above = 0;
  double fraction = 0.0;
};

struct EvalReport {
  std::string case_name;
  double noise = 0.0;
  std::vector<PccRecord> pcc;
  MseCurve mse;
  std::string example_signal;
  std::vector<std::vector<HysteresisPoint>> hysteresis_truth, hysteresis_pred;
  std::vector<SpectrumPoint> spectrum_truth, spectrum_pred;
  std::vector<MagnitudeCase> magnitude;
  // max |predicted story force| / Fy over the PCC rollouts (EPP models only).
  std::optional<double> force_ratio;
};

// Fraction of (signal, DOF) PCC values above `threshold` for u, a, S and
// pooled over the three. Diverged or undefined entries count as failures.
std::vector<SummaryRow> summarize(const std::vector<PccRecord>& pcc, double threshold = 0.8);
std::string summary_text(const EvalReport& report, double threshold = 0.8);

struct EvalOptions {
  std::size_t pcc_length = 2000;
  std::vector<std::size_t> lengths{100, 500, 1000, 2000, 5000, 10000};
  std::vector<double> factors{0.5, 0.85, 1.0, 1.2};
  bool magnitude = true;
};

EvalReport evaluate(const model::DynNetParams& params, const sim::StructureModel& model,
                    const excite::Dataset& ds, const std::string& case_name,
                    const EvalOptions& opts = {});

// Tidy CSV plus SVG for every metric, named {case}_{noise}_{metric}.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& dir,
                                                const EvalReport& report);

}  // namespace dynnet::eval
