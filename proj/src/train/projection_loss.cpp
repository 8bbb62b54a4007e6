#include "dynnet/train/projection_loss.hpp"

#include <cmath>

#include "dynnet/errors.hpp"
#include "dynnet/parallel.hpp"

namespace dynnet::train {
namespace {

void check_starts(const excite::Dataset& ds, std::span<const StartPoint> starts,
                  std::size_t length) {
  if (length == 0) throw DomainError("projection loss: length must be >= 1");
  if (starts.empty()) throw DomainError("projection loss: no start points");
  for (const auto& s : starts) {
    if (s.traj >= ds.entries.size() || s.step + length >= ds.entries[s.traj].steps()) {
      throw DomainError("projection loss: start point without enough steps ahead");
    }
  }
}

std::size_t chunk_count(std::size_t n, std::size_t chunk) { return (n + chunk - 1) / chunk; }

std::span<const StartPoint> chunk_of(std::span<const StartPoint> s, std::size_t i,
                                     std::size_t chunk) {
  const std::size_t first = i * chunk;
  return s.subspan(first, std::min(chunk, s.size() - first));
}

}  // namespace

std::size_t record_projection(ad::Tape& tape, const model::DynNetLayout& layout,
                              const model::DynNetHyper& hyper, const excite::Dataset& ds,
                              std::span<const StartPoint> starts, std::size_t length,
                              std::size_t total, double cap) {
  const std::size_t B = starts.size();
  const std::size_t ns = hyper.state_size();
  if (tape.batch() != B) throw DomainError("record_projection: tape batch mismatch");
  const double weight = 1.0 / (static_cast<double>(length) * static_cast<double>(ns) *
                               static_cast<double>(total));

  std::vector<double> buf(ns * B);
  for (std::size_t c = 0; c < B; ++c) {
    const auto& e = ds.entries[starts[c].traj];
    for (std::size_t r = 0; r < ns; ++r) buf[r * B + c] = e.inputs[starts[c].step * ns + r];
  }
  auto state = model::split_state(tape, tape.input(buf, ns), hyper.dofs);

  std::vector<double> mask(B, 1.0), xg(B);
  std::size_t diverged = 0;
  for (std::size_t j = 0; j < length; ++j) {
    for (std::size_t c = 0; c < B; ++c) {
      xg[c] = ds.entries[starts[c].traj].xg[starts[c].step + j + 1];
    }
    const auto next = model::cell_step(tape, layout, hyper, state, tape.input(xg, 1));
    ad::Node pred = tape.concat({next.u, next.v, next.a, next.S});

    const auto vals = tape.value(pred);
    for (std::size_t c = 0; c < B; ++c) {
      if (mask[c] == 0.0) continue;
      for (std::size_t r = 0; r < ns; ++r) {
        const double x = vals[r * B + c];
        if (!std::isfinite(x) || std::abs(x) > model::kDivergenceThreshold) {
          mask[c] = 0.0;
          ++diverged;
          break;
        }
      }
    }
    if (diverged > 0) pred = tape.column_scale(pred, mask);

    for (std::size_t c = 0; c < B; ++c) {
      const auto& e = ds.entries[starts[c].traj];
      const std::size_t row = (starts[c].step + j + 1) * ns;
      for (std::size_t r = 0; r < ns; ++r) {
        buf[r * B + c] = mask[c] == 0.0 ? 0.0 : e.targets[row + r];
      }
      if (mask[c] == 0.0) tape.add_constant_loss(c, weight * static_cast<double>(ns) * cap);
    }
    tape.squared_error(pred, buf, weight, cap);
    state = diverged > 0 ? model::split_state(tape, pred, hyper.dofs) : next;
  }
  return diverged;
}

ProjectionLoss projection_loss(const model::DynNetParams& params, const excite::Dataset& ds,
                               std::span<const StartPoint> starts, std::size_t length,
                               const ProjectionOptions& opts) {
  check_starts(ds, starts, length);
  const auto layout = params.layout();
  const std::size_t n = chunk_count(starts.size(), opts.chunk);
  std::vector<double> losses(n);
  std::vector<std::size_t> div(n);
  ProjectionLoss out;
  out.per_start.resize(starts.size());
  parallel_for(n, opts.threads, [&](std::size_t i) {
    const auto part = chunk_of(starts, i, opts.chunk);
    ad::Tape tape(params.values.values(), part.size());
    div[i] = record_projection(tape, layout, params.hyper, ds, part, length, starts.size(),
                               opts.cap);
    losses[i] = tape.loss();
    const auto cols = tape.column_losses();
    for (std::size_t c = 0; c < part.size(); ++c) {
      out.per_start[i * opts.chunk + c] = cols[c] * static_cast<double>(starts.size());
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    out.loss += losses[i];
    out.diverged += div[i];
  }
  return out;
}

ProjectionObjective::ProjectionObjective(const model::DynNetHyper& hyper,
                                         const excite::Dataset& ds,
                                         std::vector<StartPoint> starts, std::size_t length,
                                         ProjectionOptions opts)
    : hyper_(hyper),
      ds_(ds),
      starts_(std::move(starts)),
      length_(length),
      opts_(opts) {
  if (opts_.chunk == 0) throw DomainError("ProjectionObjective: chunk must be >= 1");
  check_starts(ds_, starts_, length_);
  const auto tmpl = model::make_layout(hyper_);
  layout_ = model::resolve_layout(hyper_, tmpl);
  size_ = tmpl.size();
}

ProjectionObjective::~ProjectionObjective() = default;

std::size_t ProjectionObjective::chunks() const {
  return chunk_count(starts_.size(), opts_.chunk);
}

double ProjectionObjective::linearize(std::span<const double> w, std::span<double> grad) {
  if (w.size() != size_ || grad.size() != size_) {
    throw DomainError("ProjectionObjective: parameter size mismatch");
  }
  point_.assign(w.begin(), w.end());
  const std::size_t n = chunks();
  tapes_.clear();
  tapes_.resize(n);
  std::vector<std::vector<double>> grads(n);
  std::vector<double> losses(n);
  std::vector<std::size_t> div(n);
  per_start_.assign(starts_.size(), 0.0);
  parallel_for(n, opts_.threads, [&](std::size_t i) {
    const auto part = chunk_of(starts_, i, opts_.chunk);
    auto tape = std::make_unique<ad::Tape>(point_, part.size());
    div[i] = record_projection(*tape, layout_, hyper_, ds_, part, length_, starts_.size(),
                               opts_.cap);
    losses[i] = tape->loss();
    const auto cols = tape->column_losses();
    for (std::size_t c = 0; c < part.size(); ++c) {
      per_start_[i * opts_.chunk + c] = cols[c] * static_cast<double>(starts_.size());
    }
    grads[i].assign(size_, 0.0);
    tape->backward(grads[i]);
    tapes_[i] = std::move(tape);
  });
  double loss = 0.0;
  diverged_ = 0;
  std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    loss += losses[i];
    diverged_ += div[i];
    for (std::size_t k = 0; k < size_; ++k) grad[k] += grads[i][k];
  }
  return loss;
}

void ProjectionObjective::hessian_vector(std::span<const double> v, std::span<double> hv) {
  if (tapes_.empty()) throw DomainError("ProjectionObjective: linearize() first");
  if (v.size() != size_ || hv.size() != size_) {
    throw DomainError("ProjectionObjective: vector size mismatch");
  }
  const std::size_t n = tapes_.size();
  std::vector<std::vector<double>> parts(n);
  parallel_for(n, opts_.threads, [&](std::size_t i) {
    parts[i].assign(size_, 0.0);
    tapes_[i]->hessian_vector(v, parts[i]);
  });
  std::fill(hv.begin(), hv.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < size_; ++k) hv[k] += parts[i][k];
  }
}

double ProjectionObjective::value(std::span<const double> w) {
  if (w.size() != size_) throw DomainError("ProjectionObjective: parameter size mismatch");
  const std::size_t n = chunks();
  std::vector<double> losses(n);
  parallel_for(n, opts_.threads, [&](std::size_t i) {
    const auto part = chunk_of(starts_, i, opts_.chunk);
    ad::Tape tape(w, part.size());
    record_projection(tape, layout_, hyper_, ds_, part, length_, starts_.size(), opts_.cap);
    losses[i] = tape.loss();
  });
  double loss = 0.0;
  for (double l : losses) loss += l;
  return loss;
}

}  // namespace dynnet::train
