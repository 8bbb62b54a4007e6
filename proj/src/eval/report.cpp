#include "dynnet/eval/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "dynnet/errors.hpp"
#include "dynnet/eval/plot.hpp"
#include "dynnet/excite/ground_motion.hpp"

namespace dynnet::eval {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Rolls out every column from its own normalized initial state. xg holds one
// row of `batch` normalized ground accelerations per transition.
std::vector<Prediction> rollout_batch(const model::DynNetParams& params,
                                      const excite::NormalizationStats& stats,
                                      const std::vector<double>& init,
                                      const std::vector<double>& xg, std::size_t batch,
                                      const std::vector<std::size_t>& steps, double dt) {
  const std::size_t ns = params.hyper.state_size();
  const std::size_t max_steps = *std::max_element(steps.begin(), steps.end());
  const auto r = model::rollout_normalized(params, init, xg, batch, max_steps);
  std::vector<Prediction> out(batch);
  std::vector<double> x(ns);
  for (std::size_t c = 0; c < batch; ++c) {
    auto& p = out[c];
    p.traj.dt = dt;
    std::size_t keep = steps[c];
    if (r.diverged_at[c] && *r.diverged_at[c] <= steps[c]) {
      p.diverged_at = r.diverged_at[c];
      keep = *r.diverged_at[c] - 1;
    }
    p.traj.states.reserve(keep + 1);
    for (std::size_t k = 0; k <= keep; ++k) {
      for (std::size_t i = 0; i < ns; ++i) x[i] = r.states[k][i * batch + c];
      p.traj.states.push_back(stats.denormalize_state(x));
    }
  }
  return out;
}

std::vector<PccRecord> pcc_records(const excite::Dataset& ds,
                                   const std::vector<Prediction>& preds) {
  std::vector<PccRecord> out;
  for (const auto& p : preds) {
    const auto& e = ds.entries[p.entry];
    const std::size_t n = p.traj.steps();
    for (Quantity q : kQuantities) {
      for (std::size_t d = 0; d < e.clean.dofs(); ++d) {
        PccRecord rec{e.gm.id, q, d, kNaN, p.diverged_at.has_value()};
        if (!rec.diverged) {
          const auto truth = channel(e.clean, q, d, p.start + n);
          const auto pred = channel(p.traj, q, d);
          try {
            rec.value = pcc(pred, std::span(truth).subspan(p.start));
          } catch (const UndefinedMetricError&) {
          }
        }
        out.push_back(rec);
      }
    }
  }
  return out;
}

std::optional<double> force_ratio(const sim::StructureModel& model,
                                  const std::vector<Prediction>& preds) {
  if (!model.is_elastoplastic()) return std::nullopt;
  double worst = 0.0;
  for (const auto& p : preds) {
    for (const auto& s : p.traj.states) {
      const Eigen::VectorXd story = sim::story_from_nodal(s.S);
      for (std::size_t i = 0; i < model.dofs(); ++i) {
        const double fy = std::get<sim::ElastoPlastic>(model.springs[i]).fy;
        worst = std::max(worst, std::abs(story[static_cast<Eigen::Index>(i)]) / fy);
      }
    }
  }
  return worst;
}

std::string noise_tag(double noise) { return fmt::format("{:g}", noise); }

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.precision(17);
  return os;
}

}  // namespace

std::vector<Prediction> predict(const model::DynNetParams& params, const excite::Dataset& ds,
                                const std::vector<std::size_t>& entries, std::size_t start,
                                std::size_t steps) {
  if (entries.empty()) return {};
  const std::size_t ns = params.hyper.state_size();
  const std::size_t B = entries.size();
  std::vector<std::size_t> len(B);
  for (std::size_t c = 0; c < B; ++c) {
    const auto& e = ds.entries.at(entries[c]);
    if (start + 1 >= e.steps()) throw DomainError("predict: start beyond trajectory end");
    len[c] = std::min(steps, e.steps() - 1 - start);
  }
  const std::size_t max_steps = *std::max_element(len.begin(), len.end());
  std::vector<double> init(ns * B), xg(max_steps * B, 0.0);
  for (std::size_t c = 0; c < B; ++c) {
    const auto& e = ds.entries[entries[c]];
    for (std::size_t i = 0; i < ns; ++i) init[i * B + c] = e.inputs[start * ns + i];
    for (std::size_t k = 0; k < len[c]; ++k) xg[k * B + c] = e.xg[start + k + 1];
  }
  auto out = rollout_batch(params, ds.stats, init, xg, B, len, ds.dt);
  for (std::size_t c = 0; c < B; ++c) {
    out[c].entry = entries[c];
    out[c].start = start;
    out[c].traj.gm_id = ds.entries[entries[c]].gm.id;
  }
  return out;
}

std::vector<PccRecord> pcc_table(const model::DynNetParams& params, const excite::Dataset& ds,
                                 std::size_t length) {
  return pcc_records(ds, predict(params, ds, ds.test_indices(), 0, length));
}

MseCurve mse_vs_length(const model::DynNetParams& params, const excite::Dataset& ds,
                       const std::vector<std::size_t>& lengths) {
  MseCurve out;
  if (lengths.empty()) return out;
  const auto test = ds.test_indices();
  const std::size_t longest = *std::max_element(lengths.begin(), lengths.end());
  const auto preds = predict(params, ds, test, 0, longest);
  const std::size_t n = ds.dofs();
  for (std::size_t L : lengths) {
    if (L == 0) throw DomainError("mse_vs_length: lengths must be >= 1");
    double total = 0.0;
    std::vector<double> per_q(4, 0.0);
    std::size_t signals = 0, diverged = 0;
    for (const auto& p : preds) {
      const auto& truth = ds.entries[p.entry].clean;
      if (truth.steps() <= L) continue;
      ++signals;
      if (p.diverged_at && *p.diverged_at <= L) {
        ++diverged;
        continue;
      }
      std::vector<double> q_err(4, 0.0);
      for (std::size_t k = 1; k <= L; ++k) {
        const auto& a = p.traj.states[k];
        const auto& b = truth.states[k];
        for (std::size_t d = 0; d < n; ++d) {
          const auto i = static_cast<Eigen::Index>(d);
          q_err[0] += std::pow(a.u[i] - b.u[i], 2);
          q_err[1] += std::pow(a.v[i] - b.v[i], 2);
          q_err[2] += std::pow(a.a[i] - b.a[i], 2);
          q_err[3] += std::pow(a.S[i] - b.S[i], 2);
        }
      }
      const double denom = static_cast<double>(L * n);
      for (std::size_t q = 0; q < 4; ++q) {
        per_q[q] += q_err[q] / denom;
        total += q_err[q] / (4.0 * denom);
      }
    }
    out.lengths.push_back(L);
    out.signals.push_back(signals);
    out.diverged.push_back(diverged);
    const std::size_t ok = signals - diverged;
    if (signals == 0) {
      out.mse.push_back(kNaN);
      out.per_quantity.push_back(std::vector<double>(4, kNaN));
    } else if (diverged > 0) {
      out.mse.push_back(std::numeric_limits<double>::infinity());
      out.per_quantity.push_back(std::vector<double>(4, std::numeric_limits<double>::infinity()));
    } else {
      out.mse.push_back(total / static_cast<double>(ok));
      for (auto& v : per_q) v /= static_cast<double>(ok);
      out.per_quantity.push_back(per_q);
    }
  }
  return out;
}

std::vector<MagnitudeCase> magnitude_study(const model::DynNetParams& params,
                                           const sim::StructureModel& model,
                                           const excite::GroundMotion& gm,
                                           const excite::NormalizationStats& stats,
                                           const std::vector<double>& factors) {
  const std::size_t ns = params.hyper.state_size();
  std::vector<MagnitudeCase> out;
  for (double f : factors) {
    MagnitudeCase mc;
    mc.factor = f;
    const auto scaled = excite::scale_motion(gm, f);
    mc.truth = excite::simulate(model, scaled, sim::DynState::zero(model.dofs()));
    const std::size_t steps = mc.truth.steps() - 1;
    std::vector<double> init(ns), xg(steps);
    stats.normalize_state(mc.truth.states[0], init);
    for (std::size_t k = 0; k < steps; ++k) xg[k] = stats.normalize_xg(scaled.accel[k + 1]);
    auto p = rollout_batch(params, stats, init, xg, 1, {steps}, gm.dt);
    mc.pred = std::move(p[0].traj);
    mc.pred.gm_id = scaled.id;
    mc.diverged_at = p[0].diverged_at;
    out.push_back(std::move(mc));
  }
  return out;
}

std::vector<SummaryRow> summarize(const std::vector<PccRecord>& pcc, double threshold) {
  std::vector<SummaryRow> rows{{"u"}, {"a"}, {"S"}, {"all"}};
  for (const auto& r : pcc) {
    std::size_t slot;
    switch (r.quantity) {
      case Quantity::u: slot = 0; break;
      case Quantity::a: slot = 1; break;
      case Quantity::S: slot = 2; break;
      default: continue;
    }
    const bool above = std::isfinite(r.value) && r.value > threshold;
    for (std::size_t s : {slot, std::size_t{3}}) {
      ++rows[s].count;
      rows[s].above += above ? 1 : 0;
    }
  }
  for (auto& r : rows) {
    r.fraction = r.count ? static_cast<double>(r.above) / static_cast<double>(r.count) : kNaN;
  }
  return rows;
}

std::string summary_text(const EvalReport& report, double threshold) {
  std::ostringstream os;
  os << fmt::format("case {} noise {:g}\n", report.case_name, report.noise);
  for (const auto& r : summarize(report.pcc, threshold)) {
    os << fmt::format("PCC > {:g} for {}: {}/{} ({:.1f}%)\n", threshold, r.quantity, r.above,
                      r.count, 100.0 * r.fraction);
  }
  for (std::size_t i = 0; i < report.mse.lengths.size(); ++i) {
    os << fmt::format("MSE at {} steps: {:.6g} ({} signals, {} diverged)\n",
                      report.mse.lengths[i], report.mse.mse[i], report.mse.signals[i],
                      report.mse.diverged[i]);
  }
  if (report.force_ratio) {
    os << fmt::format("max |predicted story force| / Fy: {:.4f}\n", *report.force_ratio);
  }
  return os.str();
}

EvalReport evaluate(const model::DynNetParams& params, const sim::StructureModel& model,
                    const excite::Dataset& ds, const std::string& case_name,
                    const EvalOptions& opts) {
  EvalReport rep;
  rep.case_name = case_name;
  rep.noise = ds.noise_level;
  const auto test = ds.test_indices();
  if (test.empty()) throw DomainError("evaluate: dataset has no test signals");
  const auto preds = predict(params, ds, test, 0, opts.pcc_length);
  rep.pcc = pcc_records(ds, preds);
  rep.force_ratio = force_ratio(model, preds);
  rep.mse = mse_vs_length(params, ds, opts.lengths);

  const auto& ex = preds.front();
  const auto& truth = ds.entries[ex.entry].clean;
  rep.example_signal = truth.gm_id.empty() ? ds.entries[ex.entry].gm.id : truth.gm_id;
  const bool damping = !model.is_elastoplastic();
  sim::Trajectory truth_cut{truth.dt, {}, truth.gm_id};
  truth_cut.states.assign(truth.states.begin(),
                          truth.states.begin() + static_cast<std::ptrdiff_t>(ex.traj.steps()));
  for (std::size_t s = 0; s < model.dofs(); ++s) {
    rep.hysteresis_truth.push_back(hysteresis(truth_cut, model, s, damping));
    rep.hysteresis_pred.push_back(hysteresis(ex.traj, model, s, damping));
  }
  if (ex.traj.steps() >= 2) {
    rep.spectrum_truth = spectrum(channel(truth_cut, Quantity::u, 0), ds.dt);
    rep.spectrum_pred = spectrum(channel(ex.traj, Quantity::u, 0), ds.dt);
  }
  if (opts.magnitude) {
    rep.magnitude = magnitude_study(params, model, ds.entries[ex.entry].gm, ds.stats,
                                    opts.factors);
  }
  return rep;
}

std::vector<std::filesystem::path> write_report(const std::filesystem::path& dir,
                                                const EvalReport& rep) {
  std::filesystem::create_directories(dir);
  const std::string stem = rep.case_name + "_" + noise_tag(rep.noise) + "_";
  std::vector<std::filesystem::path> files;
  auto path = [&](const std::string& metric, const char* ext) {
    files.push_back(dir / (stem + metric + ext));
    return files.back();
  };

  {
    auto os = open_csv(path("pcc", ".csv"));
    os << "signal,quantity,dof,pcc,diverged\n";
    for (const auto& r : rep.pcc) {
      os << r.signal << ',' << quantity_name(r.quantity) << ',' << r.dof + 1 << ',' << r.value
         << ',' << (r.diverged ? 1 : 0) << '\n';
    }
    // Histogram of PCC per quantity, 20 bins on [-1, 1].
    std::vector<PlotSeries> hist;
    for (Quantity q : {Quantity::u, Quantity::a, Quantity::S}) {
      PlotSeries s{quantity_name(q), {}, {}, false};
      std::vector<double> counts(20, 0.0);
      for (const auto& r : rep.pcc) {
        if (r.quantity != q || !std::isfinite(r.value)) continue;
        counts[std::min<std::size_t>(19, static_cast<std::size_t>((r.value + 1.0) * 10.0))] += 1;
      }
      for (std::size_t b = 0; b < 20; ++b) {
        s.x.push_back(-1.0 + 0.1 * static_cast<double>(b) + 0.05);
        s.y.push_back(counts[b]);
      }
      hist.push_back(std::move(s));
    }
    write_svg(path("pcc", ".svg"), {"PCC histogram", "PCC", "count"}, hist);
  }
  {
    auto os = open_csv(path("mse", ".csv"));
    os << "length,mse,mse_u,mse_v,mse_a,mse_S,signals,diverged\n";
    PlotSeries s{"all channels", {}, {}, false};
    for (std::size_t i = 0; i < rep.mse.lengths.size(); ++i) {
      const auto& q = rep.mse.per_quantity[i];
      os << rep.mse.lengths[i] << ',' << rep.mse.mse[i] << ',' << q[0] << ',' << q[1] << ','
         << q[2] << ',' << q[3] << ',' << rep.mse.signals[i] << ',' << rep.mse.diverged[i]
         << '\n';
      s.x.push_back(static_cast<double>(rep.mse.lengths[i]));
      s.y.push_back(rep.mse.mse[i]);
    }
    write_svg(path("mse", ".svg"), {"MSE vs projection length", "steps", "MSE", true, true}, {s});
  }
  {
    auto os = open_csv(path("hysteresis", ".csv"));
    os << "signal,story,source,step,drift,force\n";
    std::vector<PlotSeries> series;
    for (std::size_t st = 0; st < rep.hysteresis_truth.size(); ++st) {
      for (int src = 0; src < 2; ++src) {
        const auto& h = src == 0 ? rep.hysteresis_truth[st] : rep.hysteresis_pred[st];
        PlotSeries s{fmt::format("story {} {}", st + 1, src == 0 ? "truth" : "pred"), {}, {}, false};
        for (std::size_t k = 0; k < h.size(); ++k) {
          os << rep.example_signal << ',' << st + 1 << ',' << (src == 0 ? "truth" : "pred") << ','
             << k << ',' << h[k].drift << ',' << h[k].force << '\n';
          if (st == 0) {
            s.x.push_back(h[k].drift);
            s.y.push_back(h[k].force);
          }
        }
        if (st == 0) series.push_back(std::move(s));
      }
    }
    write_svg(path("hysteresis", ".svg"), {"Story 1 hysteresis", "drift", "story force"}, series);
  }
  {
    auto os = open_csv(path("spectrum", ".csv"));
    os << "signal,source,frequency,magnitude\n";
    std::vector<PlotSeries> series;
    for (int src = 0; src < 2; ++src) {
      const auto& sp = src == 0 ? rep.spectrum_truth : rep.spectrum_pred;
      PlotSeries s{src == 0 ? "truth" : "pred", {}, {}, false};
      for (const auto& p : sp) {
        os << rep.example_signal << ',' << (src == 0 ? "truth" : "pred") << ',' << p.frequency
           << ',' << p.magnitude << '\n';
        s.x.push_back(p.frequency);
        s.y.push_back(p.magnitude);
      }
      series.push_back(std::move(s));
    }
    write_svg(path("spectrum", ".svg"), {"DOF 1 displacement spectrum", "Hz", "magnitude"},
              series);
  }
  if (!rep.magnitude.empty()) {
    auto os = open_csv(path("magnitude", ".csv"));
    os << "factor,step,time,u1_truth,u1_pred,S1_truth,S1_pred\n";
    std::vector<PlotSeries> series;
    for (const auto& mc : rep.magnitude) {
      PlotSeries st{fmt::format("x{:g} truth", mc.factor), {}, {}, false};
      PlotSeries sp{fmt::format("x{:g} pred", mc.factor), {}, {}, false};
      for (std::size_t k = 0; k < mc.truth.steps(); ++k) {
        const double t = static_cast<double>(k) * mc.truth.dt;
        const double up = k < mc.pred.steps() ? mc.pred.states[k].u[0] : kNaN;
        const double Sp = k < mc.pred.steps() ? mc.pred.states[k].S[0] : kNaN;
        os << mc.factor << ',' << k << ',' << t << ',' << mc.truth.states[k].u[0] << ',' << up
           << ',' << mc.truth.states[k].S[0] << ',' << Sp << '\n';
        st.x.push_back(t);
        st.y.push_back(mc.truth.states[k].u[0]);
        sp.x.push_back(t);
        sp.y.push_back(up);
      }
      series.push_back(std::move(st));
      series.push_back(std::move(sp));
    }
    write_svg(path("magnitude", ".svg"), {"DOF 1 displacement by magnitude", "time", "u1"},
              series);
  }
  {
    auto os = open_csv(path("summary", ".csv"));
    os << "case,noise,quantity,count,above_0.8,fraction\n";
    for (const auto& r : summarize(rep.pcc)) {
      os << rep.case_name << ',' << rep.noise << ',' << r.quantity << ',' << r.count << ','
         << r.above << ',' << r.fraction << '\n';
    }
    std::ofstream txt(path("summary", ".txt"));
    txt << summary_text(rep);
  }
  return files;
}

}  // namespace dynnet::eval
