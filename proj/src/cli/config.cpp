#include "dynnet/cli/config.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dynnet/errors.hpp"
#include "dynnet/sim/presets.hpp"

namespace dynnet::cli {
namespace pt = boost::property_tree;
namespace {

template <class T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt::format("{}", v[i]);
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  boost::split(parts, s, boost::is_any_of(","));
  std::vector<std::string> out;
  for (auto& p : parts) {
    boost::trim(p);
    if (!p.empty()) out.push_back(p);
  }
  return out;
}

double to_double(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DomainError("config: " + key + " expects a number, got '" + s + "'");
  }
}

std::uint64_t to_uint(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size() || s.front() == '-') throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DomainError("config: " + key + " expects a non-negative integer, got '" + s + "'");
  }
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw DomainError("config: " + key + " expects true/false, got '" + s + "'");
}

std::vector<train::Stage> parse_schedule(const std::string& s) {
  std::vector<train::Stage> out;
  for (const auto& item : split_list(s)) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw DomainError("config: schedule entries are length:iterations, got '" + item + "'");
    }
    out.push_back({to_uint("schedule", item.substr(0, colon)),
                   to_uint("schedule", item.substr(colon + 1))});
  }
  return out;
}

// Binds every key to a setter and a formatter so parsing and printing share
// one table.
struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

using FieldTable = std::map<std::string, std::map<std::string, Field>>;

#define DYNNET_NUM(sec, key, expr)                                                         \
  t[sec][key] = {[](ExperimentConfig& c, const std::string& v) {                           \
                   expr = static_cast<std::decay_t<decltype(expr)>>(                       \
                       std::is_floating_point_v<std::decay_t<decltype(expr)>>             \
                           ? to_double(sec "." key, v)                                     \
                           : static_cast<double>(to_uint(sec "." key, v)));                \
                 },                                                                        \
                 [](const ExperimentConfig& c) { return fmt::format("{}", expr); }}

const FieldTable& fields() {
  static const FieldTable table = [] {
    FieldTable t;
    t["experiment"]["seed"] = {
        [](ExperimentConfig& c, const std::string& v) { c.seed = to_uint("experiment.seed", v); },
        [](const ExperimentConfig& c) { return fmt::format("{}", c.seed); }};
    t["experiment"]["out"] = {[](ExperimentConfig& c, const std::string& v) { c.out = v; },
                              [](const ExperimentConfig& c) { return c.out.string(); }};
    t["experiment"]["noise"] = {
        [](ExperimentConfig& c, const std::string& v) { c.noise = to_double("experiment.noise", v); },
        [](const ExperimentConfig& c) { return fmt::format("{}", c.noise); }};

    t["structure"]["preset"] = {[](ExperimentConfig& c, const std::string& v) { c.preset = v; },
                                [](const ExperimentConfig& c) { return c.preset; }};
    DYNNET_NUM("structure", "zeta", c.zeta);

    DYNNET_NUM("corpus", "earthquake_like", c.corpus.earthquake_like);
    DYNNET_NUM("corpus", "stationary", c.corpus.stationary);
    DYNNET_NUM("corpus", "dt", c.corpus.dt);
    DYNNET_NUM("corpus", "duration", c.corpus.duration);
    DYNNET_NUM("corpus", "test_duration", c.corpus.test_duration);
    t["corpus"]["pga_min_g"] = {
        [](ExperimentConfig& c, const std::string& v) {
          c.corpus.pga_min = to_double("corpus.pga_min_g", v) * sim::kGravity;
        },
        [](const ExperimentConfig& c) { return fmt::format("{}", c.corpus.pga_min / sim::kGravity); }};
    t["corpus"]["pga_max_g"] = {
        [](ExperimentConfig& c, const std::string& v) {
          c.corpus.pga_max = to_double("corpus.pga_max_g", v) * sim::kGravity;
        },
        [](const ExperimentConfig& c) { return fmt::format("{}", c.corpus.pga_max / sim::kGravity); }};
    DYNNET_NUM("corpus", "f_lo", c.corpus.f_lo);
    DYNNET_NUM("corpus", "f_hi", c.corpus.f_hi);
    DYNNET_NUM("corpus", "n_train", c.n_train);

    DYNNET_NUM("model", "embed", c.hyper.embed);
    DYNNET_NUM("model", "resnet_width", c.hyper.resnet_width);
    DYNNET_NUM("model", "resnet_repeats", c.hyper.resnet_repeats);
    DYNNET_NUM("model", "leaky_slope", c.hyper.leaky_slope);

    DYNNET_NUM("training", "batch_size", c.training.batch_size);
    t["training"]["schedule"] = {
        [](ExperimentConfig& c, const std::string& v) { c.training.schedule = parse_schedule(v); },
        [](const ExperimentConfig& c) {
          std::vector<std::string> parts;
          for (const auto& s : c.training.schedule) {
            parts.push_back(fmt::format("{}:{}", s.length, s.iterations));
          }
          return join(parts);
        }};
    DYNNET_NUM("training", "hardsample_rate", c.training.hardsample_rate);
    DYNNET_NUM("training", "hardsample_top", c.training.hardsample_top);
    DYNNET_NUM("training", "bag_capacity", c.training.bag_capacity);
    t["training"]["optimizer"] = {
        [](ExperimentConfig& c, const std::string& v) {
          c.training.optimizer = train::parse_optimizer(v);
        },
        [](const ExperimentConfig& c) { return train::optimizer_name(c.training.optimizer); }};
    DYNNET_NUM("training", "delta0", c.training.delta0);
    DYNNET_NUM("training", "delta_max", c.training.delta_max);
    DYNNET_NUM("training", "eta", c.training.eta);
    DYNNET_NUM("training", "cg_max_iter", c.training.cg_max_iter);
    t["training"]["cg_rel_tol"] = {
        [](ExperimentConfig& c, const std::string& v) {
          const double x = to_double("training.cg_rel_tol", v);
          c.training.cg_rel_tol = x > 0.0 ? std::optional<double>(x) : std::nullopt;
        },
        [](const ExperimentConfig& c) {
          return fmt::format("{}", c.training.cg_rel_tol.value_or(0.0));
        }};
    DYNNET_NUM("training", "lr", c.training.lr);
    DYNNET_NUM("training", "test_starts", c.training.test_starts);
    DYNNET_NUM("training", "eval_length", c.training.eval_length);
    DYNNET_NUM("training", "test_every", c.training.test_every);
    DYNNET_NUM("training", "threads", c.training.threads);
    DYNNET_NUM("training", "chunk", c.training.chunk);

    DYNNET_NUM("evaluation", "pcc_length", c.evaluation.pcc_length);
    t["evaluation"]["lengths"] = {
        [](ExperimentConfig& c, const std::string& v) {
          c.evaluation.lengths.clear();
          for (const auto& s : split_list(v)) {
            c.evaluation.lengths.push_back(to_uint("evaluation.lengths", s));
          }
        },
        [](const ExperimentConfig& c) { return join(c.evaluation.lengths); }};
    t["evaluation"]["factors"] = {
        [](ExperimentConfig& c, const std::string& v) {
          c.evaluation.factors.clear();
          for (const auto& s : split_list(v)) {
            c.evaluation.factors.push_back(to_double("evaluation.factors", s));
          }
        },
        [](const ExperimentConfig& c) { return join(c.evaluation.factors); }};
    t["evaluation"]["magnitude"] = {
        [](ExperimentConfig& c, const std::string& v) {
          c.evaluation.magnitude = to_bool("evaluation.magnitude", v);
        },
        [](const ExperimentConfig& c) { return std::string(c.evaluation.magnitude ? "true" : "false"); }};

    DYNNET_NUM("compare", "iterations", c.compare.iterations);
    DYNNET_NUM("compare", "length", c.compare.length);
    t["compare"]["learning_rates"] = {
        [](ExperimentConfig& c, const std::string& v) {
          c.compare.learning_rates.clear();
          for (const auto& s : split_list(v)) {
            c.compare.learning_rates.push_back(to_double("compare.learning_rates", s));
          }
        },
        [](const ExperimentConfig& c) { return join(c.compare.learning_rates); }};
    t["compare"]["include_sgd"] = {
        [](ExperimentConfig& c, const std::string& v) {
          c.compare.include_sgd = to_bool("compare.include_sgd", v);
        },
        [](const ExperimentConfig& c) { return std::string(c.compare.include_sgd ? "true" : "false"); }};
    return t;
  }();
  return table;
}

#undef DYNNET_NUM

}  // namespace

void ExperimentConfig::apply_seed(std::uint64_t s) {
  seed = s;
  corpus.seed = s;
  training.seed = s;
}

void ExperimentConfig::validate() const {
  const auto names = sim::preset_names();
  if (std::find(names.begin(), names.end(), preset) == names.end()) {
    throw DomainError("config: unknown preset '" + preset + "'");
  }
  if (!(noise >= 0.0 && noise <= 0.5)) throw DomainError("config: noise must lie in [0, 0.5]");
  if (n_train == 0 || n_train >= corpus.earthquake_like + corpus.stationary) {
    throw DomainError("config: need 0 < n_train < corpus size");
  }
  if (corpus.test_duration != 0.0 && !(corpus.test_duration >= corpus.duration)) {
    throw DomainError("config: test_duration must be 0 or >= duration");
  }
  hyper.validate();
  training.validate();
  if (compare.iterations == 0 || compare.length < 2) {
    throw DomainError("config: compare needs iterations >= 1 and length >= 2");
  }
}

sim::StructureModel ExperimentConfig::structure() const { return sim::preset(preset, zeta); }

ExperimentConfig default_config(const std::string& preset) {
  ExperimentConfig c;
  c.preset = preset;
  const auto model = sim::preset(preset, c.zeta);
  c.hyper.dofs = model.dofs();
  c.hyper.embed = std::max<std::size_t>(8, model.dofs());
  c.hyper.dt = c.corpus.dt;
  c.apply_seed(c.seed);
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw DomainError(std::string("config: ") + e.what());
  }
  std::string preset = "nl1";
  if (auto p = tree.get_optional<std::string>("structure.preset")) preset = *p;
  ExperimentConfig c = default_config(preset);
  bool seed_given = false;
  for (const auto& [section, keys] : tree) {
    const auto sec = fields().find(section);
    if (sec == fields().end()) throw DomainError("config: unknown section [" + section + "]");
    for (const auto& [key, value] : keys) {
      const auto f = sec->second.find(key);
      if (f == sec->second.end()) {
        throw DomainError("config: unknown key " + section + "." + key);
      }
      f->second.set(c, value.data());
      if (section == "experiment" && key == "seed") seed_given = true;
    }
  }
  if (seed_given) c.apply_seed(c.seed);
  c.hyper.dt = c.corpus.dt;
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DomainError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const ExperimentConfig& cfg) {
  std::string s;
  for (const auto& [section, keys] : fields()) {
    s += "[" + section + "]\n";
    for (const auto& [key, f] : keys) s += key + " = " + f.get(cfg) + "\n";
    s += "\n";
  }
  return s;
}

}  // namespace dynnet::cli
