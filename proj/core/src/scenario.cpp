#include "eem/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>
#include <utility>

#include <json.hpp>

#include "detail/artifacts.hpp"
#include "eem/allan.hpp"
#include "eem/csv.hpp"
#include "eem/decomp.hpp"
#include "eem/filters.hpp"
#include "eem/linalg.hpp"
#include "eem/simkit.hpp"

namespace eem {
namespace {

using json = nlohmann::json;

struct KindInfo {
  ScenarioKind kind;
  const char* name;
  const char* description;
};

constexpr KindInfo kKinds[] = {
    {ScenarioKind::free_run, "free-run", "free-running ensemble, per-clock Allan variance"},
    {ScenarioKind::standard_kf, "standard-kf",
     "standard Kalman filter reference time scale and gain/covariance increments"},
    {ScenarioKind::standard_kf_suboptimal, "standard-kf-suboptimal",
     "standard Kalman filter with clock-averaged noise covariance on the same data"},
    {ScenarioKind::determinate_kf, "determinate-kf",
     "determinate Kalman filter, increments and stationary gains"},
    {ScenarioKind::steer_to_clock, "steer-to-clock",
     "synchronization of all clocks to the last clock (q = e_N)"},
    {ScenarioKind::sync_simple_average, "sync-simple-average",
     "synchronization to the simple average (q = 1/N)"},
    {ScenarioKind::sync_best_short, "sync-best-short",
     "synchronization to the short-term optimal ensemble mean (q_0)"},
    {ScenarioKind::sync_best_long, "sync-best-long",
     "synchronization to the long-term optimal ensemble mean (q_inf)"},
    {ScenarioKind::balanced, "balanced",
     "synchronization to q_0 with intermittent collective feedback every m steps"},
};

bool is_controlled(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::steer_to_clock:
    case ScenarioKind::sync_simple_average:
    case ScenarioKind::sync_best_short:
    case ScenarioKind::sync_best_long:
    case ScenarioKind::balanced:
      return true;
    default:
      return false;
  }
}

std::vector<std::string> default_outputs(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::free_run:
      return {"allan", "analytical"};
    case ScenarioKind::standard_kf:
    case ScenarioKind::standard_kf_suboptimal:
      return {"allan", "analytical", "increments"};
    case ScenarioKind::determinate_kf:
      return {"allan", "analytical", "increments", "gains"};
    default:
      return {"allan", "analytical", "gains", "commands", "sync_error"};
  }
}

const std::vector<std::string>& known_outputs() {
  static const std::vector<std::string> v{"trajectory", "allan",    "analytical", "increments",
                                          "gains",      "commands", "sync_error", "timescale"};
  return v;
}

// Field readers that append to an error list instead of throwing.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  void error(const std::string& path, const std::string& msg) {
    errors_.push_back(path + ": " + msg);
  }

  std::optional<double> number(const json& j, const std::string& path) {
    if (!j.is_number()) {
      error(path, "expected a number");
      return std::nullopt;
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
      error(path, "must be finite");
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::uint64_t> count(const json& j, const std::string& path) {
    if (!j.is_number_integer() || (j.is_number_integer() && j.get<std::int64_t>() < 0)) {
      error(path, "expected a non-negative integer");
      return std::nullopt;
    }
    return j.get<std::uint64_t>();
  }

  std::optional<std::vector<double>> vector(const json& j, const std::string& path) {
    if (!j.is_array()) {
      error(path, "expected an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    bool ok = true;
    for (std::size_t i = 0; i < j.size(); ++i) {
      auto v = number(j[i], path + "[" + std::to_string(i) + "]");
      if (v) {
        out.push_back(*v);
      } else {
        ok = false;
      }
    }
    if (!ok) return std::nullopt;
    return out;
  }

  std::optional<MatrixXd> matrix(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) {
      error(path, "expected a non-empty array of rows");
      return std::nullopt;
    }
    const std::size_t cols = j[0].size();
    MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    bool ok = true;
    for (std::size_t r = 0; r < j.size(); ++r) {
      const std::string rp = path + "[" + std::to_string(r) + "]";
      auto row = vector(j[r], rp);
      if (!row) {
        ok = false;
        continue;
      }
      if (row->size() != cols) {
        error(rp, "row length " + std::to_string(row->size()) + " differs from " +
                      std::to_string(cols));
        ok = false;
        continue;
      }
      for (std::size_t c = 0; c < cols; ++c) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = (*row)[c];
      }
    }
    if (!ok) return std::nullopt;
    return m;
  }

 private:
  std::vector<std::string>& errors_;
};

std::string join_errors(const std::vector<std::string>& errors) {
  std::string s = "invalid scenario config (" + std::to_string(errors.size()) + " error" +
                  (errors.size() == 1 ? "" : "s") + ")";
  for (const auto& e : errors) s += "\n  - " + e;
  return s;
}

VectorXd as_vector(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Weight selector: "uniform" | "short" | "long" | "last" | {"unit": i} (1-based) | [..].
std::optional<VectorXd> parse_weight(const json& j, const ModelSpec& model, Reader& rd) {
  const std::string path = "controller.q";
  const std::size_t n = model.sigma1.size();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (n == 0) return std::nullopt;
    if (s == "uniform") return EnsembleWeight::uniform(n).vector();
    if (s == "last") return EnsembleWeight::unit(n, n - 1).vector();
    try {
      if (s == "short") return weight_short(as_vector(model.sigma1).array().square().matrix()).vector();
      if (s == "long") return weight_long(as_vector(model.sigma2).array().square().matrix()).vector();
    } catch (const InvalidArgument& e) {
      rd.error(path, e.what());
      return std::nullopt;
    }
    rd.error(path, "unknown weight selector '" + s + "' (uniform, short, long, last)");
    return std::nullopt;
  }
  if (j.is_object() && j.contains("unit")) {
    auto i = rd.count(j["unit"], path + ".unit");
    if (!i) return std::nullopt;
    if (*i < 1 || *i > n) {
      rd.error(path + ".unit", "clock index must lie in 1..N");
      return std::nullopt;
    }
    return EnsembleWeight::unit(n, *i - 1).vector();
  }
  auto v = rd.vector(j, path);
  if (!v) return std::nullopt;
  return as_vector(*v);
}

}  // namespace

const std::vector<std::string>& scenario_kind_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& k : kKinds) v.emplace_back(k.name);
    return v;
  }();
  return names;
}

std::string to_string(ScenarioKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

std::optional<ScenarioKind> parse_scenario_kind(const std::string& name) {
  for (const auto& k : kKinds) {
    if (name == k.name) return k.kind;
  }
  return std::nullopt;
}

std::string describe(ScenarioKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.description;
  }
  return {};
}

ConfigError::ConfigError(std::vector<std::string> errors)
    : InvalidArgument(join_errors(errors)), errors_(std::move(errors)) {}

ScenarioConfig validate_config(const std::string& text) {
  std::vector<std::string> errors;
  Reader rd(errors);

  json doc;
  try {
    doc = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("document: ") + e.what()});
  }
  if (!doc.is_object()) throw ConfigError({"document: expected a JSON object"});

  ScenarioConfig cfg;
  cfg.source = doc.dump();

  if (doc.contains("name") && doc["name"].is_string() && !doc["name"].get<std::string>().empty()) {
    cfg.name = doc["name"].get<std::string>();
    if (cfg.name.find_first_of("/\\") != std::string::npos || cfg.name == "." || cfg.name == "..") {
      rd.error("name", "must be a plain identifier usable as a directory name");
    }
  } else {
    rd.error("name", "required non-empty string");
  }

  if (doc.contains("kind") && doc["kind"].is_string()) {
    auto k = parse_scenario_kind(doc["kind"].get<std::string>());
    if (k) {
      cfg.kind = *k;
    } else {
      std::string list;
      for (const auto& n : scenario_kind_names()) list += (list.empty() ? "" : ", ") + n;
      rd.error("kind", "unknown scenario kind '" + doc["kind"].get<std::string>() +
                           "' (expected one of " + list + ")");
    }
  } else {
    rd.error("kind", "required string");
  }

  if (doc.contains("horizon")) {
    if (auto t = rd.count(doc["horizon"], "horizon")) {
      if (*t < 16) {
        rd.error("horizon", "must be at least 16 steps");
      } else {
        cfg.horizon = static_cast<std::size_t>(*t);
      }
    }
  }
  if (doc.contains("seed")) {
    if (auto s = rd.count(doc["seed"], "seed")) cfg.seed = *s;
  }
  if (doc.contains("increment_steps")) {
    if (auto s = rd.count(doc["increment_steps"], "increment_steps")) {
      cfg.increment_steps = static_cast<std::size_t>(*s);
    }
  }
  if (doc.contains("allan")) {
    const auto& a = doc["allan"];
    if (a.is_object() && a.contains("per_decade")) {
      if (auto p = rd.count(a["per_decade"], "allan.per_decade")) {
        if (*p < 1) {
          rd.error("allan.per_decade", "must be at least 1");
        } else {
          cfg.allan_per_decade = static_cast<std::size_t>(*p);
        }
      }
    }
  }

  // Model.
  bool model_ok = false;
  if (!doc.contains("model") || !doc["model"].is_object()) {
    rd.error("model", "required object");
  } else {
    const json& m = doc["model"];
    const std::size_t before = errors.size();
    if (m.contains("tau")) {
      if (auto t = rd.number(m["tau"], "model.tau")) {
        if (*t <= 0.0) {
          rd.error("model.tau", "sampling interval must be positive");
        } else {
          cfg.model.tau = *t;
        }
      }
    }
    for (const char* key : {"sigma1", "sigma2"}) {
      const std::string path = std::string("model.") + key;
      if (!m.contains(key)) {
        rd.error(path, "required array of per-clock standard deviations");
        continue;
      }
      if (auto v = rd.vector(m[key], path)) (key[5] == '1' ? cfg.model.sigma1 : cfg.model.sigma2) = *v;
    }
    const std::size_t n = cfg.model.sigma1.size();
    if (!cfg.model.sigma1.empty() && !cfg.model.sigma2.empty() &&
        cfg.model.sigma1.size() != cfg.model.sigma2.size()) {
      rd.error("model.sigma2", "length differs from model.sigma1");
    }
    if (n > 0 && n < 2) rd.error("model.sigma1", "ensemble needs at least two clocks");

    if (!m.contains("measurement") || !m["measurement"].is_object()) {
      rd.error("model.measurement", "required object");
    } else if (n >= 2) {
      const json& meas = m["measurement"];
      const std::string type = meas.value("type", std::string("star"));
      if (type == "star") {
        cfg.model.V = star_measurement(n);
      } else if (type == "matrix") {
        if (!meas.contains("V")) {
          rd.error("model.measurement.V", "required for type 'matrix'");
        } else if (auto V = rd.matrix(meas["V"], "model.measurement.V")) {
          cfg.model.V = *V;
        }
      } else {
        rd.error("model.measurement.type", "expected 'star' or 'matrix'");
      }
      if (meas.contains("R")) {
        if (auto R = rd.matrix(meas["R"], "model.measurement.R")) cfg.model.R = *R;
      } else if (meas.contains("stddev")) {
        if (auto s = rd.vector(meas["stddev"], "model.measurement.stddev")) {
          try {
            cfg.model.R = diagonal_measurement_covariance(*s);
          } catch (const InvalidArgument& e) {
            rd.error("model.measurement.stddev", e.what());
          }
        }
      } else {
        rd.error("model.measurement", "one of 'stddev' or 'R' is required");
      }
    }
    if (errors.size() == before) {
      try {
        (void)build_model(cfg);
        model_ok = true;
      } catch (const InvalidArgument& e) {
        rd.error("model", e.what());
      }
    }
  }

  // Controller (weight and gains).
  const json ctl = doc.contains("controller") ? doc["controller"] : json::object();
  if (!ctl.is_object()) {
    rd.error("controller", "expected an object");
  } else if (model_ok) {
    const auto n = cfg.model.sigma1.size();
    const auto tau = cfg.model.tau;
    if (ctl.contains("m")) {
      if (auto mm = rd.count(ctl["m"], "controller.m")) {
        if (*mm < 1) {
          rd.error("controller.m", "collective period must be at least 1");
        } else {
          cfg.controller.m = static_cast<std::size_t>(*mm);
        }
      }
    }
    if (ctl.contains("phase")) {
      if (auto p = rd.count(ctl["phase"], "controller.phase")) {
        cfg.controller.phase = static_cast<std::size_t>(*p);
      }
    }
    if (ctl.contains("stationary")) {
      if (ctl["stationary"].is_boolean()) {
        cfg.controller.stationary = ctl["stationary"].get<bool>();
      } else {
        rd.error("controller.stationary", "expected a boolean");
      }
    }
    if (ctl.contains("q")) {
      if (auto q = parse_weight(ctl["q"], cfg.model, rd)) {
        if (static_cast<std::size_t>(q->size()) != n) {
          rd.error("controller.q", "length must equal the clock count " + std::to_string(n));
        } else {
          try {
            EnsembleWeight w(*q);
            cfg.controller.q = w.vector();
          } catch (const InvalidArgument& e) {
            rd.error("controller.q", e.what());
          }
        }
      }
    }
    if (ctl.contains("F_o") && !(ctl["F_o"].is_string() && ctl["F_o"] == "default")) {
      if (auto F = rd.matrix(ctl["F_o"], "controller.F_o")) cfg.controller.F_o = *F;
    }
    if (ctl.contains("K_bo") && !(ctl["K_bo"].is_string() && ctl["K_bo"] == "default")) {
      if (auto K = rd.vector(ctl["K_bo"], "controller.K_bo")) {
        if (K->size() != 2) {
          rd.error("controller.K_bo", "expected two entries");
        } else {
          cfg.controller.K_bo = Eigen::RowVector2d((*K)[0], (*K)[1]);
        }
      }
    }

    if (is_controlled(cfg.kind)) {
      const MatrixXd F = cfg.controller.F_o.value_or(default_observable_gain(n, tau));
      const auto n1 = static_cast<Eigen::Index>(n) - 1;
      if (F.rows() != n1 || F.cols() != 2 * n1) {
        rd.error("controller.F_o", "must be (N-1) x 2(N-1)");
      } else {
        const double rho = check_obs_gain(F, n, tau);
        if (!(rho < 1.0)) {
          rd.error("controller.F_o", "spectral radius of Ao - Bo F_o is " + std::to_string(rho) +
                                         ", must be below 1");
        }
      }
      if (cfg.kind == ScenarioKind::balanced) {
        const auto K =
            cfg.controller.K_bo.value_or(default_collective_gain(cfg.controller.m, tau));
        const double rho = check_collective_gain(K, cfg.controller.m, tau);
        if (!(rho < 1.0)) {
          rd.error("controller.K_bo", "spectral radius of the sampled collective loop is " +
                                          std::to_string(rho) + ", must be below 1");
        }
      }
    }
  }

  // Outputs.
  if (doc.contains("outputs")) {
    const auto& o = doc["outputs"];
    if (!o.is_array()) {
      rd.error("outputs", "expected an array of artifact selectors");
    } else {
      for (std::size_t i = 0; i < o.size(); ++i) {
        const std::string path = "outputs[" + std::to_string(i) + "]";
        if (!o[i].is_string()) {
          rd.error(path, "expected a string");
          continue;
        }
        const auto s = o[i].get<std::string>();
        const auto& known = known_outputs();
        if (std::find(known.begin(), known.end(), s) == known.end()) {
          rd.error(path, "unknown artifact selector '" + s + "'");
        } else {
          cfg.outputs.push_back(s);
        }
      }
    }
  } else {
    cfg.outputs = default_outputs(cfg.kind);
  }

  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"document: cannot read " + path.string()});
  std::ostringstream ss;
  ss << in.rdbuf();
  return validate_config(ss.str());
}

EnsembleModel build_model(const ScenarioConfig& cfg) {
  const auto& m = cfg.model;
  if (m.sigma1.size() != m.sigma2.size()) {
    throw InvalidArgument("build_model: sigma1 and sigma2 lengths differ");
  }
  std::vector<NoiseParams> params;
  params.reserve(m.sigma1.size());
  for (std::size_t i = 0; i < m.sigma1.size(); ++i) params.push_back({m.sigma1[i], m.sigma2[i]});
  return build_ensemble(params, m.V, m.R, m.tau);
}

ControllerConfig resolve_controller(const ScenarioConfig& cfg, const EnsembleModel& model) {
  const std::size_t n = model.N;
  VectorXd q;
  if (cfg.controller.q) {
    q = *cfg.controller.q;
  } else {
    switch (cfg.kind) {
      case ScenarioKind::steer_to_clock:
        q = EnsembleWeight::unit(n, n - 1).vector();
        break;
      case ScenarioKind::sync_best_short:
      case ScenarioKind::balanced:
        q = weight_short(model.sigma1_sq).vector();
        break;
      case ScenarioKind::sync_best_long:
        q = weight_long(model.sigma2_sq).vector();
        break;
      default:
        q = EnsembleWeight::uniform(n).vector();
        break;
    }
  }
  ControllerConfig c{EnsembleWeight(q),
                     cfg.controller.F_o.value_or(default_observable_gain(n, model.tau)),
                     cfg.controller.K_bo.value_or(default_collective_gain(cfg.controller.m, model.tau)),
                     cfg.controller.m,
                     cfg.controller.phase,
                     cfg.kind == ScenarioKind::balanced ? ControlMode::balanced
                                                        : ControlMode::sync_only,
                     cfg.controller.stationary};
  return c;
}

namespace {

bool wants(const ScenarioConfig& cfg, const char* what) {
  return std::find(cfg.outputs.begin(), cfg.outputs.end(), what) != cfg.outputs.end();
}

std::vector<AllanCurve> parallel_curves(const MatrixXd& series, double tau,
                                        const std::vector<std::size_t>& ms, unsigned threads) {
  const auto rows = static_cast<std::size_t>(series.rows());
  std::vector<AllanCurve> out(rows);
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(rows)));
  if (workers == 1) {
    for (std::size_t i = 0; i < rows; ++i) {
      out[i] = allan_curve(series.row(static_cast<Eigen::Index>(i)).transpose(), tau, ms);
    }
    return out;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < rows; i += workers) {
        out[i] = allan_curve(series.row(static_cast<Eigen::Index>(i)).transpose(), tau, ms);
      }
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

void write_analytical_clocks(detail::ArtifactWriter& w, const EnsembleModel& model,
                             const std::vector<double>& intervals) {
  for (std::size_t i = 0; i < model.N; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const NoiseParams p{std::sqrt(model.sigma1_sq(ii)), std::sqrt(model.sigma2_sq(ii))};
    AllanCurve c;
    c.interval = intervals;
    for (double t : intervals) c.variance.push_back(analytical_allan_clock(p, t));
    w.write("analytical/clock_" + std::to_string(i + 1) + ".csv",
            [&](std::ostream& os) { write_allan_csv(os, c); });
  }
}

void write_analytical_pi(detail::ArtifactWriter& w, const std::string& file,
                         const EnsembleWeight& q, const EnsembleModel& model,
                         const std::vector<double>& intervals) {
  AllanCurve c;
  c.interval = intervals;
  for (double t : intervals) c.variance.push_back(allan_pi(q, model.sigma1_sq, model.sigma2_sq, t));
  w.write(file, [&](std::ostream& os) { write_allan_csv(os, c); });
}

void write_increments(detail::ArtifactWriter& w, const std::vector<std::string>& names,
                      const std::vector<const VectorXd*>& cols) {
  w.write("increments.csv", [&](std::ostream& os) {
    std::vector<std::string> header{"k"};
    header.insert(header.end(), names.begin(), names.end());
    csv::write_header(os, header);
    const Eigen::Index K = cols.empty() ? 0 : cols[0]->size();
    for (Eigen::Index k = 1; k < K; ++k) {
      os << k;
      for (const auto* c : cols) csv::write_field(os, (*c)(k));
      os << '\n';
    }
  });
}

void write_series(detail::ArtifactWriter& w, const std::string& file, const std::string& column,
                  const VectorXd& v) {
  w.write(file, [&](std::ostream& os) {
    csv::write_header(os, {"k", column});
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      os << k;
      csv::write_field(os, v(k));
      os << '\n';
    }
  });
}

EnsembleModel averaged_noise_model(const EnsembleModel& model) {
  const double s1 = model.sigma1_sq.mean();
  const double s2 = model.sigma2_sq.mean();
  std::vector<NoiseParams> params(model.N, NoiseParams{std::sqrt(s1), std::sqrt(s2)});
  return build_ensemble(params, model.meas.V, model.meas.R, model.tau);
}

void run_filter_kind(const ScenarioConfig& cfg, const EnsembleModel& model, std::size_t T,
                     std::uint64_t seed, detail::ArtifactWriter& w) {
  VectorXd epsilon;
  if (cfg.kind == ScenarioKind::determinate_kf) {
    const EnsembleWeight q(cfg.controller.q.value_or(EnsembleWeight::uniform(model.N).vector()));
    const Decomposition d = decompose(model, q);
    DeterminateKFRun run = run_determinate_kf(model, d, T, seed, cfg.increment_steps);
    epsilon = std::move(run.epsilon);
    if (wants(cfg, "increments")) {
      write_increments(w, {"H_o_rel", "P_oo_rel", "H_bo_rel", "P_bo_rel"},
                       {&run.H_o_increment_rel, &run.P_oo_increment_rel, &run.H_bo_increment_rel,
                        &run.P_bo_increment_rel});
    }
    if (wants(cfg, "gains")) {
      const StationaryGains g = solve_stationary(d, model.meas.R);
      w.write("gains.json", [&](std::ostream& os) { write_gains_json(os, g); });
    }
  } else {
    const EnsembleModel filter_model = cfg.kind == ScenarioKind::standard_kf_suboptimal
                                           ? averaged_noise_model(model)
                                           : model;
    StandardKFRun run = run_standard_kf(model, filter_model, T, seed, cfg.increment_steps);
    epsilon = std::move(run.epsilon);
    if (wants(cfg, "increments")) {
      write_increments(w, {"H_rel", "P_minus_abs", "P_minus_norm"},
                       {&run.gain_increment_rel, &run.prior_cov_increment, &run.prior_cov_norm});
    }
  }
  if (wants(cfg, "timescale")) write_series(w, "timescale.csv", "epsilon", epsilon);
  if (wants(cfg, "allan")) {
    const AllanCurve c = allan_curve(
        epsilon, model.tau,
        log_spaced_intervals(static_cast<std::size_t>(epsilon.size()), cfg.allan_per_decade));
    w.write("allan/timescale.csv", [&](std::ostream& os) { write_allan_csv(os, c); });
  }
}

void run_controlled_kind(const ScenarioConfig& cfg, const EnsembleModel& model, std::size_t T,
                         std::uint64_t seed, const std::vector<std::size_t>& ms,
                         unsigned threads, detail::ArtifactWriter& w) {
  const ControllerConfig ctl = resolve_controller(cfg, model);
  const bool log_commands = wants(cfg, "commands");
  EemController controller(model, ctl, std::nullopt, log_commands);

  SimulationOptions opts;
  opts.seed = seed;
  opts.record_states = wants(cfg, "sync_error") || wants(cfg, "trajectory");
  opts.record_measurements = false;
  opts.record_inputs = wants(cfg, "trajectory");
  opts.record_estimates = wants(cfg, "trajectory");
  const TrajectoryRecord rec = simulate(model, controller, T, opts);

  if (wants(cfg, "gains")) {
    w.write("gains.json", [&](std::ostream& os) { write_gains_json(os, controller.gains()); });
  }
  if (log_commands) {
    w.write("commands.csv", [&](std::ostream& os) { write_command_log_csv(os, controller.log()); });
  }
  if (wants(cfg, "trajectory")) {
    w.write("trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, rec, true); });
  }

  std::vector<double> intervals;
  for (auto m : ms) intervals.push_back(static_cast<double>(m) * model.tau);
  if (wants(cfg, "allan")) {
    const auto curves = parallel_curves(rec.h, model.tau, ms, threads);
    for (std::size_t i = 0; i < curves.size(); ++i) {
      w.write("allan/clock_" + std::to_string(i + 1) + ".csv",
              [&](std::ostream& os) { write_allan_csv(os, curves[i]); });
    }
  }
  const EnsembleWeight q0 = weight_short(model.sigma1_sq);
  const EnsembleWeight qinf = weight_long(model.sigma2_sq);
  if (wants(cfg, "analytical")) {
    write_analytical_clocks(w, model, intervals);
    write_analytical_pi(w, "analytical/pi_q.csv", ctl.q, model, intervals);
    write_analytical_pi(w, "analytical/pi_q0.csv", q0, model, intervals);
    write_analytical_pi(w, "analytical/pi_qinf.csv", qinf, model, intervals);
  }
  if (wants(cfg, "sync_error")) {
    const auto n = static_cast<Eigen::Index>(model.N);
    const SyncDestination dest = simulate_destination(model, ctl.q, T, opts);
    const MatrixXd delta = sync_error(rec, dest);
    w.write("sync_error.csv", [&](std::ostream& os) {
      csv::write_header(os, {"k", "relative_phase_sq", "mean_phase_error", "destination_z"});
      for (Eigen::Index k = 0; k < delta.cols(); ++k) {
        os << k;
        csv::write_field(os, (model.meas.V * delta.col(k).head(n)).squaredNorm());
        csv::write_field(os, delta.col(k).head(n).mean());
        csv::write_field(os, dest.r(0, k));
        os << '\n';
      }
    });
    if (ctl.mode == ControlMode::balanced) {
      const SyncDestination dinf = simulate_destination(model, qinf, T, opts);
      const MatrixXd dl = sync_error(rec, dinf);
      w.write("sync_error_qinf.csv", [&](std::ostream& os) {
        csv::write_header(os, {"k", "phase_error_qinf_weighted", "frequency_error_qinf_weighted"});
        for (std::size_t k = ctl.phase; k <= T; k += ctl.m) {
          const auto kk = static_cast<Eigen::Index>(k);
          os << k;
          csv::write_field(os, qinf.vector().dot(dl.col(kk).head(n)));
          csv::write_field(os, qinf.vector().dot(dl.col(kk).tail(n)));
          os << '\n';
        }
      });
    }
  }
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& cfg_in, const std::filesystem::path& out_dir,
                       const RunOptions& options) {
  ScenarioConfig cfg = cfg_in;
  if (options.seed) cfg.seed = *options.seed;
  if (options.horizon) cfg.horizon = *options.horizon;

  RunResult result;
  result.name = cfg.name;
  result.directory = out_dir / cfg.name;
  detail::ArtifactWriter w(result.directory);

  try {
    const EnsembleModel model = build_model(cfg);
    const std::size_t T = cfg.horizon;
    const auto ms = log_spaced_intervals(T + 1, cfg.allan_per_decade);
    std::vector<double> intervals;
    for (auto m : ms) intervals.push_back(static_cast<double>(m) * model.tau);

    switch (cfg.kind) {
      case ScenarioKind::free_run: {
        FreeRunPolicy policy(model.N);
        SimulationOptions opts;
        opts.seed = cfg.seed;
        opts.record_states = wants(cfg, "trajectory");
        opts.record_measurements = false;
        opts.record_inputs = wants(cfg, "trajectory");
        const TrajectoryRecord rec = simulate(model, policy, T, opts);
        if (wants(cfg, "trajectory")) {
          w.write("trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, rec); });
        }
        if (wants(cfg, "allan")) {
          const auto curves = parallel_curves(rec.h, model.tau, ms, options.allan_threads);
          for (std::size_t i = 0; i < curves.size(); ++i) {
            w.write("allan/clock_" + std::to_string(i + 1) + ".csv",
                    [&](std::ostream& os) { write_allan_csv(os, curves[i]); });
          }
        }
        if (wants(cfg, "analytical")) write_analytical_clocks(w, model, intervals);
        break;
      }
      case ScenarioKind::standard_kf:
      case ScenarioKind::standard_kf_suboptimal:
      case ScenarioKind::determinate_kf:
        run_filter_kind(cfg, model, T, cfg.seed, w);
        if (wants(cfg, "analytical")) write_analytical_clocks(w, model, intervals);
        break;
      default:
        run_controlled_kind(cfg, model, T, cfg.seed, ms, options.allan_threads, w);
        break;
    }
  } catch (const std::exception& e) {
    result.partial = true;
    result.error = e.what();
    result.exit_code = 3;
  }

  result.artifacts = w.artifacts();
  json echo = json::parse(cfg.source);
  echo["seed"] = cfg.seed;
  echo["horizon"] = cfg.horizon;
  detail::write_manifest(result.directory,
                         {cfg.name, to_string(cfg.kind), cfg.seed, cfg.horizon, echo.dump(),
                          result.partial, result.error},
                         result.artifacts);
  return result;
}

}  // namespace eem
