#pragma once

// JSON run configuration for the command-line tool. Every object is parsed
// strictly: an unknown key is an error naming the key and where it sits.

#include "demixkit/demos.hpp"
#include "demixkit/geometry.hpp"
#include "demixkit/operators.hpp"
#include "demixkit/phase_diagram.hpp"
#include "demixkit/solvers.hpp"

#include "json.hpp"

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string_view>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace demixkit {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::json;

namespace detail {

// Wraps one JSON object, remembers which keys were read, and rejects the rest.
class StrictObject {
 public:
  StrictObject(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  /// Rejects any key outside `allowed` up front, so a typo is reported even
  /// when required keys are also missing.
  void only(std::initializer_list<std::string_view> allowed) const {
    for (const auto& item : j_.items()) {
      bool ok = false;
      for (auto a : allowed) ok = ok || item.key() == a;
      if (!ok) throw ConfigError(where_ + ": unknown key \"" + item.key() + "\"");
    }
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key);
  }

  const Json& required(const std::string& key) {
    if (!has(key)) throw ConfigError(where_ + ": missing required key \"" + key + "\"");
    return j_.at(key);
  }

  template <class T>
  T get(const std::string& key) {
    const Json& v = required(key);
    try {
      return v.get<T>();
    } catch (const Json::exception&) {
      throw ConfigError(path(key) + ": wrong type (got " + std::string(v.type_name()) + ")");
    }
  }

  template <class T>
  T get_or(const std::string& key, T fallback) {
    return has(key) ? get<T>(key) : fallback;
  }

  StrictObject object(const std::string& key) { return StrictObject(required(key), path(key)); }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items())
      if (!used_.count(item.key()))
        throw ConfigError(where_ + ": unknown key \"" + item.key() + "\"");
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> used_;
};

inline double positive(double v, const std::string& what) {
  if (!(v > 0.0)) throw ConfigError(what + " must be positive");
  return v;
}

}  // namespace detail

enum class Command { Demix, PhaseDiagram, Sdim, Demo };

inline std::string_view to_string(Command c) {
  switch (c) {
    case Command::Demix: return "demix";
    case Command::PhaseDiagram: return "phase-diagram";
    case Command::Sdim: return "sdim";
    case Command::Demo: return "demo";
  }
  return "?";
}

inline std::optional<Command> parse_command(std::string_view s) {
  if (s == "demix") return Command::Demix;
  if (s == "phase-diagram") return Command::PhaseDiagram;
  if (s == "sdim") return Command::Sdim;
  if (s == "demo") return Command::Demo;
  return std::nullopt;
}

struct DemixConfig {
  DemixProblem problem;
  std::string method;  // auto | admm | decomposition
};

struct SdimConfig {
  std::vector<ConeModel> cones;
  std::int64_t samples = 10000;
};

struct SpikesSinesConfig {
  int d = 128;
  int s_spike = 8;
  int s_dct = 8;
  double lambda = 1.0;
  int trials = 1;
};

struct TextureConfig {
  std::optional<std::string> image;  // PGM path; synthetic checkerboard otherwise
  int n = 32;
  int block = 4;
  double fraction = 0.05;
  double magnitude = 3.0;
  std::optional<double> lambda;
};

struct DoaConfig {
  DoaScenario scenario;
  double lambda = kDefaultDoaLambda;
  int trials = 1;
};

struct DeconvConfig {
  int m = 8;
  int d = 8;
};

using DemoConfig = std::variant<SpikesSinesConfig, TextureConfig, DoaConfig, DeconvConfig>;

inline std::string_view demo_name(const DemoConfig& c) {
  switch (c.index()) {
    case 0: return "spikes-sines";
    case 1: return "texture";
    case 2: return "doa";
    default: return "blind-deconv";
  }
}

struct RunConfig {
  Command command = Command::Demix;
  std::string output_dir = ".";
  std::uint64_t seed = 0;
  SolverOptions solver;
  std::variant<std::monostate, DemixConfig, PhaseGridSpec, SdimConfig, DemoConfig> body;
};

namespace detail {

inline SolverOptions parse_solver(StrictObject& parent, SolverOptions base) {
  if (!parent.has("solver")) return base;
  StrictObject o = parent.object("solver");
  o.only({"rho", "max_iter", "primal_tol", "dual_tol", "adaptive_rho", "seed"});
  base.rho = positive(o.get_or("rho", base.rho), "solver.rho");
  base.max_iter = o.get_or("max_iter", base.max_iter);
  base.primal_tol = positive(o.get_or("primal_tol", base.primal_tol), "solver.primal_tol");
  base.dual_tol = positive(o.get_or("dual_tol", base.dual_tol), "solver.dual_tol");
  base.adaptive_rho = o.get_or("adaptive_rho", base.adaptive_rho);
  base.seed = o.get_or("seed", base.seed);
  o.finish();
  if (base.max_iter < 1) throw ConfigError("solver.max_iter must be >= 1");
  return base;
}

inline Matrix parse_matrix(const Json& j, const std::string& where) {
  try {
    if (j.is_array() && !j.empty() && j.front().is_array()) {
      const auto rows = static_cast<std::ptrdiff_t>(j.size());
      const auto cols = static_cast<std::ptrdiff_t>(j.front().size());
      Matrix m(rows, cols);
      for (std::ptrdiff_t r = 0; r < rows; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (static_cast<std::ptrdiff_t>(row.size()) != cols)
          throw ConfigError(where + ": ragged matrix (row " + std::to_string(r) + ")");
        for (std::ptrdiff_t c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
      }
      return m;
    }
    if (j.is_array()) {
      Matrix m(static_cast<std::ptrdiff_t>(j.size()), 1);
      for (std::size_t i = 0; i < j.size(); ++i) m(static_cast<std::ptrdiff_t>(i), 0) = j[i].get<double>();
      return m;
    }
  } catch (const Json::exception&) {
    throw ConfigError(where + ": entries must be numbers");
  }
  throw ConfigError(where + ": expected an array or an array of arrays");
}

inline LinearOp parse_operator(StrictObject o, const Shape& signal, const std::string& where) {
  o.only({"kind", "seed", "matrix", "mask", "m", "d", "input_shape"});
  const auto kind = o.get<std::string>("kind");
  LinearOp op = LinearOp::identity(signal);
  if (kind == "identity") {
  } else if (kind == "dct") {
    op = LinearOp::dct(signal.rows);
  } else if (kind == "random_rotation") {
    op = LinearOp::random_rotation(signal.rows, o.get<std::uint64_t>("seed"));
  } else if (kind == "dense") {
    op = LinearOp::dense(parse_matrix(o.required("matrix"), o.path("matrix")));
  } else if (kind == "subsample_rows") {
    op = LinearOp::subsample_rows(signal, o.get<std::vector<bool>>("mask"));
  } else if (kind == "conv_lift") {
    op = LinearOp::conv_lift(o.get<std::ptrdiff_t>("m"), o.get<std::ptrdiff_t>("d"));
  } else {
    throw ConfigError(where + ".kind: unknown operator \"" + kind + "\"");
  }
  o.finish();
  return op;
}

inline DemixConfig parse_demix(StrictObject& root) {
  const Matrix z0 = parse_matrix(root.required("observation"), "config.observation");
  const auto method = root.get_or<std::string>("method", "auto");
  if (method != "auto" && method != "admm" && method != "decomposition")
    throw ConfigError("config.method must be \"auto\", \"admm\" or \"decomposition\"");

  // The measurement's input shape fixes the component shapes; without one
  // the observation is the superposition itself.
  std::optional<LinearOp> phi;
  if (root.has("measurement")) {
    StrictObject m = root.object("measurement");
    // Component shape for dense / subsample needs to be known up front.
    Shape in = Shape::of(z0);
    if (m.has("input_shape")) {
      const auto dims = m.get<std::vector<std::ptrdiff_t>>("input_shape");
      if (dims.size() != 2) throw ConfigError("config.measurement.input_shape must be [rows, cols]");
      in = Shape::matrix(dims[0], dims[1]);
    }
    phi = parse_operator(std::move(m), in, "config.measurement");
  }
  const Shape signal = phi ? phi->input_shape() : Shape::of(z0);

  const Json& comps = root.required("components");
  if (!comps.is_array()) throw ConfigError("config.components: expected an array");
  std::vector<Component> components;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const std::string where = "config.components[" + std::to_string(i) + "]";
    StrictObject c(comps[i], where);
    c.only({"gauge", "weight", "dictionary"});
    GaugeKind kind;
    try {
      kind = parse_gauge_kind(c.get<std::string>("gauge"));
    } catch (const InvalidArgument& e) {
      throw ConfigError(where + ".gauge: " + e.what());
    }
    const double weight = positive(c.get_or("weight", 1.0), where + ".weight");
    std::optional<LinearOp> dict;
    if (c.has("dictionary")) dict = parse_operator(c.object("dictionary"), signal, where + ".dictionary");
    c.finish();
    const Shape gs = dict ? dict->output_shape() : signal;
    GaugeSpec g = is_matrix_kind(kind) || gs.cols > 1 ? GaugeSpec::matrix(kind, gs.rows, gs.cols)
                                                       : GaugeSpec::vector(kind, gs.rows);
    components.push_back(Component{g, weight, dict});
  }

  std::optional<double> slack;
  if (root.has("quadratic_slack"))
    slack = positive(root.get<double>("quadratic_slack"), "config.quadratic_slack");

  return DemixConfig{
      DemixProblem{z0, phi ? *phi : LinearOp::identity(Shape::of(z0)), std::move(components), slack},
      method};
}

inline ConeModel parse_cone(StrictObject o, const std::string& where) {
  o.only({"kind", "k", "d", "s", "signs"});
  const auto kind = o.get<std::string>("kind");
  std::optional<ConeModel> cone;
  if (kind == "subspace") {
    cone = ConeModel::subspace(o.get<std::ptrdiff_t>("k"), o.get<std::ptrdiff_t>("d"));
  } else if (kind == "orthant") {
    cone = ConeModel::orthant(o.get<std::ptrdiff_t>("d"));
  } else if (kind == "descent_l1") {
    if (o.has("signs")) cone = ConeModel::descent_l1(o.get<std::vector<int>>("signs"));
    else cone = ConeModel::descent_l1_sparsity(o.get<std::ptrdiff_t>("d"), o.get<std::ptrdiff_t>("s"));
  } else {
    throw ConfigError(where + ".kind: unknown cone \"" + kind + "\"");
  }
  o.finish();
  return *cone;
}

inline SdimConfig parse_sdim(StrictObject& root) {
  SdimConfig cfg;
  if (root.has("cones")) {
    const Json& list = root.required("cones");
    if (!list.is_array() || list.empty()) throw ConfigError("config.cones: expected a nonempty array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string where = "config.cones[" + std::to_string(i) + "]";
      cfg.cones.push_back(parse_cone(StrictObject(list[i], where), where));
    }
  } else {
    cfg.cones.push_back(parse_cone(root.object("cone"), "config.cone"));
  }
  cfg.samples = root.get_or<std::int64_t>("samples", cfg.samples);
  if (cfg.samples < 100) throw ConfigError("config.samples must be >= 100");
  return cfg;
}

inline PhaseGridSpec parse_phase(StrictObject& root, std::uint64_t seed, const SolverOptions& solver) {
  PhaseGridSpec s;
  s.d = root.get_or("d", s.d);
  if (root.has("sparsity_axis")) {
    s.sx_axis = s.sy_axis = root.get<std::vector<int>>("sparsity_axis");
  } else {
    s.sx_axis = root.get_or("sx_axis", default_sparsity_axis(s.d));
    s.sy_axis = root.get_or("sy_axis", default_sparsity_axis(s.d));
  }
  s.trials_per_cell = root.get_or("trials_per_cell", s.trials_per_cell);
  s.lambda_grid = root.get_or("lambda_grid", s.lambda_grid);
  s.success_tol = root.get_or("success_tol", s.success_tol);
  s.sdim_samples = root.get_or("sdim_samples", s.sdim_samples);
  s.seed = seed;
  s.solver = solver;
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

inline DemoConfig parse_demo(StrictObject& root, std::uint64_t seed) {
  const auto name = root.get<std::string>("demo");
  if (name == "spikes-sines") {
    SpikesSinesConfig c;
    c.d = root.get_or("d", c.d);
    c.s_spike = root.get_or("s_spike", c.s_spike);
    c.s_dct = root.get_or("s_dct", c.s_dct);
    c.lambda = positive(root.get_or("lambda", c.lambda), "config.lambda");
    c.trials = root.get_or("trials", c.trials);
    if (c.trials < 1) throw ConfigError("config.trials must be >= 1");
    return c;
  }
  if (name == "texture") {
    TextureConfig c;
    if (root.has("image")) c.image = root.get<std::string>("image");
    c.n = root.get_or("n", c.n);
    c.block = root.get_or("block", c.block);
    c.fraction = root.get_or("fraction", c.fraction);
    c.magnitude = root.get_or("magnitude", c.magnitude);
    if (root.has("lambda")) c.lambda = positive(root.get<double>("lambda"), "config.lambda");
    return c;
  }
  if (name == "doa") {
    DoaConfig c;
    auto& s = c.scenario;
    s.n = root.get_or("n", s.n);
    s.r = root.get_or("r", s.r);
    s.bearings_deg = root.get_or("bearings", s.bearings_deg);
    s.snapshots = root.get_or("snapshots", s.snapshots);
    s.snr_db = root.get_or("snr_db", s.snr_db);
    s.noise_spread = root.get_or("noise_spread", s.noise_spread);
    s.seed = seed;
    c.lambda = positive(root.get_or("lambda", c.lambda), "config.lambda");
    c.trials = root.get_or("trials", c.trials);
    if (c.trials < 1) throw ConfigError("config.trials must be >= 1");
    try {
      s.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    return c;
  }
  if (name == "blind-deconv") {
    DeconvConfig c;
    c.m = root.get_or("m", c.m);
    c.d = root.get_or("d", c.d);
    if (c.m < 1 || c.d < 1 || c.m > 32 || c.d > 32) throw ConfigError("config.m and config.d must lie in [1, 32]");
    return c;
  }
  throw ConfigError("config.demo: unknown demo \"" + name +
                    "\" (expected spikes-sines, texture, doa or blind-deconv)");
}

// 1-based line and column of a byte offset.
inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

// Options used when the config has no "solver" block: whatever the library
// routine behind the command uses by default.
inline SolverOptions default_solver(Command c, const Json& root) {
  if (c == Command::PhaseDiagram) return PhaseGridSpec{}.solver;
  if (c == Command::Demo) {
    const auto it = root.find("demo");
    const std::string demo = it != root.end() && it->is_string() ? it->get<std::string>() : "";
    if (demo == "doa") return default_doa_options();
    if (demo == "blind-deconv") return default_deconv_options();
    return default_demo_options();
  }
  return SolverOptions{};
}

}  // namespace detail

struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
};

inline RunConfig parse_config(const std::string& text, const ConfigOverrides& overrides = {}) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    // nlohmann reports the offset one past the offending byte.
    const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string msg = e.what();
    if (const auto p = msg.find("parse error"); p != std::string::npos) msg = msg.substr(p);
    throw ConfigError("config: malformed JSON at line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + msg);
  }

  detail::StrictObject root(j, "config");
  RunConfig cfg;
  const auto name = root.get<std::string>("command");
  const auto cmd = parse_command(name);
  if (!cmd)
    throw ConfigError("config.command: unknown command \"" + name +
                      "\" (expected demix, phase-diagram, sdim or demo)");
  switch (*cmd) {
    case Command::Demix:
      root.only({"command", "output_dir", "seed", "solver", "observation", "measurement",
                 "components", "quadratic_slack", "method"});
      break;
    case Command::PhaseDiagram:
      root.only({"command", "output_dir", "seed", "solver", "d", "sparsity_axis", "sx_axis",
                 "sy_axis", "trials_per_cell", "lambda_grid", "success_tol", "sdim_samples"});
      break;
    case Command::Sdim:
      root.only({"command", "output_dir", "seed", "cone", "cones", "samples"});
      break;
    case Command::Demo:
      root.only({"command", "output_dir", "seed", "solver", "demo", "d", "s_spike", "s_dct",
                 "lambda", "trials", "image", "n", "block", "fraction", "magnitude", "r",
                 "bearings", "snapshots", "snr_db", "noise_spread", "m"});
      break;
  }
  cfg.command = *cmd;
  cfg.output_dir = root.get_or<std::string>("output_dir", cfg.output_dir);
  cfg.seed = root.get_or<std::uint64_t>("seed", cfg.seed);
  if (overrides.output_dir) cfg.output_dir = *overrides.output_dir;
  if (overrides.seed) cfg.seed = *overrides.seed;

  cfg.solver = detail::parse_solver(root, detail::default_solver(cfg.command, j));

  try {
    switch (cfg.command) {
      case Command::Demix: cfg.body = detail::parse_demix(root); break;
      case Command::PhaseDiagram: cfg.body = detail::parse_phase(root, cfg.seed, cfg.solver); break;
      case Command::Sdim: cfg.body = detail::parse_sdim(root); break;
      case Command::Demo: cfg.body = detail::parse_demo(root, cfg.seed); break;
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  root.finish();
  return cfg;
}

}  // namespace demixkit
