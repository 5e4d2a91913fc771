#pragma once

// Executes a parsed RunConfig and writes its output files.

#include "demixkit/config.hpp"
#include "demixkit/demos.hpp"
#include "demixkit/geometry.hpp"
#include "demixkit/io.hpp"
#include "demixkit/phase_diagram.hpp"

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace demixkit {

struct RunOutcome {
  std::vector<std::filesystem::path> files;
  bool diverged = false;  // some solve returned Diverged
};

namespace detail {

class Emitter {
 public:
  Emitter(std::filesystem::path dir, RunOutcome& out) : dir_(std::move(dir)), out_(out) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError(dir_.string() + ": cannot create output directory: " + ec.message());
  }

  void csv(const std::string& name, const CsvTable& t) { t.write(add(name)); }
  void text(const std::string& name, const std::string& s) { write_file(add(name), s); }
  void pgm(const std::string& name, const GrayImage& img) { write_pgm(add(name), img); }

 private:
  std::filesystem::path add(const std::string& name) {
    out_.files.push_back(dir_ / name);
    return out_.files.back();
  }

  std::filesystem::path dir_;
  RunOutcome& out_;
};

inline CsvTable key_value(const std::vector<std::pair<std::string, CsvField>>& kv) {
  CsvTable t({"quantity", "value"});
  for (const auto& [k, v] : kv) t.add({k, v});
  return t;
}

inline void run_demix(const RunConfig& cfg, const DemixConfig& dc, Emitter& emit, RunOutcome& out,
                      std::ostream& log) {
  SolveResult r;
  if (dc.method == "admm") r = admm_demix(dc.problem, cfg.solver);
  else if (dc.method == "decomposition") r = decomposition_demix(dc.problem, cfg.solver);
  else r = solve(dc.problem, cfg.solver);
  out.diverged = r.status == SolveStatus::Diverged;

  CsvTable comps({"component", "row", "col", "value"});
  for (std::size_t i = 0; i < r.components.size(); ++i) {
    const Signal& c = r.components[i];
    for (std::ptrdiff_t col = 0; col < c.cols(); ++col)
      for (std::ptrdiff_t row = 0; row < c.rows(); ++row)
        comps.add({static_cast<std::int64_t>(i), std::int64_t{row}, std::int64_t{col}, c(row, col)});
  }
  emit.csv("components.csv", comps);
  const double primal = r.primal_residual.empty() ? 0.0 : r.primal_residual.back();
  emit.csv("summary.csv",
           key_value({{"status", std::string(to_string(r.status))},
                      {"iterations", std::int64_t{r.iterations}},
                      {"objective", r.objective},
                      {"primal_residual", primal},
                      {"rho", r.rho}}));
  log << "demix: " << to_string(r.status) << " after " << r.iterations
      << " iterations, objective " << format_double(r.objective) << '\n';
}

inline void run_sdim(const RunConfig& cfg, const SdimConfig& sc, unsigned threads, Emitter& emit,
                     std::ostream& log) {
  std::vector<SdimRow> rows;
  for (std::size_t i = 0; i < sc.cones.size(); ++i) {
    const auto& cone = sc.cones[i];
    const auto est = sdim_monte_carlo(cone, sc.samples, derive_seed(cfg.seed, {i}), threads);
    rows.push_back({cone.name(), static_cast<std::int64_t>(cone.ambient_dim()), est});
    log << "sdim " << cone.name() << " d=" << cone.ambient_dim() << ": " << format_double(est.mean)
        << " +- " << format_double(est.std_error) << '\n';
  }
  emit.csv("sdim.csv", sdim_csv(rows));
}

inline void run_phase(const PhaseGridSpec& spec, unsigned threads, Emitter& emit, std::ostream& log) {
  const PhaseGridResult g = run_phase_diagram(spec, threads);
  emit.csv("phase_grid.csv", phase_csv(g));
  CsvTable contours({"level", "segment", "s_x", "s_y"});
  for (const auto& c : g.contours)
    for (std::size_t k = 0; k < c.lines.size(); ++k)
      for (const auto& p : c.lines[k]) contours.add({c.level, static_cast<std::int64_t>(k), p[0], p[1]});
  emit.csv("phase_contours.csv", contours);
  emit.text("phase_heatmap.svg", svg_heatmap(g));
  int failures = 0;
  for (const auto& c : g.cells) failures += c.solver_failures;
  log << "phase-diagram: " << g.cells.size() << " cells, " << failures << " diverged solves\n";
}

inline void run_demo(const RunConfig& cfg, const DemoConfig& demo, Emitter& emit, RunOutcome& out,
                     std::ostream& log) {
  if (const auto* c = std::get_if<SpikesSinesConfig>(&demo)) {
    CsvTable t({"trial", "error_x", "error_y", "iterations", "status"});
    for (int k = 0; k < c->trials; ++k) {
      const auto r = demo_spikes_sines(c->d, c->s_spike, c->s_dct,
                                       derive_seed(cfg.seed, {static_cast<std::uint64_t>(k)}),
                                       c->lambda, cfg.solver);
      out.diverged = out.diverged || r.solve.status == SolveStatus::Diverged;
      t.add({std::int64_t{k}, r.error_x, r.error_y, std::int64_t{r.solve.iterations},
             std::string(to_string(r.solve.status))});
      if (k == 0) emit.csv("waveform.csv", waveform_csv(r));
      log << "spikes-sines trial " << k << ": error_x " << format_double(r.error_x) << ", error_y "
          << format_double(r.error_y) << '\n';
    }
    emit.csv("spikes_sines.csv", t);
  } else if (const auto* c = std::get_if<TextureConfig>(&demo)) {
    Matrix image;
    std::optional<TextureInstance> truth;
    if (c->image) {
      image = from_gray(read_pgm(*c->image));
    } else {
      truth = checkerboard_texture(c->n, c->block, c->fraction, c->magnitude, cfg.seed);
      image = truth->image();
    }
    const double lambda = c->lambda.value_or(default_texture_lambda(image));
    const auto r = demo_texture(image, lambda, cfg.solver);
    out.diverged = r.solve.status == SolveStatus::Diverged;
    const double lo = image.minCoeff(), hi = std::max(image.maxCoeff(), lo + 1e-12);
    const double smax = std::max(r.sparse.cwiseAbs().maxCoeff(), 1e-12);
    emit.pgm("texture_input.pgm", to_gray(image, lo, hi));
    emit.pgm("texture_low_rank.pgm", to_gray(r.low_rank, lo, hi));
    emit.pgm("texture_sparse.pgm", to_gray(r.sparse, -smax, smax));
    std::vector<std::pair<std::string, CsvField>> kv{
        {"status", std::string(to_string(r.solve.status))},
        {"iterations", std::int64_t{r.solve.iterations}},
        {"lambda", lambda},
        {"objective", r.solve.objective}};
    if (truth) {
      kv.push_back({"error_low_rank", relative_error(r.low_rank, truth->low_rank)});
      kv.push_back({"error_sparse", relative_error(r.sparse, truth->sparse)});
    }
    emit.csv("texture.csv", key_value(kv));
    log << "texture: " << to_string(r.solve.status) << " after " << r.solve.iterations << " iterations\n";
  } else if (const auto* c = std::get_if<DoaConfig>(&demo)) {
    std::vector<BearingRow> rows;
    for (int k = 0; k < c->trials; ++k) {
      DoaScenario s = c->scenario;
      s.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(k)});
      const auto r = demo_doa(s, c->lambda, cfg.solver);
      out.diverged = out.diverged || r.split.solve.status == SolveStatus::Diverged;
      rows.insert(rows.end(), r.rows.begin(), r.rows.end());
      if (k == 0) {
        const auto grid = music_grid();
        CsvTable spec({"theta", "raw", "demixed"});
        for (std::size_t i = 0; i < grid.size(); ++i)
          spec.add({grid[i], r.raw_spectrum[i], r.demixed_spectrum[i]});
        emit.csv("doa_spectrum.csv", spec);
      }
    }
    emit.csv("doa.csv", doa_csv(rows));
    std::vector<double> raw, dem;
    for (const auto& r : rows) (r.method == "raw" ? raw : dem).push_back(r.error_deg);
    const auto sr = summarize_errors(raw), sd = summarize_errors(dem);
    log << "doa: raw median " << format_double(sr.median) << " deg, >3 deg " << format_double(sr.fraction_above)
        << "; demixed median " << format_double(sd.median) << " deg, >3 deg "
        << format_double(sd.fraction_above) << '\n';
  } else if (const auto* c = std::get_if<DeconvConfig>(&demo)) {
    const auto r = demo_blind_deconv(c->m, c->d, cfg.seed, cfg.solver);
    out.diverged = r.solve.status == SolveStatus::Diverged;
    emit.csv("deconv.csv",
             key_value({{"status", std::string(to_string(r.solve.status))},
                        {"iterations", std::int64_t{r.solve.iterations}},
                        {"feasibility", r.feasibility},
                        {"z0_norm", r.z0.norm()},
                        {"objective", r.objective},
                        {"truth_objective", r.truth_objective}}));
    CsvTable f({"index", "x0", "x_est", "y0", "y_est"});
    const auto n = std::max(r.x0.size(), r.y0.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::ptrdiff_t i = 0; i < n; ++i)
      f.add({std::int64_t{i}, i < r.x0.size() ? r.x0(i) : nan, i < r.x0.size() ? r.x_est(i) : nan,
             i < r.y0.size() ? r.y0(i) : nan, i < r.y0.size() ? r.y_est(i) : nan});
    emit.csv("deconv_factors.csv", f);
    log << "blind-deconv: feasibility " << format_double(r.feasibility) << ", objective "
        << format_double(r.objective) << " vs ground truth " << format_double(r.truth_objective) << '\n';
  }
}

}  // namespace detail

inline RunOutcome run(const RunConfig& cfg, unsigned threads, std::ostream& log) {
  RunOutcome out;
  detail::Emitter emit(cfg.output_dir, out);
  std::visit(
      [&](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, DemixConfig>) detail::run_demix(cfg, body, emit, out, log);
        else if constexpr (std::is_same_v<T, SdimConfig>) detail::run_sdim(cfg, body, threads, emit, log);
        else if constexpr (std::is_same_v<T, PhaseGridSpec>) detail::run_phase(body, threads, emit, log);
        else if constexpr (std::is_same_v<T, DemoConfig>) detail::run_demo(cfg, body, emit, out, log);
        else throw ConfigError("config: no command body");
      },
      cfg.body);
  return out;
}

}  // namespace demixkit
