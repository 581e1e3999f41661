#include "dncs/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <ostream>
#include <random>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "dncs/cli/io.hpp"
#include "dncs/errors.hpp"
#include "dncs/sim_eval.hpp"

#ifndef DNCS_VERSION
#define DNCS_VERSION "unknown"
#endif

namespace dncs::cli {

namespace {

using json = nlohmann::ordered_json;
using distributed::Method;
using Clock = std::chrono::steady_clock;

const char* method_name(Method m) { return m == Method::Lqr ? "lqr" : "hinf"; }

class Stopwatch {
 public:
  Stopwatch(RunReport& rep, std::string stage)
      : rep_(rep), stage_(std::move(stage)), start_(Clock::now()) {}
  ~Stopwatch() {
    rep_.timings_s.emplace_back(
        stage_, std::chrono::duration<double>(Clock::now() - start_).count());
  }

 private:
  RunReport& rep_;
  std::string stage_;
  Clock::time_point start_;
};

struct Context {
  const RunOptions& opts;
  BenchmarkConfig cfg;
  RunReport rep;
  std::ostream& log;
  json summary = json::object();

  void emit(const std::string& name, const std::string& text) {
    std::filesystem::create_directories(opts.out_dir);
    write_text((std::filesystem::path(opts.out_dir) / name).string(), text);
    rep.outputs.emplace_back(name, sha256_hex(text));
  }
};

json eigen_list(const Matrix& A) {
  const Eigen::VectorXcd ev = A.eigenvalues();
  std::vector<std::complex<double>> v(ev.data(), ev.data() + ev.size());
  std::sort(v.begin(), v.end(), [](auto a, auto b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  json out = json::array();
  for (const auto& z : v) out.push_back({z.real(), z.imag()});
  return out;
}

void print_eigenvalues(std::ostream& log, const std::string& name, const json& list) {
  log << "eigenvalues of " << name << ":\n";
  for (const auto& z : list) {
    log << fmt::format("  {:+.10e} {:+.10e}j\n", z[0].get<double>(), z[1].get<double>());
  }
}

Index mode_index(const distributed::ModalDecomposition& dec, const std::string& label) {
  for (size_t i = 0; i < dec.labels.size(); ++i) {
    if (dec.labels[i] == label) return static_cast<Index>(i);
  }
  throw std::invalid_argument("unknown mode '" + label + "'");
}

distributed::LocalGains gains_for(const BenchmarkConfig& cfg, Method measure,
                                  std::optional<Method> gains, Index machines) {
  return distributed::LocalGains::uniform(default_gain(cfg, gains.value_or(measure)), machines);
}

double unit_draw(std::mt19937_64& rng) {
  return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0;
}

int run(const std::string& name, const RunOptions& opts,
        std::vector<std::pair<std::string, std::string>> flags, std::ostream& log,
        const std::function<void(Context&)>& precheck, const std::function<int(Context&)>& body) {
  Context ctx{opts, {}, {}, log};
  ctx.rep.command = name;
  ctx.rep.flags = std::move(flags);
  ctx.rep.flags.emplace_back("seed", std::to_string(opts.seed));
  ctx.rep.flags.emplace_back("threads", std::to_string(opts.threads));
  try {
    ctx.cfg = opts.config_path ? load_config(*opts.config_path, opts.env)
                               : parse_config("", opts.env);
    if (precheck) precheck(ctx);
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  ctx.rep.config_yaml = to_yaml(ctx.cfg);

  int code;
  try {
    code = body(ctx);
  } catch (const NotStabilizable& e) {
    ctx.rep.notes.push_back(std::string("error: ") + e.what());
    log << "error: " << e.what() << "\n";
    code = kExitInvariant;
  } catch (const Error& e) {
    ctx.rep.notes.push_back(std::string("error: ") + e.what());
    log << "error: " << e.what() << "\n";
    code = kExitNumerical;
  } catch (const std::invalid_argument& e) {
    ctx.rep.notes.push_back(std::string("error: ") + e.what());
    log << "error: " << e.what() << "\n";
    code = kExitUsage;
  }
  ctx.rep.exit_code = code;
  ctx.rep.summary_json = ctx.summary.dump();
  for (const auto& w : ctx.rep.warnings) log << "warning: " << w << "\n";
  for (const auto& n : ctx.rep.notes) {
    if (n.rfind("error: ", 0) != 0) log << "note: " << n << "\n";
  }
  std::filesystem::create_directories(opts.out_dir);
  write_text((std::filesystem::path(opts.out_dir) / "report.json").string(), ctx.rep.to_json());
  return code;
}

}  // namespace

std::string RunReport::to_json() const {
  json j;
  j["command"] = command;
  json f = json::object();
  for (const auto& [k, v] : flags) f[k] = v;
  j["flags"] = f;
  j["versions"] = {{"dncs", DNCS_VERSION},
                   {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION,
                                         EIGEN_MINOR_VERSION)},
                   {"compiler", __VERSION__}};
  j["config_sha256"] = sha256_hex(config_yaml);
  j["config_yaml"] = config_yaml;
  json t = json::object();
  for (const auto& [k, v] : timings_s) t[k] = v;
  j["timings_s"] = t;
  j["warnings"] = warnings;
  j["notes"] = notes;
  j["summary"] = json::parse(summary_json);
  json o = json::object();
  for (const auto& [k, v] : outputs) o[k] = v;
  j["outputs_sha256"] = o;
  j["exit_code"] = exit_code;
  return j.dump(2) + "\n";
}

int cmd_linearize(const RunOptions& opts, std::ostream& log) {
  return run("linearize", opts, {}, log, nullptr, [&](Context& c) {
    Pipeline p;
    {
      Stopwatch sw(c.rep, "equilibrium_and_linearization");
      p = build_pipeline(c.cfg);
    }
    const auto gains = gains_for(c.cfg, Method::Lqr, std::nullopt, p.plant.machines);
    const Matrix Abar = p.plant.A + p.plant.Bu * gains.K;

    c.emit("A.txt", format_matrix(p.plant.A));
    c.emit("Bu.txt", format_matrix(p.plant.Bu));
    c.emit("Bw.txt", format_matrix(p.plant.Bw));
    c.emit("Abar.txt", format_matrix(Abar));
    c.emit("x0.txt", format_matrix(p.op.x0));
    c.emit("u0.txt", format_matrix(p.op.u0));
    Vector Tm(static_cast<Index>(p.op.generators.size()));
    for (size_t i = 0; i < p.op.generators.size(); ++i) {
      Tm(static_cast<Index>(i)) = p.op.generators[i].T_m;
    }
    c.emit("T_m.txt", format_matrix(Tm));

    const json eA = eigen_list(p.plant.A), eAbar = eigen_list(Abar);
    print_eigenvalues(c.log, "A", eA);
    print_eigenvalues(c.log, "Abar = A + Bu K (LQR-pipeline gains)", eAbar);
    c.summary["equilibrium_rhs_norm"] = p.op.rhs_norm;
    c.summary["swap_symmetry_residual"] = grid::swap_symmetry_residual(p.plant);
    c.summary["eigenvalues_A"] = eA;
    c.summary["eigenvalues_Abar"] = eAbar;
    c.summary["Abar_spectral_abscissa"] = linalg::spectral_abscissa(Abar);
    distributed::local_closed_loop(p.plant, gains);
    c.summary["Abar_hurwitz"] = true;
    return kExitOk;
  });
}

int cmd_design(const RunOptions& opts, Method measure, double delay, std::optional<Method> gains,
               std::ostream& log) {
  std::vector<std::pair<std::string, std::string>> flags = {
      {"measure", method_name(measure)}, {"delay_s", format_number(delay)}};
  if (gains) flags.emplace_back("gains", method_name(*gains));
  return run(
      "design", opts, flags, log,
      [&](Context&) {
        if (!(delay >= 0.0) || !std::isfinite(delay)) {
          throw std::invalid_argument("--delay must be a nonnegative number of seconds");
        }
      },
      [&](Context& c) {
        const Pipeline p = build_pipeline(c.cfg);
        const auto lg = gains_for(c.cfg, measure, gains, p.plant.machines);
        const auto dec = distributed::symmetric_modes(p.plant, lg, c.cfg.decomposition_tol);
        const auto sched = distributed::delay_map(
            dec.Mu_pattern, dec.Mx_inv_pattern,
            distributed::uniform_delays(p.plant.machines, delay), c.cfg.h);
        std::vector<distributed::ModeDesign> designs;
        json modes = json::array();
        {
          Stopwatch sw(c.rep, "design");
          for (Index i = 0; i < dec.modes(); ++i) {
            const auto sub = distributed::modal_subsystem(p.plant, lg, dec, i);
            const auto obj = distributed::modal_objectives(p.objectives, lg, dec, i);
            designs.push_back(distributed::design_mode(
                sub, obj, c.cfg.h, sched.d_hat[static_cast<size_t>(i)], measure, c.cfg.gamma_tol));
          }
        }
        for (Index i = 0; i < dec.modes(); ++i) {
          const auto& d = designs[static_cast<size_t>(i)];
          const std::string label = dec.labels[static_cast<size_t>(i)];
          c.emit("F_" + label + ".txt", format_matrix(d.F));
          json m = {{"mode", label},
                    {"d_hat_s", sched.d_hat[static_cast<size_t>(i)]},
                    {"q", d.disc.q},
                    {"r_s", d.disc.r},
                    {"lifted_dimension", d.disc.nz()}};
          if (measure == Method::Lqr) {
            c.emit("P_" + label + ".txt", format_matrix(d.P));
            Vector z0 = Vector::Zero(d.disc.nz());
            z0.head(dec.dims.nx[static_cast<size_t>(i)]) = sim::default_modal_state(dec, i);
            m["cost_from_default_state"] = z0.dot(d.P * z0);
          } else {
            m["gamma_star"] = d.gamma_star;
            m["certified_norm"] = d.certified_norm;
          }
          modes.push_back(m);
          c.log << fmt::format("{}: d_hat = {} s, lifted dimension {}\n", label,
                               format_number(sched.d_hat[static_cast<size_t>(i)]), d.disc.nz());
        }
        distributed::assemble_controller(lg, dec, sched, designs);
        c.summary["modes"] = modes;
        c.summary["d_rho_s"] = sched.d_rho;
        return kExitOk;
      });
}

int cmd_sweep(const RunOptions& opts, Method measure, ModeSelection modes,
              std::optional<Method> gains, std::ostream& log) {
  const char* mode_flag = modes == ModeSelection::Oscillation ? "oscillation"
                          : modes == ModeSelection::Common    ? "common"
                                                              : "all";
  std::vector<std::pair<std::string, std::string>> flags = {{"measure", method_name(measure)},
                                                            {"mode", mode_flag}};
  if (gains) flags.emplace_back("gains", method_name(*gains));
  return run(
      "sweep", opts, flags, log,
      [&](Context& c) {
        if (c.cfg.delay_grid.empty()) throw std::invalid_argument("the delay grid is empty");
      },
      [&](Context& c) {
        const Pipeline p = build_pipeline(c.cfg);
        const auto lg = gains_for(c.cfg, measure, gains, p.plant.machines);
        const auto dec = distributed::symmetric_modes(p.plant, lg, c.cfg.decomposition_tol);
        std::vector<std::string> labels;
        if (modes != ModeSelection::Common) labels.push_back("oscillation");
        if (modes != ModeSelection::Oscillation) labels.push_back("common");

        std::vector<sim::SweepRow> rows;
        bool sandwich = true;
        json per_mode = json::array();
        for (const auto& label : labels) {
          const Index i = mode_index(dec, label);
          sim::SweepResult res;
          {
            Stopwatch sw(c.rep, "sweep_" + label);
            res = sim::sweep_delays(p.plant, lg, dec, p.objectives, i, measure, c.cfg.delay_grid,
                                    c.cfg.h, c.cfg.gamma_tol, c.opts.threads);
          }
          sandwich = sandwich && res.sandwich_holds();
          rows.insert(rows.end(), res.rows.begin(), res.rows.end());
          c.rep.warnings.insert(c.rep.warnings.end(), res.warnings.begin(), res.warnings.end());
          const size_t ok = static_cast<size_t>(std::count_if(
              res.rows.begin(), res.rows.end(), [](const auto& r) { return r.status == "ok"; }));
          per_mode.push_back({{"mode", label},
                              {"rows", res.rows.size()},
                              {"rows_ok", ok},
                              {"lower_bound", res.rows.front().lower},
                              {"upper_bound", res.rows.front().upper},
                              {"nondecreasing_fraction", res.nondecreasing_fraction}});
          if (res.nondecreasing_fraction < 0.9) {
            c.rep.warnings.push_back(fmt::format(
                "{}: measure nondecreasing on only {:.1f}% of consecutive delay pairs", label,
                100.0 * res.nondecreasing_fraction));
          }
          c.log << fmt::format("{}: {}/{} rows inside [lower, upper], nondecreasing {:.1f}%\n",
                               label, ok, res.rows.size(), 100.0 * res.nondecreasing_fraction);
        }
        c.emit("sweep.csv", format_sweep_csv(rows));
        c.summary["modes"] = per_mode;
        c.summary["sandwich_holds"] = sandwich;
        return sandwich ? kExitOk : kExitInvariant;
      });
}

int cmd_simulate(const RunOptions& opts, Method measure, double delay,
                 std::optional<Method> gains, std::ostream& log) {
  std::vector<std::pair<std::string, std::string>> flags = {
      {"measure", method_name(measure)}, {"delay_s", format_number(delay)}};
  if (gains) flags.emplace_back("gains", method_name(*gains));
  return run(
      "simulate", opts, flags, log,
      [&](Context&) {
        if (!(delay >= 0.0) || !std::isfinite(delay)) {
          throw std::invalid_argument("--delay must be a nonnegative number of seconds");
        }
      },
      [&](Context& c) {
        const Pipeline p = build_pipeline(c.cfg);
        const auto lg = gains_for(c.cfg, measure, gains, p.plant.machines);
        const auto dec = distributed::symmetric_modes(p.plant, lg, c.cfg.decomposition_tol);
        std::optional<distributed::DistributedController> controller;
        {
          Stopwatch sw(c.rep, "design");
          controller.emplace(sim::design_dncs(p.plant, lg, dec, p.objectives, c.cfg.h, delay,
                                              measure, c.cfg.gamma_tol));
        }
        const auto& sc = c.cfg.scenario;
        const Index i = mode_index(dec, sc.mode);
        const Index nxi = dec.dims.nx[static_cast<size_t>(i)];
        Vector xhat0 = Vector::Zero(nxi);
        switch (sc.initial) {
          case ScenarioState::DefaultModal:
            xhat0 = sim::default_modal_state(dec, i);
            break;
          case ScenarioState::Modal:
            if (static_cast<Index>(sc.initial_modal_state.size()) != nxi) {
              throw std::invalid_argument("scenario.initial_state has the wrong length");
            }
            for (Index k = 0; k < nxi; ++k) xhat0(k) = sc.initial_modal_state[k];
            break;
          case ScenarioState::Random: {
            std::mt19937_64 rng(c.opts.seed);
            for (Index k = 0; k < nxi; ++k) xhat0(k) = unit_draw(rng);
            break;
          }
          case ScenarioState::Zero:
            break;
        }

        const Matrix Abar = distributed::local_closed_loop(p.plant, lg);
        const auto offsets = controller->event_offsets();
        const double requested = sc.step_s > 0.0 ? sc.step_s : sim::default_step(Abar, c.cfg.h, offsets);
        const double step = sim::refine_step(requested, c.cfg.h, offsets);
        if (step != requested) {
          c.rep.notes.push_back(fmt::format(
              "integrator step refined from {} s to {} s to hit every sampling and command event",
              format_number(requested), format_number(step)));
        }
        sim::Scenario scn;
        scn.x0 = dec.Mx * dec.Ex(i) * xhat0;
        scn.disturbance = sc.disturbance;
        scn.impulse_channel = sc.impulse_channel;
        scn.step = step;
        scn.horizon = sc.horizon_s;
        scn.record_trace = true;
        scn.trace_stride = sc.trace_stride;
        scn.trace_until = sc.trace_until_s;
        sim::SimResult res;
        {
          Stopwatch sw(c.rep, "simulation");
          res = sim::simulate_closed_loop(p.plant, *controller, p.objectives, scn);
        }
        c.emit("trace.csv", format_trace_csv(res.trace, p.plant.machines));

        c.summary["mode"] = sc.mode;
        c.summary["initial_modal_state"] = std::vector<double>(xhat0.data(), xhat0.data() + nxi);
        c.summary["J_measured"] = res.J;
        c.summary["step_s"] = res.step;
        c.summary["horizon_s"] = res.horizon;
        c.summary["horizon_extensions"] = res.extensions;
        c.summary["d_rho_s"] = controller->schedule().d_rho;
        c.log << fmt::format("J measured = {}\n", format_number(res.J));

        int code = kExitOk;
        const auto& design = controller->designs()[static_cast<size_t>(i)];
        if (measure == Method::Lqr) {
          if (sc.disturbance != sim::Disturbance::Zero) {
            c.rep.notes.push_back("certificate comparison skipped: disturbance is not zero");
          } else {
            Vector z0 = Vector::Zero(design.disc.nz());
            z0.head(nxi) = xhat0;
            const double cert = z0.dot(design.P * z0);
            const double rel = cert > 0.0 ? std::abs(res.J - cert) / cert : std::abs(res.J);
            c.summary["certificate"] = cert;
            c.summary["relative_difference"] = rel;
            c.log << fmt::format("certificate z0'Pz0 = {}, relative difference {:.3e}\n",
                                 format_number(cert), rel);
            if (rel > 5e-3) {
              c.rep.warnings.push_back("measured cost differs from the certificate by more than 0.5%");
              code = kExitInvariant;
            }
          }
        } else {
          json g = json::array();
          for (size_t k = 0; k < controller->designs().size(); ++k) {
            g.push_back({{"mode", dec.labels[k]},
                         {"gamma_star", controller->designs()[k].gamma_star},
                         {"certified_norm", controller->designs()[k].certified_norm}});
          }
          c.summary["attenuation"] = g;
          c.log << fmt::format("gamma* ({}) = {}\n", sc.mode, format_number(design.gamma_star));
        }
        return code;
      });
}

}  // namespace dncs::cli
