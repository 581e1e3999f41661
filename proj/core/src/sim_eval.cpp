#include "dncs/sim_eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>

#include "dncs/errors.hpp"

namespace dncs::sim {

namespace {

using distributed::DistributedController;
using distributed::LocalGains;
using distributed::ModalDecomposition;
using distributed::Objectives;

bool is_multiple(double value, double step) {
  const double n = value / step;
  return std::abs(n - std::round(n)) <= std::min(1e-9 * std::max(1.0, std::abs(n)), 1e-6);
}

double slowest_time_constant(const Matrix& Abar) {
  const Eigen::VectorXcd ev = Abar.eigenvalues();
  double slowest = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < ev.size(); ++i) slowest = std::min(slowest, std::abs(ev(i).real()));
  return 1.0 / slowest;
}

bool within(double lower, double value, double upper) {
  const double slack_hi = 1e-9 * std::abs(upper);
  const double slack_lo = 1e-9 * std::abs(lower);
  return lower <= value + slack_lo && value <= upper + slack_hi;
}

}  // namespace

bool on_event_grid(double step, double h, const std::vector<double>& offsets) {
  if (!(step > 0.0) || !is_multiple(h, step)) return false;
  return std::all_of(offsets.begin(), offsets.end(),
                     [&](double d) { return is_multiple(d, step); });
}

double refine_step(double requested, double h, const std::vector<double>& offsets) {
  double s = requested;
  for (int i = 0; i <= 40; ++i, s *= 0.5) {
    if (on_event_grid(s, h, offsets)) return s;
  }
  std::ostringstream os;
  os << "no power-of-two refinement of step " << requested
     << " hits every sampling and command event";
  throw EventGridMismatch(os.str());
}

double default_step(const Matrix& Abar, double h, const std::vector<double>& offsets) {
  const Eigen::VectorXcd ev = Abar.eigenvalues();
  double fastest = 0.0;
  for (Index i = 0; i < ev.size(); ++i) fastest = std::max(fastest, std::abs(ev(i)));
  double s = h / 10.0;
  while (fastest > 0.0 && s * fastest > 1.5) s *= 0.5;
  return refine_step(s, h, offsets);
}

SimResult simulate_closed_loop(const grid::LinearPlant& plant, DistributedController& controller,
                               const Objectives& obj, const Scenario& scn) {
  const Matrix& K = controller.gains().K;
  const Matrix Abar = distributed::local_closed_loop(plant, controller.gains());
  const double h = controller.schedule().h;
  const std::vector<double> offsets = controller.event_offsets();
  const Index nx = plant.nx(), nu = plant.nu(), nw = plant.nw();
  if (scn.x0.size() != nx) throw std::invalid_argument("scenario initial state has wrong size");

  SimResult out;
  out.step = scn.step > 0.0 ? scn.step : default_step(Abar, h, offsets);
  if (!on_event_grid(out.step, h, offsets)) {
    std::ostringstream os;
    os << "integrator step " << out.step << " does not hit every event kh and kh + d_rho";
    throw EventGridMismatch(os.str());
  }
  const double dt = out.step;
  const long per_h = std::lround(h / dt);
  double horizon = scn.horizon > 0.0 ? scn.horizon : 20.0 * slowest_time_constant(Abar);
  horizon = std::min(horizon, scn.max_horizon);

  const Matrix Qb = linalg::symmetrize(obj.Q + K.transpose() * obj.R * K);
  const Matrix Nb = K.transpose() * obj.R;
  const bool has_output = obj.C.size() > 0;
  const Matrix Du = has_output && obj.Du.size() > 0 ? obj.Du : Matrix::Zero(obj.C.rows(), nu);
  const Matrix Dw = has_output && obj.Dw.size() > 0 ? obj.Dw : Matrix::Zero(obj.C.rows(), nw);

  controller.reset();
  Vector x = scn.x0;
  Vector drive(nx), k1(nx), k2(nx), k3(nx), k4(nx), tmp(nx), nbu(nx), w(nw), ub(nu);
  double J = 0.0;
  long n = 0;
  const Index stride = std::max<Index>(scn.trace_stride, 1);

  auto disturbance_at = [&](double t_mid) {
    w.setZero();
    const long k = static_cast<long>(std::floor(t_mid / h));
    if (scn.disturbance == Disturbance::Held) {
      if (k >= 0 && k < static_cast<long>(scn.w_sequence.size())) w = scn.w_sequence[k];
    } else if (scn.disturbance == Disturbance::Impulse && k == 0) {
      w(scn.impulse_channel) = 1.0 / h;
    }
  };
  auto record = [&](double t) {
    const Vector u = K * x + ub;
    out.trace.t.push_back(t);
    out.trace.x.push_back(x);
    out.trace.u.push_back(u);
    out.trace.u_bar.push_back(ub);
    if (has_output) out.trace.y.push_back(obj.C * x + Du * u + Dw * w);
  };
  auto stage = [&](const Vector& s) { return s.dot(Qb * s) + 2.0 * s.dot(nbu); };
  auto advance_to = [&](long target) {
    for (; n < target; ++n) {
      if (n % per_h == 0) controller.sample(n / per_h, x);
      const double t_mid = (static_cast<double>(n) + 0.5) * dt;
      ub = controller.remote_command(t_mid);
      disturbance_at(t_mid);
      if (scn.record_trace && n % stride == 0 && static_cast<double>(n) * dt <= scn.trace_until) {
        record(static_cast<double>(n) * dt);
      }
      drive.noalias() = plant.Bu * ub;
      drive.noalias() += plant.Bw * w;
      nbu.noalias() = Nb * ub;
      const double c = ub.dot(obj.R * ub);

      k1.noalias() = Abar * x;
      k1 += drive;
      const double L1 = stage(x);
      tmp = x + 0.5 * dt * k1;
      k2.noalias() = Abar * tmp;
      k2 += drive;
      const double L2 = stage(tmp);
      tmp = x + 0.5 * dt * k2;
      k3.noalias() = Abar * tmp;
      k3 += drive;
      const double L3 = stage(tmp);
      tmp = x + dt * k3;
      k4.noalias() = Abar * tmp;
      k4 += drive;
      const double L4 = stage(tmp);
      x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      J += (dt / 6.0) * (L1 + 2.0 * L2 + 2.0 * L3 + L4) + dt * c;
    }
  };
  auto steps_for = [&](double T) {
    const long raw = static_cast<long>(std::ceil(T / dt - 1e-9));
    return ((raw + per_h - 1) / per_h) * per_h;
  };

  // Extend in quarter-horizon chunks until a chunk adds < 1e-9 of the total.
  const double chunk = 0.25 * horizon;
  double reached = 0.75 * horizon;
  advance_to(steps_for(reached));
  for (;;) {
    const double before = J;
    reached += chunk;
    advance_to(steps_for(reached));
    if (J - before <= 1e-9 * std::abs(J) || reached >= scn.max_horizon) break;
    ++out.extensions;
  }
  if (scn.record_trace && static_cast<double>(n) * dt <= scn.trace_until) {
    ub = controller.remote_command((static_cast<double>(n) + 0.5) * dt);
    disturbance_at((static_cast<double>(n) + 0.5) * dt);
    record(static_cast<double>(n) * dt);
  }
  out.J = J;
  out.horizon = static_cast<double>(n) * dt;
  return out;
}

DistributedController design_dncs(const grid::LinearPlant& plant, const LocalGains& gains,
                                  const ModalDecomposition& dec, const Objectives& obj, double h,
                                  double tau, Method method, double tol) {
  const distributed::DelaySchedule sched = distributed::delay_map(
      dec.Mu_pattern, dec.Mx_inv_pattern, distributed::uniform_delays(plant.machines, tau), h);
  std::vector<distributed::ModeDesign> designs;
  for (Index i = 0; i < dec.modes(); ++i) {
    designs.push_back(distributed::design_mode(
        distributed::modal_subsystem(plant, gains, dec, i),
        distributed::modal_objectives(obj, gains, dec, i), h, sched.d_hat[static_cast<size_t>(i)],
        method, tol));
  }
  return distributed::assemble_controller(gains, dec, sched, std::move(designs));
}

Vector default_modal_state(const ModalDecomposition& dec, Index i) {
  Vector v = Vector::Zero(dec.dims.nx[static_cast<size_t>(i)]);
  v(0) = 1.0;
  return v;
}

Attenuation attenuation_of_mode(const grid::LinearPlant& plant, const LocalGains& gains,
                                const ModalDecomposition& dec, const Objectives& obj, Index i,
                                double h, double d_hat, double tol) {
  Attenuation out;
  out.design = distributed::design_mode(distributed::modal_subsystem(plant, gains, dec, i),
                                        distributed::modal_objectives(obj, gains, dec, i), h,
                                        d_hat, Method::Hinf, tol);
  const auto& disc = out.design.disc;
  const Matrix& F = out.design.F;
  out.gamma_star = out.design.gamma_star;
  out.certified_norm = synthesis::hinf_norm(disc.A2 + disc.B2u * F, disc.B2w,
                                            disc.C2 + disc.D2u * F, disc.D2w);
  return out;
}

Bounds compute_bounds(const grid::LinearPlant& plant, const LocalGains& gains,
                      const ModalDecomposition& dec, const Objectives& obj, Index i, double h,
                      Method measure, const Vector& xhat0, double tol) {
  const Matrix Abar = distributed::local_closed_loop(plant, gains);
  const Matrix& K = gains.K;
  const distributed::ModalSubsystem sub = distributed::modal_subsystem(plant, gains, dec, i);
  const distributed::ModalObjectives mobj = distributed::modal_objectives(obj, gains, dec, i);
  const sampled::DiscretizedSystem mode_disc = sampled::discretize(
      distributed::modal_cts_system(sub, mobj), {mobj.Q, mobj.N, mobj.R}, h, 0.0);

  Bounds b;
  sampled::CtsSystem full;
  full.A1 = Abar;
  full.B1u = plant.Bu;
  if (measure == Method::Lqr) {
    b.upper = xhat0.dot(linalg::solve_stein(mode_disc.A2, mode_disc.Q2) * xhat0);
    full.B1w = plant.Bw;
    full.C1 = Matrix::Zero(0, plant.nx());
    const sampled::CtsCost cost{obj.Q + K.transpose() * obj.R * K, K.transpose() * obj.R, obj.R};
    const auto lqr = synthesis::lqr_design(sampled::discretize(full, cost, h, 0.0));
    const Vector x0 = dec.Mx * dec.Ex(i) * xhat0;
    b.lower = x0.dot(lqr.P * x0);
  } else {
    b.upper = synthesis::hinf_norm(mode_disc.A2, mode_disc.B2w, mode_disc.C2, mode_disc.D2w);
    const Index ny = obj.C.rows();
    const Matrix Du = obj.Du.size() > 0 ? obj.Du : Matrix::Zero(ny, plant.nu());
    const Matrix Dw = obj.Dw.size() > 0 ? obj.Dw : Matrix::Zero(ny, plant.nw());
    full.B1w = plant.Bw * dec.Mw * dec.Ew(i);
    full.C1 = obj.C + Du * K;
    full.D1u = Du;
    full.D1w = Dw * dec.Mw * dec.Ew(i);
    const sampled::CtsCost cost{full.C1.transpose() * full.C1, full.C1.transpose() * Du,
                                Du.transpose() * Du};
    const auto gs = synthesis::gamma_min(sampled::discretize(full, cost, h, 0.0), tol);
    b.lower = std::min(gs.gamma_star, b.upper);
  }
  return b;
}

const char* measure_name(Method m) { return m == Method::Lqr ? "lqr_cost" : "hinf_gamma"; }

bool SweepResult::sandwich_holds() const {
  return std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.status == "ok"; });
}

SweepResult sweep_delays(const grid::LinearPlant& plant, const LocalGains& gains,
                         const ModalDecomposition& dec, const Objectives& obj, Index mode,
                         Method measure, const std::vector<double>& grid, double h, double tol,
                         unsigned threads) {
  if (grid.empty()) throw std::invalid_argument("delay grid is empty");
  for (size_t k = 0; k < grid.size(); ++k) {
    if (!(grid[k] >= 0.0) || (k > 0 && !(grid[k] > grid[k - 1]))) {
      throw std::invalid_argument("delay grid must be nonnegative and strictly ascending");
    }
  }
  const Vector xhat0 = default_modal_state(dec, mode);
  const Bounds bounds = compute_bounds(plant, gains, dec, obj, mode, h, measure, xhat0, tol);
  const distributed::ModalSubsystem sub = distributed::modal_subsystem(plant, gains, dec, mode);
  const distributed::ModalObjectives mobj = distributed::modal_objectives(obj, gains, dec, mode);
  const std::string label = dec.labels[static_cast<size_t>(mode)];

  SweepResult out;
  out.rows.resize(grid.size());
  auto run_row = [&](size_t k) {
    SweepRow& row = out.rows[k];
    row.delay = grid[k];
    row.mode = label;
    row.measure = measure_name(measure);
    row.lower = bounds.lower;
    row.upper = bounds.upper;
    try {
      const auto sched =
          distributed::delay_map(dec.Mu_pattern, dec.Mx_inv_pattern,
                                 distributed::uniform_delays(plant.machines, grid[k]), h);
      const double d_hat = sched.d_hat[static_cast<size_t>(mode)];
      const auto design = distributed::design_mode(sub, mobj, h, d_hat, measure, tol);
      if (measure == Method::Lqr) {
        Vector z0 = Vector::Zero(design.disc.nz());
        z0.head(xhat0.size()) = xhat0;
        row.value = z0.dot(design.P * z0);
      } else {
        row.value = std::min(design.gamma_star, bounds.upper);
      }
      row.status = std::isfinite(row.value) && within(row.lower, row.value, row.upper)
                       ? "ok"
                       : "bound_violation";
    } catch (const std::exception& e) {
      row.value = std::numeric_limits<double>::quiet_NaN();
      row.status = std::string("error: ") + e.what();
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, grid.size()));
  if (workers == 1) {
    for (size_t k = 0; k < grid.size(); ++k) run_row(k);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (size_t k = next++; k < grid.size(); k = next++) run_row(k);
      });
    }
    for (auto& th : pool) th.join();
  }

  size_t pairs = 0, rising = 0;
  for (size_t k = 1; k < out.rows.size(); ++k) {
    const SweepRow& a = out.rows[k - 1];
    const SweepRow& b = out.rows[k];
    if (!std::isfinite(a.value) || !std::isfinite(b.value)) continue;
    ++pairs;
    if (b.value >= a.value * (1.0 - 1e-9)) {
      ++rising;
    } else {
      std::ostringstream os;
      os.precision(17);
      os << label << " " << b.measure << " decreases from " << a.value << " at " << a.delay
         << " s to " << b.value << " at " << b.delay << " s";
      out.warnings.push_back(os.str());
    }
  }
  out.nondecreasing_fraction = pairs ? static_cast<double>(rising) / pairs : 1.0;
  return out;
}

}  // namespace dncs::sim
