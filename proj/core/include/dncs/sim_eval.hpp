#pragma once

#include <limits>
#include <string>
#include <vector>

#include "dncs/distributed.hpp"

/// Closed-loop simulation under the networked timing, measures and bounds,
/// and delay sweeps.
namespace dncs::sim {

using distributed::Method;

enum class Disturbance {
  Zero,
  Held,     ///< w_k held on (kh, kh + h]
  Impulse,  ///< one-sample pulse of unit area on `impulse_channel`
};

struct Scenario {
  Vector x0;  ///< physical deviation state at t = 0
  Disturbance disturbance = Disturbance::Zero;
  std::vector<Vector> w_sequence;
  Index impulse_channel = 0;
  double step = 0.0;     ///< RK4 step (s); 0 selects one automatically
  double horizon = 0.0;  ///< s; 0 means 20 x the slowest time constant of A + B_u K
  double max_horizon = 1e5;
  bool record_trace = false;
  Index trace_stride = 1;
  double trace_until = std::numeric_limits<double>::infinity();  ///< s
};

struct Trace {
  std::vector<double> t;
  std::vector<Vector> x, u, u_bar, y;
};

struct SimResult {
  Trace trace;
  double J = 0.0;
  double horizon = 0.0;
  double step = 0.0;
  int extensions = 0;
};

/// True when `step` divides h and every command offset (within 1e-9 relative).
bool on_event_grid(double step, double h, const std::vector<double>& offsets);

/// Halves `requested` until it lands on the event grid. Throws
/// EventGridMismatch after 40 halvings.
double refine_step(double requested, double h, const std::vector<double>& offsets);

/// Default RK4 step for a closed loop: h/10 refined onto the event grid and
/// below 1.5 / |lambda|_max of A + B_u K.
double default_step(const Matrix& Abar, double h, const std::vector<double>& offsets);

/// x' = (A + B_u K) x + B_u u_bar + B_w w with fixed-step RK4. The cost
/// x'Qx + u'Ru (u = Kx + u_bar) is integrated as an extra RK4 state. Throws
/// EventGridMismatch when the step does not hit kh and kh + d_rho.
SimResult simulate_closed_loop(const grid::LinearPlant& plant,
                               distributed::DistributedController& controller,
                               const distributed::Objectives& obj, const Scenario& scn);

/// Designs every mode for the uniform link delay tau and assembles the
/// controller.
distributed::DistributedController design_dncs(const grid::LinearPlant& plant,
                                               const distributed::LocalGains& gains,
                                               const distributed::ModalDecomposition& dec,
                                               const distributed::Objectives& obj, double h,
                                               double tau, Method method, double tol = 1e-3);

/// Unit vector on the first (rotor-angle) coordinate of mode i.
Vector default_modal_state(const distributed::ModalDecomposition& dec, Index i);

struct Attenuation {
  double gamma_star = 0.0;
  double certified_norm = 0.0;
  distributed::ModeDesign design;
};

Attenuation attenuation_of_mode(const grid::LinearPlant& plant,
                                const distributed::LocalGains& gains,
                                const distributed::ModalDecomposition& dec,
                                const distributed::Objectives& obj, Index i, double h,
                                double d_hat, double tol);

struct Bounds {
  double upper = 0.0;  ///< local gains only
  double lower = 0.0;  ///< joint full-state design at zero delay
};

/// LQR: costs from `xhat0` on mode i. H-infinity: norms with the disturbance
/// restricted to mode i.
Bounds compute_bounds(const grid::LinearPlant& plant, const distributed::LocalGains& gains,
                      const distributed::ModalDecomposition& dec,
                      const distributed::Objectives& obj, Index i, double h, Method measure,
                      const Vector& xhat0, double tol = 1e-3);

struct SweepRow {
  double delay = 0.0;
  std::string mode;
  std::string measure;
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::string status;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<std::string> warnings;
  double nondecreasing_fraction = 1.0;

  bool sandwich_holds() const;
};

const char* measure_name(Method m);

/// Rows for every tau in `grid` (ascending, nonnegative). Row failures are
/// recorded in the status column; the sweep continues.
SweepResult sweep_delays(const grid::LinearPlant& plant, const distributed::LocalGains& gains,
                         const distributed::ModalDecomposition& dec,
                         const distributed::Objectives& obj, Index mode, Method measure,
                         const std::vector<double>& grid, double h, double tol = 1e-3,
                         unsigned threads = 1);

}  // namespace dncs::sim
