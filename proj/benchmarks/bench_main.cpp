#include <random>

#include <benchmark/benchmark.h>

#include "dncs/benchmark.hpp"
#include "dncs/sim_eval.hpp"

namespace {

using namespace dncs;
using distributed::LocalGains;
using distributed::Method;

struct Fixture {
  dncs::benchmark::Benchmark b = dncs::benchmark::build();
  distributed::Objectives obj{b.Q, b.R, b.C, b.Du, b.Dw};
  LocalGains k1 = LocalGains::uniform(dncs::benchmark::gain_K1(), 2);
  LocalGains k2 = LocalGains::uniform(dncs::benchmark::gain_K2(), 2);
  distributed::ModalDecomposition dec1 = distributed::symmetric_modes(b.plant, k1);
  distributed::ModalDecomposition dec2 = distributed::symmetric_modes(b.plant, k2);

  sampled::DiscretizedSystem oscillation_disc(double d) const {
    const auto sub = distributed::modal_subsystem(b.plant, k1, dec1, 0);
    const auto mo = distributed::modal_objectives(obj, k1, dec1, 0);
    return sampled::discretize(distributed::modal_cts_system(sub, mo),
                               sampled::CtsCost{mo.Q, mo.N, mo.R}, 0.02, d);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_BuildBenchmark(::benchmark::State& state) {
  for (auto _ : state) ::benchmark::DoNotOptimize(dncs::benchmark::build());
}
BENCHMARK(BM_BuildBenchmark)->Unit(::benchmark::kMillisecond);

// Argument: delay in milliseconds.
void BM_Discretize(::benchmark::State& state) {
  const auto& f = fixture();
  const auto sub = distributed::modal_subsystem(f.b.plant, f.k1, f.dec1, 0);
  const auto mo = distributed::modal_objectives(f.obj, f.k1, f.dec1, 0);
  const auto sys = distributed::modal_cts_system(sub, mo);
  const sampled::CtsCost cost{mo.Q, mo.N, mo.R};
  const double d = 1e-3 * static_cast<double>(state.range(0));
  for (auto _ : state) ::benchmark::DoNotOptimize(sampled::discretize(sys, cost, 0.02, d));
}
BENCHMARK(BM_Discretize)->Arg(0)->Arg(60)->Arg(250)->Unit(::benchmark::kMicrosecond);

void BM_Dare(::benchmark::State& state) {
  const auto disc = fixture().oscillation_disc(1e-3 * static_cast<double>(state.range(0)));
  for (auto _ : state) {
    ::benchmark::DoNotOptimize(
        synthesis::dare(disc.A2, disc.B2u, disc.Q2, disc.N2, disc.R2));
  }
  state.counters["nz"] = static_cast<double>(disc.nz());
}
BENCHMARK(BM_Dare)->Arg(0)->Arg(60)->Arg(250)->Unit(::benchmark::kMicrosecond);

void BM_HinfNorm(::benchmark::State& state) {
  const auto disc = fixture().oscillation_disc(1e-3 * static_cast<double>(state.range(0)));
  const auto lqr = synthesis::lqr_design(disc);
  const Matrix A = disc.A2 + disc.B2u * lqr.F;
  const Matrix C = disc.C2 + disc.D2u * lqr.F;
  for (auto _ : state) {
    ::benchmark::DoNotOptimize(synthesis::hinf_norm(A, disc.B2w, C, disc.D2w));
  }
}
BENCHMARK(BM_HinfNorm)->Arg(0)->Arg(60)->Unit(::benchmark::kMicrosecond);

void BM_GammaMin(::benchmark::State& state) {
  const auto disc = fixture().oscillation_disc(0.06);
  for (auto _ : state) ::benchmark::DoNotOptimize(synthesis::gamma_min(disc, 1e-3));
}
BENCHMARK(BM_GammaMin)->Unit(::benchmark::kMillisecond);

void BM_SweepRow(::benchmark::State& state) {
  const auto& f = fixture();
  const Method m = state.range(0) == 0 ? Method::Lqr : Method::Hinf;
  const auto& gains = m == Method::Lqr ? f.k1 : f.k2;
  const auto& dec = m == Method::Lqr ? f.dec1 : f.dec2;
  const std::vector<double> grid{0.1};
  for (auto _ : state) {
    ::benchmark::DoNotOptimize(
        sim::sweep_delays(f.b.plant, gains, dec, f.obj, 0, m, grid, 0.02, 1e-3, 1));
  }
  state.SetLabel(sim::measure_name(m));
}
BENCHMARK(BM_SweepRow)->Arg(0)->Arg(1)->Unit(::benchmark::kMillisecond);

void BM_SimulateClosedLoop(::benchmark::State& state) {
  const auto& f = fixture();
  auto ctrl = sim::design_dncs(f.b.plant, f.k1, f.dec1, f.obj, 0.02, 0.06, Method::Lqr);
  sim::Scenario scn;
  scn.x0 = f.dec1.Mx * f.dec1.Ex(0) * sim::default_modal_state(f.dec1, 0);
  for (auto _ : state) {
    ::benchmark::DoNotOptimize(sim::simulate_closed_loop(f.b.plant, ctrl, f.obj, scn));
  }
}
BENCHMARK(BM_SimulateClosedLoop)->Unit(::benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
