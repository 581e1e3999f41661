#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "dncs/benchmark.hpp"
#include "dncs/distributed.hpp"
#include "dncs/errors.hpp"
#include "oracles.hpp"

namespace {

using namespace dncs;
using namespace dncs::distributed;
namespace t = dncs::testing;

using Spectrum = std::vector<std::complex<double>>;

Spectrum spectrum(const Matrix& A) {
  const Eigen::VectorXcd ev = A.eigenvalues();
  return Spectrum(ev.data(), ev.data() + ev.size());
}

// Largest distance of a greedy one-to-one matching of `part` into `whole`.
double match_distance(Spectrum part, Spectrum whole) {
  double worst = 0.0;
  for (const auto& z : part) {
    auto best = std::min_element(whole.begin(), whole.end(), [&](auto a, auto b) {
      return std::abs(a - z) < std::abs(b - z);
    });
    if (best == whole.end()) return 1e300;
    worst = std::max(worst, std::abs(*best - z) / std::max(1.0, std::abs(z)));
    whole.erase(best);
  }
  return worst;
}

class Bench : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    b_ = new benchmark::Benchmark(benchmark::build());
    gains_ = new LocalGains(LocalGains::uniform(benchmark::gain_K1(), 2));
    dec_ = new ModalDecomposition(symmetric_modes(b_->plant, *gains_));
    obj_ = new Objectives{b_->Q, b_->R, b_->C, b_->Du, b_->Dw};
  }
  static void TearDownTestSuite() {
    delete b_;
    delete gains_;
    delete dec_;
    delete obj_;
  }
  static benchmark::Benchmark* b_;
  static LocalGains* gains_;
  static ModalDecomposition* dec_;
  static Objectives* obj_;
};
benchmark::Benchmark* Bench::b_ = nullptr;
LocalGains* Bench::gains_ = nullptr;
ModalDecomposition* Bench::dec_ = nullptr;
Objectives* Bench::obj_ = nullptr;

TEST_F(Bench, LocalLoopsAreHurwitz) {
  EXPECT_LT(linalg::spectral_abscissa(local_closed_loop(b_->plant, *gains_)), 0.0);
  const auto k2 = LocalGains::uniform(benchmark::gain_K2(), 2);
  EXPECT_LT(linalg::spectral_abscissa(local_closed_loop(b_->plant, k2)), 0.0);
}

TEST_F(Bench, DestabilizingGainIsRejected) {
  Matrix K(1, 3);
  K << 0.0, 0.0, 50.0;
  EXPECT_THROW(local_closed_loop(b_->plant, LocalGains::uniform(K, 2)), NotStabilizable);
}

TEST_F(Bench, SymmetricTransformEntries) {
  Matrix Minv = Matrix::Zero(6, 6);
  Minv << Matrix::Identity(3, 3), -Matrix::Identity(3, 3), Matrix::Identity(3, 3),
      Matrix::Identity(3, 3);
  EXPECT_EQ(dec_->Mx_inv, Minv);
  EXPECT_EQ(dec_->Mx * dec_->Mx_inv, Matrix::Identity(6, 6));
  EXPECT_EQ(dec_->Mu * dec_->Mu_inv, Matrix::Identity(2, 2));
  EXPECT_EQ(dec_->Mw * dec_->Mw_inv, Matrix::Identity(4, 4));
  ASSERT_EQ(dec_->modes(), 2);
  EXPECT_EQ(dec_->labels[0], "oscillation");
  EXPECT_EQ(dec_->labels[1], "common");
}

TEST_F(Bench, OffDiagonalBlocksVanish) {
  const Matrix Abar = local_closed_loop(b_->plant, *gains_);
  const Matrix T = dec_->Mx_inv * Abar * dec_->Mx;
  EXPECT_LE(T.topRightCorner(3, 3).norm(), 1e-8 * Abar.norm());
  EXPECT_LE(T.bottomLeftCorner(3, 3).norm(), 1e-8 * Abar.norm());
  EXPECT_LE(dec_->residual_A, 1e-8);
  EXPECT_LE(dec_->residual_Bu, 1e-8);
  EXPECT_LE(dec_->residual_Bw, 1e-8);
}

grid::LinearPlant swap_symmetric_plant(std::mt19937_64& rng, Matrix& P, Matrix& Q) {
  P = t::random_matrix(rng, 3, 3);
  Q = t::random_matrix(rng, 3, 3);
  grid::LinearPlant plant;
  plant.machines = 2;
  plant.A.resize(6, 6);
  plant.A << P, Q, Q, P;
  const Matrix b = t::random_matrix(rng, 3, 1), bw = t::random_matrix(rng, 3, 2);
  plant.Bu = linalg::block_diagonal(b, b);
  plant.Bw = linalg::block_diagonal(bw, bw);
  return plant;
}

TEST(SymmetricModes, SubspaceProjection) {
  std::mt19937_64 rng(21);
  Matrix P, Q;
  const auto plant = swap_symmetric_plant(rng, P, Q);
  const auto gains = LocalGains::uniform(Matrix::Zero(1, 3), 2);
  const auto dec = symmetric_modes(plant, gains);
  Matrix Va(6, 3), Vs(6, 3);
  Va << Matrix::Identity(3, 3), -Matrix::Identity(3, 3);
  Vs << Matrix::Identity(3, 3), Matrix::Identity(3, 3);
  Va /= std::sqrt(2.0);
  Vs /= std::sqrt(2.0);
  const Matrix anti = Va.transpose() * plant.A * Va;
  const Matrix sym = Vs.transpose() * plant.A * Vs;
  EXPECT_LT((anti - (P - Q)).norm(), 1e-12 * anti.norm());
  const auto osc = modal_subsystem(plant, gains, dec, 0);
  const auto com = modal_subsystem(plant, gains, dec, 1);
  EXPECT_LT((osc.A - anti).norm(), 1e-12 * anti.norm());
  EXPECT_LT((com.A - sym).norm(), 1e-12 * sym.norm());
}

TEST(SymmetricModes, AsymmetricPlantIsRejected) {
  std::mt19937_64 rng(22);
  Matrix P, Q;
  auto plant = swap_symmetric_plant(rng, P, Q);
  plant.A(0, 4) += 0.5;
  EXPECT_THROW(symmetric_modes(plant, LocalGains::uniform(Matrix::Zero(1, 3), 2)), NotSymmetric);
}

TEST(AcceptDecomposition, IdentityOnBlockDiagonalPlant) {
  std::mt19937_64 rng(23);
  grid::LinearPlant plant;
  plant.machines = 2;
  plant.A = linalg::block_diagonal(t::random_matrix(rng, 3, 3), t::random_matrix(rng, 3, 3));
  plant.Bu = linalg::block_diagonal(t::random_matrix(rng, 3, 1), t::random_matrix(rng, 3, 1));
  plant.Bw = linalg::block_diagonal(t::random_matrix(rng, 3, 2), t::random_matrix(rng, 3, 2));
  const auto gains = LocalGains::uniform(Matrix::Zero(1, 3), 2);
  const auto dec = accept_decomposition(plant, gains, Matrix::Identity(6, 6),
                                        Matrix::Identity(2, 2), Matrix::Identity(4, 4), 1e-8);
  ASSERT_EQ(dec.modes(), 2);
  for (Index i = 0; i < 2; ++i) {
    const auto sub = modal_subsystem(plant, gains, dec, i);
    EXPECT_EQ(sub.A, plant.A.block(3 * i, 3 * i, 3, 3));
    EXPECT_EQ(sub.Bu, plant.Bu.block(3 * i, i, 3, 1));
    EXPECT_EQ(sub.Bw, plant.Bw.block(3 * i, 2 * i, 3, 2));
  }
}

TEST_F(Bench, RevalidationIsIdempotent) {
  const auto again = accept_decomposition(b_->plant, *gains_, dec_->Mx, dec_->Mu, dec_->Mw, 1e-8);
  EXPECT_EQ(again.modes(), 2);
  EXPECT_EQ(again.dims.nx, dec_->dims.nx);
  EXPECT_EQ(again.Mu_pattern, dec_->Mu_pattern);
  EXPECT_EQ(again.Mx_inv_pattern, dec_->Mx_inv_pattern);
}

TEST_F(Bench, RandomTransformIsRejected) {
  std::mt19937_64 rng(24);
  const Matrix M = t::random_matrix(rng, 6, 6) + 2.0 * Matrix::Identity(6, 6);
  ModeDims dims{{3, 3}, {1, 1}, {2, 2}};
  try {
    accept_decomposition(b_->plant, *gains_, M, dec_->Mu, dec_->Mw, 1e-8, dims);
    FAIL() << "expected NotBlockDiagonalizable";
  } catch (const NotBlockDiagonalizable& e) {
    EXPECT_EQ(e.which_equation(), "30.1");
    EXPECT_GT(e.residual(), 1e-8);
  }
}

TEST_F(Bench, SpectrumPartition) {
  const Matrix Abar = local_closed_loop(b_->plant, *gains_);
  const auto whole = spectrum(Abar);
  Spectrum joined;
  for (Index i = 0; i < 2; ++i) {
    const auto sub = modal_subsystem(b_->plant, *gains_, *dec_, i);
    ASSERT_EQ(sub.A.rows(), 3);
    const auto part = spectrum(sub.A);
    EXPECT_LE(match_distance(part, whole), 1e-7);
    joined.insert(joined.end(), part.begin(), part.end());
  }
  EXPECT_LE(match_distance(joined, whole), 1e-7);
}

TEST_F(Bench, ModalCostHasNoCrossCoupling) {
  const Matrix U = modal_cost(*obj_, *gains_, *dec_);
  // Layout [x_osc (3), x_com (3), u_osc, u_com].
  const std::vector<Index> osc{0, 1, 2, 6}, com{3, 4, 5, 7};
  for (Index a : osc)
    for (Index b : com) EXPECT_LE(std::abs(U(a, b)), 1e-12 * U.norm()) << a << "," << b;
  // Selector identity: the mode blocks reassemble the block-diagonal part.
  Matrix assembled = Matrix::Zero(8, 8);
  for (Index i = 0; i < 2; ++i) {
    const Matrix Sel = linalg::block_diagonal(dec_->Ex(i), dec_->Eu(i));
    assembled += Sel * modal_objectives(*obj_, *gains_, *dec_, i).U * Sel.transpose();
  }
  EXPECT_LE((assembled - U).norm(), 1e-12 * U.norm());
}

TEST(ModalObjectives, IdentityWithoutGain) {
  std::mt19937_64 rng(25);
  grid::LinearPlant plant;
  plant.machines = 1;
  plant.A = t::random_stable(rng, 3);
  plant.Bu = t::random_matrix(rng, 3, 1);
  plant.Bw = t::random_matrix(rng, 3, 2);
  const auto gains = LocalGains::uniform(Matrix::Zero(1, 3), 1);
  const auto dec = accept_decomposition(plant, gains, Matrix::Identity(3, 3),
                                        Matrix::Identity(1, 1), Matrix::Identity(2, 2), 1e-8,
                                        ModeDims{{3}, {1}, {2}});
  Objectives obj{t::random_psd(rng, 3, 3), Matrix::Constant(1, 1, 0.7), Matrix(), Matrix(), Matrix()};
  const auto mo = modal_objectives(obj, gains, dec, 0);
  Matrix expected = Matrix::Zero(4, 4);
  expected.topLeftCorner(3, 3) = obj.Q;
  expected(3, 3) = 0.7;
  EXPECT_LT((mo.U - expected).norm(), 1e-15);
}

TEST(DelayMap, UniformDense) {
  const Pattern dense = Pattern::Ones(3, 3);
  const auto s = delay_map(dense, dense, uniform_delays(3, 0.08), 0.02);
  for (double v : s.d_hat) EXPECT_EQ(v, 0.08);
  for (double v : s.d_rho) EXPECT_EQ(v, 0.08);
}

TEST_F(Bench, BenchmarkPatternsGiveTau) {
  EXPECT_EQ(dec_->Mu_pattern, Pattern::Ones(2, 2));
  EXPECT_EQ(dec_->Mx_inv_pattern, Pattern::Ones(2, 2));
  const auto s = delay_map(dec_->Mu_pattern, dec_->Mx_inv_pattern, uniform_delays(2, 0.14), 0.02);
  EXPECT_EQ(s.d_hat, (std::vector<double>{0.14, 0.14}));
  EXPECT_EQ(s.d_rho, (std::vector<double>{0.14, 0.14}));
}

TEST(DelayMap, MatchesBruteForce) {
  std::mt19937_64 rng(26);
  std::uniform_int_distribution<Index> size(1, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const Index m = size(rng), modes = size(rng);
    const Pattern Mu = t::random_pattern(rng, m, modes);
    const Pattern Mxi = t::random_pattern(rng, modes, m);
    const Matrix d = t::random_delays(rng, m);
    const auto s = delay_map(Mu, Mxi, d);
    const auto ref = t::brute_force_delays(Mu, Mxi, d);
    EXPECT_EQ(s.d_hat, ref.d_hat) << "trial " << trial;
    EXPECT_EQ(s.d_rho, ref.d_rho) << "trial " << trial;
    for (Index i = 0; i < modes; ++i)
      for (Index a = 0; a < m; ++a)
        for (Index b = 0; b < m; ++b)
          if (Mu(a, i) && Mxi(i, b)) EXPECT_GE(s.d_hat[static_cast<size_t>(i)], d(a, b));
  }
}

TEST(DelayMap, RejectsInvalidDelays) {
  const Pattern P = Pattern::Ones(2, 2);
  Matrix d = uniform_delays(2, 0.1);
  d(0, 1) = 0.2;
  EXPECT_THROW(delay_map(P, P, d), AsymmetricDelays);
  d = uniform_delays(2, -0.1);
  EXPECT_THROW(delay_map(P, P, d), AsymmetricDelays);
}

TEST_F(Bench, DesignDimensions) {
  const auto sub = modal_subsystem(b_->plant, *gains_, *dec_, 0);
  const auto mo = modal_objectives(*obj_, *gains_, *dec_, 0);
  const auto d0 = design_mode(sub, mo, 0.02, 0.0, Method::Lqr);
  EXPECT_EQ(d0.F.rows(), 1);
  EXPECT_EQ(d0.F.cols(), 3);
  const auto d1 = design_mode(sub, mo, 0.02, 0.1, Method::Lqr);
  EXPECT_EQ(d1.disc.q, 4);
  EXPECT_EQ(d1.disc.nz(), 8);
  EXPECT_EQ(d1.F.cols(), 8);
}

TEST_F(Bench, StiffGainsCommonModeCertificate) {
  // Fast field poles under K2 leave R + B'PB near 1e-9 on the lifted common mode.
  const auto k2 = LocalGains::uniform(benchmark::gain_K2(), 2);
  const auto dec = symmetric_modes(b_->plant, k2);
  const auto sub = modal_subsystem(b_->plant, k2, dec, 1);
  const auto mo = modal_objectives(*obj_, k2, dec, 1);
  for (double d : {0.0, 0.06, 0.14}) {
    const auto md = design_mode(sub, mo, 0.02, d, Method::Lqr);
    Vector z0 = Vector::Zero(md.disc.nz());
    z0(0) = 1.0;
    const double sum = t::closed_loop_sum(md.disc.A2, md.disc.B2u, md.F, md.disc.cost_matrix(), z0);
    EXPECT_NEAR(sum, z0.dot(md.P * z0), 1e-5 * sum) << "d = " << d;
  }
}

TEST_F(Bench, ModalCertificateMatchesSummation) {
  const auto sub = modal_subsystem(b_->plant, *gains_, *dec_, 0);
  const auto mo = modal_objectives(*obj_, *gains_, *dec_, 0);
  for (double d : {0.0, 0.06, 0.1}) {
    const auto md = design_mode(sub, mo, 0.02, d, Method::Lqr);
    Vector z0 = Vector::Zero(md.disc.nz());
    z0(0) = 1.0;
    const double sum = t::closed_loop_sum(md.disc.A2, md.disc.B2u, md.F, md.disc.cost_matrix(), z0);
    EXPECT_NEAR(sum, z0.dot(md.P * z0), 1e-5 * sum) << "d = " << d;
  }
}

std::vector<ModeDesign> designs_for(const grid::LinearPlant& plant, const LocalGains& gains,
                                    const ModalDecomposition& dec, const Objectives& obj,
                                    const DelaySchedule& s) {
  std::vector<ModeDesign> out;
  for (Index i = 0; i < dec.modes(); ++i) {
    out.push_back(design_mode(modal_subsystem(plant, gains, dec, i),
                              modal_objectives(obj, gains, dec, i), s.h,
                              s.d_hat[static_cast<size_t>(i)], Method::Lqr));
  }
  return out;
}

TEST_F(Bench, ZeroFeedbackGivesDecentralizedScheme) {
  const auto s = delay_map(dec_->Mu_pattern, dec_->Mx_inv_pattern, uniform_delays(2, 0.06), 0.02);
  auto designs = designs_for(b_->plant, *gains_, *dec_, *obj_, s);
  for (auto& d : designs) d.F.setZero();
  auto ctrl = assemble_controller(*gains_, *dec_, s, designs);
  std::mt19937_64 rng(27);
  for (long k = 0; k < 10; ++k) {
    ctrl.sample(k, t::random_matrix(rng, 6, 1));
    EXPECT_EQ(ctrl.commands().back(), Vector::Zero(2));
    EXPECT_EQ(ctrl.remote_command(k * 0.02 + 0.01), Vector::Zero(2));
  }
}

TEST_F(Bench, ReconstructionRoundTrip) {
  const auto s = delay_map(dec_->Mu_pattern, dec_->Mx_inv_pattern, uniform_delays(2, 0.04), 0.02);
  auto ctrl = assemble_controller(*gains_, *dec_, s, designs_for(b_->plant, *gains_, *dec_, *obj_, s));
  std::mt19937_64 rng(28);
  for (long k = 0; k < 20; ++k) ctrl.sample(k, t::random_matrix(rng, 6, 1));
  for (size_t k = 0; k < ctrl.commands().size(); ++k) {
    const Vector back = dec_->Mu_inv * ctrl.commands()[k];
    const Vector& vhat = ctrl.modal_commands()[k];
    EXPECT_LE((back - vhat).norm(), 1e-15 * (1.0 + vhat.norm())) << "k = " << k;
  }
  // u_bar switches to v_k at kh + d_rho and holds for one period.
  const double h = 0.02, d = 0.04;
  for (long k = 0; k < 15; ++k) {
    EXPECT_EQ(ctrl.remote_command(k * h + d + 0.25 * h), ctrl.commands()[static_cast<size_t>(k)]);
    EXPECT_EQ(ctrl.remote_command(k * h + d + 0.75 * h), ctrl.commands()[static_cast<size_t>(k)]);
  }
  EXPECT_EQ(ctrl.remote_command(0.5 * d), Vector::Zero(2));
}

TEST_F(Bench, SingleModeIdentityReconstruction) {
  const auto dec = accept_decomposition(b_->plant, *gains_, Matrix::Identity(6, 6),
                                        Matrix::Identity(2, 2), Matrix::Identity(4, 4), 1e-8,
                                        ModeDims{{6}, {2}, {4}});
  const auto s = delay_map(dec.Mu_pattern, dec.Mx_inv_pattern, uniform_delays(2, 0.0), 0.02);
  auto ctrl = assemble_controller(*gains_, dec, s, designs_for(b_->plant, *gains_, dec, *obj_, s));
  std::mt19937_64 rng(29);
  for (long k = 0; k < 5; ++k) {
    ctrl.sample(k, t::random_matrix(rng, 6, 1));
    EXPECT_EQ(ctrl.commands().back(), ctrl.modal_commands().back());
  }
}

TEST_F(Bench, MismatchedScheduleIsRejected) {
  const auto s = delay_map(dec_->Mu_pattern, dec_->Mx_inv_pattern, uniform_delays(2, 0.1), 0.02);
  auto designs = designs_for(b_->plant, *gains_, *dec_, *obj_, s);
  auto other = s;
  other.d_hat = {0.06, 0.06};
  other.d_rho = {0.06, 0.06};
  EXPECT_THROW(assemble_controller(*gains_, *dec_, other, designs), ScheduleMismatch);
  designs.pop_back();
  EXPECT_THROW(assemble_controller(*gains_, *dec_, s, designs), ScheduleMismatch);
}

}  // namespace
