#include "oracles.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace dncs::testing {

namespace {

double normal(std::mt19937_64& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }
double uniform(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

}  // namespace

Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) M(i, j) = normal(rng);
  return M;
}

Matrix random_stable(std::mt19937_64& rng, Index n) {
  Matrix A = random_matrix(rng, n, n) / std::sqrt(static_cast<double>(n));
  const Eigen::VectorXcd ev = A.eigenvalues();
  double abscissa = -1e300;
  for (Index i = 0; i < ev.size(); ++i) abscissa = std::max(abscissa, ev(i).real());
  const double target = -uniform(rng, 0.2, 1.5);
  A -= (abscissa - target) * Matrix::Identity(n, n);
  return A;
}

Matrix random_psd(std::mt19937_64& rng, Index n, Index rank) {
  const Matrix L = random_matrix(rng, n, rank);
  return L * L.transpose();
}

DelayedZohResult rk4_delayed_zoh(const Matrix& A, const Matrix& B, const Matrix& Bw,
                                 const Matrix& W, double h, double d,
                                 const std::vector<Vector>& history,
                                 const std::vector<Vector>& inputs, const Vector& x0,
                                 const std::vector<Vector>& disturbances, int substeps) {
  const Index nx = A.rows(), nu = B.cols();
  const long N = static_cast<long>(inputs.size());
  // Input applied on (t - d) in (jh, jh + h]: index j relative to u_0.
  auto input = [&](long j) -> Vector {
    if (j >= 0) return inputs[static_cast<size_t>(j)];
    const long slot = static_cast<long>(history.size()) + j;
    return slot >= 0 ? history[static_cast<size_t>(slot)] : Vector::Zero(nu);
  };
  const long q = d > 0.0 ? static_cast<long>(std::ceil(d / h - 1e-12)) - 1 : 0;
  const double r = d > 0.0 ? d - static_cast<double>(q) * h : 0.0;

  auto integrate = [&](Vector& x, double& J, const Vector& u, const Vector& w, double span) {
    if (span <= 0.0) return;
    const int n = std::max(1, static_cast<int>(std::ceil(substeps * span / h)));
    const double dt = span / n;
    const Vector drive = B * u + (Bw.size() ? Vector(Bw * w) : Vector::Zero(nx));
    auto rate = [&](const Vector& s) { return Vector(A * s + drive); };
    auto stage = [&](const Vector& s) {
      Vector xu(nx + nu);
      xu << s, u;
      return xu.dot(W * xu);
    };
    for (int k = 0; k < n; ++k) {
      const Vector k1 = rate(x);
      const Vector s2 = x + 0.5 * dt * k1;
      const Vector k2 = rate(s2);
      const Vector s3 = x + 0.5 * dt * k2;
      const Vector k3 = rate(s3);
      const Vector s4 = x + dt * k3;
      const Vector k4 = rate(s4);
      J += dt / 6.0 * (stage(x) + 2.0 * stage(s2) + 2.0 * stage(s3) + stage(s4));
      x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  };

  DelayedZohResult out;
  Vector x = x0;
  out.states.push_back(x);
  for (long k = 0; k < N; ++k) {
    const Vector w = disturbances.empty() ? Vector::Zero(Bw.cols())
                                          : disturbances[static_cast<size_t>(k)];
    if (d == 0.0) {
      integrate(x, out.cost, input(k), w, h);
    } else {
      // On (kh, kh + r] the input issued q + 1 steps earlier is active,
      // afterwards the one issued q steps earlier.
      integrate(x, out.cost, input(k - q - 1), w, r);
      integrate(x, out.cost, input(k - q), w, h - r);
    }
    out.states.push_back(x);
  }
  return out;
}

double series_exp(double a, double alpha) {
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    term *= a * alpha / k;
    sum += term;
  }
  return sum;
}

double series_exp_integral(double a, double alpha) {
  double term = alpha, sum = alpha;
  for (int k = 1; k < 60; ++k) {
    term *= a * alpha / (k + 1);
    sum += term;
  }
  return sum;
}

Matrix lyapunov_kron(const Matrix& A, const Matrix& Q) {
  const Index n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  Matrix L(n * n, n * n);
  // Column-major vec: vec(A' X) = (I (x) A') vec X, vec(X A) = (A' (x) I) vec X.
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      L.block(i * n, j * n, n, n) = (i == j ? Matrix(A.transpose()) : Matrix::Zero(n, n)) + A(j, i) * I;
  const Vector q = Eigen::Map<const Vector>(Matrix(-Q).data(), n * n);
  const Vector x = L.fullPivLu().solve(q);
  return Eigen::Map<const Matrix>(x.data(), n, n);
}

double closed_loop_sum(const Matrix& A, const Matrix& B, const Matrix& F, const Matrix& W,
                       const Vector& z0, long max_steps) {
  const Matrix Acl = A + B * F;
  Vector z = z0;
  double total = 0.0;
  for (long k = 0; k < max_steps; ++k) {
    Vector zu(z.size() + F.rows());
    zu << z, F * z;
    const double inc = zu.dot(W * zu);
    total += inc;
    if (k > 10 && std::abs(inc) <= 1e-16 * std::abs(total)) break;
    z = Acl * z;
  }
  return total;
}

BruteDelays brute_force_delays(const distributed::Pattern& Mu_pattern,
                               const distributed::Pattern& Mx_inv_pattern, const Matrix& d) {
  const Index machines = Mu_pattern.rows(), modes = Mu_pattern.cols();
  BruteDelays out;
  out.d_hat.assign(static_cast<size_t>(modes), 0.0);
  out.d_rho.assign(static_cast<size_t>(machines), 0.0);
  for (Index i = 0; i < modes; ++i)
    for (Index a = 0; a < machines; ++a)
      for (Index b = 0; b < machines; ++b)
        if (Mu_pattern(a, i) != 0 && Mx_inv_pattern(i, b) != 0)
          out.d_hat[static_cast<size_t>(i)] = std::max(out.d_hat[static_cast<size_t>(i)], d(a, b));
  for (Index rho = 0; rho < machines; ++rho)
    for (Index i = 0; i < modes; ++i)
      if (Mu_pattern(rho, i) != 0)
        out.d_rho[static_cast<size_t>(rho)] =
            std::max(out.d_rho[static_cast<size_t>(rho)], out.d_hat[static_cast<size_t>(i)]);
  return out;
}

distributed::Pattern random_pattern(std::mt19937_64& rng, Index rows, Index cols) {
  distributed::Pattern P(rows, cols);
  std::bernoulli_distribution coin(0.5);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) P(i, j) = coin(rng) ? 1 : 0;
  std::uniform_int_distribution<Index> pick_row(0, rows - 1), pick_col(0, cols - 1);
  for (Index j = 0; j < cols; ++j)
    if (P.col(j).sum() == 0) P(pick_row(rng), j) = 1;
  for (Index i = 0; i < rows; ++i)
    if (P.row(i).sum() == 0) P(i, pick_col(rng)) = 1;
  return P;
}

Matrix random_delays(std::mt19937_64& rng, Index m) {
  Matrix d = Matrix::Zero(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = i + 1; j < m; ++j) d(i, j) = d(j, i) = std::round(uniform(rng, 0.0, 0.5) * 1000) / 1000;
  return d;
}

}  // namespace dncs::testing
