#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dncs {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// grid_model
class SingularNetwork : public Error {
 public:
  using Error::Error;
};

class SingularAlgebraicSystem : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, int iterations, double residual,
                std::vector<double> history = {});

  int iterations() const { return iterations_; }
  double residual() const { return residual_; }
  const std::vector<double>& history() const { return history_; }

 private:
  int iterations_;
  double residual_;
  std::vector<double> history_;
};

class JacobianInconsistent : public Error {
 public:
  using Error::Error;
};

// sampled
class IllPosedLyapunov : public Error {
 public:
  using Error::Error;
};

class InvalidSampling : public Error {
 public:
  using Error::Error;
};

// synthesis
class NotStabilizable : public Error {
 public:
  using Error::Error;
};

class IndefiniteCost : public Error {
 public:
  using Error::Error;
};

/// Raised by H-infinity synthesis; `condition()` names the check that failed
/// ("H3", "H1", "riccati", "P_psd", "stability", "certificate").
class GammaInfeasible : public Error {
 public:
  GammaInfeasible(std::string condition, const std::string& detail);

  const std::string& condition() const { return condition_; }

 private:
  std::string condition_;
};

class NoFeasibleGamma : public Error {
 public:
  using Error::Error;
};

class UnstableSystem : public Error {
 public:
  using Error::Error;
};

// dncs
class NotSymmetric : public Error {
 public:
  using Error::Error;
};

class NotBlockDiagonalizable : public Error {
 public:
  NotBlockDiagonalizable(std::string which_equation, double residual);

  const std::string& which_equation() const { return which_; }
  double residual() const { return residual_; }

 private:
  std::string which_;
  double residual_;
};

class AsymmetricDelays : public Error {
 public:
  using Error::Error;
};

class ScheduleMismatch : public Error {
 public:
  using Error::Error;
};

// sim_eval
class EventGridMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace dncs
