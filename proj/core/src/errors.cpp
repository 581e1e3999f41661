#include "dncs/errors.hpp"

#include <sstream>
#include <utility>

namespace dncs {

NoConvergence::NoConvergence(const std::string& what, int iterations, double residual,
                             std::vector<double> history)
    : Error([&] {
        std::ostringstream os;
        os << what << " (iterations=" << iterations << ", residual=" << residual << ")";
        return os.str();
      }()),
      iterations_(iterations),
      residual_(residual),
      history_(std::move(history)) {}

GammaInfeasible::GammaInfeasible(std::string condition, const std::string& detail)
    : Error("gamma infeasible [" + condition + "]: " + detail), condition_(std::move(condition)) {}

NotBlockDiagonalizable::NotBlockDiagonalizable(std::string which_equation, double residual)
    : Error([&] {
        std::ostringstream os;
        os << "decomposition does not block-diagonalize " << which_equation
           << " (off-block residual " << residual << ")";
        return os.str();
      }()),
      which_(std::move(which_equation)),
      residual_(residual) {}

}  // namespace dncs
