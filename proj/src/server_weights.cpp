#include "fedmoe/server_weights.hpp"

#include <cmath>
#include <stdexcept>

namespace fedmoe {

namespace {

void check_problem(const WeightProblem& p, const char* who) {
  if (!(p.kappa > 0.0) || !std::isfinite(p.kappa)) {
    throw std::invalid_argument(std::string(who) + ": kappa must be finite and > 0");
  }
  if (!std::isfinite(p.eta)) throw std::invalid_argument(std::string(who) + ": eta must be finite");
  if (p.y_hat.cols() == 0) throw ShapeError(std::string(who) + ": no agents");
  if (p.y_hat.rows() != p.y.size()) {
    throw ShapeError(std::string(who) + ": y_hat rows must equal target length");
  }
  if (!p.y_hat.allFinite() || !p.y.allFinite()) {
    throw std::invalid_argument(std::string(who) + ": non-finite predictions or target");
  }
}

}  // namespace

MixtureWeights solve_mixture_weights(const WeightProblem& p) {
  check_problem(p, "solve_mixture_weights");
  const auto n = p.y_hat.cols();
  const Matrix a = 2.0 * (p.y_hat.transpose() * p.y_hat + p.kappa * Matrix::Identity(n, n));
  const Vector b = 2.0 * (p.y_hat.transpose() * p.y);
  const Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("solve_mixture_weights: A is not positive definite");
  }
  const Vector ones = Vector::Ones(n);
  const Vector a_inv_b = llt.solve(b);
  const Vector a_inv_1 = llt.solve(ones);
  const double lambda = (ones.dot(a_inv_b) - p.eta) / ones.dot(a_inv_1);
  MixtureWeights out;
  out.w = a_inv_b - lambda * a_inv_1;
  // Spread the rounding residual of the constraint evenly; with one agent the
  // constraint alone fixes w.
  if (n == 1) {
    out.w(0) = p.eta;
  } else {
    out.w.array() += (p.eta - out.w.sum()) / static_cast<double>(n);
  }
  out.eta = p.eta;
  return out;
}

MixtureWeights qp_oracle(const WeightProblem& p) {
  check_problem(p, "qp_oracle");
  const auto n = p.y_hat.cols();
  Matrix kkt = Matrix::Zero(n + 1, n + 1);
  kkt.topLeftCorner(n, n) = 2.0 * (p.y_hat.transpose() * p.y_hat + p.kappa * Matrix::Identity(n, n));
  kkt.block(0, n, n, 1).setOnes();
  kkt.block(n, 0, 1, n).setOnes();
  Vector rhs(n + 1);
  rhs.head(n) = 2.0 * (p.y_hat.transpose() * p.y);
  rhs(n) = p.eta;

  const Eigen::FullPivLU<Matrix> lu(kkt);
  if (!lu.isInvertible()) throw std::runtime_error("qp_oracle: singular KKT matrix");
  const Vector sol = lu.solve(rhs);
  MixtureWeights out;
  out.w = sol.head(n);
  out.eta = p.eta;
  return out;
}

double mixture_objective(const WeightProblem& p, const Vector& w) {
  return (p.y - p.y_hat * w).squaredNorm() + p.kappa * w.squaredNorm();
}

}  // namespace fedmoe
