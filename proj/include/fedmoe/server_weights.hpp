#pragma once

#include "fedmoe/core_types.hpp"

namespace fedmoe {

// Signed mixture weights; entries sum to eta.
struct MixtureWeights {
  Vector w;
  double eta = 1.0;
};

// Server problem at one step:
//   min_w ||y - Yhat w||^2 + kappa ||w||^2   s.t.  1^T w = eta
// where column i of y_hat is agent i's prediction.
struct WeightProblem {
  Matrix y_hat;  // d_y x N
  Vector y;      // d_y
  double kappa = 1.0;
  double eta = 1.0;
};

// Closed-form minimiser. A = 2(Yhat^T Yhat + kappa I) is factorised with LLT;
// the inverse is never formed.
MixtureWeights solve_mixture_weights(const WeightProblem& p);

// Reference solver: the bordered KKT system [[A, 1], [1^T, 0]] (w, lambda) = (b, eta)
// solved by a generic pivoted LU. Kept independent of the closed form so tests
// can compare the two.
MixtureWeights qp_oracle(const WeightProblem& p);

// ||y - Yhat w||^2 + kappa ||w||^2
double mixture_objective(const WeightProblem& p, const Vector& w);

}  // namespace fedmoe
