#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedmoe/core_types.hpp"
#include "fedmoe/encoders.hpp"

namespace fedmoe {

// Standard normal CDF via erfc.
double normal_cdf(double x);

struct RectGaussParams {
  Matrix a;
  double sigma = 0.0;
};

// E[ReLU(a + sigma W)] entry-wise.
Matrix rect_mean(const RectGaussParams& p);
// E[ReLU(a + sigma W)^2] entry-wise. Off-diagonal second moments are products of
// rect_mean entries since the entries are independent.
Matrix rect_second_moment(const RectGaussParams& p);

// Element-wise first and second moments of one agent's latent.
struct LatentMoments {
  Matrix mean;
  Matrix second;
};

// Next-step value coefficients and the server weights at step t.
struct StepInputs {
  std::vector<Matrix> p_next;  // N matrices, N*d_y square
  std::vector<Vector> s_next;  // N vectors, N*d_y
  Vector w;                    // N mixture weights
};

struct MomentSet {
  std::vector<Matrix> mean_z;  // E[Z^i], d_y x d_z
  Matrix A;                    // N*d_z square
  Matrix Ahat;                 // N*d_z square
  Matrix B;                    // N*d_z x N*d_y
  Vector C;                    // N*d_z
  Matrix D;                    // N*d_y x N*d_z
  std::vector<Matrix> D_i;     // N matrices, N*d_z square

  // Max absolute entry-wise difference over every matrix.
  double max_abs_diff(const MomentSet& other) const;
  // Every entry, concatenated in a fixed order.
  std::vector<double> flatten() const;
};

void validate_step_inputs(const StepInputs& in, const Dims& dims);

// Every coefficient expression evaluated at one joint realization (Z^1, ..., Z^N).
MomentSet sample_terms(std::span<const Matrix> z, const StepInputs& in, const Dims& dims);

// Deterministic encoders: every expectation is the realized value.
MomentSet assemble_deterministic_moments(std::span<const Matrix> z, const StepInputs& in, const Dims& dims);

// Assembly from element-wise moments of mutually independent latents with
// independent entries.
MomentSet assemble_from_latent_moments(std::span<const LatentMoments> m, const StepInputs& in, const Dims& dims);

// Closed-form assembly for ReLU (random feature network) laws. Identity laws with
// sigma = 0 are accepted as point masses.
MomentSet assemble_rfn_moments(std::span<const LatentLaw> laws, const StepInputs& in, const Dims& dims);

// Standard errors of the Monte-Carlo sample mean, same layout as MomentSet.
using MomentErrors = MomentSet;

// Sample mean of sample_terms over n_samples joint draws. Draw k of agent i at
// step `step` uses its own counter substream keyed on (seed, step, i, k).
MomentSet assemble_mc_moments(std::span<const LatentLaw> laws, const StepInputs& in, const Dims& dims,
                              std::size_t n_samples, std::uint64_t seed, std::size_t step,
                              MomentErrors* errors = nullptr);

}  // namespace fedmoe
