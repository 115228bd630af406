#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fedmoe/core_types.hpp"
#include "fedmoe/rng.hpp"

namespace fedmoe {

enum class EncoderKind { kDeterministic, kRfn, kEsn };

std::string to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(const std::string& name);

enum class ActivationKind { kIdentity, kRelu, kHardSigmoid };

// Entry-wise activation. HardSigmoid(u) = clip(slope * u + offset, 0, 1); the
// defaults give clip((u + 3) / 6, 0, 1).
struct Activation {
  ActivationKind kind = ActivationKind::kIdentity;
  double slope = 1.0 / 6.0;
  double offset = 0.5;

  Matrix apply(const Matrix& u) const;
};

// Distribution of a latent state at one step given everything observed so far:
// Z = act(pre + sigma * W), W standard normal of the same shape. A deterministic
// encoder is the degenerate case sigma = 0, act = identity.
struct LatentLaw {
  Matrix pre;
  double sigma = 0.0;
  Activation act;

  bool deterministic() const { return sigma == 0.0; }
  Matrix noiseless() const { return act.apply(pre); }

  template <typename Rng>
  Matrix sample(Rng& rng) const {
    if (sigma == 0.0) return noiseless();
    return act.apply(pre + sigma * standard_normal(pre.rows(), pre.cols(), rng));
  }
};

// Maps x_t (length d_x) to a d_y x d_z latent.
using FeatureMap = std::function<Matrix(const Vector&)>;

struct EncoderParams {
  EncoderKind kind = EncoderKind::kDeterministic;
  Matrix input_map;   // A^i, d_y x d_x (rfn, esn)
  Matrix bias;        // b^i, d_y x d_z (rfn, esn)
  Matrix recurrence;  // B^i, d_y x d_y (esn)
  double sigma = 0.0;
  Activation activation;
  double spectral_radius = 0.0;  // of B^i, recorded for diagnostics
  FeatureMap feature_map;        // deterministic only
};

// Fixed seeded affine map followed by tanh; entries lie in (-1, 1).
FeatureMap default_feature_map(const Dims& dims, std::uint64_t seed, std::size_t agent);

EncoderParams make_deterministic_params(FeatureMap map);
EncoderParams make_rfn_params(const Dims& dims, double sigma, std::uint64_t seed, std::size_t agent);
// B^i is rescaled to `target_radius` unless it is <= 0.
EncoderParams make_esn_params(const Dims& dims, double sigma, std::uint64_t seed, std::size_t agent,
                              double target_radius = 0.9);

double spectral_radius(const Matrix& square);

// The (A x_t) column is broadcast across the d_z columns, i.e. A [x_t, ..., x_t].
Matrix broadcast_input(const Matrix& input_map, const Vector& x, Eigen::Index d_z);

class Encoder {
 public:
  Encoder(EncoderParams params, const Dims& dims);

  // Law of Z_t given x_t and the previous latent (ignored unless esn).
  LatentLaw law(const Vector& x, const Matrix& z_prev) const;

  Matrix encode(const Vector& x, const Matrix& z_prev, PathRng& rng) const {
    return law(x, z_prev).sample(rng);
  }

  Matrix initial_state() const { return Matrix::Zero(d_y_, d_z_); }
  const EncoderParams& params() const { return params_; }
  EncoderKind kind() const { return params_.kind; }

 private:
  EncoderParams params_;
  Eigen::Index d_x_;
  Eigen::Index d_y_;
  Eigen::Index d_z_;
};

Matrix encode_deterministic(const Vector& x, const FeatureMap& phi);
Matrix encode_rfn(const Vector& x, const EncoderParams& params, PathRng& rng);
Matrix encode_esn(const Vector& x, const Matrix& prev, const EncoderParams& params, PathRng& rng);

// Runs the esn recursion over `inputs` with the given activation swapped in and
// returns max |Z| after each step.
std::vector<double> relu_blowup_probe(const EncoderParams& esn, std::span<const Vector> inputs,
                                      PathRng& rng, ActivationKind act = ActivationKind::kRelu);

}  // namespace fedmoe
