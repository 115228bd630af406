#include "fedmoe/encoders.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace fedmoe {

std::string to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::kDeterministic: return "deterministic";
    case EncoderKind::kRfn: return "rfn";
    case EncoderKind::kEsn: return "esn";
  }
  return "unknown";
}

EncoderKind parse_encoder_kind(const std::string& name) {
  if (name == "deterministic") return EncoderKind::kDeterministic;
  if (name == "rfn") return EncoderKind::kRfn;
  if (name == "esn") return EncoderKind::kEsn;
  throw std::invalid_argument("unknown encoder kind '" + name + "'");
}

Matrix Activation::apply(const Matrix& u) const {
  switch (kind) {
    case ActivationKind::kIdentity: return u;
    case ActivationKind::kRelu: return u.cwiseMax(0.0);
    case ActivationKind::kHardSigmoid:
      return (slope * u.array() + offset).cwiseMax(0.0).cwiseMin(1.0).matrix();
  }
  return u;
}

FeatureMap default_feature_map(const Dims& dims, std::uint64_t seed, std::size_t agent) {
  dims.validate();
  auto rng = make_stream(seed, agent, StreamPurpose::kFeatureMap);
  const auto out = static_cast<Eigen::Index>(dims.d_y * dims.d_z);
  const auto in = static_cast<Eigen::Index>(dims.d_x);
  Matrix weights = standard_normal(out, in, rng) / std::sqrt(static_cast<double>(dims.d_x));
  Vector offset = standard_normal(out, 1, rng);
  const auto d_y = static_cast<Eigen::Index>(dims.d_y);
  const auto d_z = static_cast<Eigen::Index>(dims.d_z);
  return [weights = std::move(weights), offset = std::move(offset), d_y, d_z](const Vector& x) {
    if (x.size() != weights.cols()) throw ShapeError("feature map: input has wrong length");
    const Vector flat = (weights * x + offset).array().tanh().matrix();
    // Row-major reshape: row k of Z is flat[k*d_z .. (k+1)*d_z).
    Matrix z(d_y, d_z);
    for (Eigen::Index r = 0; r < d_y; ++r) z.row(r) = flat.segment(r * d_z, d_z).transpose();
    return z;
  };
}

EncoderParams make_deterministic_params(FeatureMap map) {
  if (!map) throw std::invalid_argument("deterministic encoder needs a feature map");
  EncoderParams p;
  p.kind = EncoderKind::kDeterministic;
  p.feature_map = std::move(map);
  p.activation.kind = ActivationKind::kIdentity;
  return p;
}

EncoderParams make_rfn_params(const Dims& dims, double sigma, std::uint64_t seed, std::size_t agent) {
  dims.validate();
  if (!(sigma >= 0.0)) throw std::invalid_argument("rfn: sigma must be >= 0");
  auto rng = make_stream(seed, agent, StreamPurpose::kParameters);
  const auto d_y = static_cast<Eigen::Index>(dims.d_y);
  EncoderParams p;
  p.kind = EncoderKind::kRfn;
  p.input_map = standard_normal(d_y, static_cast<Eigen::Index>(dims.d_x), rng) /
                std::sqrt(static_cast<double>(dims.d_x));
  p.bias = standard_normal(d_y, static_cast<Eigen::Index>(dims.d_z), rng);
  p.sigma = sigma;
  p.activation.kind = ActivationKind::kRelu;
  return p;
}

EncoderParams make_esn_params(const Dims& dims, double sigma, std::uint64_t seed, std::size_t agent,
                              double target_radius) {
  dims.validate();
  if (!(sigma >= 0.0)) throw std::invalid_argument("esn: sigma must be >= 0");
  auto rng = make_stream(seed, agent, StreamPurpose::kParameters);
  const auto d_y = static_cast<Eigen::Index>(dims.d_y);
  EncoderParams p;
  p.kind = EncoderKind::kEsn;
  p.input_map = standard_normal(d_y, static_cast<Eigen::Index>(dims.d_x), rng) /
                std::sqrt(static_cast<double>(dims.d_x));
  p.bias = standard_normal(d_y, static_cast<Eigen::Index>(dims.d_z), rng);
  p.recurrence = standard_normal(d_y, d_y, rng) / std::sqrt(static_cast<double>(dims.d_y));
  const double radius = spectral_radius(p.recurrence);
  if (target_radius > 0.0 && radius > 0.0) p.recurrence *= target_radius / radius;
  p.spectral_radius = spectral_radius(p.recurrence);
  p.sigma = sigma;
  p.activation.kind = ActivationKind::kHardSigmoid;
  return p;
}

double spectral_radius(const Matrix& square) {
  if (square.rows() != square.cols()) throw ShapeError("spectral_radius: matrix is not square");
  if (square.size() == 0) return 0.0;
  const Eigen::EigenSolver<Matrix> solver(square, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix broadcast_input(const Matrix& input_map, const Vector& x, Eigen::Index d_z) {
  if (input_map.cols() != x.size()) throw ShapeError("encoder: input has wrong length");
  const Vector ax = input_map * x;
  return ax.replicate(1, d_z);
}

Encoder::Encoder(EncoderParams params, const Dims& dims)
    : params_(std::move(params)),
      d_x_(static_cast<Eigen::Index>(dims.d_x)),
      d_y_(static_cast<Eigen::Index>(dims.d_y)),
      d_z_(static_cast<Eigen::Index>(dims.d_z)) {
  dims.validate();
  if (params_.kind == EncoderKind::kDeterministic) {
    if (!params_.feature_map) throw std::invalid_argument("Encoder: deterministic kind needs a feature map");
    return;
  }
  if (params_.input_map.rows() != d_y_ || params_.input_map.cols() != d_x_) {
    throw ShapeError("Encoder: A^i must be d_y x d_x");
  }
  if (params_.bias.rows() != d_y_ || params_.bias.cols() != d_z_) throw ShapeError("Encoder: b^i must be d_y x d_z");
  if (params_.kind == EncoderKind::kEsn &&
      (params_.recurrence.rows() != d_y_ || params_.recurrence.cols() != d_y_)) {
    throw ShapeError("Encoder: B^i must be d_y x d_y");
  }
  if (!(params_.sigma >= 0.0)) throw std::invalid_argument("Encoder: sigma must be >= 0");
}

LatentLaw Encoder::law(const Vector& x, const Matrix& z_prev) const {
  if (x.size() != d_x_) throw ShapeError("Encoder: x has wrong length");
  LatentLaw law;
  law.act = params_.activation;
  switch (params_.kind) {
    case EncoderKind::kDeterministic: {
      law.pre = params_.feature_map(x);
      if (law.pre.rows() != d_y_ || law.pre.cols() != d_z_) throw ShapeError("feature map returned wrong shape");
      law.sigma = 0.0;
      law.act.kind = ActivationKind::kIdentity;
      return law;
    }
    case EncoderKind::kRfn:
      law.pre = broadcast_input(params_.input_map, x, d_z_) + params_.bias;
      law.sigma = params_.sigma;
      return law;
    case EncoderKind::kEsn:
      if (z_prev.rows() != d_y_ || z_prev.cols() != d_z_) throw ShapeError("Encoder: previous latent has wrong shape");
      law.pre = broadcast_input(params_.input_map, x, d_z_) + params_.recurrence * z_prev + params_.bias;
      law.sigma = params_.sigma;
      return law;
  }
  throw std::logic_error("Encoder: unknown kind");
}

Matrix encode_deterministic(const Vector& x, const FeatureMap& phi) {
  if (!phi) throw std::invalid_argument("encode_deterministic: empty feature map");
  return phi(x);
}

Matrix encode_rfn(const Vector& x, const EncoderParams& params, PathRng& rng) {
  LatentLaw law;
  law.pre = broadcast_input(params.input_map, x, params.bias.cols()) + params.bias;
  law.sigma = params.sigma;
  law.act = params.activation;
  return law.sample(rng);
}

Matrix encode_esn(const Vector& x, const Matrix& prev, const EncoderParams& params, PathRng& rng) {
  if (prev.rows() != params.bias.rows() || prev.cols() != params.bias.cols()) {
    throw ShapeError("encode_esn: previous latent has wrong shape");
  }
  LatentLaw law;
  law.pre = broadcast_input(params.input_map, x, params.bias.cols()) + params.recurrence * prev + params.bias;
  law.sigma = params.sigma;
  law.act = params.activation;
  return law.sample(rng);
}

std::vector<double> relu_blowup_probe(const EncoderParams& esn, std::span<const Vector> inputs,
                                      PathRng& rng, ActivationKind act) {
  EncoderParams probe = esn;
  probe.activation.kind = act;
  std::vector<double> trace;
  trace.reserve(inputs.size());
  Matrix z = Matrix::Zero(esn.bias.rows(), esn.bias.cols());
  for (const auto& x : inputs) {
    z = encode_esn(x, z, probe, rng);
    trace.push_back(z.cwiseAbs().maxCoeff());
  }
  return trace;
}

}  // namespace fedmoe
