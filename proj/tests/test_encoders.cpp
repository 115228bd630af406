#include <doctest.h>

#include <cmath>
#include <random>

#include "fedmoe/encoders.hpp"
#include "fedmoe/moments.hpp"
#include "test_support.hpp"

using namespace fedmoe;

namespace {

// Writes x into the first row and pads with zeros.
FeatureMap padding_map(Eigen::Index d_y, Eigen::Index d_z) {
  return [d_y, d_z](const Vector& x) {
    Matrix z = Matrix::Zero(d_y, d_z);
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(x.size(), d_z); ++k) z(0, k) = x(k);
    return z;
  };
}

EncoderParams constant_pre_params(const Dims& dims, double value, double sigma, EncoderKind kind) {
  EncoderParams p;
  p.kind = kind;
  p.input_map = Matrix::Zero(static_cast<Eigen::Index>(dims.d_y), static_cast<Eigen::Index>(dims.d_x));
  p.bias = Matrix::Constant(static_cast<Eigen::Index>(dims.d_y), static_cast<Eigen::Index>(dims.d_z), value);
  p.recurrence = Matrix::Zero(static_cast<Eigen::Index>(dims.d_y), static_cast<Eigen::Index>(dims.d_y));
  p.sigma = sigma;
  p.activation.kind = kind == EncoderKind::kEsn ? ActivationKind::kHardSigmoid : ActivationKind::kRelu;
  return p;
}

}  // namespace

TEST_CASE("encoder kind names round-trip") {
  for (auto k : {EncoderKind::kDeterministic, EncoderKind::kRfn, EncoderKind::kEsn}) {
    CHECK(parse_encoder_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_encoder_kind("transformer"), std::invalid_argument);
}

TEST_CASE("hard sigmoid") {
  Activation a{ActivationKind::kHardSigmoid};
  Matrix u(1, 5);
  u << -4, -3, 0, 3, 4;
  Matrix expected(1, 5);
  expected << 0, 0, 0.5, 1, 1;
  CHECK(a.apply(u) == expected);
}

TEST_CASE("deterministic encoder") {
  const Dims dims{1, 2, 2, 3};
  Vector x(2);
  x << 1, 2;
  const Matrix z = encode_deterministic(x, padding_map(2, 3));
  CHECK(z(0, 0) == 1.0);
  CHECK(z(0, 1) == 2.0);
  CHECK(z(0, 2) == 0.0);
  CHECK(z.row(1).isZero());
  CHECK(encode_deterministic(x, padding_map(2, 3)) == z);

  const FeatureMap phi = default_feature_map(dims, 1, 0);
  std::mt19937_64 rng(4);
  for (int k = 0; k < 50; ++k) {
    const Matrix m = phi(testing::randv(2, rng));
    CHECK(m.cwiseAbs().maxCoeff() < 1.0);
  }
  CHECK(phi(x) == default_feature_map(dims, 1, 0)(x));
  CHECK(phi(x) != default_feature_map(dims, 1, 1)(x));

  Encoder enc(make_deterministic_params(phi), dims);
  PathRng path(1);
  CHECK(enc.encode(x, enc.initial_state(), path) == phi(x));
  CHECK(enc.law(x, enc.initial_state()).deterministic());
}

TEST_CASE("rfn encoder") {
  const Dims dims{1, 2, 2, 3};
  Vector x(2);
  x << 0.3, -0.7;

  SUBCASE("sigma = 0 is the rectified pre-activation") {
    const EncoderParams p = make_rfn_params(dims, 0.0, 9, 0);
    PathRng rng(1);
    const Matrix pre = broadcast_input(p.input_map, x, 3) + p.bias;
    CHECK(encode_rfn(x, p, rng) == pre.cwiseMax(0.0));
  }
  SUBCASE("dead zone") {
    const EncoderParams p = constant_pre_params(dims, -10.0, 0.01, EncoderKind::kRfn);
    PathRng rng(2);
    for (int k = 0; k < 100; ++k) CHECK(encode_rfn(x, p, rng).isZero());
  }
  SUBCASE("broadcast column") {
    const EncoderParams p = make_rfn_params(dims, 0.0, 9, 0);
    const Matrix b = broadcast_input(p.input_map, x, 3);
    for (Eigen::Index c = 0; c < 3; ++c) CHECK(b.col(c) == p.input_map * x);
  }
  SUBCASE("sample mean matches the rectified Gaussian mean") {
    const EncoderParams p = make_rfn_params(dims, 0.8, 13, 1);
    PathRng rng(77);
    const int n = 100000;
    Matrix sum = Matrix::Zero(2, 3);
    Matrix sum_sq = Matrix::Zero(2, 3);
    for (int k = 0; k < n; ++k) {
      const Matrix z = encode_rfn(x, p, rng);
      sum += z;
      sum_sq += z.cwiseProduct(z);
    }
    const Matrix mean = sum / n;
    const Matrix var = sum_sq / n - mean.cwiseProduct(mean);
    const Matrix expected = rect_mean({broadcast_input(p.input_map, x, 3) + p.bias, 0.8});
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
      CHECK(std::abs(mean.data()[i] - expected.data()[i]) <= 3.0 * std::sqrt(var.data()[i] / n));
    }
  }
}

TEST_CASE("esn encoder") {
  const Dims dims{1, 2, 3, 2};
  Vector x(2);
  x << 0.5, 0.1;
  const Matrix prev = Matrix::Zero(3, 2);

  SUBCASE("saturation") {
    PathRng rng(1);
    CHECK(encode_esn(x, prev, constant_pre_params(dims, 3.0, 0.0, EncoderKind::kEsn), rng) == Matrix::Ones(3, 2));
    CHECK(encode_esn(x, prev, constant_pre_params(dims, 5.0, 0.0, EncoderKind::kEsn), rng) == Matrix::Ones(3, 2));
    CHECK(encode_esn(x, prev, constant_pre_params(dims, -3.0, 0.0, EncoderKind::kEsn), rng).isZero());
  }
  SUBCASE("no noise and no recurrence gives the rfn map with the activation swapped") {
    EncoderParams esn = make_esn_params(dims, 0.0, 21, 0);
    esn.recurrence.setZero();
    EncoderParams rfn = make_rfn_params(dims, 0.0, 21, 0);
    rfn.input_map = esn.input_map;
    rfn.bias = esn.bias;
    rfn.activation = esn.activation;
    PathRng r1(1), r2(2);
    std::mt19937_64 rng(3);
    const Matrix junk = testing::randn(3, 2, rng);
    CHECK(encode_esn(x, junk, esn, r1) == encode_rfn(x, rfn, r2));
  }
  SUBCASE("entries stay in the unit interval") {
    const EncoderParams p = make_esn_params(dims, 2.0, 5, 0);
    CHECK(p.spectral_radius == doctest::Approx(0.9));
    PathRng rng(8);
    Matrix z = prev;
    std::mt19937_64 xs(9);
    for (int t = 0; t < 500; ++t) {
      z = encode_esn(5.0 * testing::randv(2, xs), z, p, rng);
      CHECK(z.minCoeff() >= 0.0);
      CHECK(z.maxCoeff() <= 1.0);
    }
  }
  SUBCASE("encoder law uses the previous latent") {
    const EncoderParams p = make_esn_params(dims, 0.1, 5, 0);
    Encoder enc(p, dims);
    const Matrix z1 = Matrix::Constant(3, 2, 0.5);
    const LatentLaw law = enc.law(x, z1);
    CHECK((law.pre - (broadcast_input(p.input_map, x, 2) + p.recurrence * z1 + p.bias)).norm() < 1e-15);
    CHECK(law.sigma == 0.1);
    CHECK_THROWS_AS(enc.law(x, Matrix::Zero(2, 2)), ShapeError);
  }
}

TEST_CASE("relu blow-up probe") {
  const Dims dims{1, 1, 3, 3};
  std::vector<Vector> inputs(10, Vector::Ones(1));

  SUBCASE("hard sigmoid trace is bounded by one") {
    const EncoderParams p = make_esn_params(dims, 0.1, 3, 0, 3.0);
    PathRng rng(1);
    for (double v : relu_blowup_probe(p, inputs, rng, ActivationKind::kHardSigmoid)) CHECK(v <= 1.0);
  }
  SUBCASE("no recurrence is bounded by the largest single draw") {
    EncoderParams p = make_esn_params(dims, 0.0, 3, 0);
    p.recurrence.setZero();
    PathRng rng(1);
    const double bound = (broadcast_input(p.input_map, inputs[0], 3) + p.bias).cwiseMax(0.0).maxCoeff();
    for (double v : relu_blowup_probe(p, inputs, rng)) CHECK(v <= bound + 1e-15);
  }
  SUBCASE("expansive recurrence grows under relu on most seeds") {
    int increasing = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const EncoderParams p = make_esn_params(dims, 0.1, seed, 0, 3.0);
      REQUIRE(p.spectral_radius > 1.0);
      PathRng rng(seed + 1000);
      const auto trace = relu_blowup_probe(p, inputs, rng);
      bool up = true;
      for (std::size_t k = 1; k < trace.size(); ++k) up = up && trace[k] > trace[k - 1];
      increasing += up ? 1 : 0;
    }
    CHECK(increasing >= 50);
  }
}

TEST_CASE("path streams of different agents are uncorrelated") {
  const int n = 20000;
  PathRng a = make_stream(2024, 0, StreamPurpose::kPath);
  PathRng b = make_stream(2024, 1, StreamPurpose::kPath);
  const Matrix wa = standard_normal(n, 1, a);
  const Matrix wb = standard_normal(n, 1, b);
  const double corr = (wa.array() * wb.array()).mean();
  CHECK(std::abs(corr) <= 3.0 / std::sqrt(static_cast<double>(n)));
}
