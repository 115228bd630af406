#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fedmoe/moments.hpp"
#include "test_support.hpp"

using namespace fedmoe;

namespace {

Matrix random_psd(Eigen::Index n, std::mt19937_64& rng) {
  const Matrix a = testing::randn(n, n, rng);
  return a * a.transpose() / static_cast<double>(n);
}

StepInputs random_inputs(const Dims& dims, std::mt19937_64& rng) {
  StepInputs in;
  const auto ny = static_cast<Eigen::Index>(dims.stacked_y());
  for (std::size_t i = 0; i < dims.n_agents; ++i) {
    in.p_next.push_back(random_psd(ny, rng));
    in.s_next.push_back(testing::randv(ny, rng));
  }
  in.w = testing::weights_summing_to(dims.n_agents, 1.0, rng);
  return in;
}

std::vector<LatentLaw> relu_laws(const Dims& dims, double sigma, std::mt19937_64& rng) {
  std::vector<LatentLaw> laws;
  for (std::size_t i = 0; i < dims.n_agents; ++i) {
    LatentLaw l;
    l.pre = testing::randn(static_cast<Eigen::Index>(dims.d_y), static_cast<Eigen::Index>(dims.d_z), rng);
    l.sigma = sigma;
    l.act.kind = ActivationKind::kRelu;
    laws.push_back(l);
  }
  return laws;
}

// Written with explicit embedding matrices instead of block slicing.
MomentSet embedded_terms(const std::vector<Matrix>& z, const StepInputs& in, const Dims& dims) {
  const auto n = static_cast<Eigen::Index>(dims.n_agents);
  const auto dy = static_cast<Eigen::Index>(dims.d_y);
  const auto dz = static_cast<Eigen::Index>(dims.d_z);
  Matrix d = Matrix::Zero(n * dy, n * dz);
  std::vector<Matrix> emb;
  for (Eigen::Index i = 0; i < n; ++i) {
    Matrix e = Matrix::Zero(n * dy, dy);
    e.middleRows(i * dy, dy).setIdentity();
    emb.push_back(e * z[static_cast<std::size_t>(i)]);
    Matrix sel = Matrix::Zero(n * dz, dz);
    sel.middleRows(i * dz, dz).setIdentity();
    d += emb.back() * sel.transpose();
  }
  Matrix wk = Matrix::Zero(n * dy, dy);
  for (Eigen::Index i = 0; i < n; ++i) wk.middleRows(i * dy, dy) = in.w(i) * Matrix::Identity(dy, dy);
  MomentSet m;
  m.mean_z = z;
  m.D = d;
  m.Ahat = d.transpose() * wk * wk.transpose() * d;
  m.A = Matrix::Zero(n * dz, n * dz);
  m.B = Matrix::Zero(n * dz, n * dy);
  m.C = Vector::Zero(n * dz);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    Matrix sel = Matrix::Zero(n * dz, dz);
    sel.middleRows(i * dz, dz).setIdentity();
    m.A += sel * emb[ii].transpose() * in.p_next[ii] * d;
    m.B += sel * emb[ii].transpose() * in.p_next[ii];
    m.C += sel * emb[ii].transpose() * in.s_next[ii];
    m.D_i.push_back(d.transpose() * in.p_next[ii] * d);
  }
  return m;
}

}  // namespace

TEST_CASE("normal cdf") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-14));
  CHECK(normal_cdf(-3.0) == doctest::Approx(0.0013498980316300946).epsilon(1e-12));
  CHECK(normal_cdf(-10.0) == doctest::Approx(7.619853024160527e-24).epsilon(1e-12));
}

TEST_CASE("rectified Gaussian moments") {
  auto one = [](double a, double s) { return RectGaussParams{Matrix::Constant(1, 1, a), s}; };
  CHECK(rect_mean(one(0, 1))(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-14));
  CHECK(rect_second_moment(one(0, 1))(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(rect_mean(one(10, 0.1))(0, 0) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(std::abs(rect_mean(one(-10, 0.1))(0, 0)) < 1e-20);
  const double m0 = rect_mean(one(0, 1))(0, 0);
  CHECK(m0 * m0 == doctest::Approx(0.1592).epsilon(1e-3));

  Matrix a(1, 3);
  a << -1.5, 0.0, 2.0;
  CHECK(rect_mean({a, 0.0}) == a.cwiseMax(0.0));
  CHECK(rect_second_moment({a, 0.0}) == a.cwiseMax(0.0).cwiseAbs2());

  SUBCASE("second moment bounds the squared mean") {
    std::mt19937_64 rng(5);
    const Matrix aa = 3.0 * testing::randn(4, 4, rng);
    for (double s : {0.1, 0.5, 2.0}) {
      const Matrix m = rect_mean({aa, s});
      CHECK((rect_second_moment({aa, s}) - m.cwiseAbs2()).minCoeff() >= -1e-12);
      CHECK(m.minCoeff() >= 0.0);
    }
  }
  SUBCASE("Monte-Carlo agreement at 1e5 samples") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> normal;
    const int n = 100000;
    for (double av : {-1.0, 0.0, 1.0}) {
      for (double s : {0.1, 1.0}) {
        double sum = 0, sum2 = 0, sum4 = 0;
        for (int k = 0; k < n; ++k) {
          const double z = std::max(0.0, av + s * normal(rng));
          sum += z;
          sum2 += z * z;
          sum4 += z * z * z * z;
        }
        const double mean = sum / n, m2 = sum2 / n;
        const double se1 = std::sqrt((m2 - mean * mean) / n);
        const double se2 = std::sqrt((sum4 / n - m2 * m2) / n);
        CHECK(std::abs(rect_mean(one(av, s))(0, 0) - mean) <= 4.0 * se1 + 1e-12);
        CHECK(std::abs(rect_second_moment(one(av, s))(0, 0) - m2) <= 4.0 * se2 + 1e-12);
      }
    }
  }
}

TEST_CASE("deterministic assembly against the embedding oracle") {
  std::mt19937_64 rng(17);
  for (std::size_t n : {1u, 2u, 3u}) {
    for (std::size_t dy : {1u, 2u}) {
      const Dims dims{n, 1, dy, 3};
      const StepInputs in = random_inputs(dims, rng);
      std::vector<Matrix> z;
      for (std::size_t i = 0; i < n; ++i) z.push_back(testing::randn(static_cast<Eigen::Index>(dy), 3, rng));
      const MomentSet got = assemble_deterministic_moments(z, in, dims);
      CHECK(got.max_abs_diff(embedded_terms(z, in, dims)) < 1e-12);
      CHECK((got.Ahat - got.Ahat.transpose()).norm() == 0.0);
      CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(got.Ahat).eigenvalues().minCoeff() >= -1e-12);
      for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        CHECK(got.A.middleRows(ii * 3, 3) == got.D_i[i].middleRows(ii * 3, 3));
        CHECK(got.D.block(ii * static_cast<Eigen::Index>(dy), ii * 3, static_cast<Eigen::Index>(dy), 3) == z[i]);
      }
    }
  }
}

TEST_CASE("orthogonal latents with all weight on agent 0") {
  const Dims dims{2, 1, 1, 2};
  std::mt19937_64 rng(1);
  StepInputs in = random_inputs(dims, rng);
  in.w << 1.0, 0.0;
  Matrix z0(1, 2), z1(1, 2);
  z0 << 1, 0;
  z1 << 0, 1;
  const std::vector<Matrix> z{z0, z1};
  const MomentSet m = assemble_deterministic_moments(z, in, dims);
  CHECK(m.Ahat(0, 0) == 1.0);
  CHECK(m.Ahat.block(2, 0, 2, 4).isZero());
  CHECK(m.Ahat.block(0, 2, 4, 2).isZero());
}

TEST_CASE("zero continuation values") {
  std::mt19937_64 rng(2);
  const Dims dims{2, 1, 2, 3};
  StepInputs in = random_inputs(dims, rng);
  for (auto& p : in.p_next) p.setZero();
  const auto laws = relu_laws(dims, 0.7, rng);
  const MomentSet m = assemble_rfn_moments(laws, in, dims);
  CHECK(m.A.isZero());
  CHECK(m.B.isZero());
  StepInputs other = random_inputs(dims, rng);
  other.w = in.w;
  CHECK((assemble_rfn_moments(laws, other, dims).Ahat - m.Ahat).norm() == 0.0);
}

TEST_CASE("point-mass laws reduce the closed form to the realized value") {
  std::mt19937_64 rng(3);
  const Dims dims{2, 1, 2, 3};
  const StepInputs in = random_inputs(dims, rng);
  auto laws = relu_laws(dims, 0.0, rng);
  std::vector<Matrix> z{laws[0].noiseless(), laws[1].noiseless()};
  CHECK(assemble_rfn_moments(laws, in, dims).max_abs_diff(assemble_deterministic_moments(z, in, dims)) < 1e-12);
  laws[0].pre.resize(0, 0);
  CHECK_THROWS_WITH_AS(assemble_rfn_moments(laws, in, dims), doctest::Contains("missing cached pre-activation"),
                       std::invalid_argument);
}

TEST_CASE("hard sigmoid laws have no closed form") {
  std::mt19937_64 rng(4);
  const Dims dims{1, 1, 1, 2};
  const StepInputs in = random_inputs(dims, rng);
  auto laws = relu_laws(dims, 0.3, rng);
  laws[0].act.kind = ActivationKind::kHardSigmoid;
  CHECK_THROWS(assemble_rfn_moments(laws, in, dims));
}

TEST_CASE("Monte-Carlo assembly") {
  std::mt19937_64 rng(5);
  const Dims dims{2, 1, 2, 3};
  const StepInputs in = random_inputs(dims, rng);

  SUBCASE("deterministic laws are exact for any sample count") {
    auto laws = relu_laws(dims, 0.0, rng);
    for (auto& l : laws) l.act.kind = ActivationKind::kIdentity;
    std::vector<Matrix> z{laws[0].pre, laws[1].pre};
    const auto exact = assemble_deterministic_moments(z, in, dims).flatten();
    for (std::size_t n : {1u, 7u, 100u}) CHECK(assemble_mc_moments(laws, in, dims, n, 11, 0).flatten() == exact);
  }
  SUBCASE("same seed is bit-identical, other step differs") {
    auto laws = relu_laws(dims, 0.4, rng);
    for (auto& l : laws) l.act.kind = ActivationKind::kHardSigmoid;
    const auto a = assemble_mc_moments(laws, in, dims, 50, 8, 3).flatten();
    CHECK(a == assemble_mc_moments(laws, in, dims, 50, 8, 3).flatten());
    CHECK(a != assemble_mc_moments(laws, in, dims, 50, 8, 4).flatten());
  }
  SUBCASE("closed form within 4 standard errors") {
    const auto laws = relu_laws(dims, 0.6, rng);
    MomentErrors se;
    const auto mc = assemble_mc_moments(laws, in, dims, 20000, 21, 0, &se).flatten();
    const auto cf = assemble_rfn_moments(laws, in, dims).flatten();
    const auto err = se.flatten();
    REQUIRE(mc.size() == cf.size());
    int bad = 0;
    for (std::size_t k = 0; k < mc.size(); ++k) {
      if (std::abs(mc[k] - cf[k]) > 4.0 * err[k] + 1e-12) ++bad;
    }
    CHECK(bad == 0);
  }
  SUBCASE("variance falls as one over the sample count") {
    const auto laws = relu_laws(dims, 0.6, rng);
    std::vector<double> lx, ly;
    for (std::size_t n : {10u, 40u, 160u}) {
      std::vector<double> vals;
      for (std::uint64_t rep = 0; rep < 200; ++rep) {
        vals.push_back(assemble_mc_moments(laws, in, dims, n, 1000 + rep, 0).A(0, 0));
      }
      double mean = 0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double var = 0;
      for (double v : vals) var += (v - mean) * (v - mean);
      var /= static_cast<double>(vals.size() - 1);
      lx.push_back(std::log(static_cast<double>(n)));
      ly.push_back(std::log(var));
    }
    const double mx = (lx[0] + lx[1] + lx[2]) / 3, my = (ly[0] + ly[1] + ly[2]) / 3;
    double num = 0, den = 0;
    for (int k = 0; k < 3; ++k) {
      num += (lx[k] - mx) * (ly[k] - my);
      den += (lx[k] - mx) * (lx[k] - mx);
    }
    CHECK(num / den == doctest::Approx(-1.0).epsilon(0.25));
  }
}
