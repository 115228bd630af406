#include "fedmoe/moments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>

#include "fedmoe/rng.hpp"

namespace fedmoe {

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

MomentSet zero_set(const Dims& dims) {
  const auto n = dims.n_agents;
  const auto ny = idx(dims.stacked_y());
  const auto nz = idx(dims.stacked_z());
  MomentSet m;
  m.mean_z.assign(n, Matrix::Zero(idx(dims.d_y), idx(dims.d_z)));
  m.A = Matrix::Zero(nz, nz);
  m.Ahat = Matrix::Zero(nz, nz);
  m.B = Matrix::Zero(nz, ny);
  m.C = Vector::Zero(nz);
  m.D = Matrix::Zero(ny, nz);
  m.D_i.assign(n, Matrix::Zero(nz, nz));
  return m;
}

// Applies fn to matching fields of the given sets.
void zip_fields(std::vector<MomentSet*> sets, const std::function<void(std::vector<Matrix*>&)>& fn) {
  std::vector<Matrix*> f(sets.size());
  const std::size_t n = sets.front()->mean_z.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < sets.size(); ++k) f[k] = &sets[k]->mean_z[i];
    fn(f);
  }
  for (auto member : {&MomentSet::A, &MomentSet::Ahat, &MomentSet::B, &MomentSet::D}) {
    for (std::size_t k = 0; k < sets.size(); ++k) f[k] = &(sets[k]->*member);
    fn(f);
  }
  // C is a vector; view it through a temporary matrix and copy back.
  std::vector<Matrix> c(sets.size());
  for (std::size_t k = 0; k < sets.size(); ++k) {
    c[k] = sets[k]->C;
    f[k] = &c[k];
  }
  fn(f);
  for (std::size_t k = 0; k < sets.size(); ++k) sets[k]->C = c[k].col(0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < sets.size(); ++k) f[k] = &sets[k]->D_i[i];
    fn(f);
  }
}

void check_laws(std::span<const LatentLaw> laws, const Dims& dims) {
  if (laws.size() != dims.n_agents) throw ShapeError("moments: need one latent law per agent");
  for (std::size_t i = 0; i < laws.size(); ++i) {
    const auto& law = laws[i];
    if (law.pre.size() == 0) {
      throw std::invalid_argument("moments: missing cached pre-activation for agent " + std::to_string(i));
    }
    if (law.pre.rows() != idx(dims.d_y) || law.pre.cols() != idx(dims.d_z)) {
      throw ShapeError("moments: pre-activation of agent " + std::to_string(i) + " is not d_y x d_z");
    }
    if (!(law.sigma >= 0.0)) throw std::invalid_argument("moments: sigma must be >= 0");
  }
}

// E[Z_j^T K Z_l] for independent latents; j == l uses the element-wise second
// moment on the diagonal.
Matrix cross_moment(const LatentMoments& a, const LatentMoments& b, const Matrix& k, bool same) {
  Matrix out = a.mean.transpose() * k * b.mean;
  if (same) {
    const Vector k_diag = k.diagonal();
    const Matrix var = a.second - a.mean.cwiseProduct(a.mean);
    out.diagonal() += var.transpose() * k_diag;
  }
  return out;
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

Matrix rect_mean(const RectGaussParams& p) {
  if (!(p.sigma >= 0.0)) throw std::invalid_argument("rect_mean: sigma must be >= 0");
  if (p.sigma == 0.0) return p.a.cwiseMax(0.0);
  const double s = p.sigma;
  const double inv_root_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return p.a.unaryExpr([s, inv_root_2pi](double a) {
    return a * normal_cdf(a / s) + s * inv_root_2pi * std::exp(-(a * a) / (2.0 * s * s));
  });
}

Matrix rect_second_moment(const RectGaussParams& p) {
  if (!(p.sigma >= 0.0)) throw std::invalid_argument("rect_second_moment: sigma must be >= 0");
  if (p.sigma == 0.0) {
    const Matrix r = p.a.cwiseMax(0.0);
    return r.cwiseProduct(r);
  }
  const double s = p.sigma;
  const double inv_root_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return p.a.unaryExpr([s, inv_root_2pi](double a) {
    return (a * a + s * s) * normal_cdf(a / s) + a * s * inv_root_2pi * std::exp(-(a * a) / (2.0 * s * s));
  });
}

double MomentSet::max_abs_diff(const MomentSet& other) const {
  const auto a = flatten();
  const auto b = other.flatten();
  if (a.size() != b.size()) throw ShapeError("MomentSet::max_abs_diff: layouts differ");
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

std::vector<double> MomentSet::flatten() const {
  std::vector<double> out;
  auto push = [&out](const Matrix& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(m(r, c));
    }
  };
  for (const auto& m : mean_z) push(m);
  push(A);
  push(Ahat);
  push(B);
  push(D);
  push(C);
  for (const auto& m : D_i) push(m);
  return out;
}

void validate_step_inputs(const StepInputs& in, const Dims& dims) {
  dims.validate();
  const auto ny = idx(dims.stacked_y());
  if (in.p_next.size() != dims.n_agents || in.s_next.size() != dims.n_agents) {
    throw ShapeError("moments: need one P and one S per agent");
  }
  for (const auto& p : in.p_next) {
    if (p.rows() != ny || p.cols() != ny) throw ShapeError("moments: P_i(t+1) must be N*d_y square");
  }
  for (const auto& s : in.s_next) {
    if (s.size() != ny) throw ShapeError("moments: S_i(t+1) must have length N*d_y");
  }
  if (in.w.size() != idx(dims.n_agents)) throw ShapeError("moments: w must have one entry per agent");
}

MomentSet sample_terms(std::span<const Matrix> z, const StepInputs& in, const Dims& dims) {
  validate_step_inputs(in, dims);
  if (z.size() != dims.n_agents) throw ShapeError("moments: need one latent per agent");
  const auto dy = idx(dims.d_y);
  const auto dz = idx(dims.d_z);
  MomentSet m;
  m.mean_z.assign(z.begin(), z.end());
  const Matrix dzm = block_diag_z(m.mean_z);
  const Matrix w = build_weight_block(in.w, dims);
  const Matrix wz = w.transpose() * dzm;  // d_y x N*d_z
  m.Ahat = wz.transpose() * wz;
  m.D = dzm;
  m.D_i.resize(dims.n_agents);
  m.A.resize(dzm.cols(), dzm.cols());
  m.B.resize(dzm.cols(), dzm.rows());
  m.C.resize(dzm.cols());
  for (std::size_t i = 0; i < dims.n_agents; ++i) {
    const auto ii = idx(i);
    const Matrix pd = in.p_next[i] * dzm;
    m.D_i[i] = dzm.transpose() * pd;
    // Row block i of A, B, C: (e_i Z^i)^T applied to P_i D_Z, P_i and S_i.
    const Matrix zt = z[i].transpose();
    m.A.middleRows(ii * dz, dz) = zt * pd.middleRows(ii * dy, dy);
    m.B.middleRows(ii * dz, dz) = zt * in.p_next[i].middleRows(ii * dy, dy);
    m.C.segment(ii * dz, dz) = zt * in.s_next[i].segment(ii * dy, dy);
  }
  return m;
}

MomentSet assemble_deterministic_moments(std::span<const Matrix> z, const StepInputs& in, const Dims& dims) {
  for (const auto& zi : z) {
    if (zi.rows() != idx(dims.d_y) || zi.cols() != idx(dims.d_z)) throw ShapeError("moments: latent is not d_y x d_z");
  }
  return sample_terms(z, in, dims);
}

MomentSet assemble_from_latent_moments(std::span<const LatentMoments> lm, const StepInputs& in, const Dims& dims) {
  validate_step_inputs(in, dims);
  if (lm.size() != dims.n_agents) throw ShapeError("moments: need one LatentMoments per agent");
  const auto n = dims.n_agents;
  const auto dy = idx(dims.d_y);
  const auto dz = idx(dims.d_z);
  MomentSet m = zero_set(dims);
  for (std::size_t j = 0; j < n; ++j) {
    m.mean_z[j] = lm[j].mean;
    m.D.block(idx(j) * dy, idx(j) * dz, dy, dz) = lm[j].mean;
  }
  const Matrix eye = Matrix::Identity(dy, dy);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t l = 0; l < n; ++l) {
      const Matrix k = in.w(idx(j)) * in.w(idx(l)) * eye;
      m.Ahat.block(idx(j) * dz, idx(l) * dz, dz, dz) = cross_moment(lm[j], lm[l], k, j == l);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix& p = in.p_next[i];
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t l = 0; l < n; ++l) {
        const Matrix k = p.block(idx(j) * dy, idx(l) * dy, dy, dy);
        m.D_i[i].block(idx(j) * dz, idx(l) * dz, dz, dz) = cross_moment(lm[j], lm[l], k, j == l);
      }
    }
    const auto ii = idx(i);
    m.A.middleRows(ii * dz, dz) = m.D_i[i].middleRows(ii * dz, dz);
    m.B.middleRows(ii * dz, dz) = lm[i].mean.transpose() * p.middleRows(ii * dy, dy);
    m.C.segment(ii * dz, dz) = lm[i].mean.transpose() * in.s_next[i].segment(ii * dy, dy);
  }
  return m;
}

MomentSet assemble_rfn_moments(std::span<const LatentLaw> laws, const StepInputs& in, const Dims& dims) {
  check_laws(laws, dims);
  std::vector<LatentMoments> lm(laws.size());
  for (std::size_t i = 0; i < laws.size(); ++i) {
    const auto& law = laws[i];
    if (law.act.kind == ActivationKind::kRelu) {
      const RectGaussParams p{law.pre, law.sigma};
      lm[i] = {rect_mean(p), rect_second_moment(p)};
    } else if (law.sigma == 0.0) {
      const Matrix z = law.noiseless();
      lm[i] = {z, z.cwiseProduct(z)};
    } else {
      throw std::invalid_argument("assemble_rfn_moments: no closed form for agent " + std::to_string(i) +
                                  "'s activation with sigma > 0");
    }
  }
  return assemble_from_latent_moments(lm, in, dims);
}

MomentSet assemble_mc_moments(std::span<const LatentLaw> laws, const StepInputs& in, const Dims& dims,
                              std::size_t n_samples, std::uint64_t seed, std::size_t step,
                              MomentErrors* errors) {
  if (n_samples == 0) throw std::invalid_argument("assemble_mc_moments: n_samples must be >= 1");
  check_laws(laws, dims);
  validate_step_inputs(in, dims);

  // Welford running mean: a constant sequence leaves the mean bit-identical to
  // its first term, so deterministic laws reproduce the exact assembly.
  MomentSet mean;
  MomentSet m2 = zero_set(dims);
  std::vector<Matrix> z(dims.n_agents);
  for (std::size_t k = 0; k < n_samples; ++k) {
    for (std::size_t i = 0; i < dims.n_agents; ++i) {
      CounterRng rng(derive_seed({seed, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(i),
                                  static_cast<std::uint64_t>(k)}));
      z[i] = laws[i].sample(rng);
    }
    MomentSet x = sample_terms(z, in, dims);
    if (k == 0) {
      mean = std::move(x);
      continue;
    }
    const double count = static_cast<double>(k + 1);
    zip_fields({&mean, &m2, &x}, [count](std::vector<Matrix*>& f) {
      Matrix& mu = *f[0];
      Matrix& acc = *f[1];
      const Matrix& v = *f[2];
      const Matrix delta = v - mu;
      mu += delta / count;
      acc += delta.cwiseProduct(v - mu);
    });
  }
  if (errors != nullptr) {
    *errors = m2;
    const double n = static_cast<double>(n_samples);
    zip_fields({errors}, [n](std::vector<Matrix*>& f) {
      Matrix& e = *f[0];
      if (n < 2.0) {
        e.setZero();
      } else {
        e = (e / (n - 1.0) / n).cwiseMax(0.0).cwiseSqrt();
      }
    });
  }
  return mean;
}

}  // namespace fedmoe
