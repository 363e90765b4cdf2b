#pragma once

// Softmax-table primitives shared by every policy and estimator: normalized
// probabilities, log-probability gradients, entropy, and Gumbel-Softmax
// relaxed sampling. Everything here works on a single logit row.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace mcg {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Uniform draw in the open interval (0, 1); never returns an endpoint.
template <typename Rng>
double open_unit(Rng& rng) {
  const std::uint64_t bits = static_cast<std::uint64_t>(rng()) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

template <typename Rng>
double gumbel(Rng& rng) {
  return -std::log(-std::log(open_unit(rng)));
}

template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> p = logits.derived();
  p = (p.array() - p.maxCoeff()).exp().matrix();
  p /= p.sum();
  return p;
}

template <typename Derived>
Vector<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> row = logits.derived();
  const Scalar max = row.maxCoeff();
  const Scalar lse = max + std::log((row.array() - max).exp().sum());
  return (row.array() - lse).matrix();
}

// d log softmax(logits)[chosen] / d logits = onehot(chosen) - softmax(logits).
template <typename Derived>
Vector<typename Derived::Scalar> log_prob_gradient(const Eigen::MatrixBase<Derived>& logits,
                                                   Eigen::Index chosen) {
  Vector<typename Derived::Scalar> g = -softmax(logits);
  g[chosen] += 1;
  return g;
}

template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> p = softmax(logits);
  const Vector<Scalar> logp = log_softmax(logits);
  return -(p.array() * logp.array()).sum();
}

// dH/dlogits_k = -p_k (log p_k + H).
template <typename Derived>
Vector<typename Derived::Scalar> entropy_gradient(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> p = softmax(logits);
  const Vector<Scalar> logp = log_softmax(logits);
  const Scalar h = -(p.array() * logp.array()).sum();
  return (-p.array() * (logp.array() + h)).matrix();
}

// Jacobian of y = softmax(z / tau) with respect to z, given y:
// (diag(y) - y y^T) / tau. Symmetric.
template <typename Derived>
Matrix<typename Derived::Scalar> tempered_softmax_jacobian(const Eigen::MatrixBase<Derived>& soft,
                                                           typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> y = soft.derived();
  Matrix<Scalar> j = -y * y.transpose();
  j.diagonal() += y;
  return j / tau;
}

/// A Gumbel-perturbed categorical draw. `hard` drives the dynamics; `soft`
/// carries the pathwise derivative used by straight-through gradients.
struct RelaxedSample {
  Eigen::Index hard = 0;
  Vector<double> soft;
  Vector<double> noise;
  double temperature = 1.0;
};

// Rebuilds the relaxed sample from recorded noise; deterministic.
template <typename Derived, typename NoiseDerived>
RelaxedSample relaxed_from_noise(const Eigen::MatrixBase<Derived>& logits,
                                 const Eigen::MatrixBase<NoiseDerived>& noise, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (noise.size() != logits.size()) throw std::invalid_argument("noise arity mismatch");
  RelaxedSample s;
  s.noise = noise.derived().template cast<double>();
  s.temperature = temperature;
  const Vector<double> perturbed =
      Vector<double>(logits.derived().template cast<double>()) + s.noise;
  perturbed.maxCoeff(&s.hard);
  s.soft = softmax(Vector<double>(perturbed / temperature));
  return s;
}

template <typename Derived, typename Rng>
RelaxedSample sample_categorical_relaxed(const Eigen::MatrixBase<Derived>& logits,
                                         double temperature, Rng& rng) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (!logits.allFinite()) throw std::invalid_argument("logits must be finite");
  Vector<double> noise(logits.size());
  for (Eigen::Index k = 0; k < noise.size(); ++k) noise[k] = gumbel(rng);
  return relaxed_from_noise(logits, noise, temperature);
}

// Hard Gumbel-max draw. When `noise` is given it receives one draw per logit.
template <typename Derived, typename Rng>
Eigen::Index gumbel_argmax(const Eigen::MatrixBase<Derived>& logits, Rng& rng,
                           double* noise = nullptr) {
  Eigen::Index best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < logits.size(); ++k) {
    const double g = gumbel(rng);
    if (noise) noise[k] = g;
    const double v = static_cast<double>(logits(k)) + g;
    if (v > best_value) {
      best_value = v;
      best = k;
    }
  }
  return best;
}

}  // namespace mcg
