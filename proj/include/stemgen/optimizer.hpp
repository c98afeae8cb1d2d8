#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace stemgen {

struct AdamWOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay.
template <class Scalar>
struct AdamWState {
  std::vector<Scalar> m;
  std::vector<Scalar> v;
  std::int64_t t = 0;

  void step(std::span<Scalar> params, std::span<const Scalar> grad,
            const AdamWOptions& opt, double lr, const std::vector<std::uint8_t>& decay_mask) {
    if (m.size() != params.size()) {
      m.assign(params.size(), Scalar(0));
      v.assign(params.size(), Scalar(0));
    }
    ++t;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
    const Scalar b1 = static_cast<Scalar>(opt.beta1), b2 = static_cast<Scalar>(opt.beta2);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = b1 * m[i] + (Scalar(1) - b1) * grad[i];
      v[i] = b2 * v[i] + (Scalar(1) - b2) * grad[i] * grad[i];
      const double mhat = static_cast<double>(m[i]) / bc1;
      const double vhat = static_cast<double>(v[i]) / bc2;
      double p = static_cast<double>(params[i]);
      if (decay_mask.empty() || decay_mask[i]) p -= lr * opt.weight_decay * p;
      p -= lr * mhat / (std::sqrt(vhat) + opt.eps);
      params[i] = static_cast<Scalar>(p);
    }
  }
};

/// Linear warmup to `peak` over `warmup` steps, then cosine decay to zero at
/// `total` steps. `step` is 1-based.
inline double warmup_cosine_lr(double peak, std::int64_t step, std::int64_t warmup,
                               std::int64_t total) {
  if (warmup > 0 && step <= warmup) return peak * static_cast<double>(step) / warmup;
  if (total <= warmup) return peak;
  const double progress =
      std::min(1.0, static_cast<double>(step - warmup) / static_cast<double>(total - warmup));
  return peak * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

/// Scales `grad` so its global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
template <class Vec>
double clip_global_norm(Vec& grad, double max_norm) {
  using Scalar = typename Vec::value_type;
  double sq = 0.0;
  for (Scalar g : grad) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const Scalar s = static_cast<Scalar>(max_norm / norm);
    for (Scalar& g : grad) g *= s;
  }
  return norm;
}

}  // namespace stemgen
