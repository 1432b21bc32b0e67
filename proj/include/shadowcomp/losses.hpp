#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "shadowcomp/error.hpp"
#include "shadowcomp/illumination.hpp"
#include "shadowcomp/raster.hpp"

namespace shadowcomp {

/// Trade-off weights of the generator objective.
struct LossWeights {
  double lambda_s = 10.0;   // shadow mask
  double lambda_i = 10.0;   // image reconstruction
  double lambda_p = 1.0;    // shadow parameters
  double lambda_gd = 0.1;   // adversarial (generator side)

  void validate() const {
    if (lambda_s < 0 || lambda_i < 0 || lambda_p < 0 || lambda_gd < 0) {
      throw InvalidArgument("loss weights must be nonnegative");
    }
  }
};

/// One scalar discriminator output per triplet.
struct TripletScores {
  std::vector<double> values;
};

namespace detail {

template <typename A, typename B>
double mean_squared(std::span<const A> a, std::span<const B> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

inline void require_scores(const TripletScores& s, const char* what) {
  if (s.values.empty()) throw InvalidArgument(std::string(what) + ": empty score set");
}

inline double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace detail

/// Collapse a patch discriminator's score map to one scalar by its spatial mean.
inline double reduce_patch_scores(std::span<const double> patch_map) {
  if (patch_map.empty()) throw InvalidArgument("empty discriminator score map");
  return detail::mean(patch_map);
}

/// Mean squared difference between predicted and ground-truth shadow masks.
inline double mask_loss(const ShadowMatte& pred, const Mask& gt) {
  require_same_shape(pred, gt, "mask_loss");
  return detail::mean_squared(pred.values(), gt.values());
}

/// Sum of squared differences over the six shadow parameters.
inline double param_loss(const ShadowParams& pred, const ShadowParams& gt) {
  double sum = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    sum += (gt.w[k] - pred.w[k]) * (gt.w[k] - pred.w[k]);
    sum += (gt.b[k] - pred.b[k]) * (gt.b[k] - pred.b[k]);
  }
  return sum;
}

/// Mean squared difference over every image element.
inline double image_loss(const Image& pred, const Image& gt) {
  require_same_shape(pred, gt, "image_loss");
  return detail::mean_squared(pred.values(), gt.values());
}

/// d mask_loss / d pred = 2 (pred - gt) / n.
inline ShadowMatte mask_loss_gradient(const ShadowMatte& pred, const Mask& gt) {
  require_same_shape(pred, gt, "mask_loss_gradient");
  ShadowMatte g(pred.height(), pred.width());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) g.values()[i] = scale * (pred.values()[i] - gt.values()[i]);
  return g;
}

inline Image image_loss_gradient(const Image& pred, const Image& gt) {
  require_same_shape(pred, gt, "image_loss_gradient");
  Image g(pred.height(), pred.width());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) g.values()[i] = scale * (pred.values()[i] - gt.values()[i]);
  return g;
}

/// Hinge discriminator loss: E[max(0, 1 + fake)] + E[max(0, 1 - real)].
inline double d_hinge_loss(const TripletScores& fake, const TripletScores& real) {
  detail::require_scores(fake, "d_hinge_loss fake");
  detail::require_scores(real, "d_hinge_loss real");
  double f = 0.0, r = 0.0;
  for (double s : fake.values) f += std::max(0.0, 1.0 + s);
  for (double s : real.values) r += std::max(0.0, 1.0 - s);
  return f / static_cast<double>(fake.values.size()) + r / static_cast<double>(real.values.size());
}

/// Generator-side adversarial loss: -E[fake].
inline double g_adv_loss(const TripletScores& fake) {
  detail::require_scores(fake, "g_adv_loss");
  return -detail::mean(fake.values);
}

struct LossComponents {
  double mask = 0.0;
  double image = 0.0;
  double param = 0.0;
  double adversarial = 0.0;
};

/// The quantity minimised in the generator step of the alternating scheme.
inline double generator_objective(const LossComponents& l, const LossWeights& w = {}) {
  w.validate();
  return w.lambda_s * l.mask + w.lambda_i * l.image + w.lambda_p * l.param + w.lambda_gd * l.adversarial;
}

inline double generator_objective(double l_s, double l_i, double l_p, double l_gd, const LossWeights& w = {}) {
  return generator_objective(LossComponents{l_s, l_i, l_p, l_gd}, w);
}

/// Generator objective plus the discriminator loss, for reporting only. Training
/// minimises the two parts alternately, never this sum.
inline double total_objective(const LossComponents& l, double l_d, const LossWeights& w = {}) {
  return generator_objective(l, w) + l_d;
}

}  // namespace shadowcomp
