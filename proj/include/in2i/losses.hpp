#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "config.hpp"
#include "error.hpp"

namespace in2i {

/// Clamp applied to sigmoid scores before taking logs.
inline constexpr double kScoreEps = 1e-7;

struct LossReport {
  double adv_forward = 0.0;
  double adv_reverse = 0.0;
  double latent_forward = 0.0;
  double latent_reverse = 0.0;
  double cycle_forward = 0.0;
  double cycle_reverse = 0.0;
  double total = 0.0;
};

namespace detail {

inline void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes())
    throw ShapeError("losses", std::string(what) + ": argument shapes differ");
}

inline torch::Tensor clamp_probabilities(const torch::Tensor& p) {
  // NaN fails both comparisons and is rejected as well.
  if (!((p >= 0.0) & (p <= 1.0)).all().item<bool>())
    throw NumericError("losses", "log-mode scores must lie in (0, 1)");
  return p.clamp(kScoreEps, 1.0 - kScoreEps);
}

}  // namespace detail

/// One adversarial term for a single discriminator.
///   log:            mean log D(real) + mean log(1 - D(fake)), D already in (0, 1)
///   least_squares:  mean (D(real) - 1)^2 + mean D(fake)^2, raw scores
inline torch::Tensor adversarial_term(const torch::Tensor& real_scores, const torch::Tensor& fake_scores, GanMode mode) {
  detail::require_same_shape(real_scores, fake_scores, "adversarial");
  if (mode == GanMode::log) {
    const auto r = detail::clamp_probabilities(real_scores);
    const auto f = detail::clamp_probabilities(fake_scores);
    return torch::log(r).mean() + torch::log(1.0 - f).mean();
  }
  return (real_scores - 1.0).pow(2).mean() + fake_scores.pow(2).mean();
}

inline torch::Tensor adversarial_forward(const torch::Tensor& d_t_real, const torch::Tensor& d_t_fake, GanMode mode) {
  return adversarial_term(d_t_real, d_t_fake, mode);
}

/// Sum over the n source discriminators of the per-domain adversarial term.
inline torch::Tensor adversarial_reverse(const std::vector<std::pair<torch::Tensor, torch::Tensor>>& pairs,
                                         GanMode mode) {
  if (pairs.empty()) throw ShapeError("losses", "adversarial_reverse needs at least one score pair");
  auto sum = adversarial_term(pairs.front().first, pairs.front().second, mode);
  for (std::size_t i = 1; i < pairs.size(); ++i) sum = sum + adversarial_term(pairs[i].first, pairs[i].second, mode);
  return sum;
}

inline torch::Tensor mean_abs_difference(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  detail::require_same_shape(a, b, what);
  return (a - b).abs().mean();
}

inline torch::Tensor latent_consistency_forward(const torch::Tensor& z_source, const torch::Tensor& z_cycle) {
  return mean_abs_difference(z_source, z_cycle, "latent_consistency_forward");
}

inline torch::Tensor latent_consistency_reverse(const torch::Tensor& z_target, const torch::Tensor& z_cycle) {
  return mean_abs_difference(z_target, z_cycle, "latent_consistency_reverse");
}

inline torch::Tensor cycle_reverse(const torch::Tensor& target, const torch::Tensor& reconstruction) {
  return mean_abs_difference(target, reconstruction, "cycle_reverse");
}

/// Mean absolute error pooled over the elements of all n modalities.
inline torch::Tensor cycle_forward(const std::vector<torch::Tensor>& sources,
                                   const std::vector<torch::Tensor>& reconstructions) {
  if (sources.empty() || sources.size() != reconstructions.size())
    throw ShapeError("losses", "cycle_forward needs matching non-empty source and reconstruction lists");
  torch::Tensor sum;
  std::int64_t count = 0;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    detail::require_same_shape(sources[i], reconstructions[i], "cycle_forward");
    auto term = (sources[i] - reconstructions[i]).abs().sum();
    sum = i == 0 ? term : sum + term;
    count += sources[i].numel();
  }
  return sum / static_cast<double>(count);
}

/// The six component values of the cumulative objective.
struct LossParts {
  double adv_forward = 0.0;
  double adv_reverse = 0.0;
  double latent_forward = 0.0;
  double latent_reverse = 0.0;
  double cycle_forward = 0.0;
  double cycle_reverse = 0.0;
};

/// total = adv_f + adv_r + lambda1 (cyc_r + cyc_f) + lambda2 (lat_f + lat_r)
inline LossReport total_loss(const LossParts& parts, double lambda1, double lambda2) {
  const std::pair<const char*, double> named[] = {
      {"adv_forward", parts.adv_forward},       {"adv_reverse", parts.adv_reverse},
      {"latent_forward", parts.latent_forward}, {"latent_reverse", parts.latent_reverse},
      {"cycle_forward", parts.cycle_forward},   {"cycle_reverse", parts.cycle_reverse}};
  for (const auto& [name, value] : named)
    if (!std::isfinite(value)) throw NumericError("losses", std::string("non-finite loss term ") + name);
  LossReport r;
  r.adv_forward = parts.adv_forward;
  r.adv_reverse = parts.adv_reverse;
  r.latent_forward = parts.latent_forward;
  r.latent_reverse = parts.latent_reverse;
  r.cycle_forward = parts.cycle_forward;
  r.cycle_reverse = parts.cycle_reverse;
  r.total = parts.adv_forward + parts.adv_reverse + lambda1 * (parts.cycle_reverse + parts.cycle_forward) +
            lambda2 * (parts.latent_forward + parts.latent_reverse);
  return r;
}

// Optimisation targets. Both take raw discriminator outputs; in log mode the
// sigmoid is folded into a numerically stable log-sigmoid.

/// Minimised by the discriminator: pushes real scores toward 1 and fake toward 0.
/// In log mode this is the negated adversarial term.
inline torch::Tensor discriminator_objective(const torch::Tensor& real_raw, const torch::Tensor& fake_raw,
                                             GanMode mode) {
  if (mode == GanMode::log)
    return -(torch::log_sigmoid(real_raw).mean() + torch::log_sigmoid(-fake_raw).mean());
  return (real_raw - 1.0).pow(2).mean() + fake_raw.pow(2).mean();
}

/// Minimised by the generator: pushes fake scores toward 1. Non-saturating
/// form (-log D(fake)) in log mode.
inline torch::Tensor generator_adversarial_objective(const torch::Tensor& fake_raw, GanMode mode) {
  if (mode == GanMode::log) return -torch::log_sigmoid(fake_raw).mean();
  return (fake_raw - 1.0).pow(2).mean();
}

/// Inputs to the single-modality CycleGAN objective.
struct CycleGanInputs {
  torch::Tensor d_t_real, d_t_fake;  // target discriminator on t and on G(s)
  torch::Tensor d_s_real, d_s_fake;  // source discriminator on s and on F(t)
  torch::Tensor s, s_rec;            // s and F(G(s))
  torch::Tensor t, t_rec;            // t and G(F(t))
  std::size_t n_sources = 1;
};

/// Element-loop CycleGAN objective: two adversarial terms plus lambda1 times
/// the two cycle terms. Written without tensor ops so it can serve as an
/// independent check on the multi-modal objective at n = 1.
inline double cyclegan_reference_loss(const CycleGanInputs& in, double lambda1, GanMode mode) {
  if (in.n_sources != 1) throw ShapeError("losses", "the CycleGAN reference objective is defined for n = 1 only");
  auto values = [](const torch::Tensor& t) {
    auto c = t.detach().to(torch::kFloat64).contiguous();
    const double* p = c.data_ptr<double>();
    return std::vector<double>(p, p + c.numel());
  };
  auto clamp = [](double p) { return std::min(std::max(p, kScoreEps), 1.0 - kScoreEps); };
  auto adversarial = [&](const torch::Tensor& real, const torch::Tensor& fake) {
    const auto r = values(real);
    const auto f = values(fake);
    double real_sum = 0.0, fake_sum = 0.0;
    for (double v : r) real_sum += mode == GanMode::log ? std::log(clamp(v)) : (v - 1.0) * (v - 1.0);
    for (double v : f) fake_sum += mode == GanMode::log ? std::log(1.0 - clamp(v)) : v * v;
    return real_sum / static_cast<double>(r.size()) + fake_sum / static_cast<double>(f.size());
  };
  auto l1 = [&](const torch::Tensor& a, const torch::Tensor& b) {
    const auto x = values(a);
    const auto y = values(b);
    if (x.size() != y.size()) throw ShapeError("losses", "cyclegan_reference_loss: cycle shapes differ");
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sum += std::abs(x[i] - y[i]);
    return sum / static_cast<double>(x.size());
  };
  return adversarial(in.d_t_real, in.d_t_fake) + adversarial(in.d_s_real, in.d_s_fake) +
         lambda1 * (l1(in.t_rec, in.t) + l1(in.s_rec, in.s));
}

}  // namespace in2i
