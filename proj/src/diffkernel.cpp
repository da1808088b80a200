#include "protoseg/diffkernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "protoseg/error.hpp"

namespace protoseg {

GradMode parse_grad_mode(std::string_view name) {
  if (name == "through" || name == "through_prototypes") return GradMode::kThroughPrototypes;
  if (name == "detached" || name == "detached_prototypes") return GradMode::kDetachedPrototypes;
  throw Error(ErrorCode::kPreconditionViolation, "unknown gradient mode '" + std::string(name) + "'");
}

std::string_view to_string(GradMode mode) {
  return mode == GradMode::kThroughPrototypes ? "through_prototypes" : "detached_prototypes";
}

namespace {

using Real = long double;

void check_loss_inputs(Dims p_dims, std::size_t num_classes, const LabelMask& g, const SoftDiceOptions& options) {
  if (p_dims != g.dims()) throw Error(ErrorCode::kDimMismatch, "probability map and label dims differ");
  if (!(options.epsilon > 0.0)) throw Error(ErrorCode::kPreconditionViolation, "epsilon must be positive");
  if (options.positive_class >= num_classes) {
    throw Error(ErrorCode::kPreconditionViolation, "positive class outside the probability map");
  }
}

// The full forward graph, kept for the backward pass.
struct Forward {
  std::size_t pixels = 0;
  std::size_t channels = 0;
  std::size_t classes = 0;
  std::vector<Real> centers;  // classes x channels
  std::vector<std::size_t> counts;
  std::vector<Real> probs;  // pixels x classes
  Real numerator = 0;       // 2 sum p g + eps
  Real denominator = 0;     // sum p + sum g + eps
  Real loss = 0;
};

// With `frozen` set, its prototypes are reused instead of recomputed from f.
Forward run_forward(std::span<const Real> f, std::size_t channels, const LabelMask& init_mask, const LabelMask& g,
                    const SoftDiceOptions& options, const Forward* frozen = nullptr) {
  Forward fw;
  fw.pixels = init_mask.pixels();
  fw.channels = channels;
  fw.classes = init_mask.num_classes();
  const auto labels = init_mask.labels();

  if (frozen != nullptr) {
    fw.centers = frozen->centers;
    fw.counts = frozen->counts;
  } else {
    fw.centers.assign(fw.classes * channels, 0);
    fw.counts.assign(fw.classes, 0);
    for (std::size_t i = 0; i < fw.pixels; ++i) {
      for (std::size_t c = 0; c < channels; ++c) fw.centers[labels[i] * channels + c] += f[i * channels + c];
      ++fw.counts[labels[i]];
    }
    for (std::size_t k = 0; k < fw.classes; ++k) {
      if (fw.counts[k] == 0) {
        throw Error(ErrorCode::kEmptyClass, "no pixel carries label " + std::to_string(k)).with_index(k);
      }
      for (std::size_t c = 0; c < channels; ++c) fw.centers[k * channels + c] /= static_cast<Real>(fw.counts[k]);
    }
  }

  fw.probs.resize(fw.pixels * fw.classes);
  Real sum_p = 0;
  Real sum_pg = 0;
  Real sum_g = 0;
  const auto truth = g.labels();
  for (std::size_t i = 0; i < fw.pixels; ++i) {
    Real* z = fw.probs.data() + i * fw.classes;
    for (std::size_t k = 0; k < fw.classes; ++k) {
      Real dist = 0;
      for (std::size_t c = 0; c < channels; ++c) {
        const Real d = f[i * channels + c] - fw.centers[k * channels + c];
        dist += d * d;
      }
      z[k] = -dist;
    }
    const Real top = *std::max_element(z, z + fw.classes);
    Real total = 0;
    for (std::size_t k = 0; k < fw.classes; ++k) {
      z[k] = std::exp(z[k] - top);
      total += z[k];
    }
    for (std::size_t k = 0; k < fw.classes; ++k) z[k] /= total;

    const Real p = z[options.positive_class];
    const Real t = truth[i] == options.positive_class ? 1 : 0;
    sum_p += p;
    sum_pg += p * t;
    sum_g += t;
  }
  const Real eps = options.epsilon;
  fw.numerator = 2 * sum_pg + eps;
  fw.denominator = sum_p + sum_g + eps;
  fw.loss = 1 - fw.numerator / fw.denominator;
  return fw;
}

std::vector<Real> run_backward(std::span<const Real> f, const Forward& fw, const LabelMask& init_mask,
                               const LabelMask& g, GradMode mode, const SoftDiceOptions& options) {
  const std::size_t C = fw.channels;
  const std::size_t K = fw.classes;
  const auto labels = init_mask.labels();
  const auto truth = g.labels();
  const Real D2 = fw.denominator * fw.denominator;

  std::vector<Real> grad(fw.pixels * C, 0);
  std::vector<Real> center_grad(K * C, 0);
  std::vector<Real> dz(K);
  for (std::size_t i = 0; i < fw.pixels; ++i) {
    const Real* p = fw.probs.data() + i * K;
    const Real t = truth[i] == options.positive_class ? 1 : 0;
    const Real dl_dp = -(2 * t * fw.denominator - fw.numerator) / D2;
    const Real p_pos = p[options.positive_class];
    for (std::size_t k = 0; k < K; ++k) {
      // d p_pos / d z_k = p_pos (delta_k,pos - p_k)
      dz[k] = dl_dp * p_pos * ((k == options.positive_class ? 1 : 0) - p[k]);
    }
    for (std::size_t c = 0; c < C; ++c) {
      Real acc = 0;
      for (std::size_t k = 0; k < K; ++k) {
        // z_k = -sum (f - c_k)^2
        const Real diff = f[i * C + c] - fw.centers[k * C + c];
        acc -= 2 * dz[k] * diff;
        center_grad[k * C + c] += 2 * dz[k] * diff;
      }
      grad[i * C + c] = acc;
    }
  }
  if (mode == GradMode::kThroughPrototypes) {
    // c_k = mean of f over label k, so d c_k / d f_j = [label_j == k] / n_k.
    for (std::size_t i = 0; i < fw.pixels; ++i) {
      const std::size_t k = labels[i];
      const Real inv_n = Real(1) / static_cast<Real>(fw.counts[k]);
      for (std::size_t c = 0; c < C; ++c) grad[i * C + c] += center_grad[k * C + c] * inv_n;
    }
  }
  return grad;
}

std::vector<Real> widen(const FeatureMap& f) {
  const auto v = f.values();
  return {v.begin(), v.end()};
}

void check_graph_inputs(const FeatureMap& f, const LabelMask& init_mask, const LabelMask& g,
                        const SoftDiceOptions& options) {
  if (f.dims() != init_mask.dims()) throw Error(ErrorCode::kDimMismatch, "feature and initial mask dims differ");
  check_loss_inputs(f.dims(), init_mask.num_classes(), g, options);
}

}  // namespace

double soft_dice_loss(const ProbabilityMap& p, const LabelMask& g, std::size_t positive_class, double epsilon) {
  check_loss_inputs(p.dims(), p.num_classes, g, {positive_class, epsilon});
  const auto truth = g.labels();
  Real sum_p = 0;
  Real sum_pg = 0;
  Real sum_g = 0;
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    const Real pi = p.at(i, positive_class);
    const Real t = truth[i] == positive_class ? 1 : 0;
    sum_p += pi;
    sum_pg += pi * t;
    sum_g += t;
  }
  const Real eps = epsilon;
  return static_cast<double>(1 - (2 * sum_pg + eps) / (sum_p + sum_g + eps));
}

double protoseg_loss(const FeatureMap& f, const LabelMask& init_mask, const LabelMask& g,
                     const SoftDiceOptions& options) {
  check_graph_inputs(f, init_mask, g, options);
  const auto wide = widen(f);
  return static_cast<double>(run_forward(wide, f.channels(), init_mask, g, options).loss);
}

LossAndGradient protoseg_loss_and_gradient(const FeatureMap& f, const LabelMask& init_mask, const LabelMask& g,
                                           GradMode mode, const SoftDiceOptions& options) {
  check_graph_inputs(f, init_mask, g, options);
  const auto wide = widen(f);
  const auto fw = run_forward(wide, f.channels(), init_mask, g, options);
  const auto grad = run_backward(wide, fw, init_mask, g, mode, options);
  LossAndGradient out;
  out.loss = static_cast<double>(fw.loss);
  out.gradient = {f.height(), f.width(), f.channels(), std::vector<double>(grad.begin(), grad.end())};
  return out;
}

GradientTensor protoseg_backward(const FeatureMap& f, const LabelMask& init_mask, const LabelMask& g, GradMode mode,
                                 const SoftDiceOptions& options) {
  return protoseg_loss_and_gradient(f, init_mask, g, mode, options).gradient;
}

double finite_diff_check(const FeatureMap& f, const LabelMask& init_mask, const LabelMask& g, GradMode mode,
                         double step, const SoftDiceOptions& options) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw Error(ErrorCode::kPreconditionViolation, "finite-difference step must be positive");
  }
  check_graph_inputs(f, init_mask, g, options);
  auto point = widen(f);
  const std::size_t C = f.channels();
  const auto fw = run_forward(point, C, init_mask, g, options);
  const auto analytic = run_backward(point, fw, init_mask, g, mode, options);

  // Detached mode differentiates with the prototypes frozen at the base point.
  const Forward* frozen = mode == GradMode::kDetachedPrototypes ? &fw : nullptr;
  const auto loss_at = [&](std::span<const Real> x) { return run_forward(x, C, init_mask, g, options, frozen).loss; };

  const Real h = step;
  Real worst = 0;
  for (std::size_t j = 0; j < point.size(); ++j) {
    const Real original = point[j];
    point[j] = original + h;
    const Real up = loss_at(point);
    point[j] = original - h;
    const Real down = loss_at(point);
    point[j] = original;
    const Real numeric = (up - down) / (2 * h);
    const Real scale = std::max({std::fabs(analytic[j]), std::fabs(numeric), Real(1e-12)});
    worst = std::max(worst, std::fabs(analytic[j] - numeric) / scale);
  }
  return static_cast<double>(worst);
}

}  // namespace protoseg
