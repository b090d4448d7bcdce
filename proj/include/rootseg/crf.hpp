#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rootseg/image.hpp"

namespace rootseg {

enum class CrfBackend { exact, truncated };

/// Hyperparameters of the fully-connected binary CRF.
struct CrfParams {
  double w_u = 2.0;           ///< unary weight
  double w_p = 1.0;           ///< pairwise weight
  double theta_p = 1.0;       ///< spatial bandwidth, pixels
  double theta_x = 0.0;       ///< feature bandwidth; <= 0 means "estimate per image"
  int max_iters = 10;
  double tol = 1e-3;          ///< max marginal change for early stop
  CrfBackend backend = CrfBackend::truncated;
  int truncation_radius = 0;  ///< window radius; <= 0 means ceil(4 * theta_p)
  int exact_pixel_cap = 4096; ///< refuse exact O(N^2) work above this pixel count

  int effective_radius() const {
    return truncation_radius > 0 ? truncation_radius : static_cast<int>(std::ceil(4.0 * theta_p));
  }

  void validate() const {
    if (w_u < 0.0 || w_p < 0.0) throw InvalidParams("CrfParams: weights must be >= 0");
    if (theta_p <= 0.0) throw InvalidParams("CrfParams: theta_p must be > 0");
    if (theta_x <= 0.0) throw InvalidParams("CrfParams: theta_x must be > 0 (estimate it first)");
    if (max_iters < 1) throw InvalidParams("CrfParams: max_iters must be >= 1");
    if (effective_radius() < 1) throw InvalidParams("CrfParams: truncation radius must be >= 1");
    if (exact_pixel_cap < 1) throw InvalidParams("CrfParams: exact_pixel_cap must be >= 1");
  }
};

/// Per-pixel probability of the root label under the mean-field distribution.
struct Marginals {
  int width = 0;
  int height = 0;
  std::vector<double> q_fg;
};

/// Two-channel unary cost map.
struct UnaryCosts {
  int width = 0;
  int height = 0;
  std::vector<double> cost_fg;
  std::vector<double> cost_bg;
};

/// Unary potentials from the enhanced image. High line strength favors the
/// root label: cost(root) = w_u * (x_max - x), cost(background) = w_u * x.
/// `invert` swaps the channels, penalizing bright pixels for being root.
inline UnaryCosts unary_costs(const StrengthMap& feat, double w_u, bool invert = false) {
  if (feat.empty()) throw EmptyImage("unary_costs: empty feature map");
  const double x_max = *std::max_element(feat.data.begin(), feat.data.end());
  UnaryCosts u{feat.width, feat.height, {}, {}};
  u.cost_fg.resize(feat.data.size());
  u.cost_bg.resize(feat.data.size());
  for (size_t i = 0; i < feat.data.size(); ++i) {
    const double x = feat.data[i];
    u.cost_fg[i] = w_u * (x_max - x);
    u.cost_bg[i] = w_u * x;
  }
  if (invert) u.cost_fg.swap(u.cost_bg);
  return u;
}

/// Gaussian pairwise kernel over pixel position and feature value. The full
/// pairwise potential is w_p * compatibility(y_i, y_j) * this.
inline double pairwise_weight(int row_i, int col_i, int row_j, int col_j, double x_i, double x_j,
                              double theta_p, double theta_x) {
  const double dr = row_i - row_j;
  const double dc = col_i - col_j;
  const double dx = x_i - x_j;
  return std::exp(-(dr * dr + dc * dc) / (2.0 * theta_p * theta_p) -
                  dx * dx / (2.0 * theta_x * theta_x));
}

/// Potts compatibility: 1 when labels differ, 0 otherwise.
inline int compatibility(bool y_i_root, bool y_j_root) { return y_i_root != y_j_root ? 1 : 0; }

/// Total labeling energy, computed by the direct double loop over unordered
/// pixel pairs. This is the exact oracle; it refuses images above the
/// configured pixel cap.
inline double energy(const BinaryMask& labels, const StrengthMap& feat, const CrfParams& params) {
  if (feat.empty()) throw EmptyImage("energy: empty feature map");
  if (labels.width != feat.width || labels.height != feat.height)
    throw ExtentMismatch("energy: labels and features differ in extent");
  const int n = feat.size();
  if (n > params.exact_pixel_cap)
    throw OracleTooLarge("energy: " + std::to_string(n) + " pixels exceeds cap " +
                         std::to_string(params.exact_pixel_cap));

  const UnaryCosts u = unary_costs(feat, params.w_u);
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += labels.data[i] ? u.cost_fg[i] : u.cost_bg[i];

  double pair_sum = 0.0;
  const int w = feat.width;
  for (int i = 0; i < n; ++i) {
    const int ri = i / w, ci = i % w;
    for (int j = i + 1; j < n; ++j) {
      if (!compatibility(labels.data[i] != 0, labels.data[j] != 0)) continue;
      pair_sum += pairwise_weight(ri, ci, j / w, j % w, feat.data[i], feat.data[j],
                                  params.theta_p, params.theta_x);
    }
  }
  return total + params.w_p * pair_sum;
}

/// Feature bandwidth estimate: median of the absolute feature differences of
/// seeded random pixel pairs (with replacement, i != j). Falls back to 1.0
/// when the median is zero.
inline double estimate_theta_x(const StrengthMap& feat, int n_samples = 10000,
                               std::uint32_t seed = 1) {
  if (feat.size() < 2) throw EmptyImage("estimate_theta_x: need at least 2 pixels");
  if (n_samples < 1) throw InvalidParams("estimate_theta_x: n_samples must be >= 1");
  std::mt19937 rng(seed);
  const auto n = static_cast<std::uint32_t>(feat.size());
  std::vector<double> dist(static_cast<size_t>(n_samples));
  for (double& d : dist) {
    const std::uint32_t i = rng() % n;
    std::uint32_t j;
    do {
      j = rng() % n;
    } while (j == i);
    d = std::abs(feat.data[i] - feat.data[j]);
  }
  auto mid = dist.begin() + n_samples / 2;
  std::nth_element(dist.begin(), mid, dist.end());
  return *mid > 0.0 ? *mid : 1.0;
}

/// Synchronous mean-field updates for the fully-connected binary Potts model.
/// The `exact` backend sums over every pixel pair; the `truncated` backend
/// restricts the pair sum to a square window around each pixel. Kernel rows
/// are cached up front when memory allows; cached and uncached paths
/// accumulate in the same order, so results are identical either way.
class MeanFieldEngine {
 public:
  struct State {
    std::vector<double> q_fg;
    std::vector<double> q_bg;
  };

  MeanFieldEngine(const StrengthMap& feat, UnaryCosts unary, const CrfParams& params)
      : w_(feat.width),
        h_(feat.height),
        n_(feat.size()),
        wp_(params.w_p),
        feat_(feat.data),
        unary_(std::move(unary)) {
    params.validate();
    if (feat.empty()) throw EmptyImage("mean_field: empty feature map");
    if (unary_.width != w_ || unary_.height != h_)
      throw ExtentMismatch("mean_field: unary extent differs from features");
    exact_ = params.backend == CrfBackend::exact;
    if (exact_ && n_ > params.exact_pixel_cap)
      throw OracleTooLarge("mean_field: exact backend on " + std::to_string(n_) +
                           " pixels exceeds cap " + std::to_string(params.exact_pixel_cap));
    inv2tp2_ = 1.0 / (2.0 * params.theta_p * params.theta_p);
    inv2tx2_ = 1.0 / (2.0 * params.theta_x * params.theta_x);
    if (exact_) {
      // Beyond this Chebyshev radius the spatial exponent alone is under
      // -760, where exp() underflows to exactly 0.0, so the windowed loop
      // and the literal all-pairs loop produce identical sums.
      radius_ = static_cast<int>(std::ceil(params.theta_p * 38.99)) + 1;
    } else {
      radius_ = params.effective_radius();
    }
    win_ = 2 * radius_ + 1;
    if (exact_ && static_cast<std::int64_t>(n_) * n_ <= kCacheEntries) {
      kmat_.resize(static_cast<size_t>(n_) * n_);
      for (int i = 0; i < n_; ++i) {
        kmat_[static_cast<size_t>(i) * n_ + i] = 1.0;
        for (int j = i + 1; j < n_; ++j) {
          const double k = kernel(i, j);
          kmat_[static_cast<size_t>(i) * n_ + j] = k;
          kmat_[static_cast<size_t>(j) * n_ + i] = k;
        }
      }
    } else if (!exact_ &&
               static_cast<std::int64_t>(n_) * win_ * win_ <= kCacheEntries) {
      kwin_.resize(static_cast<size_t>(n_) * win_ * win_, 0.0);
      for (int i = 0; i < n_; ++i) {
        const int ri = i / w_, ci = i % w_;
        double* row = &kwin_[static_cast<size_t>(i) * win_ * win_];
        for (int dr = -radius_; dr <= radius_; ++dr) {
          const int rj = ri + dr;
          if (rj < 0 || rj >= h_) continue;
          for (int dc = -radius_; dc <= radius_; ++dc) {
            const int cj = ci + dc;
            if (cj < 0 || cj >= w_) continue;
            row[(dr + radius_) * win_ + (dc + radius_)] = kernel(i, rj * w_ + cj);
          }
        }
      }
    }
  }

  /// Initial marginals: per-pixel softmax of the negated unary costs.
  State init() const {
    State s;
    s.q_fg.resize(n_);
    s.q_bg.resize(n_);
    for (int i = 0; i < n_; ++i) normalize(-unary_.cost_fg[i], -unary_.cost_bg[i], s.q_fg[i], s.q_bg[i]);
    return s;
  }

  /// One synchronous update of every marginal; returns max |dQ|.
  double step(State& s) const {
    std::vector<double> nfg(n_), nbg(n_);
    for (int i = 0; i < n_; ++i) {
      double sfg = 0.0, sbg = 0.0;
      filtered_sums(i, s, sfg, sbg);
      // exclude self-interaction: k(i,i) = 1
      sfg -= s.q_fg[i];
      sbg -= s.q_bg[i];
      // Potts reduces the compatibility sum to the opposite-label marginal
      normalize(-unary_.cost_fg[i] - wp_ * sbg, -unary_.cost_bg[i] - wp_ * sfg, nfg[i], nbg[i]);
    }
    double delta = 0.0;
    for (int i = 0; i < n_; ++i) {
      delta = std::max(delta, std::abs(nfg[i] - s.q_fg[i]));
      delta = std::max(delta, std::abs(nbg[i] - s.q_bg[i]));
    }
    s.q_fg.swap(nfg);
    s.q_bg.swap(nbg);
    return delta;
  }

  Marginals marginals(const State& s) const { return Marginals{w_, h_, s.q_fg}; }

 private:
  static constexpr std::int64_t kCacheEntries = 24'000'000;  // ~192 MB of doubles

  double kernel(int i, int j) const {
    const double dr = i / w_ - j / w_;
    const double dc = i % w_ - j % w_;
    const double dx = feat_[i] - feat_[j];
    return std::exp(-((dr * dr + dc * dc) * inv2tp2_ + dx * dx * inv2tx2_));
  }

  static void normalize(double log_fg, double log_bg, double& q_fg, double& q_bg) {
    const double m = std::max(log_fg, log_bg);
    const double efg = std::exp(log_fg - m);
    const double ebg = std::exp(log_bg - m);
    const double z = efg + ebg;
    q_fg = efg / z;
    q_bg = ebg / z;
  }

  void filtered_sums(int i, const State& s, double& sfg, double& sbg) const {
    if (!kmat_.empty()) {
      const double* row = &kmat_[static_cast<size_t>(i) * n_];
      for (int j = 0; j < n_; ++j) {
        sfg += row[j] * s.q_fg[j];
        sbg += row[j] * s.q_bg[j];
      }
      return;
    }
    const int ri = i / w_, ci = i % w_;
    if (!kwin_.empty()) {
      const double* row = &kwin_[static_cast<size_t>(i) * win_ * win_];
      for (int dr = -radius_; dr <= radius_; ++dr) {
        const int rj = ri + dr;
        if (rj < 0 || rj >= h_) continue;
        for (int dc = -radius_; dc <= radius_; ++dc) {
          const int cj = ci + dc;
          if (cj < 0 || cj >= w_) continue;
          const double k = row[(dr + radius_) * win_ + (dc + radius_)];
          const int j = rj * w_ + cj;
          sfg += k * s.q_fg[j];
          sbg += k * s.q_bg[j];
        }
      }
      return;
    }
    for (int dr = -radius_; dr <= radius_; ++dr) {
      const int rj = ri + dr;
      if (rj < 0 || rj >= h_) continue;
      for (int dc = -radius_; dc <= radius_; ++dc) {
        const int cj = ci + dc;
        if (cj < 0 || cj >= w_) continue;
        const int j = rj * w_ + cj;
        const double k = kernel(i, j);
        sfg += k * s.q_fg[j];
        sbg += k * s.q_bg[j];
      }
    }
  }

  int w_, h_, n_;
  double wp_;
  std::vector<double> feat_;
  UnaryCosts unary_;
  bool exact_ = false;
  int radius_ = 0;
  int win_ = 0;
  double inv2tp2_ = 0.0, inv2tx2_ = 0.0;
  std::vector<double> kmat_;  // exact backend, full kernel matrix
  std::vector<double> kwin_;  // truncated backend, per-pixel window stack
};

struct MeanFieldResult {
  Marginals marginals;
  std::vector<double> q_bg;  ///< complement channel as computed (not 1 - q_fg)
  int iterations = 0;
  bool converged = false;
  double final_delta = 0.0;
};

inline MeanFieldResult mean_field_infer(const StrengthMap& feat, const UnaryCosts& unary,
                                        const CrfParams& params) {
  MeanFieldEngine engine(feat, unary, params);
  MeanFieldEngine::State s = engine.init();
  MeanFieldResult res;
  for (int it = 1; it <= params.max_iters; ++it) {
    const double delta = engine.step(s);
    res.iterations = it;
    res.final_delta = delta;
    if (delta < params.tol) {
      res.converged = true;
      break;
    }
  }
  res.marginals = engine.marginals(s);
  res.q_bg = s.q_bg;
  return res;
}

inline MeanFieldResult mean_field_infer(const StrengthMap& feat, const CrfParams& params) {
  return mean_field_infer(feat, unary_costs(feat, params.w_u), params);
}

/// One additional synchronous update applied to existing marginals; returns
/// the resulting max |dQ|. Used to probe the fixed point after convergence.
inline double mean_field_step(const StrengthMap& feat, const UnaryCosts& unary,
                              const CrfParams& params, Marginals& m, std::vector<double>& q_bg) {
  MeanFieldEngine engine(feat, unary, params);
  MeanFieldEngine::State s{m.q_fg, q_bg};
  const double delta = engine.step(s);
  m.q_fg = s.q_fg;
  q_bg = s.q_bg;
  return delta;
}

/// MAP readout: a pixel is root iff q_fg > 0.5; ties resolve to background.
inline BinaryMask map_labels(const Marginals& m) {
  if (m.q_fg.empty()) throw EmptyImage("map_labels: empty marginals");
  BinaryMask mask(m.width, m.height);
  for (size_t i = 0; i < m.q_fg.size(); ++i) mask.data[i] = m.q_fg[i] > 0.5 ? 1 : 0;
  return mask;
}

}  // namespace rootseg
