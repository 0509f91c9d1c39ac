#pragma once

// Classical reconstruction of a decimated map onto the full grid. Sample (i, j)
// of the low-resolution map sits at fine-grid index (f i, f j); distances are
// measured in fine-grid cells. All outputs are clamped to [0, 1].

#include <optional>
#include <vector>

#include "nfsr/dataio.hpp"

namespace nfsr {

ChannelMap bicubic_upsample(const ChannelMap& low, std::size_t target);

enum class VariogramKind { Exponential, Gaussian, Spherical };

std::string to_string(VariogramKind k);

struct VariogramModel {
  VariogramKind kind = VariogramKind::Exponential;
  double nugget = 0.0;
  double sill = 1.0;
  double range = 10.0;  // practical range, fine-grid cells

  void validate() const;
  // Semivariance at lag h; 0 at h == 0.
  double gamma(double h) const;
};

struct KrigingPoint {
  double row = 0.0;
  double col = 0.0;
};

struct KrigingOptions {
  int neighbors = 16;
  std::optional<VariogramModel> model;  // fitted per map when empty
};

// Least-squares fit of each variogram family to the empirical semivariogram
// of the low-resolution samples; returns the best-fitting family. Constant
// maps get a unit-sill exponential model.
VariogramModel fit_variogram(const ChannelMap& low, int factor);

// Ordinary kriging weights (summing to one) of `samples` for a prediction at
// `target`. A singular system is retried once with a jittered nugget, then
// reported as NumericError.
std::vector<double> kriging_weights(const std::vector<KrigingPoint>& samples, KrigingPoint target,
                                    const VariogramModel& model);

ChannelMap kriging_upsample(const ChannelMap& low, std::size_t target,
                            const KrigingOptions& options = {});

struct CsConfig {
  double lambda = 1e-3;
  int iters = 500;
  double tol = 1e-9;  // relative objective change that counts as converged
  bool continuation = true;
  double continuation_factor = 0.5;
  double stage_tol = 1e-5;  // relative change that ends a continuation stage

  void validate() const;
};

struct CsResult {
  ChannelMap map;
  bool converged = false;
  int iterations = 0;
  std::vector<double> objective;  // after each iteration, at that iteration's lambda
  std::vector<double> lambda;     // threshold in effect for each iteration
};

// ISTA on 0.5 ||S idct(a) - y||^2 + lambda ||a||_1 with an orthonormal 2D DCT
// and backtracking on the step size. With continuation the threshold starts
// high and is halved whenever a stage stalls; the objective is non-increasing
// within each stage.
CsResult cs_reconstruct(const ChannelMap& low, std::size_t target, const CsConfig& config = {});

}  // namespace nfsr
