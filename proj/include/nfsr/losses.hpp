#pragma once

// Training losses on normalized maps. Every function takes (target, prediction)
// and returns the scalar loss with its gradient with respect to the prediction.

#include <vector>

#include "nfsr/array2d.hpp"
#include "nfsr/dataio.hpp"

namespace nfsr {

struct LossWeights {
  double alpha_mag = 1.0;
  double beta_mag = 1.0;
  double alpha_phase = 0.6;
  double beta_phase = 0.4;

  void validate() const;
};

struct MsSsimConfig {
  int scales = 3;
  std::vector<double> scale_weights{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  int window = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
  double c3 = 0.03 * 0.03 / 2.0;

  void validate() const;
  // Smallest map edge that survives `scales - 1` halvings with every scale >= window.
  std::size_t min_size() const;
};

enum class PhaseLossVariant { Symmetric, PaperLiteral };

struct LossValue {
  double value = 0.0;
  Array2D<double> grad;  // d value / d prediction
};

struct SsimComponents {
  double l = 0.0;
  double c = 0.0;
  double s = 0.0;
};

LossValue mae(const Array2D<double>& target, const Array2D<double>& pred);

// Mean-pooled luminance, contrast and structure at a single scale.
SsimComponents ssim_components(const Array2D<double>& target, const Array2D<double>& pred,
                               const MsSsimConfig& config = {});

// MS-SSIM value in (0, 1] with the gradient of the value (not of 1 - value).
// Scales 1..M-1 pool contrast*structure, the coarsest scale pools
// luminance*contrast*structure; each pooled term is raised to its weight.
LossValue ms_ssim(const Array2D<double>& target, const Array2D<double>& pred,
                  const MsSsimConfig& config = {});

// 1 - ms_ssim, with the matching gradient.
LossValue ms_ssim_loss(const Array2D<double>& target, const Array2D<double>& pred,
                       const MsSsimConfig& config = {});

// Symmetric: mean min(|d|, 1 - |d|). PaperLiteral: mean min(|d|, |d - 1|).
// d = target - prediction; both maps must lie in [0, 1].
LossValue periodic_phase_loss(const Array2D<double>& target, const Array2D<double>& pred,
                              PhaseLossVariant variant = PhaseLossVariant::Symmetric);

// alpha_mag * mae + beta_mag * (1 - ms_ssim)
LossValue composite_mag(const Array2D<double>& target, const Array2D<double>& pred,
                        const LossWeights& weights = {}, const MsSsimConfig& config = {});

// alpha_phase * periodic_phase_loss + beta_phase * (1 - ms_ssim)
LossValue composite_phase(const Array2D<double>& target, const Array2D<double>& pred,
                          const LossWeights& weights = {}, const MsSsimConfig& config = {},
                          PhaseLossVariant variant = PhaseLossVariant::Symmetric);

// composite_mag for magnitude maps, composite_phase for phase maps.
LossValue channel_loss(ChannelKind kind, const Array2D<double>& target, const Array2D<double>& pred,
                       const LossWeights& weights = {}, const MsSsimConfig& config = {},
                       PhaseLossVariant variant = PhaseLossVariant::Symmetric);

inline Array2D<double> as_double(const ChannelMap& m) { return cast_array<double>(m.values); }

}  // namespace nfsr
