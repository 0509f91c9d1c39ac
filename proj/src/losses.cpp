#include "nfsr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "nfsr/error.hpp"

namespace nfsr {

namespace {

constexpr double kPooledFloor = 1e-8;

using Map = Array2D<double>;

void require_same_shape(const Map& a, const Map& b, const char* what) {
  if (!a.same_shape(b))
    throw ConfigError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                      std::to_string(b.cols()));
}

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  const double center = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) g[i] = std::exp(-0.5 * std::pow((i - center) / sigma, 2));
  const double total = std::accumulate(g.begin(), g.end(), 0.0);
  for (double& v : g) v /= total;
  return g;
}

// Separable "valid" correlation with g (x) g.
Map filter_valid(const Map& in, const std::vector<double>& g) {
  const std::size_t w = g.size();
  const std::size_t oc = in.cols() - w + 1, orows = in.rows() - w + 1;
  Map tmp(in.rows(), oc);
  for (std::size_t r = 0; r < in.rows(); ++r)
    for (std::size_t c = 0; c < oc; ++c) {
      double acc = 0.0;
      for (std::size_t b = 0; b < w; ++b) acc += g[b] * in(r, c + b);
      tmp(r, c) = acc;
    }
  Map out(orows, oc);
  for (std::size_t r = 0; r < orows; ++r)
    for (std::size_t a = 0; a < w; ++a) {
      const double ga = g[a];
      for (std::size_t c = 0; c < oc; ++c) out(r, c) += ga * tmp(r + a, c);
    }
  return out;
}

// Adjoint of filter_valid: scatters an output-sized map back onto rows x cols.
Map filter_adjoint(const Map& grad, const std::vector<double>& g, std::size_t rows,
                   std::size_t cols) {
  const std::size_t w = g.size();
  Map tmp(rows, grad.cols());
  for (std::size_t r = 0; r < grad.rows(); ++r)
    for (std::size_t a = 0; a < w; ++a) {
      const double ga = g[a];
      for (std::size_t c = 0; c < grad.cols(); ++c) tmp(r + a, c) += ga * grad(r, c);
    }
  Map out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < grad.cols(); ++c) {
      const double v = tmp(r, c);
      for (std::size_t b = 0; b < w; ++b) out(r, c + b) += g[b] * v;
    }
  return out;
}

Map pool2(const Map& in) {
  Map out(in.rows() / 2, in.cols() / 2);
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c)
      out(r, c) = 0.25 * (in(2 * r, 2 * c) + in(2 * r, 2 * c + 1) + in(2 * r + 1, 2 * c) +
                          in(2 * r + 1, 2 * c + 1));
  return out;
}

void pool2_adjoint_add(const Map& grad, Map& into) {
  for (std::size_t r = 0; r < grad.rows(); ++r)
    for (std::size_t c = 0; c < grad.cols(); ++c) {
      const double v = 0.25 * grad(r, c);
      into(2 * r, 2 * c) += v;
      into(2 * r, 2 * c + 1) += v;
      into(2 * r + 1, 2 * c) += v;
      into(2 * r + 1, 2 * c + 1) += v;
    }
}

Map product(const Map& a, const Map& b) {
  Map out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.storage()[i] = a.storage()[i] * b.storage()[i];
  return out;
}

// Windowed first and second moments of one scale.
struct Moments {
  Map mu_x, mu_y, sxx, syy, sxy;
};

Moments moments(const Map& x, const Map& y, const std::vector<double>& g) {
  Moments m;
  m.mu_x = filter_valid(x, g);
  m.mu_y = filter_valid(y, g);
  m.sxx = filter_valid(product(x, x), g);
  m.syy = filter_valid(product(y, y), g);
  m.sxy = filter_valid(product(x, y), g);
  for (std::size_t i = 0; i < m.mu_x.size(); ++i) {
    const double mx = m.mu_x.storage()[i], my = m.mu_y.storage()[i];
    m.sxx.storage()[i] -= mx * mx;
    m.syy.storage()[i] -= my * my;
    m.sxy.storage()[i] -= mx * my;
  }
  return m;
}

bool fused_cs(const MsSsimConfig& cfg) { return std::abs(cfg.c3 - cfg.c2 / 2.0) <= 1e-15; }

// Per-pixel luminance, contrast*structure and their partial derivatives with
// respect to mu_y (direct), syy and sxy.
struct PixelTerms {
  double l, c, s, cs;
  double dl_dmuy;
  double dcs_dsyy, dcs_dsxy;
};

PixelTerms pixel_terms(double mx, double my, double sxx, double syy, double sxy,
                       const MsSsimConfig& cfg) {
  PixelTerms t{};
  const double la = 2.0 * mx * my + cfg.c1, lb = mx * mx + my * my + cfg.c1;
  t.l = la / lb;
  t.dl_dmuy = 2.0 * mx / lb - la * 2.0 * my / (lb * lb);

  const double a = std::sqrt(std::max(sxx, 0.0)), b = std::sqrt(std::max(syy, 0.0));
  const double dc = a * a + b * b + cfg.c2;
  t.c = (2.0 * a * b + cfg.c2) / dc;
  t.s = (sxy + cfg.c3) / (a * b + cfg.c3);
  if (fused_cs(cfg)) {
    const double n = 2.0 * sxy + cfg.c2, d = sxx + syy + cfg.c2;
    t.cs = n / d;
    t.dcs_dsyy = -n / (d * d);
    t.dcs_dsxy = 2.0 / d;
  } else {
    t.cs = t.c * t.s;
    const double ds_den = a * b + cfg.c3;
    t.dcs_dsxy = t.c / ds_den;
    if (b > 1e-12) {
      const double dc_db = (2.0 * a * dc - (2.0 * a * b + cfg.c2) * 2.0 * b) / (dc * dc);
      const double ds_db = -(sxy + cfg.c3) * a / (ds_den * ds_den);
      t.dcs_dsyy = (t.s * dc_db + t.c * ds_db) / (2.0 * b);
    } else {
      t.dcs_dsyy = 0.0;
    }
  }
  return t;
}

void check_scales(std::size_t rows, std::size_t cols, const MsSsimConfig& cfg) {
  const auto w = static_cast<std::size_t>(cfg.window);
  for (int k = 0; k < cfg.scales; ++k) {
    const std::size_t r = rows >> k, c = cols >> k;
    if (r < w || c < w)
      throw ConfigError("MS-SSIM: scale " + std::to_string(k + 1) + " of " +
                        std::to_string(cfg.scales) + " is " + std::to_string(r) + "x" +
                        std::to_string(c) + ", smaller than the " + std::to_string(w) +
                        "-pixel window");
  }
}

}  // namespace

void LossWeights::validate() const {
  for (double v : {alpha_mag, beta_mag, alpha_phase, beta_phase})
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("loss weights must be finite and >= 0");
  if (!(alpha_mag + beta_mag > 0.0)) throw ConfigError("alpha_mag + beta_mag must be positive");
  if (!(alpha_phase + beta_phase > 0.0))
    throw ConfigError("alpha_phase + beta_phase must be positive");
}

void MsSsimConfig::validate() const {
  if (scales < 1) throw ConfigError("MS-SSIM needs at least one scale");
  if (scale_weights.size() != static_cast<std::size_t>(scales))
    throw ConfigError("MS-SSIM: scale_weights length must equal scales");
  double total = 0.0;
  for (double w : scale_weights) {
    if (!(w >= 0.0)) throw ConfigError("MS-SSIM: scale weights must be >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("MS-SSIM: scale weights must sum to 1");
  if (window < 1 || window % 2 == 0) throw ConfigError("MS-SSIM: window must be odd");
  if (!(sigma > 0.0)) throw ConfigError("MS-SSIM: sigma must be positive");
  if (!(c1 > 0.0 && c2 > 0.0 && c3 > 0.0)) throw ConfigError("MS-SSIM: constants must be positive");
}

std::size_t MsSsimConfig::min_size() const {
  return static_cast<std::size_t>(window) << static_cast<unsigned>(scales - 1);
}

LossValue mae(const Map& target, const Map& pred) {
  require_same_shape(target, pred, "mae");
  LossValue out{0.0, Map(pred.rows(), pred.cols())};
  const double inv = 1.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.storage()[i] - target.storage()[i];
    out.value += std::abs(d);
    out.grad.storage()[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
  }
  out.value *= inv;
  return out;
}

SsimComponents ssim_components(const Map& target, const Map& pred, const MsSsimConfig& config) {
  require_same_shape(target, pred, "ssim_components");
  config.validate();
  MsSsimConfig single = config;
  single.scales = 1;
  check_scales(pred.rows(), pred.cols(), single);
  const auto g = gaussian_window(config.window, config.sigma);
  const Moments m = moments(target, pred, g);
  SsimComponents out;
  for (std::size_t i = 0; i < m.mu_x.size(); ++i) {
    const PixelTerms t = pixel_terms(m.mu_x.storage()[i], m.mu_y.storage()[i], m.sxx.storage()[i],
                                     m.syy.storage()[i], m.sxy.storage()[i], config);
    out.l += t.l;
    out.c += t.c;
    out.s += t.s;
  }
  const double n = static_cast<double>(m.mu_x.size());
  out.l /= n;
  out.c /= n;
  out.s /= n;
  return out;
}

LossValue ms_ssim(const Map& target, const Map& pred, const MsSsimConfig& config) {
  require_same_shape(target, pred, "ms_ssim");
  config.validate();
  check_scales(pred.rows(), pred.cols(), config);
  const auto g = gaussian_window(config.window, config.sigma);
  const int m_scales = config.scales;

  std::vector<Map> xs{target}, ys{pred};
  for (int k = 1; k < m_scales; ++k) {
    xs.push_back(pool2(xs.back()));
    ys.push_back(pool2(ys.back()));
  }

  std::vector<Moments> mom(m_scales);
  std::vector<std::vector<PixelTerms>> terms(m_scales);
  std::vector<double> pooled(m_scales);
  std::vector<bool> clamped(m_scales);
  double value = 1.0;
  for (int k = 0; k < m_scales; ++k) {
    mom[k] = moments(xs[k], ys[k], g);
    const bool coarsest = k == m_scales - 1;
    auto& tk = terms[k];
    tk.resize(mom[k].mu_x.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < tk.size(); ++i) {
      tk[i] = pixel_terms(mom[k].mu_x.storage()[i], mom[k].mu_y.storage()[i],
                          mom[k].sxx.storage()[i], mom[k].syy.storage()[i],
                          mom[k].sxy.storage()[i], config);
      acc += coarsest ? tk[i].l * tk[i].cs : tk[i].cs;
    }
    const double p = acc / static_cast<double>(tk.size());
    clamped[k] = !(p > kPooledFloor);
    pooled[k] = clamped[k] ? kPooledFloor : p;
    value *= std::pow(pooled[k], config.scale_weights[k]);
  }

  // Backward: per-scale local gradient, then accumulate coarse-to-fine through pooling.
  std::vector<Map> gy(m_scales);
  for (int k = 0; k < m_scales; ++k) {
    const Moments& mk = mom[k];
    const auto& tk = terms[k];
    const bool coarsest = k == m_scales - 1;
    const double coef =
        clamped[k] ? 0.0 : value * config.scale_weights[k] / pooled[k] / static_cast<double>(tk.size());
    Map g_mu(mk.mu_x.rows(), mk.mu_x.cols()), g_yy = g_mu, g_xy = g_mu;
    for (std::size_t i = 0; i < tk.size(); ++i) {
      const PixelTerms& t = tk[i];
      double d_muy = 0.0, d_syy = t.dcs_dsyy, d_sxy = t.dcs_dsxy;
      if (coarsest) {
        d_muy = t.dl_dmuy * t.cs;
        d_syy *= t.l;
        d_sxy *= t.l;
      }
      const double mx = mk.mu_x.storage()[i], my = mk.mu_y.storage()[i];
      g_mu.storage()[i] = coef * (d_muy - mx * d_sxy - 2.0 * my * d_syy);
      g_yy.storage()[i] = coef * d_syy;
      g_xy.storage()[i] = coef * d_sxy;
    }
    const std::size_t r = ys[k].rows(), c = ys[k].cols();
    Map a_mu = filter_adjoint(g_mu, g, r, c);
    const Map a_yy = filter_adjoint(g_yy, g, r, c);
    const Map a_xy = filter_adjoint(g_xy, g, r, c);
    for (std::size_t i = 0; i < a_mu.size(); ++i)
      a_mu.storage()[i] += 2.0 * ys[k].storage()[i] * a_yy.storage()[i] +
                           xs[k].storage()[i] * a_xy.storage()[i];
    gy[k] = std::move(a_mu);
  }
  for (int k = m_scales - 1; k > 0; --k) pool2_adjoint_add(gy[k], gy[k - 1]);
  return {value, std::move(gy[0])};
}

LossValue ms_ssim_loss(const Map& target, const Map& pred, const MsSsimConfig& config) {
  LossValue v = ms_ssim(target, pred, config);
  v.value = 1.0 - v.value;
  for (double& gv : v.grad) gv = -gv;
  return v;
}

LossValue periodic_phase_loss(const Map& target, const Map& pred, PhaseLossVariant variant) {
  require_same_shape(target, pred, "periodic_phase_loss");
  for (const Map* m : {&target, &pred})
    for (double v : *m)
      if (!(v >= 0.0 && v <= 1.0)) throw DomainError("periodic_phase_loss: value outside [0, 1]");
  LossValue out{0.0, Map(pred.rows(), pred.cols())};
  const double inv = 1.0 / static_cast<double>(pred.size());
  auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = target.storage()[i] - pred.storage()[i];
    const double near = std::abs(d);
    // Second branch and its derivative with respect to the prediction.
    double far, dfar;
    if (variant == PhaseLossVariant::Symmetric) {
      far = 1.0 - near;
      dfar = sign(d);
    } else {
      far = std::abs(d - 1.0);
      dfar = -sign(d - 1.0);
    }
    if (near < far) {
      out.value += near;
      out.grad.storage()[i] = -sign(d) * inv;
    } else if (far < near) {
      out.value += far;
      out.grad.storage()[i] = dfar * inv;
    } else {
      out.value += near;
    }
  }
  out.value *= inv;
  return out;
}

namespace {

LossValue blend(double wa, LossValue a, double wb, const LossValue& b) {
  a.value = wa * a.value + wb * b.value;
  for (std::size_t i = 0; i < a.grad.size(); ++i)
    a.grad.storage()[i] = wa * a.grad.storage()[i] + wb * b.grad.storage()[i];
  return a;
}

}  // namespace

LossValue composite_mag(const Map& target, const Map& pred, const LossWeights& weights,
                        const MsSsimConfig& config) {
  weights.validate();
  return blend(weights.alpha_mag, mae(target, pred), weights.beta_mag,
               ms_ssim_loss(target, pred, config));
}

LossValue composite_phase(const Map& target, const Map& pred, const LossWeights& weights,
                          const MsSsimConfig& config, PhaseLossVariant variant) {
  weights.validate();
  return blend(weights.alpha_phase, periodic_phase_loss(target, pred, variant), weights.beta_phase,
               ms_ssim_loss(target, pred, config));
}

LossValue channel_loss(ChannelKind kind, const Map& target, const Map& pred,
                       const LossWeights& weights, const MsSsimConfig& config,
                       PhaseLossVariant variant) {
  return kind == ChannelKind::Magnitude ? composite_mag(target, pred, weights, config)
                                        : composite_phase(target, pred, weights, config, variant);
}

}  // namespace nfsr
