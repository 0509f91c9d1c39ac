#include "nfsr/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <tuple>

#include "nfsr/error.hpp"
#include "nfsr/fft.hpp"
#include "nfsr/unet.hpp"

namespace nfsr {

namespace {

ChannelMap like(const ChannelMap& low, std::size_t target) {
  ChannelMap out;
  out.kind = low.kind;
  out.denorm = low.denorm;
  out.values = Array2D<float>(target, target);
  return out;
}

void require_square(const ChannelMap& low, std::size_t min_size, const char* who) {
  if (low.rows() != low.cols()) throw ConfigError(std::string(who) + ": square maps only");
  if (low.rows() < min_size)
    throw ConfigError(std::string(who) + ": needs at least " + std::to_string(min_size) +
                      " samples per axis");
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

// ---------------------------------------------------------------- bicubic

double keys(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

// Row of samples with linear continuation past both ends.
struct Extended {
  const double* p;
  long n;
  double operator[](long k) const {
    if (k < 0) return p[0] + static_cast<double>(k) * (p[1] - p[0]);
    if (k >= n) return p[n - 1] + static_cast<double>(k - n + 1) * (p[n - 1] - p[n - 2]);
    return p[k];
  }
};

void cubic_line(const double* in, long n, int f, double* out, std::size_t target) {
  const Extended e{in, n};
  for (std::size_t t = 0; t < target; ++t) {
    const double u = static_cast<double>(t) / f;
    const long i = static_cast<long>(std::floor(u));
    const double fr = u - static_cast<double>(i);
    double acc = 0.0;
    for (long k = -1; k <= 2; ++k) acc += e[i + k] * keys(fr - static_cast<double>(k));
    out[t] = acc;
  }
}

}  // namespace

ChannelMap bicubic_upsample(const ChannelMap& low, std::size_t target) {
  require_square(low, 2, "bicubic_upsample");
  const int f = infer_factor(low.rows(), target);
  const long n = static_cast<long>(low.rows());
  // Rows first, then columns.
  Array2D<double> tmp(low.rows(), target);
  std::vector<double> line(static_cast<std::size_t>(n)), res(target);
  for (long r = 0; r < n; ++r) {
    for (long c = 0; c < n; ++c) line[c] = low.values(r, c);
    cubic_line(line.data(), n, f, &tmp(r, 0), target);
  }
  ChannelMap out = like(low, target);
  for (std::size_t c = 0; c < target; ++c) {
    for (long r = 0; r < n; ++r) line[r] = tmp(r, c);
    cubic_line(line.data(), n, f, res.data(), target);
    for (std::size_t r = 0; r < target; ++r) out.values(r, c) = clamp01(res[r]);
  }
  return out;
}

// ---------------------------------------------------------------- kriging

std::string to_string(VariogramKind k) {
  switch (k) {
    case VariogramKind::Exponential: return "exponential";
    case VariogramKind::Gaussian: return "gaussian";
    case VariogramKind::Spherical: return "spherical";
  }
  return "?";
}

void VariogramModel::validate() const {
  if (!(nugget >= 0.0)) throw ConfigError("variogram nugget must be >= 0");
  if (!(sill > nugget)) throw ConfigError("variogram sill must exceed the nugget");
  if (!(range > 0.0)) throw ConfigError("variogram range must be positive");
}

namespace {

double shape_fn(VariogramKind kind, double r) {
  switch (kind) {
    case VariogramKind::Exponential: return 1.0 - std::exp(-3.0 * r);
    case VariogramKind::Gaussian: return 1.0 - std::exp(-3.0 * r * r);
    case VariogramKind::Spherical: return r < 1.0 ? 1.5 * r - 0.5 * r * r * r : 1.0;
  }
  return 0.0;
}

}  // namespace

double VariogramModel::gamma(double h) const {
  if (h <= 0.0) return 0.0;
  return nugget + (sill - nugget) * shape_fn(kind, h / range);
}

VariogramModel fit_variogram(const ChannelMap& low, int factor) {
  require_square(low, 2, "fit_variogram");
  const std::size_t n = low.rows();
  const double extent = static_cast<double>(factor) * static_cast<double>(n - 1);
  const double max_lag = extent / 2.0;
  const auto n_bins = static_cast<std::size_t>(std::ceil(max_lag / factor));
  std::vector<double> sum(n_bins, 0.0), lag_sum(n_bins, 0.0), count(n_bins, 0.0);

  // Pairs (a, b) with b after a in row-major order.
  const std::size_t total = n * n;
  const auto reach = static_cast<std::size_t>(std::ceil(max_lag / factor));
  for (std::size_t a = 0; a < total; ++a) {
    const long ar = static_cast<long>(a / n), ac = static_cast<long>(a % n);
    for (long br = ar; br <= std::min<long>(ar + static_cast<long>(reach), static_cast<long>(n) - 1); ++br)
      for (long bc = std::max<long>(0, ac - static_cast<long>(reach));
           bc <= std::min<long>(ac + static_cast<long>(reach), static_cast<long>(n) - 1); ++bc) {
        if (br == ar && bc <= ac) continue;
        const double h = factor * std::hypot(static_cast<double>(br - ar), static_cast<double>(bc - ac));
        if (h > max_lag) continue;
        const auto bin = std::min(n_bins - 1, static_cast<std::size_t>(h / factor - 1e-9));
        const double d = static_cast<double>(low.values(br, bc)) - low.values(ar, ac);
        sum[bin] += 0.5 * d * d;
        lag_sum[bin] += h;
        count[bin] += 1.0;
      }
  }
  std::vector<double> lag, gam, w;
  for (std::size_t b = 0; b < n_bins; ++b)
    if (count[b] > 0) {
      lag.push_back(lag_sum[b] / count[b]);
      gam.push_back(sum[b] / count[b]);
      w.push_back(count[b]);
    }

  double mean = 0.0, var = 0.0;
  for (float v : low.values) mean += v;
  mean /= static_cast<double>(total);
  for (float v : low.values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(total);
  const VariogramModel fallback{VariogramKind::Exponential, 0.0, var > 1e-12 ? var : 1.0, extent / 3.0};
  if (var <= 1e-12 || lag.size() < 2) return fallback;

  VariogramModel best = fallback;
  double best_sse = std::numeric_limits<double>::infinity();
  constexpr int kRanges = 40;
  for (VariogramKind kind :
       {VariogramKind::Exponential, VariogramKind::Gaussian, VariogramKind::Spherical}) {
    for (int ri = 0; ri < kRanges; ++ri) {
      const double range = factor * std::pow(3.0 * extent / factor, ri / (kRanges - 1.0));
      // Weighted least squares for gamma = nugget + partial * F, both >= 0.
      double sw = 0, sf = 0, sff = 0, sg = 0, sfg = 0;
      for (std::size_t b = 0; b < lag.size(); ++b) {
        const double fv = shape_fn(kind, lag[b] / range);
        sw += w[b];
        sf += w[b] * fv;
        sff += w[b] * fv * fv;
        sg += w[b] * gam[b];
        sfg += w[b] * fv * gam[b];
      }
      const double det = sw * sff - sf * sf;
      double nug = 0.0, part = 0.0;
      if (std::abs(det) > 1e-300) {
        nug = (sff * sg - sf * sfg) / det;
        part = (sw * sfg - sf * sg) / det;
      }
      if (nug < 0.0 || std::abs(det) <= 1e-300) {
        nug = 0.0;
        part = sff > 0 ? sfg / sff : 0.0;
      }
      if (!(part > 0.0)) continue;
      double sse = 0.0;
      for (std::size_t b = 0; b < lag.size(); ++b) {
        const double r = gam[b] - nug - part * shape_fn(kind, lag[b] / range);
        sse += w[b] * r * r;
      }
      if (sse < best_sse) {
        best_sse = sse;
        best = {kind, nug, nug + part, range};
      }
    }
  }
  return best;
}

std::vector<double> kriging_weights(const std::vector<KrigingPoint>& samples, KrigingPoint target,
                                    const VariogramModel& model) {
  model.validate();
  const auto n = static_cast<Eigen::Index>(samples.size());
  if (n < 3) throw ConfigError("ordinary kriging needs at least 3 samples");
  Eigen::MatrixXd a(n + 1, n + 1);
  Eigen::VectorXd b(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j)
      a(i, j) = model.gamma(std::hypot(samples[i].row - samples[j].row, samples[i].col - samples[j].col));
    a(i, n) = 1.0;
    a(n, i) = 1.0;
    b(i) = model.gamma(std::hypot(samples[i].row - target.row, samples[i].col - target.col));
  }
  a(n, n) = 0.0;
  b(n) = 1.0;

  for (int attempt = 0; attempt < 2; ++attempt) {
    if (attempt == 1) {
      // Jitter: a small measurement-error nugget on the diagonal.
      const double jitter = 1e-6 * model.sill;
      for (Eigen::Index i = 0; i < n; ++i) a(i, i) -= jitter;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd x = lu.solve(b);
    if (!x.allFinite()) continue;
    return {x.data(), x.data() + n};
  }
  throw NumericError("singular ordinary kriging system");
}

ChannelMap kriging_upsample(const ChannelMap& low, std::size_t target, const KrigingOptions& options) {
  require_square(low, 2, "kriging_upsample");
  const int f = infer_factor(low.rows(), target);
  const auto n = static_cast<long>(low.rows());
  if (options.neighbors < 3) throw ConfigError("kriging needs at least 3 neighbours");
  const VariogramModel model = options.model ? *options.model : fit_variogram(low, f);
  model.validate();
  const auto k = static_cast<std::size_t>(std::min<long>(options.neighbors, n * n));
  const long half = static_cast<long>(std::ceil(std::sqrt(static_cast<double>(k)))) / 2 + 2;

  ChannelMap out = like(low, target);
  std::vector<std::tuple<double, long, long>> cand;
  std::vector<KrigingPoint> pts;
  for (std::size_t r = 0; r < target; ++r)
    for (std::size_t c = 0; c < target; ++c) {
      const long ci = static_cast<long>(r) / f, cj = static_cast<long>(c) / f;
      cand.clear();
      for (long i = std::max(0L, ci - half); i <= std::min(n - 1, ci + half); ++i)
        for (long j = std::max(0L, cj - half); j <= std::min(n - 1, cj + half); ++j) {
          const double dr = static_cast<double>(f * i) - static_cast<double>(r);
          const double dc = static_cast<double>(f * j) - static_cast<double>(c);
          cand.emplace_back(dr * dr + dc * dc, i, j);
        }
      const std::size_t take = std::min(k, cand.size());
      std::partial_sort(cand.begin(), cand.begin() + static_cast<long>(take), cand.end());
      pts.clear();
      for (std::size_t q = 0; q < take; ++q)
        pts.push_back({static_cast<double>(f * std::get<1>(cand[q])),
                       static_cast<double>(f * std::get<2>(cand[q]))});
      const auto wts = kriging_weights(pts, {static_cast<double>(r), static_cast<double>(c)}, model);
      double v = 0.0;
      for (std::size_t q = 0; q < take; ++q)
        v += wts[q] * low.values(std::get<1>(cand[q]), std::get<2>(cand[q]));
      out.values(r, c) = clamp01(v);
    }
  return out;
}

// ---------------------------------------------------------------- compressive sensing

void CsConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("CS lambda must be finite and >= 0");
  if (iters < 1) throw ConfigError("CS iteration budget must be >= 1");
  if (!(tol >= 0.0) || !(stage_tol >= 0.0)) throw ConfigError("CS tolerance must be >= 0");
  if (!(continuation_factor > 0.0 && continuation_factor < 1.0))
    throw ConfigError("CS continuation factor must lie in (0, 1)");
}

namespace {

struct Sampling {
  std::size_t target;
  int f;
  std::size_t n;
};

// Residual S x - y on the anchors, scattered back onto the full grid (S^T r).
double residual(const Array2D<double>& x, const ChannelMap& low, const Sampling& s,
                Array2D<double>* scatter) {
  double sq = 0.0;
  if (scatter) scatter->fill(0.0);
  for (std::size_t i = 0; i < s.n; ++i)
    for (std::size_t j = 0; j < s.n; ++j) {
      const double r = x(s.f * i, s.f * j) - low.values(i, j);
      sq += r * r;
      if (scatter) (*scatter)(s.f * i, s.f * j) = r;
    }
  return 0.5 * sq;
}

// Penalty weight of coefficient (k, l): the peak amplitude of its atom relative
// to an interior atom. Rows and columns with index 0 have atoms sqrt(2) smaller,
// which regular sampling otherwise lets aliased high-frequency atoms undercut.
// The DC coefficient carries the map offset and is left unpenalized.
Array2D<double> penalty_weights(std::size_t n) {
  Array2D<double> w(n, n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t l = 0; l < n; ++l)
      w(k, l) = (k == 0 ? M_SQRT1_2 : 1.0) * (l == 0 ? M_SQRT1_2 : 1.0);
  w(0, 0) = 0.0;
  return w;
}

double l1(const Array2D<double>& a, const Array2D<double>& w) {
  double s = 0.0;
  for (std::size_t q = 0; q < a.size(); ++q) s += w.storage()[q] * std::abs(a.storage()[q]);
  return s;
}

}  // namespace

CsResult cs_reconstruct(const ChannelMap& low, std::size_t target, const CsConfig& config) {
  require_square(low, 2, "cs_reconstruct");
  config.validate();
  const Sampling s{target, infer_factor(low.rows(), target), low.rows()};

  const Array2D<double> w = penalty_weights(target);
  Array2D<double> alpha(target, target), grad_x(target, target);
  CsResult res;
  double smooth_cur = residual(alpha, low, s, &grad_x);

  // Continuation: start from a threshold that keeps only the strongest
  // coefficients and relax it geometrically down to config.lambda.
  double lam = config.lambda;
  if (config.continuation) {
    const Array2D<double> g0 = fft::dct2d(grad_x);
    double gmax = 0.0;
    for (std::size_t q = 1; q < g0.size(); ++q)
      gmax = std::max(gmax, std::abs(g0.storage()[q]) / w.storage()[q]);
    lam = std::max(config.lambda, 0.5 * gmax);
  }
  double f_cur = smooth_cur + lam * l1(alpha, w);
  double step = 1.0;

  for (int it = 0; it < config.iters; ++it) {
    const Array2D<double> grad = fft::dct2d(grad_x);
    Array2D<double> next(target, target), scatter(target, target);
    double smooth_next = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60 && !accepted; ++bt) {
      const double t = step * lam;
      for (std::size_t q = 0; q < next.size(); ++q) {
        const double z = alpha.storage()[q] - step * grad.storage()[q];
        const double tq = t * w.storage()[q];
        next.storage()[q] = z > tq ? z - tq : (z < -tq ? z + tq : 0.0);
      }
      smooth_next = residual(fft::idct2d(next), low, s, &scatter);
      double lin = 0.0, quad = 0.0;
      for (std::size_t q = 0; q < next.size(); ++q) {
        const double d = next.storage()[q] - alpha.storage()[q];
        lin += grad.storage()[q] * d;
        quad += d * d;
      }
      if (smooth_next <= smooth_cur + lin + quad / (2.0 * step) + 1e-12 * std::max(1.0, smooth_cur))
        accepted = true;
      else
        step *= 0.5;
    }
    if (!accepted) break;
    const double f_next = smooth_next + lam * l1(next, w);
    const double change = f_cur - f_next;
    alpha = std::move(next);
    grad_x = std::move(scatter);
    smooth_cur = smooth_next;
    res.objective.push_back(f_next);
    res.lambda.push_back(lam);
    res.iterations = it + 1;
    f_cur = f_next;

    const bool final_stage = lam <= config.lambda;
    const double scale = std::abs(f_next) + 1e-300;
    if (final_stage) {
      if (change <= config.tol * scale) {
        res.converged = true;
        break;
      }
    } else if (change <= config.stage_tol * scale) {
      lam = std::max(config.lambda, lam * config.continuation_factor);
      f_cur = smooth_cur + lam * l1(alpha, w);
    }
  }

  const Array2D<double> x = fft::idct2d(alpha);
  res.map = like(low, target);
  for (std::size_t q = 0; q < x.size(); ++q) res.map.values.storage()[q] = clamp01(x.storage()[q]);
  return res;
}

}  // namespace nfsr
