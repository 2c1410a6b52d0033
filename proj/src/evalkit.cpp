#include "topoflow/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace topoflow::eval {

namespace {

void check_plane(std::size_t a, std::size_t b, const LandMask& mask) {
  if (a != b || a != mask.spec().cells()) throw ShapeError("prediction, target and mask sizes differ");
  if (mask.count() == 0) throw DataError("degenerate mask: no cells set");
}

void check_fields(const Field& p, const Field& t, const LandMask& m) {
  if (!(p.spec() == t.spec()) || !(p.spec() == m.spec()) || p.num_channels() != t.num_channels())
    throw ShapeError("prediction, target and mask shapes differ");
}

struct Moments {
  double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  void add(double x, double y) {
    n += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
};

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2) throw DataError("correlation needs at least two masked cells");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double cxy = 0, cxx = 0, cyy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cxy += (x[i] - mx) * (y[i] - my);
    cxx += (x[i] - mx) * (x[i] - mx);
    cyy += (y[i] - my) * (y[i] - my);
  }
  if (cxx <= 0.0 || cyy <= 0.0) throw DataError("correlation undefined: zero variance");
  return std::clamp(cxy / std::sqrt(cxx * cyy), -1.0, 1.0);
}

void gather(std::span<const float> p, std::span<const float> t, const LandMask& m, std::vector<double>& x,
            std::vector<double>& y) {
  const std::size_t cells = m.spec().cells();
  for (std::size_t i = 0; i < p.size(); ++i)
    if (m.mask()[i % cells]) {
      x.push_back(p[i]);
      y.push_back(t[i]);
    }
}

}  // namespace

double rmse(std::span<const float> pred, std::span<const float> target, const LandMask& mask) {
  check_plane(pred.size(), target.size(), mask);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (mask.mask()[i]) {
      const double e = double(pred[i]) - double(target[i]);
      acc += e * e;
    }
  return std::sqrt(acc / static_cast<double>(mask.count()));
}

double mae(std::span<const float> pred, std::span<const float> target, const LandMask& mask) {
  check_plane(pred.size(), target.size(), mask);
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (mask.mask()[i]) acc += std::abs(double(pred[i]) - double(target[i]));
  return acc / static_cast<double>(mask.count());
}

double correlation(std::span<const float> pred, std::span<const float> target, const LandMask& mask) {
  check_plane(pred.size(), target.size(), mask);
  std::vector<double> x, y;
  gather(pred, target, mask, x, y);
  return pearson(x, y);
}

double rmse(const Field& pred, const Field& target, const LandMask& mask) {
  check_fields(pred, target, mask);
  double acc = 0.0;
  for (std::size_t c = 0; c < pred.num_channels(); ++c) {
    const double r = rmse(pred.channel(c), target.channel(c), mask);
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(pred.num_channels()));
}

double mae(const Field& pred, const Field& target, const LandMask& mask) {
  check_fields(pred, target, mask);
  double acc = 0.0;
  for (std::size_t c = 0; c < pred.num_channels(); ++c) acc += mae(pred.channel(c), target.channel(c), mask);
  return acc / static_cast<double>(pred.num_channels());
}

double correlation(const Field& pred, const Field& target, const LandMask& mask) {
  check_fields(pred, target, mask);
  std::vector<double> x, y;
  for (std::size_t c = 0; c < pred.num_channels(); ++c) gather(pred.channel(c), target.channel(c), mask, x, y);
  return pearson(x, y);
}

AttnDiagnostics attn_diagnostics(const std::vector<Matrix>& weights) {
  if (weights.empty()) throw DataError("no attention matrices given");
  AttnDiagnostics d;
  d.histogram.assign(histogram_bins, 0.0);
  double total = 0.0, max_sum = 0.0;
  for (const auto& w : weights) {
    if (w.rows() == 0 || w.rows() != w.cols()) throw ShapeError("attention matrix must be square and non-empty");
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      double s = 0.0, h = 0.0, mx = 0.0;
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        const double a = w(i, j);
        if (!(a >= 0.0) || a > 1.0 + 1e-9) throw DataError("attention weight outside [0, 1] in row " + std::to_string(i));
        s += a;
        mx = std::max(mx, a);
        if (a > 0.0) h -= a * std::log(a);
        const int bin = std::min(histogram_bins - 1, static_cast<int>(a * histogram_bins));
        d.histogram[static_cast<std::size_t>(bin)] += 1.0;
        total += 1.0;
      }
      if (std::abs(s - 1.0) > 1e-6) throw DataError("attention row " + std::to_string(i) + " is not stochastic");
      d.entropy.push_back(h);
      max_sum += mx;
    }
  }
  for (double& b : d.histogram) b /= total;
  const double rows = static_cast<double>(d.entropy.size());
  d.mu = max_sum / rows;
  for (double h : d.entropy) d.mean_entropy += h;
  d.mean_entropy /= rows;
  return d;
}

std::string diagnostics_text(const AttnDiagnostics& d) {
  std::ostringstream os;
  os << std::setprecision(9);
  os << "mu (mean row-max weight) = " << d.mu << '\n';
  os << "mean entropy (nats) = " << d.mean_entropy << '\n';
  os << "# bin_lo, bin_hi, fraction\n";
  for (int b = 0; b < histogram_bins; ++b)
    os << double(b) / histogram_bins << ", " << double(b + 1) / histogram_bins << ", " << d.histogram[b] << '\n';
  os << "# row, entropy\n";
  for (std::size_t i = 0; i < d.entropy.size(); ++i) os << i << ", " << d.entropy[i] << '\n';
  return os.str();
}

double MetricsReport::channel_average(std::size_t c) const {
  double s = 0.0;
  for (std::size_t h = 0; h < horizons.size(); ++h) s += at(c, h).rmse;
  return s / static_cast<double>(horizons.size());
}

double MetricsReport::horizon_average(std::size_t h) const {
  double s = 0.0;
  for (std::size_t c = 0; c < channels.size(); ++c) s += at(c, h).rmse;
  return s / static_cast<double>(channels.size());
}

double MetricsReport::overall() const {
  double s = 0.0;
  for (std::size_t h = 0; h < horizons.size(); ++h) s += horizon_average(h);
  return s / static_cast<double>(horizons.size());
}

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os << "RMSE by channel and forecast horizon (physical units)\n\n";
  os << std::left << std::setw(12) << "channel";
  for (int h : horizons) os << std::right << std::setw(12) << ("+" + std::to_string(h) + "h");
  os << std::setw(12) << "average" << '\n';
  os << std::fixed << std::setprecision(6);
  for (std::size_t c = 0; c < channels.size(); ++c) {
    os << std::left << std::setw(12) << channels[c];
    for (std::size_t h = 0; h < horizons.size(); ++h) os << std::right << std::setw(12) << at(c, h).rmse;
    os << std::setw(12) << channel_average(c) << '\n';
  }
  const bool mixed = channels.size() > 1;
  os << std::left << std::setw(12) << (mixed ? "overall*" : "overall");
  for (std::size_t h = 0; h < horizons.size(); ++h) os << std::right << std::setw(12) << horizon_average(h);
  os << std::setw(12) << overall() << '\n';
  if (mixed) os << "\n* averages across channels mix units and are not physically meaningful.\n";
  return os.str();
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << "channel,horizon,rmse,mae,r,n\n" << std::setprecision(9);
  for (const auto& c : cells) os << c.channel << ',' << c.horizon << ',' << c.rmse << ',' << c.mae << ',' << c.r << ',' << c.n << '\n';
  return os.str();
}

MetricsReport report_from_predictions(const std::vector<std::vector<Field>>& preds, const std::vector<Sample>& samples,
                                      const LandMask& mask) {
  if (samples.empty() || preds.size() != samples.size()) throw DataError("report needs one prediction per sample");
  MetricsReport rep;
  rep.channels = samples.front().targets.front().channels();
  rep.horizons = samples.front().lead_times;
  const std::size_t cells = mask.spec().cells();
  for (std::size_t c = 0; c < rep.channels.size(); ++c)
    for (std::size_t h = 0; h < rep.horizons.size(); ++h) {
      double se = 0.0, ae = 0.0;
      std::vector<double> x, y;
      for (std::size_t s = 0; s < samples.size(); ++s) {
        const Field& t = samples[s].targets.at(h);
        const Field& p = preds[s].at(h);
        check_fields(p, t, mask);
        const auto pc = p.channel(c);
        const auto tc = t.channel(c);
        for (std::size_t i = 0; i < cells; ++i)
          if (mask.mask()[i]) {
            const double e = double(pc[i]) - double(tc[i]);
            se += e * e;
            ae += std::abs(e);
            x.push_back(pc[i]);
            y.push_back(tc[i]);
          }
      }
      Cell cell;
      cell.channel = rep.channels[c];
      cell.horizon = rep.horizons[h];
      cell.n = x.size();
      cell.rmse = std::sqrt(se / double(cell.n));
      cell.mae = ae / double(cell.n);
      try {
        cell.r = pearson(x, y);
      } catch (const DataError&) {
        cell.r = std::numeric_limits<double>::quiet_NaN();
      }
      rep.cells.push_back(cell);
    }
  return rep;
}

MetricsReport report(const std::vector<Sample>& samples, const model::ParamStore& params,
                     const model::ModelConfig& cfg, const NormStats& stats, const LandMask& mask) {
  std::vector<std::vector<Field>> preds;
  preds.reserve(samples.size());
  for (const auto& s : samples) {
    const auto in = model::prepare_input(s.input, stats, cfg);
    const Field& t0 = s.targets.front();
    auto out = model::predict_fields(in, params, cfg, t0.channels(), t0.units());
    for (auto& f : out) f = denormalize(f, stats);
    preds.push_back(std::move(out));
  }
  return report_from_predictions(preds, samples, mask);
}

}  // namespace topoflow::eval
