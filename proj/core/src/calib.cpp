#include "mfrl/calib.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "mfrl/error.hpp"

namespace mfrl {

namespace {

void check_predictions(std::span<const double> confidence, std::span<const std::uint8_t> correct,
                       int bins) {
  if (confidence.empty()) throw ConfigError("calibration: no predictions (N = 0)");
  if (confidence.size() != correct.size()) {
    throw DimensionError("calibration: " + std::to_string(confidence.size()) + " confidences but " +
                         std::to_string(correct.size()) + " correctness flags");
  }
  if (bins < 1) throw ConfigError("calibration: bin count must be >= 1");
}

}  // namespace

int confidence_bin(double confidence, int bins) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw NumericError("calibration: confidence " + std::to_string(confidence) + " outside [0, 1]");
  }
  // Compare against the same edges the report publishes, b / B.
  int b = std::min(bins - 1, static_cast<int>(confidence * bins));
  while (b + 1 < bins && confidence >= static_cast<double>(b + 1) / bins) ++b;
  while (b > 0 && confidence < static_cast<double>(b) / bins) --b;
  return b;
}

CalibrationReport reliability_bins(std::span<const double> confidence,
                                   std::span<const std::uint8_t> correct, int bins) {
  check_predictions(confidence, correct, bins);
  CalibrationReport report;
  report.samples = confidence.size();
  report.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) report.edges[static_cast<std::size_t>(b)] = static_cast<double>(b) / bins;
  report.bins.resize(static_cast<std::size_t>(bins));
  std::vector<double> conf_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> hits(static_cast<std::size_t>(bins), 0.0);
  for (std::size_t i = 0; i < confidence.size(); ++i) {
    const auto b = static_cast<std::size_t>(confidence_bin(confidence[i], bins));
    conf_sum[b] += confidence[i];
    hits[b] += correct[i] ? 1.0 : 0.0;
    ++report.bins[b].count;
  }
  const double n = static_cast<double>(confidence.size());
  for (std::size_t b = 0; b < report.bins.size(); ++b) {
    auto& bin = report.bins[b];
    bin.lo = report.edges[b];
    bin.hi = report.edges[b + 1];
    if (bin.count == 0) continue;
    const double count = static_cast<double>(bin.count);
    bin.confidence = conf_sum[b] / count;
    bin.accuracy = hits[b] / count;
    const double gap = std::fabs(bin.accuracy - bin.confidence);
    report.ece += count / n * gap;
    report.mce = std::max(report.mce, gap);
  }
  return report;
}

double ece(std::span<const double> confidence, std::span<const std::uint8_t> correct, int bins) {
  return reliability_bins(confidence, correct, bins).ece;
}

double mce(std::span<const double> confidence, std::span<const std::uint8_t> correct, int bins) {
  return reliability_bins(confidence, correct, bins).mce;
}

double brier(const Matrix& probs, std::span<const int> labels) {
  if (probs.rows() == 0) throw ConfigError("brier: no predictions (N = 0)");
  if (static_cast<Eigen::Index>(labels.size()) != probs.rows()) {
    throw DimensionError("brier: label count does not match probability rows");
  }
  double total = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const int c = labels[static_cast<std::size_t>(i)];
    if (c < 0 || c >= probs.cols()) throw DimensionError("brier: label out of range");
    double s = probs.row(i).squaredNorm();
    s += 1.0 - 2.0 * probs(i, c);
    total += s;
  }
  return total / static_cast<double>(probs.rows());
}

int argmax(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Eigen::Index best = 0;
  row.maxCoeff(&best);
  return static_cast<int>(best);
}

CalibrationReport calibration_report(const Matrix& probs, std::span<const int> labels, int bins) {
  if (static_cast<Eigen::Index>(labels.size()) != probs.rows()) {
    throw DimensionError("calibration_report: label count does not match probability rows");
  }
  std::vector<double> confidence(labels.size());
  std::vector<std::uint8_t> correct(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = probs.row(static_cast<Eigen::Index>(i));
    const int pred = argmax(row);
    confidence[i] = std::clamp(row(pred), 0.0, 1.0);
    correct[i] = pred == labels[i] ? 1 : 0;
  }
  CalibrationReport report = reliability_bins(confidence, correct, bins);
  report.brier = brier(probs, labels);
  return report;
}

double effective_rank_metric(std::span<const double> normalized_sigma) {
  double metric = 0.0;
  for (double s : normalized_sigma) {
    if (s > 0.0) metric -= s * std::log(s);
  }
  return metric;
}

SpectrumReport spectrum(const Matrix& phi, bool center) {
  if (phi.rows() < 1 || phi.cols() < 1) throw DimensionError("spectrum: empty feature matrix");
  if (!phi.allFinite()) throw NumericError("spectrum: non-finite features");
  Matrix work = phi;
  if (center) work.rowwise() -= work.colwise().mean();

  SpectrumReport report;
  Eigen::BDCSVD<Matrix> svd(work);
  report.sigma = svd.singularValues().cwiseMax(0.0);
  std::sort(report.sigma.data(), report.sigma.data() + report.sigma.size(), std::greater<>());
  const auto k = report.sigma.size();
  report.normalized = Vector::Zero(k);
  report.cumulative_energy = Vector::Zero(k);
  const double top = k > 0 ? report.sigma(0) : 0.0;
  if (!(top > 0.0)) {
    report.degenerate = true;
    return report;
  }
  report.normalized = report.sigma / top;
  report.metric = effective_rank_metric({report.normalized.data(), static_cast<std::size_t>(k)});
  const double energy = report.sigma.squaredNorm();
  double running = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    running += report.sigma(i) * report.sigma(i);
    report.cumulative_energy(i) = running / energy;
  }
  return report;
}

double top_energy_share(const SpectrumReport& report, int k) {
  if (report.degenerate || report.cumulative_energy.size() == 0) return 0.0;
  k = std::clamp(k, 1, static_cast<int>(report.cumulative_energy.size()));
  return report.cumulative_energy(k - 1);
}

AccuracySummary summarize(std::span<const double> values) {
  AccuracySummary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  s.ci95 = 1.96 * s.std / std::sqrt(static_cast<double>(values.size()));
  return s;
}

}  // namespace mfrl
