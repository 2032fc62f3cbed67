#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mfrl/nn.hpp"

namespace mfrl {

inline constexpr int kDefaultCalibrationBins = 15;

struct CalibrationBin {
  double lo = 0.0;
  double hi = 0.0;
  double confidence = 0.0;  // mean confidence of members (0 when empty)
  double accuracy = 0.0;    // fraction correct (0 when empty)
  std::size_t count = 0;
};

struct CalibrationReport {
  std::vector<double> edges;  // B + 1 values, edges[b] = b / B
  std::vector<CalibrationBin> bins;
  double ece = 0.0;
  double mce = 0.0;
  double brier = 0.0;
  std::size_t samples = 0;
};

// Equal-width bin of a confidence in [0, 1]; 1.0 falls into the top bin.
int confidence_bin(double confidence, int bins);

// sum_b (n_b / N) |acc_b - conf_b| over non-empty bins.
double ece(std::span<const double> confidence, std::span<const std::uint8_t> correct,
           int bins = kDefaultCalibrationBins);

// max over non-empty bins of |acc_b - conf_b|.
double mce(std::span<const double> confidence, std::span<const std::uint8_t> correct,
           int bins = kDefaultCalibrationBins);

// Mean over samples of sum_c (p_c - y_c)^2. probs is N x K.
double brier(const Matrix& probs, std::span<const int> labels);

// Per-bin statistics with ece and mce filled; brier is left at 0.
CalibrationReport reliability_bins(std::span<const double> confidence,
                                   std::span<const std::uint8_t> correct,
                                   int bins = kDefaultCalibrationBins);

// Full report from probability rows: confidence = max probability,
// correct = argmax matches the label.
CalibrationReport calibration_report(const Matrix& probs, std::span<const int> labels,
                                     int bins = kDefaultCalibrationBins);

// Index of the largest entry (first on ties).
int argmax(const Eigen::Ref<const Eigen::RowVectorXd>& row);

// ---------------------------------------------------------------------------

struct SpectrumReport {
  Vector sigma;       // descending, >= 0
  Vector normalized;  // sigma / sigma_max (zeros when degenerate)
  // -sum_i s_i log s_i over the normalized values, with 0 log 0 = 0.
  double metric = 0.0;
  // cumulative_energy[k] = sum_{i<=k} sigma_i^2 / sum_i sigma_i^2.
  Vector cumulative_energy;
  bool degenerate = false;
};

// Singular values of phi (n x p). center subtracts the column means first.
SpectrumReport spectrum(const Matrix& phi, bool center = false);

// Share of spectral energy in the top k singular values.
double top_energy_share(const SpectrumReport& report, int k);

double effective_rank_metric(std::span<const double> normalized_sigma);

// ---------------------------------------------------------------------------

struct AccuracySummary {
  double mean = 0.0;
  double std = 0.0;   // population standard deviation
  double ci95 = 0.0;  // 1.96 * std / sqrt(count)
  std::size_t count = 0;
};

AccuracySummary summarize(std::span<const double> values);

}  // namespace mfrl
