#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mfrl/nn.hpp"
#include "mfrl/rng.hpp"

namespace mfrl {

// ---------------------------------------------------------------------------
// Sine-wave regression tasks: y = A sin(x - phase) + eps, eps ~ N(0, 0.1^2),
// x ~ U[-5, 5], A ~ U[0.1, 5.0], phase ~ U[0, pi].

inline constexpr double kSineNoiseStd = 0.1;
inline constexpr double kSineAmplitudeMin = 0.1;
inline constexpr double kSineAmplitudeMax = 5.0;
inline constexpr double kSineXMin = -5.0;
inline constexpr double kSineXMax = 5.0;
inline constexpr int kSineSamplesPerTask = 200;

struct RegressionTask {
  Matrix x;  // n x input_dim
  Vector y;
};

struct SineTask {
  double amplitude = 1.0;
  double phase = 0.0;
  RegressionTask data;
};

double sine_curve(double amplitude, double phase, double x);

// Draws a task with the given (A, phase); x and noise come from rng.
SineTask make_sine_task(double amplitude, double phase, int samples, Rng& rng);

struct SineSplits {
  std::vector<SineTask> train;
  std::vector<SineTask> validation;
  std::vector<SineTask> test;
};

// Draws 3 * count_per_split tasks with distinct (A, phase) pairs.
SineSplits gen_sine_split(std::uint64_t seed, int count_per_split = 500,
                          int samples_per_task = kSineSamplesPerTask);

// ---------------------------------------------------------------------------
// Labeled datasets with class-level meta splits.

enum class Split : std::uint8_t { kTrain = 0, kValidation = 1, kTest = 2 };

struct SplitSpec {
  std::vector<int> train;
  std::vector<int> validation;
  std::vector<int> test;

  std::span<const int> classes(Split s) const;
  // Throws ConfigError when a class id appears in two splits.
  void check_disjoint() const;
};

struct LabeledDataset {
  Matrix features;          // n x p (raw inputs or extracted features)
  std::vector<int> labels;  // global class ids in [0, class_count)
  std::vector<Split> split;
  int class_count = 0;

  std::size_t size() const { return labels.size(); }
  // Class-level split derived from per-sample tags (classes sorted ascending).
  SplitSpec split_spec() const;
};

struct BlobConfig {
  int classes = 100;
  int dim = 32;
  int latent_dim = 8;
  int per_class = 100;
  // Isotropic ambient noise around each class mean.
  double intra_std = 1.0;
  // Within-class jitter of the latent code before the low-rank map.
  double latent_std = 0.0;
  // Scale of the class latent codes.
  double class_spread = 1.0;
  std::uint64_t seed = 0;
};

struct BlobDataset {
  LabeledDataset data;
  SplitSpec split;
};

// Class means are mu_c = A z_c with A a random dim x latent_dim map and
// z_c ~ N(0, class_spread^2 I). Classes are split 60/20/20 into
// train/validation/test. Requires classes >= 10.
BlobDataset gen_blob_classes(const BlobConfig& config);

// Rows belonging to each class id.
std::vector<std::vector<std::size_t>> rows_by_class(const LabeledDataset& data);

// ---------------------------------------------------------------------------
// Episodes

struct Episode {
  int way = 0;
  int shot = 0;
  int query = 0;
  std::vector<std::size_t> support_rows;
  std::vector<int> support_labels;  // episode-local 0..way-1
  std::vector<std::size_t> query_rows;
  std::vector<int> query_labels;
  std::vector<int> class_map;  // episode-local -> global class id
};

// Samples `way` classes without replacement from split_classes, then
// shot + query rows per class without replacement.
Episode sample_episode(const std::vector<std::vector<std::size_t>>& class_rows,
                       std::span<const int> split_classes, int way, int shot, int query, Rng& rng);

struct RegressionEpisode {
  std::vector<std::size_t> support_rows;
  std::vector<std::size_t> query_rows;
};

// shot random support rows out of n; the rest form the query set.
RegressionEpisode sample_regression_episode(std::size_t n, int shot, Rng& rng);

// ---------------------------------------------------------------------------
// Feature dataset file
//
//   "MFRLFEAT" | u32 version=1 | u32 n | u32 p | u32 class_count
//   | n*p f64 row-major | n u32 labels | n u8 split tags
//
// All integers and floats little-endian.

inline constexpr std::uint32_t kFeatureFileVersion = 1;

void write_feature_dataset(const std::filesystem::path& path, const LabeledDataset& data);
LabeledDataset load_feature_dataset(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_feature_dataset(const LabeledDataset& data);
LabeledDataset decode_feature_dataset(std::span<const std::uint8_t> bytes);

}  // namespace mfrl
