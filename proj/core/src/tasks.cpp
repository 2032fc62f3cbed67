#include "mfrl/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>
#include <utility>

#include "mfrl/byte_io.hpp"
#include "mfrl/error.hpp"

namespace mfrl {

double sine_curve(double amplitude, double phase, double x) {
  return amplitude * std::sin(x - phase);
}

SineTask make_sine_task(double amplitude, double phase, int samples, Rng& rng) {
  SineTask task{amplitude, phase, {Matrix(samples, 1), Vector(samples)}};
  for (int i = 0; i < samples; ++i) {
    const double x = rng.uniform(kSineXMin, kSineXMax);
    task.data.x(i, 0) = x;
    task.data.y(i) = sine_curve(amplitude, phase, x) + kSineNoiseStd * rng.normal();
  }
  return task;
}

SineSplits gen_sine_split(std::uint64_t seed, int count_per_split, int samples_per_task) {
  if (count_per_split < 1 || samples_per_task < 1) {
    throw ConfigError("gen_sine_split: counts must be >= 1");
  }
  Rng rng(derive_seed(seed, 0x51e));
  std::set<std::pair<double, double>> seen;
  SineSplits splits;
  for (auto* bucket : {&splits.train, &splits.validation, &splits.test}) {
    bucket->reserve(static_cast<std::size_t>(count_per_split));
    while (bucket->size() < static_cast<std::size_t>(count_per_split)) {
      const double amplitude = rng.uniform(kSineAmplitudeMin, kSineAmplitudeMax);
      const double phase = rng.uniform(0.0, std::numbers::pi);
      if (!seen.emplace(amplitude, phase).second) continue;
      bucket->push_back(make_sine_task(amplitude, phase, samples_per_task, rng));
    }
  }
  return splits;
}

std::span<const int> SplitSpec::classes(Split s) const {
  switch (s) {
    case Split::kTrain:
      return train;
    case Split::kValidation:
      return validation;
    case Split::kTest:
      return test;
  }
  return {};
}

void SplitSpec::check_disjoint() const {
  std::set<int> seen;
  for (Split s : {Split::kTrain, Split::kValidation, Split::kTest}) {
    for (int c : classes(s)) {
      if (!seen.insert(c).second) {
        throw ConfigError("split spec: class " + std::to_string(c) + " appears in two splits");
      }
    }
  }
}

SplitSpec LabeledDataset::split_spec() const {
  std::vector<std::set<int>> sets(3);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sets[static_cast<std::size_t>(split[i])].insert(labels[i]);
  }
  SplitSpec spec{{sets[0].begin(), sets[0].end()},
                 {sets[1].begin(), sets[1].end()},
                 {sets[2].begin(), sets[2].end()}};
  spec.check_disjoint();
  return spec;
}

BlobDataset gen_blob_classes(const BlobConfig& cfg) {
  if (cfg.classes < 10) {
    throw ConfigError("gen_blob_classes: need at least 10 classes for 5-way splits, got " +
                      std::to_string(cfg.classes));
  }
  if (cfg.dim < 1 || cfg.latent_dim < 1 || cfg.per_class < 1) {
    throw ConfigError("gen_blob_classes: dim, latent_dim and per_class must be >= 1");
  }
  if (cfg.intra_std < 0.0 || cfg.latent_std < 0.0 || cfg.class_spread < 0.0) {
    throw ConfigError("gen_blob_classes: noise scales must be >= 0");
  }
  Rng rng(derive_seed(cfg.seed, 0xb10b));

  Matrix map(cfg.dim, cfg.latent_dim);
  const double map_scale = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  for (Eigen::Index r = 0; r < map.rows(); ++r) {
    for (Eigen::Index c = 0; c < map.cols(); ++c) map(r, c) = map_scale * rng.normal();
  }

  Matrix codes(cfg.classes, cfg.latent_dim);
  for (Eigen::Index r = 0; r < codes.rows(); ++r) {
    for (Eigen::Index c = 0; c < codes.cols(); ++c) codes(r, c) = cfg.class_spread * rng.normal();
  }

  const int train_classes = (cfg.classes * 6) / 10;
  const int val_classes = (cfg.classes * 2) / 10;
  BlobDataset out;
  for (int c = 0; c < cfg.classes; ++c) {
    if (c < train_classes) {
      out.split.train.push_back(c);
    } else if (c < train_classes + val_classes) {
      out.split.validation.push_back(c);
    } else {
      out.split.test.push_back(c);
    }
  }

  auto& data = out.data;
  const std::size_t n = static_cast<std::size_t>(cfg.classes) * static_cast<std::size_t>(cfg.per_class);
  data.class_count = cfg.classes;
  data.features.resize(static_cast<Eigen::Index>(n), cfg.dim);
  data.labels.resize(n);
  data.split.resize(n);
  Vector latent(cfg.latent_dim);
  std::size_t row = 0;
  for (int c = 0; c < cfg.classes; ++c) {
    const Split tag = c < train_classes ? Split::kTrain
                      : c < train_classes + val_classes ? Split::kValidation
                                                        : Split::kTest;
    for (int k = 0; k < cfg.per_class; ++k, ++row) {
      for (int j = 0; j < cfg.latent_dim; ++j) latent(j) = codes(c, j) + cfg.latent_std * rng.normal();
      auto x = data.features.row(static_cast<Eigen::Index>(row));
      x = (map * latent).transpose();
      for (int j = 0; j < cfg.dim; ++j) x(j) += cfg.intra_std * rng.normal();
      data.labels[row] = c;
      data.split[row] = tag;
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> rows_by_class(const LabeledDataset& data) {
  std::vector<std::vector<std::size_t>> rows(static_cast<std::size_t>(data.class_count));
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    const int c = data.labels[i];
    if (c < 0 || c >= data.class_count) {
      throw DimensionError("label " + std::to_string(c) + " at row " + std::to_string(i) +
                           " outside [0, " + std::to_string(data.class_count) + ")");
    }
    rows[static_cast<std::size_t>(c)].push_back(i);
  }
  return rows;
}

Episode sample_episode(const std::vector<std::vector<std::size_t>>& class_rows,
                       std::span<const int> split_classes, int way, int shot, int query, Rng& rng) {
  if (way < 1 || shot < 1 || query < 0) {
    throw ConfigError("sample_episode: way and shot must be >= 1 and query >= 0");
  }
  if (split_classes.size() < static_cast<std::size_t>(way)) {
    throw ConfigError("sample_episode: split holds " + std::to_string(split_classes.size()) +
                      " classes, episode needs " + std::to_string(way));
  }
  std::vector<int> pool(split_classes.begin(), split_classes.end());
  // Partial Fisher-Yates: the first `way` entries become the episode classes.
  for (int i = 0; i < way; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.below(pool.size() - static_cast<std::size_t>(i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }

  Episode ep;
  ep.way = way;
  ep.shot = shot;
  ep.query = query;
  ep.class_map.assign(pool.begin(), pool.begin() + way);
  const auto need = static_cast<std::size_t>(shot + query);
  for (int local = 0; local < way; ++local) {
    const int global = ep.class_map[static_cast<std::size_t>(local)];
    if (global < 0 || static_cast<std::size_t>(global) >= class_rows.size()) {
      throw ConfigError("sample_episode: class " + std::to_string(global) + " has no rows");
    }
    std::vector<std::size_t> rows = class_rows[static_cast<std::size_t>(global)];
    if (rows.size() < need) {
      throw ConfigError("sample_episode: class " + std::to_string(global) + " has " +
                        std::to_string(rows.size()) + " samples, episode needs " +
                        std::to_string(need));
    }
    for (std::size_t i = 0; i < need; ++i) {
      const std::size_t j = i + rng.below(rows.size() - i);
      std::swap(rows[i], rows[j]);
    }
    for (std::size_t i = 0; i < need; ++i) {
      if (i < static_cast<std::size_t>(shot)) {
        ep.support_rows.push_back(rows[i]);
        ep.support_labels.push_back(local);
      } else {
        ep.query_rows.push_back(rows[i]);
        ep.query_labels.push_back(local);
      }
    }
  }
  return ep;
}

RegressionEpisode sample_regression_episode(std::size_t n, int shot, Rng& rng) {
  if (shot < 1 || static_cast<std::size_t>(shot) > n) {
    throw ConfigError("sample_regression_episode: shot " + std::to_string(shot) +
                      " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  for (std::size_t i = 0; i < static_cast<std::size_t>(shot); ++i) {
    std::swap(rows[i], rows[i + rng.below(n - i)]);
  }
  RegressionEpisode ep;
  ep.support_rows.assign(rows.begin(), rows.begin() + shot);
  std::sort(ep.support_rows.begin(), ep.support_rows.end());
  std::vector<bool> in_support(n, false);
  for (auto r : ep.support_rows) in_support[r] = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_support[i]) ep.query_rows.push_back(i);
  }
  return ep;
}

// ---------------------------------------------------------------------------

namespace {
constexpr char kFeatureMagic[8] = {'M', 'F', 'R', 'L', 'F', 'E', 'A', 'T'};
}

std::vector<std::uint8_t> encode_feature_dataset(const LabeledDataset& data) {
  const std::size_t n = data.labels.size();
  if (static_cast<std::size_t>(data.features.rows()) != n || data.split.size() != n) {
    throw DimensionError("feature dataset: features, labels and split tags disagree on n");
  }
  ByteWriter w;
  w.text({kFeatureMagic, sizeof(kFeatureMagic)});
  w.u32(kFeatureFileVersion);
  w.u32(static_cast<std::uint32_t>(n));
  w.u32(static_cast<std::uint32_t>(data.features.cols()));
  w.u32(static_cast<std::uint32_t>(data.class_count));
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
      w.f64(data.features(static_cast<Eigen::Index>(i), j));
    }
  }
  for (int label : data.labels) w.u32(static_cast<std::uint32_t>(label));
  for (Split s : data.split) w.u8(static_cast<std::uint8_t>(s));
  return w.take();
}

LabeledDataset decode_feature_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "feature dataset");
  const auto magic = r.bytes(sizeof(kFeatureMagic), "magic");
  if (!std::equal(magic.begin(), magic.end(), kFeatureMagic)) {
    throw IoError("feature dataset: bad magic at byte offset 0");
  }
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kFeatureFileVersion) {
    throw IoError("feature dataset: unsupported version " + std::to_string(version) +
                  " at byte offset " + std::to_string(version_at));
  }
  const std::uint32_t n = r.u32("n");
  const std::uint32_t p = r.u32("p");
  const std::size_t classes_at = r.offset();
  const std::uint32_t class_count = r.u32("class_count");
  if (p == 0 && n > 0) r.fail("feature dimension p is zero");

  const std::uint64_t payload = static_cast<std::uint64_t>(n) * p * 8 + static_cast<std::uint64_t>(n) * 5;
  if (r.remaining() < payload) {
    throw IoError("feature dataset: truncated, header declares " + std::to_string(payload) +
                  " payload bytes but only " + std::to_string(r.remaining()) +
                  " remain at byte offset " + std::to_string(r.offset()) + " (file should end at " +
                  std::to_string(r.offset() + payload) + ")");
  }

  LabeledDataset data;
  data.class_count = static_cast<int>(class_count);
  data.features.resize(n, p);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < p; ++j) data.features(i, j) = r.f64("feature");
  }
  data.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t at = r.offset();
    const std::uint32_t label = r.u32("label");
    if (label >= class_count) {
      throw IoError("feature dataset: label " + std::to_string(label) + " >= class_count " +
                    std::to_string(class_count) + " (declared at byte offset " +
                    std::to_string(classes_at) + ") at byte offset " + std::to_string(at));
    }
    data.labels[i] = static_cast<int>(label);
  }
  data.split.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t at = r.offset();
    const std::uint8_t tag = r.u8("split tag");
    if (tag > 2) {
      throw IoError("feature dataset: split tag " + std::to_string(tag) + " at byte offset " +
                    std::to_string(at));
    }
    data.split[i] = static_cast<Split>(tag);
  }
  if (r.remaining() != 0) r.fail("trailing bytes after split tags");
  return data;
}

void write_feature_dataset(const std::filesystem::path& path, const LabeledDataset& data) {
  write_file_bytes(path, encode_feature_dataset(data));
}

LabeledDataset load_feature_dataset(const std::filesystem::path& path) {
  return decode_feature_dataset(read_file_bytes(path));
}

}  // namespace mfrl
