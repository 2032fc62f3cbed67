#include "mfrl/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <string>

#include "mfrl/byte_io.hpp"
#include "mfrl/error.hpp"

namespace mfrl {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  text = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError("config: " + std::string(key) + " = '" + std::string(text) + "' is not a valid number");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("config: " + std::string(key) + " = '" + std::string(text) + "' is not a boolean");
}

template <typename T>
std::vector<T> parse_list(std::string_view key, std::string_view text) {
  std::vector<T> out;
  text = trim(text);
  if (text.empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = text.find(',', start);
    out.push_back(parse_number<T>(key, text.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string show(double v) { return format_double(v); }
std::string show(bool v) { return v ? "true" : "false"; }
template <typename T>
  requires std::is_integral_v<T>
std::string show(T v) {
  return std::to_string(v);
}
template <typename T>
std::string show(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += show(values[i]);
  }
  return out;
}

struct Key {
  std::string name;
  bool training;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define MFRL_NUM_KEY(NAME, TRAINING, FIELD)                                                         \
  Key {                                                                                             \
    NAME, TRAINING,                                                                                 \
        [](ExperimentConfig& c, std::string_view v) {                                               \
          c.FIELD = parse_number<std::remove_cvref_t<decltype(c.FIELD)>>(NAME, v);                  \
        },                                                                                          \
        [](const ExperimentConfig& c) { return show(c.FIELD); }                                     \
  }

#define MFRL_LIST_KEY(NAME, TRAINING, FIELD)                                                        \
  Key {                                                                                             \
    NAME, TRAINING,                                                                                 \
        [](ExperimentConfig& c, std::string_view v) {                                               \
          c.FIELD = parse_list<typename std::remove_cvref_t<decltype(c.FIELD)>::value_type>(NAME, v); \
        },                                                                                          \
        [](const ExperimentConfig& c) { return show(c.FIELD); }                                     \
  }

#define MFRL_BOOL_KEY(NAME, TRAINING, FIELD)                                                        \
  Key {                                                                                             \
    NAME, TRAINING, [](ExperimentConfig& c, std::string_view v) { c.FIELD = parse_bool(NAME, v); }, \
        [](const ExperimentConfig& c) { return show(c.FIELD); }                                     \
  }

std::string_view unit_name(StepUnit u) { return u == StepUnit::kEpochs ? "epochs" : "iterations"; }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"experiment", true, [](ExperimentConfig&, std::string_view) {},
          [](const ExperimentConfig& c) { return std::string(to_string(c.kind)); }},
      MFRL_NUM_KEY("seed", true, seed),
      Key{"out", false, [](ExperimentConfig& c, std::string_view v) { c.out = std::string(trim(v)); },
          [](const ExperimentConfig& c) { return c.out.string(); }},

      MFRL_LIST_KEY("backbone.hidden", true, hidden),
      Key{"backbone.activation", true,
          [](ExperimentConfig& c, std::string_view v) {
            try {
              c.activation = parse_activation(trim(v));
            } catch (const Error&) {
              throw ConfigError("config: backbone.activation = '" + std::string(trim(v)) +
                                "' (expected relu, tanh or erf)");
            }
          },
          [](const ExperimentConfig& c) { return std::string(to_string(c.activation)); }},
      MFRL_BOOL_KEY("backbone.bias", true, bias),

      Key{"repr.unit", true,
          [](ExperimentConfig& c, std::string_view v) {
            v = trim(v);
            if (v == "epochs") {
              c.repr.unit = StepUnit::kEpochs;
            } else if (v == "iterations") {
              c.repr.unit = StepUnit::kIterations;
            } else {
              throw ConfigError("config: repr.unit = '" + std::string(v) + "' (expected epochs or iterations)");
            }
          },
          [](const ExperimentConfig& c) { return std::string(unit_name(c.repr.unit)); }},
      MFRL_NUM_KEY("repr.steps", true, repr.steps),
      MFRL_NUM_KEY("repr.batch_size", true, repr.batch_size),
      MFRL_NUM_KEY("repr.lr", true, repr.base_lr),
      MFRL_LIST_KEY("repr.milestones", true, repr.milestones),
      MFRL_NUM_KEY("repr.gamma", true, repr.gamma),
      MFRL_NUM_KEY("repr.momentum", true, repr.momentum),
      MFRL_NUM_KEY("repr.weight_decay", true, repr.weight_decay),
      MFRL_NUM_KEY("repr.swa_steps", true, repr.swa_steps),
      MFRL_NUM_KEY("repr.swa_lr", true, repr.swa_lr),
      MFRL_NUM_KEY("repr.snapshot_every", true, repr.snapshot_every),

      MFRL_NUM_KEY("sine.tasks_per_split", true, sine.tasks_per_split),
      MFRL_NUM_KEY("sine.samples_per_task", true, sine.samples_per_task),
      MFRL_NUM_KEY("sine.shot", false, sine.shot),

      MFRL_NUM_KEY("blob.classes", true, blob.classes),
      MFRL_NUM_KEY("blob.dim", true, blob.dim),
      MFRL_NUM_KEY("blob.latent_dim", true, blob.latent_dim),
      MFRL_NUM_KEY("blob.per_class", true, blob.per_class),
      MFRL_NUM_KEY("blob.intra_std", true, blob.intra_std),
      MFRL_NUM_KEY("blob.latent_std", true, blob.latent_std),
      MFRL_NUM_KEY("blob.class_spread", true, blob.class_spread),

      Key{"features.path", true,
          [](ExperimentConfig& c, std::string_view v) { c.feature_file = std::string(trim(v)); },
          [](const ExperimentConfig& c) { return c.feature_file.string(); }},

      MFRL_NUM_KEY("evidence.a", false, hyper.a),
      MFRL_NUM_KEY("evidence.b", false, hyper.b),
      MFRL_NUM_KEY("evidence.c", false, hyper.c),
      MFRL_NUM_KEY("evidence.d", false, hyper.d),
      MFRL_NUM_KEY("evidence.tol", false, evidence.tol),
      MFRL_NUM_KEY("evidence.max_iter", false, evidence.max_iter),

      Key{"head.kind", false,
          [](ExperimentConfig& c, std::string_view v) {
            v = trim(v);
            if (v == "logreg") {
              c.head.head = ClassifierHead::kLogReg;
            } else if (v == "bayes") {
              c.head.head = ClassifierHead::kBayes;
            } else {
              throw ConfigError("config: head.kind = '" + std::string(v) + "' (expected logreg or bayes)");
            }
          },
          [](const ExperimentConfig& c) {
            return std::string(c.head.head == ClassifierHead::kLogReg ? "logreg" : "bayes");
          }},
      MFRL_LIST_KEY("head.lambda_grid", false, head.lambda_grid),
      MFRL_LIST_KEY("head.temperature_grid", false, head.temperature_grid),
      MFRL_NUM_KEY("head.bins", false, head.bins),
      MFRL_BOOL_KEY("head.penalize_bias", false, head.logreg.penalize_bias),
      MFRL_NUM_KEY("head.grad_tol", false, head.logreg.grad_tol),
      MFRL_NUM_KEY("head.max_iter", false, head.logreg.max_iter),

      MFRL_NUM_KEY("mcmc.chains", false, head.mcmc.chains),
      MFRL_NUM_KEY("mcmc.warmup", false, head.mcmc.warmup),
      MFRL_NUM_KEY("mcmc.samples", false, head.mcmc.samples),
      MFRL_NUM_KEY("mcmc.thin", false, head.mcmc.thin),
      MFRL_NUM_KEY("mcmc.target_accept", false, head.mcmc.target_accept),
      MFRL_NUM_KEY("mcmc.a", false, head.mcmc.a),
      MFRL_NUM_KEY("mcmc.b", false, head.mcmc.b),
      MFRL_NUM_KEY("mcmc.max_feature_dim", false, head.mcmc.max_feature_dim),

      MFRL_NUM_KEY("episodes.way", false, episodes.way),
      MFRL_NUM_KEY("episodes.shot", false, episodes.shot),
      MFRL_NUM_KEY("episodes.query", false, episodes.query),
      MFRL_NUM_KEY("episodes.runs", false, episodes.runs),
      MFRL_NUM_KEY("episodes.episodes", false, episodes.episodes),
      MFRL_NUM_KEY("episodes.validation_episodes", false, episodes.validation_episodes),

      MFRL_LIST_KEY("sweep.swa_lr", false, sweep_swa_lr),
      MFRL_LIST_KEY("sweep.swa_steps", false, sweep_swa_steps),
      MFRL_LIST_KEY("compare.ema_decays", false, ema_decays),
      MFRL_NUM_KEY("spectrum.max_rows", false, spectrum_max_rows),
  };
  return table;
}

#undef MFRL_NUM_KEY
#undef MFRL_LIST_KEY
#undef MFRL_BOOL_KEY

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kSineRegression: return "sine-regression";
    case ExperimentKind::kSyntheticClassification: return "synthetic-classification";
    case ExperimentKind::kFeatureFileClassification: return "feature-file-classification";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (auto k : {ExperimentKind::kSineRegression, ExperimentKind::kSyntheticClassification,
                 ExperimentKind::kFeatureFileClassification}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("config: unknown experiment '" + std::string(name) +
                    "' (expected sine-regression, synthetic-classification or feature-file-classification)");
}

void ExperimentConfig::set_seed(std::uint64_t value) {
  seed = value;
  repr.seed = value;
  blob.seed = value;
  episodes.seed = value;
  head.mcmc.seed = value;
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  if (kind == ExperimentKind::kSineRegression) {
    c.hidden = {40, 40};
    c.activation = Activation::kErf;
    c.repr.loss = LossKind::kMse;
    c.repr.unit = StepUnit::kIterations;
    c.repr.steps = 80000;
    c.repr.batch_size = 64;
    c.repr.base_lr = 1e-3;
    c.repr.milestones = {};
    c.repr.momentum = 0.9;
    c.repr.weight_decay = 0.0;
    c.repr.swa_steps = 20000;
    c.repr.swa_lr = 0.05;
    c.sweep_swa_lr = {0.01, 0.05, 0.1};
    c.sweep_swa_steps = {5000, 10000, 20000};
  } else {
    c.hidden = {64, 64};
    c.activation = Activation::kRelu;
    c.blob.intra_std = 1.5;
    c.repr.loss = LossKind::kCrossEntropy;
    c.repr.unit = StepUnit::kEpochs;
    c.repr.steps = 100;
    c.repr.batch_size = 64;
    c.repr.base_lr = 0.05;
    c.repr.milestones = {60, 80, 90};
    c.repr.gamma = 0.1;
    c.repr.momentum = 0.9;
    c.repr.weight_decay = 1e-4;
    c.repr.swa_steps = 100;
    c.repr.swa_lr = 0.01;
    c.sweep_swa_lr = {0.005, 0.01, 0.02};
    c.sweep_swa_steps = {50, 100, 150};
  }
  c.set_seed(c.seed);
  return c;
}

void ExperimentConfig::validate() const {
  if (trains_backbone()) {
    if (hidden.empty()) throw ConfigError("config: backbone.hidden must list at least one layer");
    for (int h : hidden) {
      if (h < 1) throw ConfigError("config: backbone.hidden widths must be >= 1");
    }
    repr.validate();
  }
  switch (kind) {
    case ExperimentKind::kSineRegression:
      if (sine.tasks_per_split < 1) throw ConfigError("config: sine.tasks_per_split must be >= 1");
      if (sine.shot < 1 || sine.shot >= sine.samples_per_task) {
        throw ConfigError("config: sine.shot must lie in [1, sine.samples_per_task)");
      }
      if (!(evidence.tol > 0.0) || evidence.max_iter < 1) {
        throw ConfigError("config: evidence.tol must be > 0 and evidence.max_iter >= 1");
      }
      if (!(hyper.a >= 0.0 && hyper.b >= 0.0 && hyper.c >= 0.0 && hyper.d >= 0.0)) {
        throw ConfigError("config: evidence hyperprior parameters must be >= 0");
      }
      break;
    case ExperimentKind::kSyntheticClassification:
      if (blob.classes < 10) throw ConfigError("config: blob.classes must be >= 10");
      if (blob.dim < 1 || blob.latent_dim < 1 || blob.per_class < 1) {
        throw ConfigError("config: blob.dim, blob.latent_dim and blob.per_class must be >= 1");
      }
      if (blob.intra_std < 0.0 || blob.latent_std < 0.0) throw ConfigError("config: blob noise scales must be >= 0");
      break;
    case ExperimentKind::kFeatureFileClassification:
      if (feature_file.empty()) throw ConfigError("config: features.path is required for feature-file-classification");
      break;
  }
  if (is_classification()) {
    episodes.validate();
    if (head.lambda_grid.empty()) throw ConfigError("config: head.lambda_grid is empty");
    if (head.temperature_grid.empty()) throw ConfigError("config: head.temperature_grid is empty");
    for (double t : head.temperature_grid) {
      if (!(t > 0.0)) throw ConfigError("config: head.temperature_grid values must be > 0");
    }
    for (double l : head.lambda_grid) {
      if (!(l >= 0.0)) throw ConfigError("config: head.lambda_grid values must be >= 0");
    }
    if (head.bins < 1) throw ConfigError("config: head.bins must be >= 1");
    if (head.head == ClassifierHead::kBayes) head.mcmc.validate();
  }
  for (double a : ema_decays) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("config: compare.ema_decays values must lie in [0, 1]");
  }
  for (double lr : sweep_swa_lr) {
    if (!(lr > 0.0)) throw ConfigError("config: sweep.swa_lr values must be > 0");
  }
  for (auto s : sweep_swa_steps) {
    if (s < 0) throw ConfigError("config: sweep.swa_steps values must be >= 0");
  }
  if (spectrum_max_rows < 0) throw ConfigError("config: spectrum.max_rows must be >= 0");
}

ExperimentConfig parse_config(std::string_view text, std::string_view source) {
  struct Line {
    int number;
    std::string key;
    std::string value;
  };
  std::vector<Line> lines;
  int number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++number;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(source) + ":" + std::to_string(number) + ": expected key = value");
    }
    lines.push_back({number, std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1)))});
  }

  std::set<std::string> seen;
  ExperimentKind kind = ExperimentKind::kSineRegression;
  for (const auto& l : lines) {
    if (!seen.insert(l.key).second) {
      throw ConfigError(std::string(source) + ":" + std::to_string(l.number) + ": key '" + l.key + "' repeated");
    }
    if (l.key == "experiment") kind = parse_experiment_kind(l.value);
  }
  if (!seen.count("experiment")) throw ConfigError(std::string(source) + ": missing required key 'experiment'");

  ExperimentConfig config = default_config(kind);
  for (const auto& l : lines) {
    const auto& table = keys();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return k.name == l.key; });
    if (it == table.end()) {
      throw ConfigError(std::string(source) + ":" + std::to_string(l.number) + ": unknown key '" + l.key + "'");
    }
    try {
      it->set(config, l.value);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(source) + ":" + std::to_string(l.number) + ": " + e.what());
    }
  }
  config.set_seed(config.seed);
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_config({reinterpret_cast<const char*>(bytes.data()), bytes.size()}, path.string());
}

std::string render_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

Digest training_config_hash(const ExperimentConfig& config) {
  std::string canonical;
  for (const auto& k : keys()) {
    if (k.training) canonical += k.name + "=" + k.get(config) + "\n";
  }
  return sha256(canonical);
}

}  // namespace mfrl
