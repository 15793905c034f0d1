#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hms/earlystop.hpp"
#include "hms/error.hpp"
#include "hms/eval.hpp"
#include "hms/rng.hpp"
#include "hms/rsa.hpp"
#include "hms/search.hpp"

namespace hms {

// ---------------------------------------------------------------------------
// Synthetic stimuli and reference RDM
// ---------------------------------------------------------------------------

struct synthetic_stimulus_set {
  std::vector<stimulus> stimuli;
  int categories = 0;
  int image_size = 0;
};

// m stimuli drawn as bounded perturbations of k category prototypes.
// Categories are assigned round-robin, so sizes differ by at most one.
inline synthetic_stimulus_set gen_stimuli(int m = 92, int k = 6, int size = 16,
                                          std::uint64_t seed = 0,
                                          double perturbation = 0.08) {
  if (k < 1 || m < k) throw invalid_counts("gen_stimuli: need m >= k >= 1");
  if (m < 3) throw invalid_counts("gen_stimuli: need at least 3 stimuli");
  if (size < 1) throw invalid_counts("gen_stimuli: bad image size");

  rng g(seed);
  const std::size_t pixels = static_cast<std::size_t>(size) * size;
  std::vector<std::vector<double>> prototypes(static_cast<std::size_t>(k));
  for (auto& proto : prototypes) {
    proto.resize(pixels);
    for (double& v : proto) v = g.uniform(0.1, 0.9);
  }

  synthetic_stimulus_set set;
  set.categories = k;
  set.image_size = size;
  set.stimuli.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const int cat = i % k;
    stimulus s;
    std::string digits = std::to_string(i);
    s.id = "s" + std::string(digits.size() < 3 ? 3 - digits.size() : 0, '0') + digits;
    s.category = cat;
    s.image.width = static_cast<std::size_t>(size);
    s.image.height = static_cast<std::size_t>(size);
    s.image.channels = 1;
    s.image.pixels.resize(pixels);
    for (std::size_t p = 0; p < pixels; ++p)
      s.image.pixels[p] = std::clamp(
          prototypes[static_cast<std::size_t>(cat)][p] +
              g.uniform(-perturbation, perturbation),
          0.0, 1.0);
    set.stimuli.push_back(std::move(s));
  }
  return set;
}

// Block-structured stand-in for the averaged human RDM: delta_in within a
// category, delta_out across categories, plus clamped Gaussian noise.
struct reference_rdm_spec {
  double delta_in = 0.3;
  double delta_out = 1.2;
  double noise_sd = 0.0;
  std::uint64_t seed = 0;
};

inline rdm reference_rdm(const reference_rdm_spec& spec,
                         std::span<const stimulus> stimuli) {
  if (!(spec.delta_in >= 0.0 && spec.delta_in < spec.delta_out && spec.delta_out <= 2.0))
    throw invalid_spec("reference_rdm: need 0 <= delta_in < delta_out <= 2");
  if (!(spec.noise_sd >= 0.0)) throw invalid_spec("reference_rdm: negative noise");
  if (stimuli.size() < 2) throw invalid_spec("reference_rdm: need >= 2 stimuli");

  rng g(spec.seed);
  rdm r;
  for (const auto& s : stimuli) r.stimulus_ids.push_back(s.id);
  r.entries.reserve(pair_count(stimuli.size()));
  for (std::size_t i = 0; i < stimuli.size(); ++i) {
    for (std::size_t j = i + 1; j < stimuli.size(); ++j) {
      const double base = stimuli[i].category == stimuli[j].category ? spec.delta_in
                                                                     : spec.delta_out;
      const double noise = spec.noise_sd > 0.0 ? g.normal(0.0, spec.noise_sd) : 0.0;
      r.entries.push_back(std::clamp(base + noise, 0.0, 2.0));
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Toy encoder model
// ---------------------------------------------------------------------------

// An analytic stand-in for a trained network. A frozen random projection
// defines the feature map; a mixing coefficient alpha blends the
// category-informative projection against seeded noise. Training moves alpha
// along a closed-form schedule, so every state is a pure function of
// (hyperparameters, seed, epoch).
struct toy_model {
  hyperparameter_sample hp;
  std::uint64_t seed = 0;
  int epoch = 0;
  int feature_dim = 64;
  int pixel_dim = 256;
  std::shared_ptr<const std::vector<double>> encoder_projection;
  std::shared_ptr<const std::vector<double>> final_projection;

  // Learning rates inside the viability band anneal alpha up to a ceiling
  // set by the hyperparameters; rates outside it decay alpha toward zero,
  // emulating degenerate runs.
  double alpha() const {
    const double l = std::log10(hp.learning_rate);
    if (l < -4.5 || l > -2.5) return 0.25 * std::exp(-static_cast<double>(epoch) / 30.0);
    const double ceiling =
        std::clamp(0.95 - 0.35 * std::fabs(l + 3.5) +
                       0.04 * (static_cast<double>(hp.training_sequences) / 500.0),
                   0.05, 0.98);
    const double tau = 18.0 + 2.0 * static_cast<double>(hp.filter_size) +
                       0.5 * static_cast<double>(hp.batch_size);
    return ceiling * (1.0 - std::exp(-static_cast<double>(epoch) / tau));
  }
};

namespace detail {

inline std::shared_ptr<const std::vector<double>> make_projection(std::uint64_t seed,
                                                                  int rows, int cols) {
  rng g(seed);
  auto proj = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  for (double& v : *proj) v = g.normal(0.0, scale);
  return proj;
}

inline std::vector<double> project(const std::vector<double>& proj, int rows, int cols,
                                   std::span<const double> x) {
  std::vector<double> out(static_cast<std::size_t>(rows), 0.0);
  for (int r = 0; r < rows; ++r) {
    const double* row = proj.data() + static_cast<std::size_t>(r) * cols;
    double acc = 0.0;
    for (int c = 0; c < cols; ++c) acc += row[c] * x[static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(r)] = acc;
  }
  return out;
}

inline constexpr double toy_noise_scale = 0.6;

}  // namespace detail

inline toy_model make_toy_model(const hyperparameter_sample& hp, std::uint64_t seed,
                                int feature_dim = 64, int pixel_dim = 256) {
  toy_model m;
  m.hp = hp;
  m.seed = seed;
  m.feature_dim = feature_dim;
  m.pixel_dim = pixel_dim;
  m.encoder_projection =
      detail::make_projection(mix_seed(seed, 0x9107ull), feature_dim, pixel_dim);
  m.final_projection =
      detail::make_projection(mix_seed(seed, 0xf19a1ull), feature_dim, pixel_dim);
  return m;
}

inline toy_model train_epoch(const toy_model& m) {
  toy_model next = m;
  next.epoch = m.epoch + 1;
  return next;
}

// Activation frames for one stimulus over a presentation of `frames` steps.
// Frame 1 is the blank prediction: a constant pattern shared by every
// stimulus of this model. Frames 2..T blend the category-informative
// projection with per-(stimulus, frame) seeded noise.
inline std::vector<std::vector<double>> encode(const toy_model& m, const stimulus& s,
                                               int frames = 5) {
  if (frames < 1) throw invalid_input("encode: need at least 1 frame");
  if (static_cast<int>(s.image.pixels.size()) != m.pixel_dim)
    throw backend_failure("encode: stimulus pixel count does not match the model");
  const double a = m.alpha();
  std::vector<std::vector<double>> out(static_cast<std::size_t>(frames));

  rng blank(mix_seed(m.seed, 0xb1a2ull));
  out[0].resize(static_cast<std::size_t>(m.feature_dim));
  for (double& v : out[0]) v = 0.1 + 0.05 * blank.normal(0.0, 1.0);

  const auto projected =
      detail::project(*m.encoder_projection, m.feature_dim, m.pixel_dim, s.image.pixels);
  const std::uint64_t stim_seed = mix_seed(m.seed, fnv1a64(s.id));
  for (int t = 1; t < frames; ++t) {
    rng noise(mix_seed(stim_seed, static_cast<std::uint64_t>(t)));
    auto& row = out[static_cast<std::size_t>(t)];
    row.resize(static_cast<std::size_t>(m.feature_dim));
    for (int f = 0; f < m.feature_dim; ++f)
      row[static_cast<std::size_t>(f)] =
          a * projected[static_cast<std::size_t>(f)] +
          (1.0 - a) * detail::toy_noise_scale * noise.normal(0.0, 1.0);
  }
  return out;
}

inline std::vector<double> final_layer(const toy_model& m, const stimulus& s) {
  if (static_cast<int>(s.image.pixels.size()) != m.pixel_dim)
    throw backend_failure("final_layer: stimulus pixel count does not match the model");
  const double a = m.alpha();
  auto out =
      detail::project(*m.final_projection, m.feature_dim, m.pixel_dim, s.image.pixels);
  rng noise(mix_seed(mix_seed(m.seed, fnv1a64(s.id)), 0xf17aull));
  for (double& v : out)
    v = a * v + (1.0 - a) * detail::toy_noise_scale * noise.normal(0.0, 1.0);
  return out;
}

class toy_backend final : public model_backend {
 public:
  toy_backend(const hyperparameter_sample& hp, std::uint64_t seed, int feature_dim = 64,
              int pixel_dim = 256)
      : model_(make_toy_model(hp, seed, feature_dim, pixel_dim)) {}

  void train_epochs(int count) override {
    for (int i = 0; i < count; ++i) model_ = train_epoch(model_);
  }

  activation_sequence activations_for(std::span<const stimulus> stimuli,
                                      int frames) override {
    activation_sequence seq;
    seq.frames.resize(static_cast<std::size_t>(frames));
    for (auto& f : seq.frames)
      for (const auto& s : stimuli) f.stimulus_ids.push_back(s.id);
    for (const auto& s : stimuli) {
      const auto per_stimulus = encode(model_, s, frames);
      for (int t = 0; t < frames; ++t)
        seq.frames[static_cast<std::size_t>(t)].values.push_back(
            per_stimulus[static_cast<std::size_t>(t)]);
    }
    return seq;
  }

  std::vector<std::vector<double>> final_layer_activations(
      std::span<const stimulus> stimuli) override {
    std::vector<std::vector<double>> out;
    out.reserve(stimuli.size());
    for (const auto& s : stimuli) out.push_back(final_layer(model_, s));
    return out;
  }

  frame predict_next(const frame_sequence& frames) override {
    if (frames.empty()) throw invalid_input("predict_next: empty sequence");
    const frame& last = frames.back();
    const double a = model_.alpha();
    const std::uint64_t content =
        fnv1a64_bytes(last.pixels.data(), last.pixels.size() * sizeof(double));
    rng g(mix_seed(mix_seed(model_.seed, content), 0x9eadull));
    frame out = last;
    for (double& v : out.pixels)
      v = std::clamp(a * v + (1.0 - a) * g.uniform01(), 0.0, 1.0);
    return out;
  }

  const toy_model& model() const { return model_; }

 private:
  toy_model model_;
};

inline backend_factory toy_backend_factory(int feature_dim = 64, int pixel_dim = 256) {
  return [feature_dim, pixel_dim](const hyperparameter_sample& hp, std::uint64_t seed) {
    return std::make_unique<toy_backend>(hp, seed, feature_dim, pixel_dim);
  };
}

// ---------------------------------------------------------------------------
// Gallery trials and held-out sequences
// ---------------------------------------------------------------------------

// Retrieval trials: each gallery is a fresh set of random images; the probe
// is a perturbed rendering of the true gallery item.
inline std::vector<matching_trial_spec> gen_matching_trials(int n_trials,
                                                            int gallery_size = 50,
                                                            int image_size = 16,
                                                            std::uint64_t seed = 0,
                                                            double perturbation = 0.06) {
  if (n_trials < 1 || gallery_size < 2)
    throw invalid_counts("gen_matching_trials: need trials >= 1 and gallery >= 2");
  rng g(seed);
  const std::size_t pixels = static_cast<std::size_t>(image_size) * image_size;
  std::vector<matching_trial_spec> specs;
  specs.reserve(static_cast<std::size_t>(n_trials));
  for (int t = 0; t < n_trials; ++t) {
    matching_trial_spec spec;
    spec.gallery.reserve(static_cast<std::size_t>(gallery_size));
    for (int i = 0; i < gallery_size; ++i) {
      stimulus s;
      s.id = "t" + std::to_string(t) + "_g" + std::to_string(i);
      s.image.width = s.image.height = static_cast<std::size_t>(image_size);
      s.image.pixels.resize(pixels);
      for (double& v : s.image.pixels) v = g.uniform01();
      spec.gallery.push_back(std::move(s));
    }
    spec.true_index =
        static_cast<std::size_t>(g.uniform_int(0, gallery_size - 1));
    spec.probe = spec.gallery[spec.true_index];
    spec.probe.id = "t" + std::to_string(t) + "_probe";
    for (double& v : spec.probe.image.pixels)
      v = std::clamp(v + g.uniform(-perturbation, perturbation), 0.0, 1.0);
    specs.push_back(std::move(spec));
  }
  return specs;
}

// Static held-out scenes: the true next frame equals the repeated frame.
inline std::vector<frame_sequence> gen_heldout_sequences(int count, int length,
                                                         int image_size,
                                                         std::uint64_t seed) {
  if (count < 1 || length < 2)
    throw invalid_counts("gen_heldout_sequences: need count >= 1 and length >= 2");
  rng g(seed);
  const std::size_t pixels = static_cast<std::size_t>(image_size) * image_size;
  std::vector<frame_sequence> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    frame f;
    f.width = f.height = static_cast<std::size_t>(image_size);
    f.pixels.resize(pixels);
    for (double& v : f.pixels) v = g.uniform01();
    out.emplace_back(static_cast<std::size_t>(length), f);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trajectory simulator
// ---------------------------------------------------------------------------

enum class profile_kind { converging, diverging };

// Parametric training curves matching the qualitative metric behaviors:
// MSE decays to a floor (or grows for degenerate runs), HMS rises
// logistically and plateaus early, accuracy dips then rises and plateaus
// later.
struct trajectory_profile {
  profile_kind kind = profile_kind::converging;
  std::uint64_t seed = 0;

  double hms_plateau = 0.17;
  double hms_stabilize_epoch = 33.0;
  double accuracy_start = 0.2;
  double accuracy_dip = 0.08;
  double accuracy_plateau = 0.45;
  double accuracy_stabilize_epoch = 66.5;
  double mse_start = 0.35;
  double mse_floor = 0.012;
  double mse_tau = 45.0;

  double hms_level = 0.03;      // diverging: mean HMS
  double accuracy_level = 0.06; // diverging: mean accuracy
  double mse_growth = 0.0015;   // diverging: MSE slope per epoch

  double hms_noise_sd = 0.002;
  double accuracy_noise_sd = 0.01;
  double mse_noise_sd = 0.003;
};

namespace detail {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Zero-noise value of one metric curve at a given epoch.
inline double profile_curve(const trajectory_profile& p, const std::string& metric,
                            double e) {
  if (p.kind == profile_kind::converging) {
    if (metric == "hms") {
      const double s = p.hms_stabilize_epoch / 8.0;
      return p.hms_plateau * logistic((e - (p.hms_stabilize_epoch - 4.0 * s)) / s);
    }
    if (metric == "accuracy") {
      const double s = p.accuracy_stabilize_epoch / 10.0;
      const double rise =
          p.accuracy_start +
          (p.accuracy_plateau - p.accuracy_start) *
              logistic((e - (p.accuracy_stabilize_epoch - 4.0 * s)) / s);
      const double dip_center = p.accuracy_stabilize_epoch / 4.0;
      const double dip =
          p.accuracy_dip *
          std::exp(-(e - dip_center) * (e - dip_center) / (2.0 * 10.0 * 10.0));
      return std::clamp(rise - dip, 0.0, 1.0);
    }
    return p.mse_floor + (p.mse_start - p.mse_floor) * std::exp(-e / p.mse_tau);
  }
  if (metric == "hms") return p.hms_level;
  if (metric == "accuracy") return p.accuracy_level;
  return p.mse_start + p.mse_growth * e;
}

}  // namespace detail

// Samples per-model curve parameters. Stabilization epochs jitter around the
// observed means (33 for HMS with SD 5, 66.5 for accuracy with SD 36);
// diverging runs get noisy low levels that never satisfy the stability
// criterion.
inline trajectory_profile make_trajectory_profile(profile_kind kind,
                                                  std::uint64_t seed) {
  rng g(mix_seed(seed, 0x7a0f11eull));
  trajectory_profile p;
  p.kind = kind;
  p.seed = seed;
  if (kind == profile_kind::converging) {
    p.hms_stabilize_epoch = std::max(10.0, g.normal(33.0, 5.0));
    p.accuracy_stabilize_epoch = std::clamp(g.normal(66.5, 36.0), 20.0, 140.0);
    p.hms_plateau = g.uniform(0.12, 0.2);
    p.accuracy_plateau = g.uniform(0.3, 0.6);
    p.accuracy_start = g.uniform(0.12, 0.25);
    p.mse_floor = g.uniform(0.005, 0.02);
    p.mse_start = g.uniform(0.25, 0.45);
  } else {
    p.hms_level = g.uniform(0.0, 0.05);
    p.accuracy_level = g.uniform(0.02, 0.12);
    p.mse_start = g.uniform(0.3, 0.5);
    p.mse_growth = g.uniform(0.0008, 0.003);
    p.hms_noise_sd = 0.04;
    p.accuracy_noise_sd = 0.03;
    p.mse_noise_sd = 0.01;
  }
  return p;
}

// Emits hms / accuracy / mse trajectories sampled at checkpoint epochs from
// the parametric curves plus seeded noise, clamped to the metric ranges.
inline std::map<std::string, metric_trajectory> simulate_trajectory(
    const trajectory_profile& p, int epochs, int checkpoint_every) {
  if (checkpoint_every < 1 || epochs < checkpoint_every)
    throw invalid_profile("simulate_trajectory: need epochs >= checkpoint_every >= 1");
  if (!(p.hms_plateau >= -1.0 && p.hms_plateau <= 1.0) || p.mse_floor < 0.0 ||
      p.mse_start < 0.0 || p.hms_noise_sd < 0.0)
    throw invalid_profile("simulate_trajectory: bad profile parameters");

  std::map<std::string, metric_trajectory> out;
  const char* metrics[] = {"hms", "accuracy", "mse"};
  for (const char* metric : metrics) {
    rng g(mix_seed(p.seed, fnv1a64(metric)));
    const double noise_sd = metric == std::string("hms")     ? p.hms_noise_sd
                            : metric == std::string("accuracy") ? p.accuracy_noise_sd
                                                                : p.mse_noise_sd;
    metric_trajectory traj;
    traj.metric_name = metric;
    for (int e = checkpoint_every; e <= epochs; e += checkpoint_every) {
      double v = detail::profile_curve(p, metric, static_cast<double>(e));
      if (noise_sd > 0.0) v += g.normal(0.0, noise_sd);
      if (metric == std::string("hms"))
        v = std::clamp(v, -1.0, 1.0);
      else if (metric == std::string("accuracy"))
        v = std::clamp(v, 0.0, 1.0);
      else
        v = std::max(v, 0.0);
      traj.points.push_back({e, v});
    }
    out[metric] = std::move(traj);
  }
  return out;
}

}  // namespace hms
