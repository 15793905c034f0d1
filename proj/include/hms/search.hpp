#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "hms/earlystop.hpp"
#include "hms/error.hpp"
#include "hms/eval.hpp"
#include "hms/rng.hpp"
#include "hms/rsa.hpp"
#include "hms/stats.hpp"

namespace hms {

// ---------------------------------------------------------------------------
// Hyperparameter space
// ---------------------------------------------------------------------------

struct int_range {
  long long low = 0;
  long long high = 0;
};

struct real_range {
  double low = 0.0;
  double high = 0.0;
  bool log_scale = false;
};

struct int_choice {
  std::vector<long long> values;
};

using search_dimension = std::variant<int_range, real_range, int_choice>;

// The six dimensions varied by the sweep. Degenerate ranges [a, a] pin a
// dimension to a constant.
struct hyperparameter_space {
  search_dimension epochs = int_range{10, 150};
  search_dimension validation_sequences = int_range{10, 100};
  search_dimension training_sequences = int_range{50, 500};
  search_dimension batch_size = int_choice{{2, 4, 8, 16}};
  search_dimension learning_rate = real_range{1e-5, 1e-2, true};
  search_dimension filter_size = int_choice{{3, 5, 7}};

  void validate() const {
    const auto check = [](const search_dimension& d, const char* name) {
      if (const auto* r = std::get_if<int_range>(&d)) {
        if (r->low > r->high)
          throw invalid_space(std::string("space: ") + name + " has low > high");
      } else if (const auto* r = std::get_if<real_range>(&d)) {
        if (!std::isfinite(r->low) || !std::isfinite(r->high) || r->low > r->high)
          throw invalid_space(std::string("space: ") + name + " has bad bounds");
        if (r->log_scale && r->low <= 0.0)
          throw invalid_space(std::string("space: ") + name +
                              " log sampling needs positive bounds");
      } else if (const auto* c = std::get_if<int_choice>(&d)) {
        if (c->values.empty())
          throw invalid_space(std::string("space: ") + name + " has no choices");
      }
    };
    check(epochs, "epochs");
    check(validation_sequences, "validation_sequences");
    check(training_sequences, "training_sequences");
    check(batch_size, "batch_size");
    check(learning_rate, "learning_rate");
    check(filter_size, "filter_size");
  }
};

struct hyperparameter_sample {
  long long epochs = 0;
  long long validation_sequences = 0;
  long long training_sequences = 0;
  long long batch_size = 0;
  double learning_rate = 0.0;
  long long filter_size = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline long long draw_int_dimension(const search_dimension& d, rng& g, const char* name) {
  if (const auto* r = std::get_if<int_range>(&d)) return g.uniform_int(r->low, r->high);
  if (const auto* c = std::get_if<int_choice>(&d))
    return c->values[static_cast<std::size_t>(
        g.uniform_int(0, static_cast<long long>(c->values.size()) - 1))];
  throw invalid_space(std::string("space: ") + name + " must be an integer dimension");
}

inline double draw_real_dimension(const search_dimension& d, rng& g, const char* name) {
  if (const auto* r = std::get_if<real_range>(&d))
    return r->log_scale ? g.log_uniform(r->low, r->high) : g.uniform(r->low, r->high);
  throw invalid_space(std::string("space: ") + name + " must be a real dimension");
}

}  // namespace detail

// Draws one concrete configuration; fully reproducible from the seed.
inline hyperparameter_sample sample_space(const hyperparameter_space& space,
                                          std::uint64_t seed) {
  space.validate();
  rng g(seed);
  hyperparameter_sample s;
  s.seed = seed;
  s.epochs = detail::draw_int_dimension(space.epochs, g, "epochs");
  s.validation_sequences =
      detail::draw_int_dimension(space.validation_sequences, g, "validation_sequences");
  s.training_sequences =
      detail::draw_int_dimension(space.training_sequences, g, "training_sequences");
  s.batch_size = detail::draw_int_dimension(space.batch_size, g, "batch_size");
  s.learning_rate = detail::draw_real_dimension(space.learning_rate, g, "learning_rate");
  s.filter_size = detail::draw_int_dimension(space.filter_size, g, "filter_size");
  return s;
}

// ---------------------------------------------------------------------------
// Model backend contract
// ---------------------------------------------------------------------------

// A stimulus as presented to a backend: an identifier, an image, and an
// optional category label (-1 when unlabeled).
struct stimulus {
  std::string id;
  frame image;
  int category = -1;
};

struct matching_trial_spec {
  stimulus probe;
  std::vector<stimulus> gallery;
  std::size_t true_index = 0;
};

using frame_sequence = std::vector<frame>;

// Abstract training/evaluation surface a model must expose to the sweep.
// Implementations must be deterministic given (sample, seed, call sequence).
class model_backend {
 public:
  virtual ~model_backend() = default;

  virtual void train_epochs(int count) = 0;

  // Activation snapshots of the representation units for each stimulus over
  // a fixed number of presentation frames.
  virtual activation_sequence activations_for(std::span<const stimulus> stimuli,
                                              int frames) = 0;

  // Final-layer activation vectors used by the matching task.
  virtual std::vector<std::vector<double>> final_layer_activations(
      std::span<const stimulus> stimuli) = 0;

  // Next-frame prediction for a sequence of input frames.
  virtual frame predict_next(const frame_sequence& frames) = 0;
};

using backend_factory = std::function<std::unique_ptr<model_backend>(
    const hyperparameter_sample&, std::uint64_t seed)>;

// ---------------------------------------------------------------------------
// Sweep orchestration
// ---------------------------------------------------------------------------

struct search_inputs {
  rdm reference;
  std::vector<stimulus> stimuli;
  std::vector<matching_trial_spec> gallery_trials;
  std::vector<frame_sequence> heldout_sequences;
  int presentation_frames = 5;
  pool_mode pooling = pool_mode::mean;
};

struct search_record {
  hyperparameter_sample sample;
  std::map<std::string, metric_trajectory> trajectories;
  std::map<std::string, double> finals;
  int epochs_trained = 0;
  double wall_units = 0.0;  // abstract training cost, 1 unit = 1 epoch
};

namespace detail {

template <typename Fn>
auto guarded_backend_call(Fn&& fn, int epoch, const char* what) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw backend_failure(std::string("backend failed during ") + what + " at epoch " +
                          std::to_string(epoch) + ": " + e.what());
  }
}

}  // namespace detail

// Trains one model to sample.epochs, evaluating hms / accuracy / mse at every
// multiple of checkpoint_every. A degenerate RDM at a checkpoint leaves that
// hms checkpoint missing rather than failing the model.
inline search_record run_model(const hyperparameter_sample& sample,
                               model_backend& backend, const search_inputs& inputs,
                               int checkpoint_every) {
  if (checkpoint_every < 1)
    throw invalid_input("run_model: checkpoint_every must be >= 1");
  search_record rec;
  rec.sample = sample;
  rec.trajectories["hms"] = {"hms", {}};
  rec.trajectories["accuracy"] = {"accuracy", {}};
  rec.trajectories["mse"] = {"mse", {}};

  int trained = 0;
  for (int e = checkpoint_every; e <= sample.epochs; e += checkpoint_every) {
    detail::guarded_backend_call(
        [&] {
          backend.train_epochs(e - trained);
          return 0;
        },
        e, "training");
    trained = e;

    // hms
    const auto seq = detail::guarded_backend_call(
        [&] { return backend.activations_for(inputs.stimuli, inputs.presentation_frames); },
        e, "activation capture");
    try {
      const auto pooled = temporal_pool(seq, inputs.pooling);
      const auto model_rdm = build_rdm(pooled);
      rec.trajectories["hms"].points.push_back({e, hms(model_rdm, inputs.reference)});
    } catch (const degenerate_rdm&) {
      // missing checkpoint value, not fatal
    }

    // accuracy
    std::vector<matching_trial> trials;
    trials.reserve(inputs.gallery_trials.size());
    for (const auto& spec : inputs.gallery_trials) {
      matching_trial trial;
      trial.true_index = spec.true_index;
      const auto probe_act = detail::guarded_backend_call(
          [&] {
            return backend.final_layer_activations(std::span(&spec.probe, 1));
          },
          e, "probe activation");
      trial.probe = probe_act.front();
      trial.gallery = detail::guarded_backend_call(
          [&] { return backend.final_layer_activations(spec.gallery); }, e,
          "gallery activation");
      trials.push_back(std::move(trial));
    }
    if (!trials.empty())
      rec.trajectories["accuracy"].points.push_back({e, matching_accuracy(trials)});

    // mse
    if (!inputs.heldout_sequences.empty()) {
      double total = 0.0;
      for (const auto& seq_frames : inputs.heldout_sequences) {
        if (seq_frames.size() < 2)
          throw invalid_input("run_model: held-out sequence needs >= 2 frames");
        frame_sequence prefix(seq_frames.begin(), seq_frames.end() - 1);
        const auto predicted = detail::guarded_backend_call(
            [&] { return backend.predict_next(prefix); }, e, "prediction");
        total += next_frame_mse(predicted, seq_frames.back());
      }
      rec.trajectories["mse"].points.push_back(
          {e, total / static_cast<double>(inputs.heldout_sequences.size())});
    }
  }
  if (trained < sample.epochs) {
    detail::guarded_backend_call(
        [&] {
          backend.train_epochs(static_cast<int>(sample.epochs) - trained);
          return 0;
        },
        static_cast<int>(sample.epochs), "training");
  }
  rec.epochs_trained = static_cast<int>(sample.epochs);
  rec.wall_units = static_cast<double>(sample.epochs);
  for (auto& [name, traj] : rec.trajectories)
    if (!traj.points.empty()) rec.finals[name] = traj.points.back().value;
  return rec;
}

struct model_failure {
  std::size_t index = 0;
  std::string model_id;
  std::string message;
};

struct search_result {
  metric_table table;
  std::vector<std::string> record_ids;  // parallel to records
  std::vector<search_record> records;
  std::vector<model_failure> failures;
};

inline std::string model_id_for(std::size_t index, std::size_t n_models) {
  std::size_t width = 3;
  for (std::size_t v = n_models > 0 ? n_models - 1 : 0; v >= 1000; v /= 10) ++width;
  std::string digits = std::to_string(index);
  return "model_" + std::string(width > digits.size() ? width - digits.size() : 0, '0') +
         digits;
}

struct search_options {
  int checkpoint_every = 5;
  std::uint64_t master_seed = 0;
  int workers = 1;
};

// Converts sweep records into the shape the early-stopping analysis consumes.
inline std::vector<trajectory_record> to_trajectory_records(
    std::span<const search_record> records, std::span<const std::string> ids) {
  if (records.size() != ids.size())
    throw length_mismatch("to_trajectory_records: ids and records differ in count");
  std::vector<trajectory_record> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    out.push_back({ids[i], records[i].trajectories, records[i].epochs_trained});
  return out;
}

// Runs the Monte Carlo sweep. Every per-model seed derives from
// (master_seed, model index), so results are identical for any worker count.
// Models that fail are recorded and skipped; models with incomplete final
// metrics are kept as records but excluded from the table.
inline search_result run_search(const hyperparameter_space& space,
                                const backend_factory& factory, std::size_t n_models,
                                const search_inputs& inputs,
                                const search_options& opts) {
  if (n_models < 1) throw invalid_input("run_search: n_models must be >= 1");
  space.validate();

  struct slot {
    std::optional<search_record> record;
    std::optional<std::string> failure;
  };
  std::vector<slot> slots(n_models);

  const auto run_one = [&](std::size_t i) {
    const std::uint64_t model_seed = mix_seed(opts.master_seed, i);
    try {
      const auto sample = sample_space(space, model_seed);
      auto backend = factory(sample, mix_seed(model_seed, 0xbac4e17dull));
      if (!backend) throw backend_failure("factory returned no backend");
      slots[i].record = run_model(sample, *backend, inputs, opts.checkpoint_every);
    } catch (const std::exception& e) {
      slots[i].failure = e.what();
    }
  };

  const int workers =
      std::clamp(opts.workers, 1, static_cast<int>(std::min<std::size_t>(n_models, 64)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n_models; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < n_models; i = next.fetch_add(1))
          run_one(i);
      });
    for (auto& th : pool) th.join();
  }

  search_result result;
  std::vector<std::string> ids;
  std::vector<double> col_hms, col_acc, col_mse, col_epochs, col_val, col_train,
      col_batch, col_lr, col_filter;
  for (std::size_t i = 0; i < n_models; ++i) {
    const std::string id = model_id_for(i, n_models);
    if (slots[i].failure) {
      result.failures.push_back({i, id, *slots[i].failure});
      continue;
    }
    auto& rec = *slots[i].record;
    result.record_ids.push_back(id);
    const bool complete = rec.finals.count("hms") && rec.finals.count("accuracy") &&
                          rec.finals.count("mse");
    if (!complete) {
      result.failures.push_back({i, id, "incomplete final metrics"});
      result.records.push_back(std::move(rec));
      continue;
    }
    ids.push_back(id);
    col_hms.push_back(rec.finals.at("hms"));
    col_acc.push_back(rec.finals.at("accuracy"));
    col_mse.push_back(rec.finals.at("mse"));
    col_epochs.push_back(static_cast<double>(rec.sample.epochs));
    col_val.push_back(static_cast<double>(rec.sample.validation_sequences));
    col_train.push_back(static_cast<double>(rec.sample.training_sequences));
    col_batch.push_back(static_cast<double>(rec.sample.batch_size));
    col_lr.push_back(rec.sample.learning_rate);
    col_filter.push_back(static_cast<double>(rec.sample.filter_size));
    result.records.push_back(std::move(rec));
  }

  result.table.model_ids = std::move(ids);
  result.table.add_column("hms", std::move(col_hms));
  result.table.add_column("accuracy", std::move(col_acc));
  result.table.add_column("mse", std::move(col_mse));
  result.table.add_column("epochs", std::move(col_epochs));
  result.table.add_column("validation_sequences", std::move(col_val));
  result.table.add_column("training_sequences", std::move(col_train));
  result.table.add_column("batch_size", std::move(col_batch));
  result.table.add_column("learning_rate", std::move(col_lr));
  result.table.add_column("filter_size", std::move(col_filter));
  return result;
}

}  // namespace hms
