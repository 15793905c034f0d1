#include "hms/search.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "hms/io.hpp"
#include "hms/toy.hpp"

using namespace hms;

namespace {

// Tiny fixed inputs shared by the orchestration tests.
search_inputs small_inputs(std::uint64_t seed) {
  const auto set = gen_stimuli(12, 3, 8, seed);
  search_inputs inputs;
  inputs.stimuli = set.stimuli;
  reference_rdm_spec spec;
  spec.noise_sd = 0.02;
  spec.seed = mix_seed(seed, 1);
  inputs.reference = reference_rdm(spec, set.stimuli);
  inputs.gallery_trials = gen_matching_trials(4, 6, 8, mix_seed(seed, 2));
  inputs.heldout_sequences = gen_heldout_sequences(3, 4, 8, mix_seed(seed, 3));
  return inputs;
}

hyperparameter_space small_space() {
  hyperparameter_space space;
  space.epochs = int_range{10, 30};
  return space;
}

// Backend whose activations never change, whatever the training.
class frozen_backend final : public model_backend {
 public:
  explicit frozen_backend(std::uint64_t seed) : seed_(seed) {}

  void train_epochs(int) override {}

  activation_sequence activations_for(std::span<const stimulus> stimuli,
                                      int frames) override {
    activation_sequence seq;
    seq.frames.resize(static_cast<std::size_t>(frames));
    for (auto& f : seq.frames) {
      for (const auto& s : stimuli) {
        f.stimulus_ids.push_back(s.id);
        rng g(mix_seed(seed_, fnv1a64(s.id)));
        std::vector<double> row(8);
        for (double& v : row) v = g.normal(0, 1);
        f.values.push_back(std::move(row));
      }
    }
    return seq;
  }

  std::vector<std::vector<double>> final_layer_activations(
      std::span<const stimulus> stimuli) override {
    std::vector<std::vector<double>> out;
    for (const auto& s : stimuli) {
      rng g(mix_seed(seed_, fnv1a64(s.id) ^ 0x55));
      std::vector<double> v(8);
      for (double& x : v) x = g.normal(0, 1);
      out.push_back(std::move(v));
    }
    return out;
  }

  frame predict_next(const frame_sequence& frames) override { return frames.back(); }

 private:
  std::uint64_t seed_;
};

}  // namespace

TEST_SUITE("search") {

TEST_CASE("sample_space is reproducible and respects bounds") {
  const auto space = hyperparameter_space{};
  const auto a = sample_space(space, 77);
  const auto b = sample_space(space, 77);
  CHECK(a.epochs == b.epochs);
  CHECK(a.learning_rate == b.learning_rate);
  CHECK(a.filter_size == b.filter_size);

  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto s = sample_space(space, seed);
    CHECK(s.epochs >= 10);
    CHECK(s.epochs <= 150);
    CHECK(s.learning_rate >= 1e-5);
    CHECK(s.learning_rate <= 1e-2);
    CHECK((s.batch_size == 2 || s.batch_size == 4 || s.batch_size == 8 ||
           s.batch_size == 16));
    CHECK((s.filter_size == 3 || s.filter_size == 5 || s.filter_size == 7));
  }
}

TEST_CASE("degenerate ranges always return the pinned value") {
  hyperparameter_space space;
  space.epochs = int_range{42, 42};
  space.learning_rate = real_range{1e-3, 1e-3, true};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = sample_space(space, seed);
    CHECK(s.epochs == 42);
    CHECK(s.learning_rate == 1e-3);
  }
}

TEST_CASE("log-uniform learning rate is uniform in log10") {
  hyperparameter_space space;
  const int n = 2000;
  std::vector<double> t;
  t.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto s = sample_space(space, 1000 + static_cast<std::uint64_t>(i));
    t.push_back((std::log10(s.learning_rate) + 5.0) / 3.0);  // map [1e-5,1e-2] to [0,1]
  }
  std::sort(t.begin(), t.end());
  double d = 0.0;  // Kolmogorov-Smirnov statistic against U(0,1)
  for (int i = 0; i < n; ++i) {
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max({d, std::fabs(t[static_cast<std::size_t>(i)] - lo),
                  std::fabs(t[static_cast<std::size_t>(i)] - hi)});
  }
  CHECK(d < 1.63 / std::sqrt(static_cast<double>(n)));  // alpha = 0.01
}

TEST_CASE("invalid spaces are rejected") {
  hyperparameter_space space;
  space.epochs = int_range{50, 10};
  CHECK_THROWS_AS((void)sample_space(space, 1), invalid_space);
  hyperparameter_space bad_lr;
  bad_lr.learning_rate = real_range{-1.0, 1.0, true};
  CHECK_THROWS_AS((void)sample_space(bad_lr, 1), invalid_space);
  hyperparameter_space bad_kind;
  bad_kind.epochs = real_range{1, 2, false};
  CHECK_THROWS_AS((void)sample_space(bad_kind, 1), invalid_space);
}

TEST_CASE("run_model checkpoint schedule") {
  const auto inputs = small_inputs(5);
  hyperparameter_sample sample = sample_space(small_space(), 3);
  sample.epochs = 10;
  toy_backend backend(sample, 9, 16, 64);
  const auto rec = run_model(sample, backend, inputs, 5);
  REQUIRE(rec.trajectories.at("hms").points.size() == 2);
  CHECK(rec.trajectories.at("hms").points[0].epoch == 5);
  CHECK(rec.trajectories.at("hms").points[1].epoch == 10);
  CHECK(rec.epochs_trained == 10);
  CHECK(rec.wall_units == 10.0);
  CHECK(rec.finals.at("hms") == rec.trajectories.at("hms").points.back().value);
}

TEST_CASE("checkpoints are multiples of the interval capped at epochs") {
  const auto inputs = small_inputs(6);
  hyperparameter_sample sample = sample_space(small_space(), 4);
  sample.epochs = 23;
  toy_backend backend(sample, 10, 16, 64);
  const auto rec = run_model(sample, backend, inputs, 5);
  std::vector<int> epochs;
  for (const auto& pt : rec.trajectories.at("accuracy").points)
    epochs.push_back(pt.epoch);
  CHECK(epochs == std::vector<int>{5, 10, 15, 20});
  CHECK(rec.epochs_trained == 23);  // trains past the last checkpoint
}

TEST_CASE("a backend with frozen activations yields a constant hms trajectory") {
  const auto inputs = small_inputs(7);
  hyperparameter_sample sample = sample_space(small_space(), 5);
  sample.epochs = 20;
  frozen_backend backend(77);
  const auto rec = run_model(sample, backend, inputs, 5);
  const auto& pts = rec.trajectories.at("hms").points;
  REQUIRE(pts.size() == 4);
  for (const auto& pt : pts) CHECK(pt.value == pts.front().value);
}

TEST_CASE("run_search is deterministic and worker-count independent") {
  const auto inputs = small_inputs(8);
  search_options opts;
  opts.checkpoint_every = 5;
  opts.master_seed = 1234;
  opts.workers = 1;
  const auto serial = run_search(small_space(), toy_backend_factory(16, 64), 6,
                                 inputs, opts);
  opts.workers = 4;
  const auto parallel = run_search(small_space(), toy_backend_factory(16, 64), 6,
                                   inputs, opts);
  CHECK(encode_metric_table(serial.table) == encode_metric_table(parallel.table));
  REQUIRE(serial.records.size() == parallel.records.size());
  for (std::size_t i = 0; i < serial.records.size(); ++i)
    CHECK(encode_trajectories(serial.records[i].trajectories) ==
          encode_trajectories(parallel.records[i].trajectories));

  opts.workers = 1;
  const auto rerun = run_search(small_space(), toy_backend_factory(16, 64), 6,
                                inputs, opts);
  CHECK(encode_metric_table(serial.table) == encode_metric_table(rerun.table));
}

TEST_CASE("a degenerate reference leaves hms checkpoints missing, not fatal") {
  auto inputs = small_inputs(12);
  // all reference entries tied: hms is undefined at every checkpoint
  for (double& e : inputs.reference.entries) e = 1.0;
  hyperparameter_sample sample = sample_space(small_space(), 6);
  sample.epochs = 15;
  toy_backend backend(sample, 13, 16, 64);
  const auto rec = run_model(sample, backend, inputs, 5);
  CHECK(rec.trajectories.at("hms").points.empty());
  CHECK(rec.trajectories.at("accuracy").points.size() == 3);
  CHECK(rec.trajectories.at("mse").points.size() == 3);
  CHECK(rec.finals.count("hms") == 0);

  // the sweep flags such models instead of aborting
  backend_factory factory = toy_backend_factory(16, 64);
  search_options opts;
  opts.master_seed = 31;
  const auto result = run_search(small_space(), factory, 3, inputs, opts);
  CHECK(result.table.rows() == 0);
  CHECK(result.failures.size() == 3);
  CHECK(result.records.size() == 3);  // records kept for trajectory analyses
}

TEST_CASE("run_search keeps sweeping past failing models") {
  const auto inputs = small_inputs(9);
  int built = 0;
  backend_factory flaky = [&](const hyperparameter_sample& hp,
                              std::uint64_t seed) -> std::unique_ptr<model_backend> {
    if (built++ == 2) throw std::runtime_error("synthetic failure");
    return std::make_unique<toy_backend>(hp, seed, 16, 64);
  };
  search_options opts;
  opts.master_seed = 9;
  const auto result = run_search(small_space(), flaky, 5, inputs, opts);
  CHECK(result.table.rows() == 4);
  REQUIRE(result.failures.size() == 1);
  CHECK(result.failures[0].index == 2);
  CHECK(result.failures[0].model_id == "model_002");
}

TEST_CASE("table rows carry the hyperparameter columns") {
  const auto inputs = small_inputs(10);
  search_options opts;
  opts.master_seed = 21;
  const auto result =
      run_search(small_space(), toy_backend_factory(16, 64), 3, inputs, opts);
  REQUIRE(result.table.rows() == 3);
  for (const char* col : {"hms", "accuracy", "mse", "epochs", "validation_sequences",
                          "training_sequences", "batch_size", "learning_rate",
                          "filter_size"})
    CHECK(result.table.has_column(col));
  for (std::size_t i = 0; i < 3; ++i) {
    const auto expected = sample_space(small_space(), mix_seed(21, i));
    CHECK(result.table.column("epochs")[i] == static_cast<double>(expected.epochs));
    CHECK(result.table.column("learning_rate")[i] == expected.learning_rate);
  }
}

TEST_CASE("fixed configuration with varying seeds reproduces the across-network design") {
  hyperparameter_space space;
  space.epochs = int_range{15, 15};
  space.validation_sequences = int_range{20, 20};
  space.training_sequences = int_range{100, 100};
  space.batch_size = int_choice{{4}};
  space.learning_rate = real_range{1e-3, 1e-3, true};
  space.filter_size = int_choice{{3}};

  const auto inputs = small_inputs(11);
  search_options opts;
  opts.master_seed = 5;
  const auto result =
      run_search(space, toy_backend_factory(16, 64), 4, inputs, opts);
  REQUIRE(result.table.rows() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(result.table.column("epochs")[i] == 15.0);
    CHECK(result.table.column("learning_rate")[i] == 1e-3);
  }
  // same configuration, independent backends: metric values still vary
  const auto h = result.table.column("hms");
  bool varies = false;
  for (std::size_t i = 1; i < 4; ++i)
    if (h[i] != h[0]) varies = true;
  CHECK(varies);
}

}  // TEST_SUITE
