#include "hms/earlystop.hpp"

#include <cmath>

#include "doctest.h"
#include "hms/rng.hpp"

using namespace hms;

namespace {

metric_trajectory traj_from(const std::vector<std::pair<int, double>>& pts,
                            const std::string& name = "hms") {
  metric_trajectory t;
  t.metric_name = name;
  for (const auto& [e, v] : pts) t.points.push_back({e, v});
  return t;
}

metric_trajectory constant_traj(int first, int last, int step, double value) {
  metric_trajectory t;
  t.metric_name = "hms";
  for (int e = first; e <= last; e += step) t.points.push_back({e, value});
  return t;
}

}  // namespace

TEST_SUITE("earlystop") {

TEST_CASE("stability_stop fires at the first complete quiet window") {
  const auto flat = constant_traj(5, 50, 5, 0.42);
  const auto dec = stability_stop(flat, 25, 0.01);
  REQUIRE(dec.stopped);
  CHECK(*dec.stop_epoch == 25);
  CHECK(*dec.window_sd < 1e-12);
}

TEST_CASE("stability_stop never fires on a steadily rising metric") {
  metric_trajectory rising;
  rising.metric_name = "hms";
  double v = 0.0;
  for (int e = 5; e <= 150; e += 5) {
    rising.points.push_back({e, v});
    v += 0.1;
  }
  CHECK_FALSE(stability_stop(rising, 25, 0.01).stopped);
}

TEST_CASE("stability_stop excludes points outside the trailing window") {
  // hand-derived: at e=25 the window still holds the 0.3 outlier (SD 0.0537),
  // at e=30 the window (5,30] holds only 0.18s and the SD drops to 0
  const auto t = traj_from({{5, 0.3},
                            {10, 0.18},
                            {15, 0.18},
                            {20, 0.18},
                            {25, 0.18},
                            {30, 0.18},
                            {35, 0.18}});
  const auto dec = stability_stop(t, 25, 0.01);
  REQUIRE(dec.stopped);
  CHECK(*dec.stop_epoch == 30);
}

TEST_CASE("stability_stop on a window larger than the trajectory is not fatal") {
  const auto t = constant_traj(5, 20, 5, 0.1);
  const auto dec = stability_stop(t, 25, 0.01);
  CHECK_FALSE(dec.stopped);
  CHECK_FALSE(dec.stop_epoch.has_value());
}

TEST_CASE("stability_stop is monotone in the tolerance") {
  rng g(19);
  for (int rep = 0; rep < 30; ++rep) {
    metric_trajectory t;
    t.metric_name = "hms";
    double v = g.uniform01();
    for (int e = 5; e <= 150; e += 5) {
      v += g.normal(0.0, 0.02) * std::exp(-e / 40.0);
      t.points.push_back({e, v});
    }
    const auto tight = stability_stop(t, 25, 0.005);
    const auto loose = stability_stop(t, 25, 0.02);
    if (tight.stopped) {
      REQUIRE(loose.stopped);
      CHECK(*loose.stop_epoch <= *tight.stop_epoch);
    }
    if (loose.stopped) CHECK(*loose.stop_epoch >= 25);  // never before the window fits
  }
}

TEST_CASE("threshold_stop is strict at the boundary") {
  CHECK(threshold_stop(0.160, 0.161).stopped);
  CHECK_FALSE(threshold_stop(0.161, 0.161).stopped);
  CHECK_FALSE(threshold_stop(0.2, 0.161).stopped);
  const auto dec = threshold_stop(0.1, 0.161);
  CHECK(*dec.value == 0.1);
  CHECK(*dec.threshold == 0.161);
}

TEST_CASE("threshold_stop partitions a value set at the threshold") {
  rng g(29);
  const double th = 0.161;
  for (int rep = 0; rep < 200; ++rep) {
    const double v = g.uniform(0.0, 0.3);
    const auto dec = threshold_stop(v, th);
    CHECK(dec.stopped == (v < th));
  }
}

TEST_CASE("compute_threshold is mean plus one sample SD") {
  const std::vector<double> pair{0.0, 1.0};
  CHECK(compute_threshold(pair) ==
        doctest::Approx(0.5 + std::sqrt(0.5)).epsilon(1e-15));

  const std::vector<double> flat{0.3, 0.3, 0.3};
  CHECK(compute_threshold(flat) == doctest::Approx(0.3));

  const std::vector<double> lone{0.3};
  CHECK_THROWS_AS((void)compute_threshold(lone), degenerate_series);
}

TEST_CASE("compute_threshold reproduces the 0.161 gate from the sample moments") {
  // two points with sample mean 0.106 and sample SD 0.055
  const double half_gap = 0.055 * std::sqrt(0.5);
  const std::vector<double> series{0.106 - half_gap, 0.106 + half_gap};
  CHECK(compute_threshold(series) == doctest::Approx(0.161).epsilon(5e-4));
}

TEST_CASE("the 0.161 gate retains roughly 13 of 95 models at the reported moments") {
  // 95 normal scores standardized to sample mean 0.106 and sample SD 0.055,
  // matching the distribution the threshold was derived from
  rng g(83);
  std::vector<double> raw(95);
  for (double& v : raw) v = g.normal(0.0, 1.0);
  const double m = mean_of(raw);
  const double sd = sample_sd(raw);
  std::vector<double> series(95);
  for (std::size_t i = 0; i < series.size(); ++i)
    series[i] = 0.106 + 0.055 * (raw[i] - m) / sd;

  const double threshold = compute_threshold(series);
  CHECK(threshold == doctest::Approx(0.161).epsilon(5e-4));
  std::size_t retained = 0;
  for (double v : series)
    if (!threshold_stop(v, threshold).stopped) ++retained;
  // one-SD exceedance of a normal sample: ~16%, reported 13/95 (13.7%)
  CHECK(retained >= 8);
  CHECK(retained <= 22);
}

TEST_CASE("savings_analysis with the stability policy") {
  std::vector<trajectory_record> records;
  for (int i = 0; i < 4; ++i) {
    trajectory_record rec;
    rec.model_id = "model_" + std::to_string(i);
    rec.full_epochs = 150;
    rec.trajectories["hms"] = constant_traj(5, 150, 5, 0.2);
    records.push_back(std::move(rec));
  }
  savings_policy policy;
  const auto report = savings_analysis(records, policy);
  CHECK(report.total_saved_fraction ==
        doctest::Approx(1.0 - 25.0 / 150.0).epsilon(1e-9));
  CHECK(report.retained_model_ids.size() == 4);
  CHECK(report.discarded_model_ids.empty());
  for (const auto& m : report.models) CHECK(m.stopped_epochs == 25);
}

TEST_CASE("savings_analysis when nothing stabilizes saves nothing") {
  std::vector<trajectory_record> records;
  for (int i = 0; i < 3; ++i) {
    trajectory_record rec;
    rec.model_id = "model_" + std::to_string(i);
    rec.full_epochs = 100;
    metric_trajectory t;
    t.metric_name = "hms";
    double v = 0.0;
    for (int e = 5; e <= 100; e += 5) {
      v += 0.05;
      t.points.push_back({e, v});
    }
    rec.trajectories["hms"] = std::move(t);
    records.push_back(std::move(rec));
  }
  const auto report = savings_analysis(records, savings_policy{});
  CHECK(report.total_saved_fraction == 0.0);
  for (const auto& m : report.models) CHECK(m.stopped_epochs == m.full_epochs);
}

TEST_CASE("savings_analysis with the threshold policy gates at stability") {
  std::vector<trajectory_record> records;
  // stabilizes high -> retained; stabilizes low -> discarded at the gate
  trajectory_record high;
  high.model_id = "high";
  high.full_epochs = 150;
  high.trajectories["hms"] = constant_traj(5, 150, 5, 0.3);
  trajectory_record low;
  low.model_id = "low";
  low.full_epochs = 150;
  low.trajectories["hms"] = constant_traj(5, 150, 5, 0.05);
  records.push_back(high);
  records.push_back(low);

  savings_policy policy;
  policy.policy = stop_policy::threshold;
  policy.threshold = 0.161;
  const auto report = savings_analysis(records, policy);
  CHECK(report.retained_model_ids == std::vector<std::string>{"high"});
  CHECK(report.discarded_model_ids == std::vector<std::string>{"low"});
  for (const auto& m : report.models) CHECK(m.stopped_epochs == 25);

  policy.gate_at = gate_point::final_epoch;
  const auto post_hoc = savings_analysis(records, policy);
  CHECK(post_hoc.total_saved_fraction == 0.0);
  CHECK(post_hoc.retained_model_ids == std::vector<std::string>{"high"});
}

TEST_CASE("savings_analysis flags missing trajectories") {
  trajectory_record rec;
  rec.model_id = "no_hms";
  rec.full_epochs = 50;
  rec.trajectories["accuracy"] = constant_traj(5, 50, 5, 0.4);
  const std::vector<trajectory_record> records{rec};
  const auto report = savings_analysis(records, savings_policy{});
  CHECK(report.models.empty());
  CHECK(report.missing_trajectory_ids == std::vector<std::string>{"no_hms"});
}

TEST_CASE("retention_quality compares the partitions") {
  metric_table table;
  table.model_ids = {"a", "b", "c", "d"};
  table.add_column("accuracy", {0.9, 0.8, 0.2, 0.1});

  savings_report report;
  report.retained_model_ids = {"a", "b"};
  report.discarded_model_ids = {"c", "d"};
  const auto q = retention_quality(report, table, "accuracy");
  CHECK(q.retained_count == 2);
  CHECK(*q.retained_max == doctest::Approx(0.9));
  CHECK(*q.retained_mean == doctest::Approx(0.85));
  CHECK(*q.discarded_mean == doctest::Approx(0.15));
  CHECK(q.best_model_id == "a");
  CHECK(q.best_retained);

  savings_report all_retained;
  all_retained.retained_model_ids = {"a", "b", "c", "d"};
  const auto q2 = retention_quality(all_retained, table, "accuracy");
  CHECK(*q2.retained_mean == doctest::Approx(0.5));
  CHECK_FALSE(q2.discarded_mean.has_value());
  CHECK(q2.best_retained);

  savings_report dropped_best;
  dropped_best.retained_model_ids = {"b"};
  dropped_best.discarded_model_ids = {"a", "c", "d"};
  const auto q3 = retention_quality(dropped_best, table, "accuracy");
  CHECK_FALSE(q3.best_retained);
  CHECK(*q3.retained_mean > *q3.discarded_mean);

  CHECK_THROWS_AS((void)retention_quality(report, table, "nope"), unknown_column);
}

}  // TEST_SUITE
