#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hms/error.hpp"
#include "hms/stats.hpp"

namespace hms {

// A per-model time series of one metric sampled at checkpoint epochs.
// Epochs are strictly increasing; checkpoints with no value are absent.
struct metric_trajectory {
  struct point {
    int epoch = 0;
    double value = 0.0;
  };

  std::string metric_name;
  std::vector<point> points;

  void validate() const {
    for (std::size_t i = 0; i + 1 < points.size(); ++i)
      if (points[i].epoch >= points[i + 1].epoch)
        throw invalid_input("metric trajectory: epochs not strictly increasing");
    for (const auto& pt : points)
      if (!std::isfinite(pt.value))
        throw invalid_input("metric trajectory: non-finite value");
  }
};

enum class stop_policy { stability, threshold };

struct stop_decision {
  stop_policy policy = stop_policy::stability;
  bool stopped = false;
  std::optional<int> stop_epoch;
  // stability detail: sample SD of the window that triggered the stop
  std::optional<double> window_sd;
  // threshold detail: the gated value and the threshold it was compared to
  std::optional<double> value;
  std::optional<double> threshold;
};

// Earliest checkpoint epoch e whose trailing half-open window
// (e - window_epochs, e] has sample SD <= sd_tol. The window must fit inside
// the training timeline (e >= window_epochs) and hold at least two
// checkpoints. A window larger than the trajectory simply never stops.
inline stop_decision stability_stop(const metric_trajectory& t,
                                    int window_epochs = 25, double sd_tol = 0.01) {
  if (window_epochs < 1) throw invalid_input("stability_stop: window must be >= 1");
  if (!(sd_tol >= 0.0)) throw invalid_input("stability_stop: bad tolerance");
  t.validate();
  stop_decision dec;
  dec.policy = stop_policy::stability;
  std::vector<double> window;
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    const int e = t.points[i].epoch;
    if (e < window_epochs) continue;
    window.clear();
    for (const auto& pt : t.points)
      if (pt.epoch > e - window_epochs && pt.epoch <= e) window.push_back(pt.value);
    if (window.size() < 2) continue;
    const double sd = sample_sd(window);
    if (sd <= sd_tol) {
      dec.stopped = true;
      dec.stop_epoch = e;
      dec.window_sd = sd;
      return dec;
    }
  }
  return dec;
}

// Strict comparison: values below the threshold stop (discard); values at or
// above it are retained.
inline stop_decision threshold_stop(double hms_value, double threshold) {
  if (!std::isfinite(hms_value) || !std::isfinite(threshold))
    throw invalid_input("threshold_stop: non-finite input");
  stop_decision dec;
  dec.policy = stop_policy::threshold;
  dec.value = hms_value;
  dec.threshold = threshold;
  dec.stopped = hms_value < threshold;
  return dec;
}

// Mean plus one sample standard deviation of the series.
inline double compute_threshold(std::span<const double> hms_values) {
  if (hms_values.size() < 2)
    throw degenerate_series("compute_threshold: need N >= 2");
  return mean_of(hms_values) + sample_sd(hms_values);
}

enum class gate_point { stable, final_epoch };

struct savings_policy {
  stop_policy policy = stop_policy::stability;
  std::string metric = "hms";
  int window_epochs = 25;
  double sd_tol = 0.01;
  // threshold policy only
  std::optional<double> threshold;
  gate_point gate_at = gate_point::stable;
};

struct model_savings {
  std::string model_id;
  int full_epochs = 0;
  int stopped_epochs = 0;
  bool retained = true;
  std::optional<int> stop_epoch;  // present iff training halted early
};

struct savings_report {
  std::vector<model_savings> models;
  double total_saved_fraction = 0.0;
  std::vector<std::string> retained_model_ids;
  std::vector<std::string> discarded_model_ids;
  std::vector<std::string> missing_trajectory_ids;
};

// One model's trajectory bundle as consumed by the savings analysis.
struct trajectory_record {
  std::string model_id;
  std::map<std::string, metric_trajectory> trajectories;
  int full_epochs = 0;
};

// Applies an early-stopping policy to every model's metric trajectory.
//
// stability: training stops at the stability epoch; models whose metric
// never stabilizes run to the end and are discarded as unconverged.
// threshold: every model stops at its gate epoch (the stability epoch, or
// the final checkpoint when gating at final or never stable); models whose
// gated value falls below the threshold are discarded.
inline savings_report savings_analysis(std::span<const trajectory_record> records,
                                       const savings_policy& policy) {
  if (records.empty()) throw empty_list("savings_analysis: no records");
  if (policy.policy == stop_policy::threshold && !policy.threshold)
    throw invalid_input("savings_analysis: threshold policy needs a threshold");

  savings_report report;
  long long sum_full = 0, sum_stopped = 0;
  for (const auto& rec : records) {
    const auto it = rec.trajectories.find(policy.metric);
    if (it == rec.trajectories.end() || it->second.points.empty()) {
      report.missing_trajectory_ids.push_back(rec.model_id);
      continue;
    }
    const metric_trajectory& traj = it->second;
    const int full = rec.full_epochs > 0 ? rec.full_epochs : traj.points.back().epoch;

    model_savings ms;
    ms.model_id = rec.model_id;
    ms.full_epochs = full;

    const auto stab = stability_stop(traj, policy.window_epochs, policy.sd_tol);
    if (policy.policy == stop_policy::stability) {
      ms.retained = stab.stopped;
      ms.stopped_epochs = stab.stopped ? *stab.stop_epoch : full;
      if (stab.stopped && *stab.stop_epoch < full) ms.stop_epoch = stab.stop_epoch;
    } else {
      const bool gate_at_stable =
          policy.gate_at == gate_point::stable && stab.stopped;
      const int gate_epoch =
          gate_at_stable ? *stab.stop_epoch : traj.points.back().epoch;
      double gate_value = traj.points.back().value;
      for (const auto& pt : traj.points)
        if (pt.epoch == gate_epoch) gate_value = pt.value;
      const auto dec = threshold_stop(gate_value, *policy.threshold);
      ms.retained = !dec.stopped;
      ms.stopped_epochs = gate_at_stable ? gate_epoch : full;
      if (ms.stopped_epochs < full) ms.stop_epoch = ms.stopped_epochs;
    }

    sum_full += ms.full_epochs;
    sum_stopped += ms.stopped_epochs;
    (ms.retained ? report.retained_model_ids : report.discarded_model_ids)
        .push_back(ms.model_id);
    report.models.push_back(std::move(ms));
  }
  if (sum_full > 0)
    report.total_saved_fraction =
        1.0 - static_cast<double>(sum_stopped) / static_cast<double>(sum_full);
  return report;
}

struct retention_summary {
  std::size_t retained_count = 0;
  std::size_t discarded_count = 0;
  std::optional<double> retained_max, retained_mean;
  std::optional<double> discarded_max, discarded_mean;
  std::string best_model_id;
  bool best_retained = false;
};

// Compares the retained and discarded partitions on one metric column and
// reports whether the globally best model survived.
inline retention_summary retention_quality(const savings_report& report,
                                           const metric_table& table,
                                           const std::string& metric) {
  const auto col = table.column(metric);
  const auto index_of = [&](const std::string& id) -> std::size_t {
    for (std::size_t i = 0; i < table.model_ids.size(); ++i)
      if (table.model_ids[i] == id) return i;
    throw invalid_input("retention_quality: model " + id + " not in table");
  };

  retention_summary out;
  const auto collect = [&](const std::vector<std::string>& ids,
                           std::optional<double>& max_out,
                           std::optional<double>& mean_out) {
    if (ids.empty()) return;
    double mx = col[index_of(ids.front())];
    double sum = 0.0;
    for (const auto& id : ids) {
      const double v = col[index_of(id)];
      mx = std::max(mx, v);
      sum += v;
    }
    max_out = mx;
    mean_out = sum / static_cast<double>(ids.size());
  };
  collect(report.retained_model_ids, out.retained_max, out.retained_mean);
  collect(report.discarded_model_ids, out.discarded_max, out.discarded_mean);
  out.retained_count = report.retained_model_ids.size();
  out.discarded_count = report.discarded_model_ids.size();

  std::size_t best = 0;
  for (std::size_t i = 1; i < table.rows(); ++i)
    if (col[i] > col[best]) best = i;
  out.best_model_id = table.model_ids[best];
  out.best_retained =
      std::find(report.retained_model_ids.begin(), report.retained_model_ids.end(),
                out.best_model_id) != report.retained_model_ids.end();
  return out;
}

}  // namespace hms
