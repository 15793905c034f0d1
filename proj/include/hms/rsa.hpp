#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hms/error.hpp"
#include "hms/ranking.hpp"

namespace hms {

// Centered norms below this are treated as constant activation patterns.
inline constexpr double zero_variance_tolerance = 1e-12;

// Per-stimulus feature vectors: row i holds the feature values of stimulus i.
struct activation_matrix {
  std::vector<std::string> stimulus_ids;
  std::vector<std::vector<double>> values;

  std::size_t stimulus_count() const { return stimulus_ids.size(); }
  std::size_t feature_count() const { return values.empty() ? 0 : values.front().size(); }

  // m >= 3, n >= 2, rows rectangular, entries finite.
  void validate() const {
    if (stimulus_ids.size() != values.size())
      throw invalid_input("activation matrix: ids and rows differ in count");
    if (stimulus_ids.size() < 3)
      throw invalid_input("activation matrix: need at least 3 stimuli");
    const std::size_t n = feature_count();
    if (n < 2) throw invalid_input("activation matrix: need at least 2 features");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i].size() != n)
        throw length_mismatch("activation matrix: row " + stimulus_ids[i] +
                              " has inconsistent length");
      for (double v : values[i])
        if (!std::isfinite(v))
          throw invalid_input("activation matrix: non-finite value in row " +
                              stimulus_ids[i]);
    }
  }
};

// Representational dissimilarity matrix stored as the upper triangle in
// row-major pair order (1,2),(1,3),...,(1,m),(2,3),...,(m-1,m).
struct rdm {
  std::vector<std::string> stimulus_ids;
  std::vector<double> entries;

  std::size_t stimulus_count() const { return stimulus_ids.size(); }

  void validate() const {
    const std::size_t m = stimulus_ids.size();
    if (m < 2) throw invalid_input("rdm: need at least 2 stimuli");
    if (entries.size() != m * (m - 1) / 2)
      throw invalid_input("rdm: entry count does not match stimulus count");
    for (double e : entries)
      if (!(e >= 0.0 && e <= 2.0))
        throw invalid_input("rdm: entry outside [0,2]");
  }
};

// A stimulus presentation unrolled over time: one activation snapshot per
// time step, identical stimuli and feature count throughout.
struct activation_sequence {
  std::vector<activation_matrix> frames;

  std::size_t frame_count() const { return frames.size(); }
};

enum class pool_mode { mean, concat, last };

inline std::size_t pair_count(std::size_t m) { return m * (m - 1) / 2; }

// Canonical flat index of the unordered pair (i, j), 0-based, i < j.
inline std::size_t pair_index(std::size_t i, std::size_t j, std::size_t m) {
  return i * m - i * (i + 1) / 2 + (j - i - 1);
}

// Correlation distance: 1 - Pearson correlation of the two vectors.
inline double dissimilarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw length_mismatch("dissimilarity: vectors differ in length");
  if (a.size() < 2)
    throw invalid_input("dissimilarity: vectors need at least 2 entries");
  const std::size_t n = a.size();
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    dot += da * db;
    na += da * da;
    nb += db * db;
  }
  if (std::sqrt(na) < zero_variance_tolerance || std::sqrt(nb) < zero_variance_tolerance)
    throw zero_variance_vector("dissimilarity: constant activation pattern");
  const double r = dot / std::sqrt(na * nb);
  return std::clamp(1.0 - r, 0.0, 2.0);
}

// Builds the RDM of an activation matrix: one correlation distance per
// canonical stimulus pair.
inline rdm build_rdm(const activation_matrix& a) {
  a.validate();
  const std::size_t m = a.stimulus_count();
  // Check rows up front so the offending stimulus is named.
  for (std::size_t i = 0; i < m; ++i) {
    const auto& row = a.values[i];
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(row.size());
    double ss = 0.0;
    for (double v : row) ss += (v - mean) * (v - mean);
    if (std::sqrt(ss) < zero_variance_tolerance)
      throw zero_variance_vector("build_rdm: zero-variance activations for stimulus " +
                                 a.stimulus_ids[i]);
  }
  rdm r;
  r.stimulus_ids = a.stimulus_ids;
  r.entries.reserve(pair_count(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      r.entries.push_back(dissimilarity(a.values[i], a.values[j]));
  return r;
}

// The flattened RDM is the stored upper-triangle vector itself.
inline const std::vector<double>& flatten(const rdm& r) { return r.entries; }

// Human-model similarity: Spearman rank correlation of the two flattened
// RDMs. Requires identical stimuli in identical order.
inline double hms(const rdm& r1, const rdm& r2) {
  if (r1.stimulus_ids != r2.stimulus_ids)
    throw stimulus_mismatch("hms: RDMs built from different stimuli");
  const auto& f1 = flatten(r1);
  const auto& f2 = flatten(r2);
  const auto all_tied = [](const std::vector<double>& v) {
    for (double e : v)
      if (e != v.front()) return false;
    return true;
  };
  if (f1.empty() || all_tied(f1) || all_tied(f2))
    throw degenerate_rdm("hms: all RDM entries tied; correlation undefined");
  return spearman_rho(f1, f2);
}

// Element-wise mean of RDMs over the same stimuli.
inline rdm average_rdms(std::span<const rdm> rdms) {
  if (rdms.empty()) throw empty_list("average_rdms: empty list");
  const auto& first = rdms.front();
  rdm out;
  out.stimulus_ids = first.stimulus_ids;
  out.entries.assign(first.entries.size(), 0.0);
  for (const auto& r : rdms) {
    if (r.stimulus_ids != first.stimulus_ids)
      throw stimulus_mismatch("average_rdms: RDMs built from different stimuli");
    for (std::size_t k = 0; k < out.entries.size(); ++k) out.entries[k] += r.entries[k];
  }
  for (double& e : out.entries) e /= static_cast<double>(rdms.size());
  return out;
}

// Drops the first time step (the blank prediction) and combines the rest.
inline activation_matrix temporal_pool(const activation_sequence& seq, pool_mode mode) {
  if (seq.frame_count() < 2)
    throw too_few_frames("temporal_pool: need at least 2 frames");
  const auto& head = seq.frames.front();
  for (const auto& f : seq.frames) {
    if (f.stimulus_ids != head.stimulus_ids)
      throw stimulus_mismatch("temporal_pool: frames disagree on stimuli");
    if (f.feature_count() != head.feature_count())
      throw length_mismatch("temporal_pool: frames disagree on feature count");
  }
  const std::size_t m = head.stimulus_count();
  const std::size_t n = head.feature_count();
  const std::size_t kept = seq.frame_count() - 1;

  activation_matrix out;
  out.stimulus_ids = head.stimulus_ids;
  out.values.resize(m);
  switch (mode) {
    case pool_mode::mean:
      for (std::size_t i = 0; i < m; ++i) {
        out.values[i].assign(n, 0.0);
        for (std::size_t t = 1; t < seq.frame_count(); ++t)
          for (std::size_t f = 0; f < n; ++f)
            out.values[i][f] += seq.frames[t].values[i][f];
        for (double& v : out.values[i]) v /= static_cast<double>(kept);
      }
      break;
    case pool_mode::concat:
      for (std::size_t i = 0; i < m; ++i) {
        out.values[i].reserve(kept * n);
        for (std::size_t t = 1; t < seq.frame_count(); ++t)
          out.values[i].insert(out.values[i].end(), seq.frames[t].values[i].begin(),
                               seq.frames[t].values[i].end());
      }
      break;
    case pool_mode::last:
      for (std::size_t i = 0; i < m; ++i) out.values[i] = seq.frames.back().values[i];
      break;
  }
  return out;
}

}  // namespace hms
