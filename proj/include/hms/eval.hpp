#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hms/error.hpp"

namespace hms {

inline constexpr double zero_norm_tolerance = 1e-12;

// A grayscale (channels = 1) or interleaved RGB (channels = 3) image with
// intensities in [0, 1].
struct frame {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<double> pixels;

  std::size_t pixel_count() const { return width * height * channels; }

  void validate() const {
    if (width < 1 || height < 1 || (channels != 1 && channels != 3))
      throw invalid_input("frame: bad dimensions");
    if (pixels.size() != pixel_count())
      throw invalid_input("frame: pixel buffer does not match dimensions");
    for (double v : pixels)
      if (!(v >= 0.0 && v <= 1.0))
        throw invalid_input("frame: pixel intensity outside [0,1]");
  }
};

// Mean over pixels of squared differences between the two frames.
inline double next_frame_mse(const frame& predicted, const frame& actual) {
  if (predicted.width != actual.width || predicted.height != actual.height ||
      predicted.channels != actual.channels)
    throw dimension_mismatch("next_frame_mse: frames differ in shape");
  double ss = 0.0;
  for (std::size_t i = 0; i < predicted.pixels.size(); ++i) {
    const double d = predicted.pixels[i] - actual.pixels[i];
    ss += d * d;
  }
  return ss / static_cast<double>(predicted.pixels.size());
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw length_mismatch("cosine_similarity: vectors differ in length");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (std::sqrt(na) < zero_norm_tolerance || std::sqrt(nb) < zero_norm_tolerance)
    throw zero_norm_vector("cosine_similarity: zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// One probe/gallery retrieval trial: the gallery holds exactly one correct
// item at true_index.
struct matching_trial {
  std::vector<double> probe;
  std::vector<std::vector<double>> gallery;
  std::size_t true_index = 0;

  void validate() const {
    if (gallery.size() < 2) throw invalid_input("matching_trial: gallery too small");
    if (true_index >= gallery.size())
      throw invalid_input("matching_trial: true_index out of range");
    if (probe.size() < 2) throw invalid_input("matching_trial: vectors too short");
    for (const auto& g : gallery)
      if (g.size() != probe.size())
        throw length_mismatch("matching_trial: gallery vector length mismatch");
  }
};

struct match_outcome {
  std::size_t predicted_index = 0;
  bool correct = false;
};

// Predicted match is the gallery item with the highest cosine similarity to
// the probe; ties break toward the lowest index.
inline match_outcome match_trial(const matching_trial& t) {
  t.validate();
  std::size_t best = 0;
  double best_sim = 0.0;
  for (std::size_t i = 0; i < t.gallery.size(); ++i) {
    double sim = 0.0;
    try {
      sim = cosine_similarity(t.probe, t.gallery[i]);
    } catch (const zero_norm_vector&) {
      throw zero_norm_vector("match_trial: zero-norm vector at gallery index " +
                             std::to_string(i));
    }
    if (i == 0 || sim > best_sim) {
      best = i;
      best_sim = sim;
    }
  }
  return {best, best == t.true_index};
}

inline double matching_accuracy(std::span<const matching_trial> trials) {
  if (trials.empty()) throw empty_list("matching_accuracy: no trials");
  std::size_t correct = 0;
  for (const auto& t : trials)
    if (match_trial(t).correct) ++correct;
  return static_cast<double>(correct) / static_cast<double>(trials.size());
}

}  // namespace hms
