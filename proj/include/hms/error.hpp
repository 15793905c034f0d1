#pragma once

#include <stdexcept>
#include <string>

namespace hms {

// Base class for every error raised by this library.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct length_mismatch : error { using error::error; };
struct zero_variance_vector : error { using error::error; };
struct zero_norm_vector : error { using error::error; };
struct stimulus_mismatch : error { using error::error; };
struct degenerate_rdm : error { using error::error; };
struct degenerate_series : error { using error::error; };
struct empty_list : error { using error::error; };
struct too_few_frames : error { using error::error; };
struct singular_control : error { using error::error; };
struct invalid_p : error { using error::error; };
struct unknown_column : error { using error::error; };
struct dimension_mismatch : error { using error::error; };
struct invalid_space : error { using error::error; };
struct invalid_counts : error { using error::error; };
struct invalid_spec : error { using error::error; };
struct invalid_profile : error { using error::error; };
struct backend_failure : error { using error::error; };
struct missing_trajectory : error { using error::error; };
struct parse_error : error { using error::error; };

// Precondition violations that do not fit a more specific category.
struct invalid_input : error { using error::error; };

}  // namespace hms
