#pragma once

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hms/earlystop.hpp"
#include "hms/error.hpp"
#include "hms/eval.hpp"
#include "hms/rng.hpp"
#include "hms/rsa.hpp"
#include "hms/search.hpp"
#include "hms/stats.hpp"
#include "hms/version.hpp"

namespace hms {

// ---------------------------------------------------------------------------
// Numeric formatting and parsing
// ---------------------------------------------------------------------------

// 17 significant digits: doubles survive a write/read cycle value-exact, and
// re-serializing gives byte-identical text.
inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string format_fixed(double v, int places) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", places, v);
  return buf;
}

inline double parse_double(std::string_view field) {
  double out = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last)
    throw parse_error("bad numeric field '" + std::string(field) + "'");
  return out;
}

inline long long parse_int(std::string_view field) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw parse_error("bad integer field '" + std::string(field) + "'");
  return out;
}

inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

// Splits into lines, tolerating CRLF and a trailing newline.
inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

// ---------------------------------------------------------------------------
// Atomic file IO
// ---------------------------------------------------------------------------

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to a temporary file in the same directory and renames on success,
// so failures never leave partial output behind.
inline void atomic_write_file(const std::filesystem::path& path,
                              std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path dir = path.parent_path().empty() ? "." : path.parent_path();
  fs::create_directories(dir);
  static std::atomic<unsigned> counter{0};
  const fs::path tmp =
      dir / (path.filename().string() + ".tmp" + std::to_string(counter.fetch_add(1)));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp);
      throw error("write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// RDM file: header, stimulus ids, one line of upper-triangle entries
// ---------------------------------------------------------------------------

inline std::string encode_rdm(const rdm& r) {
  r.validate();
  std::string out = "rdm,v1,m=" + std::to_string(r.stimulus_count()) + "\n";
  for (std::size_t i = 0; i < r.stimulus_ids.size(); ++i) {
    if (i) out += ',';
    out += r.stimulus_ids[i];
  }
  out += '\n';
  for (std::size_t k = 0; k < r.entries.size(); ++k) {
    if (k) out += ',';
    out += format_g17(r.entries[k]);
  }
  out += '\n';
  return out;
}

inline rdm decode_rdm(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.size() != 3) throw parse_error("rdm file: expected 3 lines");
  constexpr std::string_view prefix = "rdm,v1,m=";
  if (lines[0].rfind(prefix, 0) != 0)
    throw parse_error("rdm file: bad header '" + lines[0] + "'");
  const auto m = static_cast<std::size_t>(parse_int(
      std::string_view(lines[0]).substr(prefix.size())));
  rdm r;
  r.stimulus_ids = split_csv(lines[1]);
  if (r.stimulus_ids.size() != m)
    throw parse_error("rdm file: header says m=" + std::to_string(m) + " but " +
                      std::to_string(r.stimulus_ids.size()) + " ids given");
  const auto fields = split_csv(lines[2]);
  if (fields.size() != pair_count(m))
    throw parse_error("rdm file: wrong entry count");
  r.entries.reserve(fields.size());
  for (const auto& f : fields) r.entries.push_back(parse_double(f));
  try {
    r.validate();
  } catch (const error& e) {
    throw parse_error(std::string("rdm file: ") + e.what());
  }
  return r;
}

inline rdm read_rdm(const std::filesystem::path& path) {
  return decode_rdm(read_text_file(path));
}

inline void write_rdm(const std::filesystem::path& path, const rdm& r) {
  atomic_write_file(path, encode_rdm(r));
}

// ---------------------------------------------------------------------------
// Activation matrix CSV: stimulus_id,f1,...,fn
// ---------------------------------------------------------------------------

inline std::string encode_activation_matrix(const activation_matrix& a) {
  a.validate();
  std::string out = "stimulus_id";
  for (std::size_t f = 1; f <= a.feature_count(); ++f)
    out += ",f" + std::to_string(f);
  out += '\n';
  for (std::size_t i = 0; i < a.stimulus_count(); ++i) {
    out += a.stimulus_ids[i];
    for (double v : a.values[i]) {
      out += ',';
      out += format_g17(v);
    }
    out += '\n';
  }
  return out;
}

inline activation_matrix decode_activation_matrix(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.size() < 2) throw parse_error("activation csv: no data rows");
  const auto header = split_csv(lines[0]);
  if (header.empty() || header[0] != "stimulus_id")
    throw parse_error("activation csv: header must start with stimulus_id");
  const std::size_t n = header.size() - 1;
  activation_matrix a;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = split_csv(lines[li]);
    if (fields.size() != n + 1)
      throw parse_error("activation csv: row " + std::to_string(li + 1) +
                        " has wrong field count");
    a.stimulus_ids.push_back(fields[0]);
    std::vector<double> row;
    row.reserve(n);
    for (std::size_t f = 1; f < fields.size(); ++f) row.push_back(parse_double(fields[f]));
    a.values.push_back(std::move(row));
  }
  try {
    a.validate();
  } catch (const error& e) {
    throw parse_error(std::string("activation csv: ") + e.what());
  }
  return a;
}

inline activation_matrix read_activation_matrix(const std::filesystem::path& path) {
  return decode_activation_matrix(read_text_file(path));
}

inline void write_activation_matrix(const std::filesystem::path& path,
                                    const activation_matrix& a) {
  atomic_write_file(path, encode_activation_matrix(a));
}

// ---------------------------------------------------------------------------
// Metric table CSV: model_id,<col>...
// ---------------------------------------------------------------------------

inline std::string encode_metric_table(const metric_table& t) {
  std::string out = "model_id";
  for (const auto& name : t.column_names) out += "," + name;
  out += '\n';
  for (std::size_t r = 0; r < t.rows(); ++r) {
    out += t.model_ids[r];
    for (const auto& col : t.columns) {
      out += ',';
      out += format_g17(col[r]);
    }
    out += '\n';
  }
  return out;
}

inline metric_table decode_metric_table(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw parse_error("metric table csv: empty file");
  const auto header = split_csv(lines[0]);
  if (header.empty() || header[0] != "model_id")
    throw parse_error("metric table csv: header must start with model_id");
  metric_table t;
  std::vector<std::vector<double>> cols(header.size() - 1);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = split_csv(lines[li]);
    if (fields.size() != header.size())
      throw parse_error("metric table csv: row " + std::to_string(li + 1) +
                        " has wrong field count");
    t.model_ids.push_back(fields[0]);
    for (std::size_t c = 1; c < fields.size(); ++c)
      cols[c - 1].push_back(parse_double(fields[c]));
  }
  try {
    for (std::size_t c = 1; c < header.size(); ++c)
      t.add_column(header[c], std::move(cols[c - 1]));
  } catch (const error& e) {
    throw parse_error(std::string("metric table csv: ") + e.what());
  }
  return t;
}

inline metric_table read_metric_table(const std::filesystem::path& path) {
  return decode_metric_table(read_text_file(path));
}

inline void write_metric_table(const std::filesystem::path& path, const metric_table& t) {
  atomic_write_file(path, encode_metric_table(t));
}

// ---------------------------------------------------------------------------
// Per-model trajectory CSV: epoch,hms,accuracy,mse (blank = missing)
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& trajectory_metric_names() {
  static const std::vector<std::string> names = {"hms", "accuracy", "mse"};
  return names;
}

inline std::string encode_trajectories(
    const std::map<std::string, metric_trajectory>& trajectories) {
  std::vector<int> epochs;
  for (const auto& [name, traj] : trajectories)
    for (const auto& pt : traj.points) epochs.push_back(pt.epoch);
  std::sort(epochs.begin(), epochs.end());
  epochs.erase(std::unique(epochs.begin(), epochs.end()), epochs.end());

  std::string out = "epoch";
  for (const auto& name : trajectory_metric_names()) out += "," + name;
  out += '\n';
  for (int e : epochs) {
    out += std::to_string(e);
    for (const auto& name : trajectory_metric_names()) {
      out += ',';
      const auto it = trajectories.find(name);
      if (it == trajectories.end()) continue;
      for (const auto& pt : it->second.points)
        if (pt.epoch == e) {
          out += format_g17(pt.value);
          break;
        }
    }
    out += '\n';
  }
  return out;
}

inline std::map<std::string, metric_trajectory> decode_trajectories(
    std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw parse_error("trajectory csv: empty file");
  const auto header = split_csv(lines[0]);
  if (header.empty() || header[0] != "epoch")
    throw parse_error("trajectory csv: header must start with epoch");
  std::map<std::string, metric_trajectory> out;
  for (std::size_t c = 1; c < header.size(); ++c)
    out[header[c]] = {header[c], {}};
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = split_csv(lines[li]);
    if (fields.size() != header.size())
      throw parse_error("trajectory csv: row " + std::to_string(li + 1) +
                        " has wrong field count");
    const int epoch = static_cast<int>(parse_int(fields[0]));
    for (std::size_t c = 1; c < fields.size(); ++c) {
      if (fields[c].empty()) continue;
      out[header[c]].points.push_back({epoch, parse_double(fields[c])});
    }
  }
  for (auto& [name, traj] : out) {
    try {
      traj.validate();
    } catch (const error& e) {
      throw parse_error(std::string("trajectory csv: ") + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matching trial CSV: trial,role,index,is_true,f1,...,fd
// ---------------------------------------------------------------------------

inline std::string encode_matching_trials(std::span<const matching_trial> trials) {
  if (trials.empty()) throw empty_list("encode_matching_trials: no trials");
  const std::size_t dim = trials.front().probe.size();
  std::string out = "trial,role,index,is_true";
  for (std::size_t f = 1; f <= dim; ++f) out += ",f" + std::to_string(f);
  out += '\n';
  const auto emit = [&](std::size_t trial, const char* role, std::size_t index,
                        bool is_true, const std::vector<double>& v) {
    out += std::to_string(trial);
    out += ',';
    out += role;
    out += ',' + std::to_string(index) + ',' + (is_true ? "1" : "0");
    for (double x : v) {
      out += ',';
      out += format_g17(x);
    }
    out += '\n';
  };
  for (std::size_t t = 0; t < trials.size(); ++t) {
    emit(t, "probe", 0, false, trials[t].probe);
    for (std::size_t g = 0; g < trials[t].gallery.size(); ++g)
      emit(t, "gallery", g, g == trials[t].true_index, trials[t].gallery[g]);
  }
  return out;
}

inline std::vector<matching_trial> decode_matching_trials(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.size() < 2) throw parse_error("trial csv: no data rows");
  const auto header = split_csv(lines[0]);
  if (header.size() < 5 || header[0] != "trial" || header[1] != "role" ||
      header[2] != "index" || header[3] != "is_true")
    throw parse_error("trial csv: bad header");
  const std::size_t dim = header.size() - 4;

  std::map<long long, matching_trial> by_trial;
  std::map<long long, std::optional<std::size_t>> true_index;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = split_csv(lines[li]);
    if (fields.size() != header.size())
      throw parse_error("trial csv: row " + std::to_string(li + 1) +
                        " has wrong field count");
    const long long trial = parse_int(fields[0]);
    std::vector<double> v;
    v.reserve(dim);
    for (std::size_t f = 4; f < fields.size(); ++f) v.push_back(parse_double(fields[f]));
    auto& mt = by_trial[trial];
    if (fields[1] == "probe") {
      if (!mt.probe.empty()) throw parse_error("trial csv: duplicate probe");
      mt.probe = std::move(v);
    } else if (fields[1] == "gallery") {
      if (fields[3] == "1") {
        if (true_index[trial].has_value())
          throw parse_error("trial csv: multiple true gallery items in trial " +
                            std::to_string(trial));
        true_index[trial] = mt.gallery.size();
      } else if (fields[3] != "0") {
        throw parse_error("trial csv: is_true must be 0 or 1");
      }
      mt.gallery.push_back(std::move(v));
    } else {
      throw parse_error("trial csv: role must be probe or gallery");
    }
  }
  std::vector<matching_trial> out;
  out.reserve(by_trial.size());
  for (auto& [trial, mt] : by_trial) {
    if (mt.probe.empty())
      throw parse_error("trial csv: trial " + std::to_string(trial) + " has no probe");
    if (!true_index[trial].has_value())
      throw parse_error("trial csv: trial " + std::to_string(trial) +
                        " has no true gallery item");
    mt.true_index = *true_index[trial];
    try {
      mt.validate();
    } catch (const error& e) {
      throw parse_error(std::string("trial csv: ") + e.what());
    }
    out.push_back(std::move(mt));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Frames: CSV grid (exact) and ASCII PGM (8-bit quantized)
// ---------------------------------------------------------------------------

inline std::string encode_frame_csv(const frame& f) {
  f.validate();
  std::string out;
  for (std::size_t y = 0; y < f.height; ++y) {
    for (std::size_t x = 0; x < f.width * f.channels; ++x) {
      if (x) out += ',';
      out += format_g17(f.pixels[y * f.width * f.channels + x]);
    }
    out += '\n';
  }
  return out;
}

inline frame decode_frame_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw parse_error("frame csv: empty file");
  frame f;
  f.height = lines.size();
  for (const auto& line : lines) {
    const auto fields = split_csv(line);
    if (f.width == 0) f.width = fields.size();
    if (fields.size() != f.width) throw parse_error("frame csv: ragged rows");
    for (const auto& field : fields) f.pixels.push_back(parse_double(field));
  }
  try {
    f.validate();
  } catch (const error& e) {
    throw parse_error(std::string("frame csv: ") + e.what());
  }
  return f;
}

inline std::string encode_frame_pgm(const frame& f) {
  f.validate();
  if (f.channels != 1) throw invalid_input("pgm: grayscale frames only");
  std::string out = "P2\n" + std::to_string(f.width) + " " + std::to_string(f.height) +
                    "\n255\n";
  for (std::size_t y = 0; y < f.height; ++y) {
    for (std::size_t x = 0; x < f.width; ++x) {
      if (x) out += ' ';
      const double v = std::clamp(f.pixels[y * f.width + x], 0.0, 1.0);
      out += std::to_string(static_cast<int>(std::lround(v * 255.0)));
    }
    out += '\n';
  }
  return out;
}

inline frame decode_frame_pgm(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string magic;
  in >> magic;
  if (magic != "P2") throw parse_error("pgm: expected ASCII P2");
  long long w = 0, h = 0, maxval = 0;
  in >> w >> h >> maxval;
  if (!in || w < 1 || h < 1 || maxval < 1) throw parse_error("pgm: bad header");
  frame f;
  f.width = static_cast<std::size_t>(w);
  f.height = static_cast<std::size_t>(h);
  f.pixels.reserve(f.width * f.height);
  for (std::size_t i = 0; i < f.width * f.height; ++i) {
    long long v = 0;
    in >> v;
    if (!in || v < 0 || v > maxval) throw parse_error("pgm: bad pixel value");
    f.pixels.push_back(static_cast<double>(v) / static_cast<double>(maxval));
  }
  return f;
}

// ---------------------------------------------------------------------------
// Stimulus labels CSV: stimulus_id,category
// ---------------------------------------------------------------------------

inline std::string encode_labels(std::span<const stimulus> stimuli) {
  std::string out = "stimulus_id,category\n";
  for (const auto& s : stimuli)
    out += s.id + "," + std::to_string(s.category) + "\n";
  return out;
}

inline std::vector<std::pair<std::string, int>> decode_labels(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0] != "stimulus_id,category")
    throw parse_error("labels csv: bad header");
  std::vector<std::pair<std::string, int>> out;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = split_csv(lines[li]);
    if (fields.size() != 2) throw parse_error("labels csv: bad row");
    out.emplace_back(fields[0], static_cast<int>(parse_int(fields[1])));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline std::string encode_correlation_report_csv(const correlation_report& report) {
  std::string out = "col_a,col_b,rho,p_raw,p_adjusted,effect_gate\n";
  for (const auto& pair : report.pairs) {
    out += pair.column_a + "," + pair.column_b + "," + format_g17(pair.rho) + "," +
           format_g17(pair.p_raw) + "," + format_g17(pair.p_adjusted) + "," +
           (pair.passes_effect_gate ? "1" : "0") + "\n";
  }
  return out;
}

// Pairwise matrix in the upper-triangle layout of the paper's correlation
// table, with ** marking adjusted p < 0.001.
inline std::string format_correlation_matrix_text(const correlation_report& report) {
  const auto find_pair = [&](const std::string& a,
                             const std::string& b) -> const correlation_pair* {
    for (const auto& pair : report.pairs)
      if ((pair.column_a == a && pair.column_b == b) ||
          (pair.column_a == b && pair.column_b == a))
        return &pair;
    return nullptr;
  };
  std::size_t width = 12;
  for (const auto& c : report.columns) width = std::max(width, c.size() + 2);

  std::ostringstream out;
  out << "Spearman correlation matrix (Bonferroni k=" << report.bonferroni_k
      << "; p exact <= " << exact_p_max_n << " samples, t approximation beyond)\n";
  out << std::string(width, ' ');
  for (std::size_t j = 1; j < report.columns.size(); ++j) {
    std::string head = report.columns[j];
    head.resize(width, ' ');
    out << head;
  }
  out << '\n';
  for (std::size_t i = 0; i + 1 < report.columns.size(); ++i) {
    std::string row = report.columns[i];
    row.resize(width, ' ');
    out << row;
    for (std::size_t j = 1; j < report.columns.size(); ++j) {
      std::string cell = ".";
      if (j > i) {
        const auto* pair = find_pair(report.columns[i], report.columns[j]);
        if (pair) {
          cell = format_fixed(pair->rho, 3);
          if (pair->p_adjusted < 0.001) cell += "**";
        }
      }
      cell.resize(width, ' ');
      out << cell;
    }
    out << '\n';
  }
  out << "** adjusted p < 0.001\n";
  return out.str();
}

inline std::string encode_table_summary_csv(const table_summary& s) {
  std::string out =
      "column,full_mean,full_sd,top_mean,top_sd,bottom_mean,bottom_sd\n";
  for (const auto& c : s.columns) {
    out += c.column + "," + format_g17(c.full.mean) + "," + format_g17(c.full.sd) + "," +
           format_g17(c.top.mean) + "," + format_g17(c.top.sd) + "," +
           format_g17(c.bottom.mean) + "," + format_g17(c.bottom.sd) + "\n";
  }
  return out;
}

inline std::string format_table_summary_text(const table_summary& s) {
  std::ostringstream out;
  out << "Metric summary (ranked by " << s.rank_by << ", k=" << s.top_k << ")\n";
  std::size_t width = 14;
  for (const auto& c : s.columns) width = std::max(width, c.column.size() + 2);
  const auto cell = [&](const summary_stats& st) {
    std::string v = format_fixed(st.mean, 3) + " (" + format_fixed(st.sd, 3) + ")";
    v.resize(std::max<std::size_t>(v.size(), 18), ' ');
    return v;
  };
  std::string head = "metric";
  head.resize(width, ' ');
  out << head << "mean (SD)         top-" << s.top_k << " mean (SD)  bottom-" << s.top_k
      << " mean (SD)\n";
  for (const auto& c : s.columns) {
    std::string name = c.column;
    name.resize(width, ' ');
    out << name << cell(c.full) << cell(c.top) << cell(c.bottom) << '\n';
  }
  return out.str();
}

inline std::string encode_savings_report_csv(const savings_report& report) {
  std::string out = "model_id,full_epochs,stopped_epochs,retained,stop_epoch\n";
  for (const auto& m : report.models) {
    out += m.model_id + "," + std::to_string(m.full_epochs) + "," +
           std::to_string(m.stopped_epochs) + "," + (m.retained ? "1" : "0") + ",";
    if (m.stop_epoch) out += std::to_string(*m.stop_epoch);
    out += "\n";
  }
  return out;
}

inline std::string format_savings_text(const savings_report& report) {
  long long full = 0, stopped = 0;
  for (const auto& m : report.models) {
    full += m.full_epochs;
    stopped += m.stopped_epochs;
  }
  std::ostringstream out;
  out << "models analyzed: " << report.models.size() << "\n"
      << "retained: " << report.retained_model_ids.size()
      << "  discarded: " << report.discarded_model_ids.size() << "\n"
      << "epochs: " << stopped << " used of " << full << " full\n"
      << "saved fraction: " << format_g17(report.total_saved_fraction) << " ("
      << format_fixed(100.0 * report.total_saved_fraction, 1) << "%)\n";
  if (!report.missing_trajectory_ids.empty()) {
    out << "missing trajectories: ";
    for (std::size_t i = 0; i < report.missing_trajectory_ids.size(); ++i)
      out << (i ? "," : "") << report.missing_trajectory_ids[i];
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

struct run_manifest {
  std::string tool_version = version_string;
  std::string command;
  std::string config_hash;
  std::uint64_t master_seed = 0;
  std::string created_utc;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

inline std::string utc_timestamp_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

inline std::string encode_manifest(const run_manifest& m) {
  nlohmann::json j;
  j["tool_version"] = m.tool_version;
  j["command"] = m.command;
  j["config_hash"] = m.config_hash;
  j["master_seed"] = m.master_seed;
  j["created_utc"] = m.created_utc;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  return j.dump(2) + "\n";
}

inline run_manifest decode_manifest(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("manifest: ") + e.what());
  }
  run_manifest m;
  m.tool_version = j.value("tool_version", "");
  m.command = j.value("command", "");
  m.config_hash = j.value("config_hash", "");
  m.master_seed = j.value("master_seed", std::uint64_t{0});
  m.created_utc = j.value("created_utc", "");
  if (j.contains("inputs")) m.inputs = j["inputs"].get<std::vector<std::string>>();
  if (j.contains("outputs")) m.outputs = j["outputs"].get<std::vector<std::string>>();
  return m;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Search configuration (JSON)
// ---------------------------------------------------------------------------

struct toy_config {
  int stimuli = 92;
  int categories = 6;
  int image_size = 16;
  int feature_dim = 64;
  int gallery_size = 50;
  int n_trials = 20;
  int heldout_sequences = 8;
  int heldout_length = 5;
  int frames = 5;
  double delta_in = 0.3;
  double delta_out = 1.2;
  double reference_noise_sd = 0.02;
  double stimulus_perturbation = 0.08;
  double trial_perturbation = 0.06;
};

struct search_config {
  hyperparameter_space space;
  std::size_t n_models = 50;
  std::uint64_t master_seed = 0;
  int checkpoint_every = 5;
  int workers = 1;
  std::string backend = "toy";
  std::string stimuli = "synthetic";        // path to activation csv or "synthetic"
  std::string labels;                       // optional labels csv for file stimuli
  std::string reference_rdm = "synthetic";  // path to rdm file or "synthetic"
  pool_mode pooling = pool_mode::mean;
  toy_config toy;
};

namespace detail {

inline search_dimension decode_dimension(const nlohmann::json& j, const char* name) {
  const std::string kind = j.value("kind", "");
  if (kind == "int_range") return int_range{j.at("low").get<long long>(),
                                            j.at("high").get<long long>()};
  if (kind == "int_choice")
    return int_choice{j.at("values").get<std::vector<long long>>()};
  if (kind == "uniform" || kind == "log_uniform")
    return real_range{j.at("low").get<double>(), j.at("high").get<double>(),
                      kind == "log_uniform"};
  throw parse_error(std::string("config: dimension ") + name +
                    " has unknown kind '" + kind + "'");
}

inline nlohmann::json encode_dimension(const search_dimension& d) {
  nlohmann::json j;
  if (const auto* r = std::get_if<int_range>(&d)) {
    j["kind"] = "int_range";
    j["low"] = r->low;
    j["high"] = r->high;
  } else if (const auto* r = std::get_if<real_range>(&d)) {
    j["kind"] = r->log_scale ? "log_uniform" : "uniform";
    j["low"] = r->low;
    j["high"] = r->high;
  } else if (const auto* c = std::get_if<int_choice>(&d)) {
    j["kind"] = "int_choice";
    j["values"] = c->values;
  }
  return j;
}

}  // namespace detail

inline pool_mode parse_pool_mode(const std::string& name) {
  if (name == "mean") return pool_mode::mean;
  if (name == "concat") return pool_mode::concat;
  if (name == "last") return pool_mode::last;
  throw parse_error("unknown pooling mode '" + name + "'");
}

inline const char* pool_mode_name(pool_mode mode) {
  switch (mode) {
    case pool_mode::mean: return "mean";
    case pool_mode::concat: return "concat";
    case pool_mode::last: return "last";
  }
  return "mean";
}

inline search_config decode_search_config(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("config: ") + e.what());
  }
  search_config cfg;
  try {
    cfg.n_models = j.value("n_models", cfg.n_models);
    cfg.master_seed = j.value("master_seed", cfg.master_seed);
    cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
    cfg.workers = j.value("workers", cfg.workers);
    cfg.backend = j.value("backend", cfg.backend);
    cfg.stimuli = j.value("stimuli", cfg.stimuli);
    cfg.labels = j.value("labels", cfg.labels);
    cfg.reference_rdm = j.value("reference_rdm", cfg.reference_rdm);
    if (j.contains("pooling")) cfg.pooling = parse_pool_mode(j["pooling"].get<std::string>());
    if (j.contains("space")) {
      const auto& s = j["space"];
      if (s.contains("epochs")) cfg.space.epochs = detail::decode_dimension(s["epochs"], "epochs");
      if (s.contains("validation_sequences"))
        cfg.space.validation_sequences =
            detail::decode_dimension(s["validation_sequences"], "validation_sequences");
      if (s.contains("training_sequences"))
        cfg.space.training_sequences =
            detail::decode_dimension(s["training_sequences"], "training_sequences");
      if (s.contains("batch_size"))
        cfg.space.batch_size = detail::decode_dimension(s["batch_size"], "batch_size");
      if (s.contains("learning_rate"))
        cfg.space.learning_rate =
            detail::decode_dimension(s["learning_rate"], "learning_rate");
      if (s.contains("filter_size"))
        cfg.space.filter_size = detail::decode_dimension(s["filter_size"], "filter_size");
    }
    if (j.contains("toy")) {
      const auto& t = j["toy"];
      cfg.toy.stimuli = t.value("stimuli", cfg.toy.stimuli);
      cfg.toy.categories = t.value("categories", cfg.toy.categories);
      cfg.toy.image_size = t.value("image_size", cfg.toy.image_size);
      cfg.toy.feature_dim = t.value("feature_dim", cfg.toy.feature_dim);
      cfg.toy.gallery_size = t.value("gallery_size", cfg.toy.gallery_size);
      cfg.toy.n_trials = t.value("n_trials", cfg.toy.n_trials);
      cfg.toy.heldout_sequences = t.value("heldout_sequences", cfg.toy.heldout_sequences);
      cfg.toy.heldout_length = t.value("heldout_length", cfg.toy.heldout_length);
      cfg.toy.frames = t.value("frames", cfg.toy.frames);
      cfg.toy.delta_in = t.value("delta_in", cfg.toy.delta_in);
      cfg.toy.delta_out = t.value("delta_out", cfg.toy.delta_out);
      cfg.toy.reference_noise_sd = t.value("reference_noise_sd", cfg.toy.reference_noise_sd);
      cfg.toy.stimulus_perturbation =
          t.value("stimulus_perturbation", cfg.toy.stimulus_perturbation);
      cfg.toy.trial_perturbation = t.value("trial_perturbation", cfg.toy.trial_perturbation);
    }
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("config: ") + e.what());
  }
  return cfg;
}

inline std::string encode_search_config(const search_config& cfg) {
  nlohmann::json j;
  j["n_models"] = cfg.n_models;
  j["master_seed"] = cfg.master_seed;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["workers"] = cfg.workers;
  j["backend"] = cfg.backend;
  j["stimuli"] = cfg.stimuli;
  j["labels"] = cfg.labels;
  j["reference_rdm"] = cfg.reference_rdm;
  j["pooling"] = pool_mode_name(cfg.pooling);
  j["space"]["epochs"] = detail::encode_dimension(cfg.space.epochs);
  j["space"]["validation_sequences"] = detail::encode_dimension(cfg.space.validation_sequences);
  j["space"]["training_sequences"] = detail::encode_dimension(cfg.space.training_sequences);
  j["space"]["batch_size"] = detail::encode_dimension(cfg.space.batch_size);
  j["space"]["learning_rate"] = detail::encode_dimension(cfg.space.learning_rate);
  j["space"]["filter_size"] = detail::encode_dimension(cfg.space.filter_size);
  j["toy"]["stimuli"] = cfg.toy.stimuli;
  j["toy"]["categories"] = cfg.toy.categories;
  j["toy"]["image_size"] = cfg.toy.image_size;
  j["toy"]["feature_dim"] = cfg.toy.feature_dim;
  j["toy"]["gallery_size"] = cfg.toy.gallery_size;
  j["toy"]["n_trials"] = cfg.toy.n_trials;
  j["toy"]["heldout_sequences"] = cfg.toy.heldout_sequences;
  j["toy"]["heldout_length"] = cfg.toy.heldout_length;
  j["toy"]["frames"] = cfg.toy.frames;
  j["toy"]["delta_in"] = cfg.toy.delta_in;
  j["toy"]["delta_out"] = cfg.toy.delta_out;
  j["toy"]["reference_noise_sd"] = cfg.toy.reference_noise_sd;
  j["toy"]["stimulus_perturbation"] = cfg.toy.stimulus_perturbation;
  j["toy"]["trial_perturbation"] = cfg.toy.trial_perturbation;
  return j.dump(2) + "\n";
}

// Hash of the canonical serialized config; recorded in manifests.
inline std::string config_hash(const search_config& cfg) {
  return hash_hex(fnv1a64(encode_search_config(cfg)));
}

}  // namespace hms
