// Command-line surface for the human-model similarity toolkit: RDM
// construction, HMS scoring, Monte Carlo model search, correlation reports,
// and early-stopping analyses.
//
// Exit codes: 0 success, 1 other error, 2 parse error, 3 degenerate
// activations, 4 stimulus mismatch, 5 unknown column.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hms/earlystop.hpp"
#include "hms/error.hpp"
#include "hms/eval.hpp"
#include "hms/io.hpp"
#include "hms/rsa.hpp"
#include "hms/search.hpp"
#include "hms/stats.hpp"
#include "hms/toy.hpp"
#include "hms/version.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_command_line;

// Commands without a config file hash their own invocation instead.
hms::run_manifest make_manifest(std::uint64_t seed, const std::string& config_hash,
                                std::vector<std::string> inputs,
                                std::vector<std::string> outputs) {
  hms::run_manifest m;
  m.command = g_command_line;
  m.master_seed = seed;
  m.config_hash =
      config_hash.empty() ? hms::hash_hex(hms::fnv1a64(g_command_line)) : config_hash;
  m.created_utc = hms::utc_timestamp_now();
  m.inputs = std::move(inputs);
  m.outputs = std::move(outputs);
  return m;
}

fs::path manifest_path_for(const fs::path& out) {
  if (fs::is_directory(out)) return out / "manifest.json";
  return fs::path(out.string() + ".manifest.json");
}

void write_manifest_for(const fs::path& out, const hms::run_manifest& m) {
  hms::atomic_write_file(manifest_path_for(out), hms::encode_manifest(m));
}

// Reads a directory of activation-matrix CSVs (one per time step, sorted by
// filename) into an activation sequence.
hms::activation_sequence read_sequence_dir(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw hms::parse_error("sequence directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.size() < 2)
    throw hms::parse_error("sequence directory needs at least 2 frame csvs");
  hms::activation_sequence seq;
  for (const auto& f : files) seq.frames.push_back(hms::read_activation_matrix(f));
  return seq;
}

std::vector<hms::stimulus> stimuli_from_files(const fs::path& matrix_path,
                                              const std::string& labels_path) {
  const auto a = hms::read_activation_matrix(matrix_path);
  const auto n = a.feature_count();
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(double(n))));
  if (side * side != n)
    throw hms::parse_error("stimuli csv: feature count " + std::to_string(n) +
                           " is not a square image");
  std::map<std::string, int> labels;
  if (!labels_path.empty())
    for (const auto& [id, cat] : hms::decode_labels(hms::read_text_file(labels_path)))
      labels[id] = cat;
  std::vector<hms::stimulus> out;
  for (std::size_t i = 0; i < a.stimulus_count(); ++i) {
    hms::stimulus s;
    s.id = a.stimulus_ids[i];
    s.image.width = s.image.height = side;
    s.image.pixels = a.values[i];
    if (const auto it = labels.find(s.id); it != labels.end()) s.category = it->second;
    out.push_back(std::move(s));
  }
  return out;
}

hms::activation_matrix stimuli_to_matrix(std::span<const hms::stimulus> stimuli) {
  hms::activation_matrix a;
  for (const auto& s : stimuli) {
    a.stimulus_ids.push_back(s.id);
    a.values.push_back(s.image.pixels);
  }
  return a;
}

// ---------------------------------------------------------------------------
// rdm build / rdm average
// ---------------------------------------------------------------------------

void cmd_rdm_build(const std::string& activations, const std::string& sequence,
                   const std::string& pool, const std::string& out) {
  hms::activation_matrix pooled;
  if (!sequence.empty()) {
    pooled = hms::temporal_pool(read_sequence_dir(sequence), hms::parse_pool_mode(pool));
  } else if (!activations.empty()) {
    pooled = hms::read_activation_matrix(activations);
  } else {
    throw hms::parse_error("rdm build: need --activations or --sequence");
  }
  const auto r = hms::build_rdm(pooled);
  hms::write_rdm(out, r);
  write_manifest_for(out, make_manifest(0, "",
                                        {sequence.empty() ? activations : sequence},
                                        {out}));
  std::printf("m=%zu entries=%zu -> %s\n", r.stimulus_count(), r.entries.size(),
              out.c_str());
}

void cmd_rdm_average(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<hms::rdm> rdms;
  for (const auto& path : inputs) rdms.push_back(hms::read_rdm(path));
  const auto mean = hms::average_rdms(rdms);
  hms::write_rdm(out, mean);
  write_manifest_for(out, make_manifest(0, "", inputs, {out}));
  std::printf("averaged %zu rdms (m=%zu) -> %s\n", rdms.size(), mean.stimulus_count(),
              out.c_str());
}

// ---------------------------------------------------------------------------
// hms
// ---------------------------------------------------------------------------

void cmd_hms(const std::string& a_path, const std::string& b_path) {
  const auto a = hms::read_rdm(a_path);
  const auto b = hms::read_rdm(b_path);
  std::printf("%.6f\n", hms::hms(a, b));
}

// ---------------------------------------------------------------------------
// search run
// ---------------------------------------------------------------------------

void cmd_search_run(const std::string& config_path, const std::string& out_dir) {
  const auto cfg = hms::decode_search_config(hms::read_text_file(config_path));
  if (cfg.backend != "toy")
    throw hms::parse_error("config: unknown backend '" + cfg.backend + "'");

  hms::search_inputs inputs;
  inputs.pooling = cfg.pooling;
  inputs.presentation_frames = cfg.toy.frames;

  if (cfg.stimuli == "synthetic") {
    const auto set =
        hms::gen_stimuli(cfg.toy.stimuli, cfg.toy.categories, cfg.toy.image_size,
                         hms::mix_seed(cfg.master_seed, 0x57131ull),
                         cfg.toy.stimulus_perturbation);
    inputs.stimuli = set.stimuli;
  } else {
    inputs.stimuli = stimuli_from_files(cfg.stimuli, cfg.labels);
  }

  if (cfg.reference_rdm == "synthetic") {
    for (const auto& s : inputs.stimuli)
      if (s.category < 0)
        throw hms::parse_error(
            "config: synthetic reference rdm needs labeled stimuli");
    hms::reference_rdm_spec spec;
    spec.delta_in = cfg.toy.delta_in;
    spec.delta_out = cfg.toy.delta_out;
    spec.noise_sd = cfg.toy.reference_noise_sd;
    spec.seed = hms::mix_seed(cfg.master_seed, 0x4efull);
    inputs.reference = hms::reference_rdm(spec, inputs.stimuli);
  } else {
    inputs.reference = hms::read_rdm(cfg.reference_rdm);
  }

  inputs.gallery_trials = hms::gen_matching_trials(
      cfg.toy.n_trials, cfg.toy.gallery_size, cfg.toy.image_size,
      hms::mix_seed(cfg.master_seed, 0x9a11ull), cfg.toy.trial_perturbation);
  inputs.heldout_sequences = hms::gen_heldout_sequences(
      cfg.toy.heldout_sequences, cfg.toy.heldout_length, cfg.toy.image_size,
      hms::mix_seed(cfg.master_seed, 0x8e1dull));

  const int pixel_dim = cfg.toy.image_size * cfg.toy.image_size;
  hms::search_options opts;
  opts.checkpoint_every = cfg.checkpoint_every;
  opts.master_seed = cfg.master_seed;
  opts.workers = cfg.workers;
  const auto result =
      hms::run_search(cfg.space, hms::toy_backend_factory(cfg.toy.feature_dim, pixel_dim),
                      cfg.n_models, inputs, opts);

  const fs::path out(out_dir);
  fs::create_directories(out / "trajectories");
  hms::write_metric_table(out / "metrics.csv", result.table);
  std::vector<std::string> outputs{(out / "metrics.csv").string()};
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    const fs::path traj = out / "trajectories" / (result.record_ids[i] + ".csv");
    hms::atomic_write_file(traj,
                           hms::encode_trajectories(result.records[i].trajectories));
    outputs.push_back(traj.string());
  }
  if (!result.failures.empty()) {
    std::string text = "model_id,message\n";
    for (const auto& f : result.failures) text += f.model_id + "," + f.message + "\n";
    hms::atomic_write_file(out / "failures.csv", text);
    outputs.push_back((out / "failures.csv").string());
  }
  write_manifest_for(out, make_manifest(cfg.master_seed, hms::config_hash(cfg),
                                        {config_path}, outputs));
  std::printf("%zu models (%zu failed) -> %s\n", cfg.n_models, result.failures.size(),
              out_dir.c_str());
}

// ---------------------------------------------------------------------------
// report correlations / report summary
// ---------------------------------------------------------------------------

void cmd_report_correlations(const std::string& table_path,
                             std::vector<std::string> columns,
                             const std::string& out_dir) {
  const auto table = hms::read_metric_table(table_path);
  if (columns.empty()) columns = table.column_names;
  const auto report = hms::correlation_matrix(table, columns);

  const fs::path out(out_dir);
  fs::create_directories(out);
  const auto text = hms::format_correlation_matrix_text(report);
  hms::atomic_write_file(out / "correlations.csv",
                         hms::encode_correlation_report_csv(report));
  hms::atomic_write_file(out / "correlations.txt", text);
  write_manifest_for(out, make_manifest(0, "", {table_path},
                                        {(out / "correlations.csv").string(),
                                         (out / "correlations.txt").string()}));
  std::fputs(text.c_str(), stdout);
}

void cmd_report_summary(const std::string& table_path, const std::string& rank_by,
                        std::size_t top_k, const std::string& out_dir) {
  const auto table = hms::read_metric_table(table_path);
  const auto summary = hms::summarize(table, rank_by, std::min(top_k, table.rows()));

  const fs::path out(out_dir);
  fs::create_directories(out);
  const auto text = hms::format_table_summary_text(summary);
  hms::atomic_write_file(out / "summary.csv", hms::encode_table_summary_csv(summary));
  hms::atomic_write_file(out / "summary.txt", text);
  write_manifest_for(out, make_manifest(0, "", {table_path},
                                        {(out / "summary.csv").string(),
                                         (out / "summary.txt").string()}));
  std::fputs(text.c_str(), stdout);
}

// ---------------------------------------------------------------------------
// earlystop analyze
// ---------------------------------------------------------------------------

void cmd_earlystop_analyze(const std::string& traj_dir, const std::string& policy_name,
                           int window, double sd_tol, const std::string& threshold_arg,
                           const std::string& gate_at, const std::string& metric,
                           const std::string& table_path, const std::string& out_dir) {
  if (!fs::is_directory(traj_dir))
    throw hms::parse_error("trajectory directory not found: " + traj_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(traj_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw hms::parse_error("no trajectory csvs in " + traj_dir);

  std::vector<hms::trajectory_record> records;
  for (const auto& f : files) {
    hms::trajectory_record rec;
    rec.model_id = f.stem().string();
    rec.trajectories = hms::decode_trajectories(hms::read_text_file(f));
    for (const auto& [name, traj] : rec.trajectories)
      if (!traj.points.empty())
        rec.full_epochs = std::max(rec.full_epochs, traj.points.back().epoch);
    records.push_back(std::move(rec));
  }

  hms::savings_policy policy;
  policy.metric = metric;
  policy.window_epochs = window;
  policy.sd_tol = sd_tol;
  if (policy_name == "stability") {
    policy.policy = hms::stop_policy::stability;
  } else if (policy_name == "threshold") {
    policy.policy = hms::stop_policy::threshold;
    if (threshold_arg == "auto") {
      std::vector<double> finals;
      for (const auto& rec : records) {
        const auto it = rec.trajectories.find(metric);
        if (it != rec.trajectories.end() && !it->second.points.empty())
          finals.push_back(it->second.points.back().value);
      }
      policy.threshold = hms::compute_threshold(finals);
    } else {
      policy.threshold = hms::parse_double(threshold_arg);
    }
    policy.gate_at = gate_at == "final" ? hms::gate_point::final_epoch
                                        : hms::gate_point::stable;
  } else {
    throw hms::parse_error("unknown policy '" + policy_name + "'");
  }

  const auto report = hms::savings_analysis(records, policy);

  std::string text = hms::format_savings_text(report);
  if (policy.threshold)
    text = "threshold: " + hms::format_g17(*policy.threshold) + "\n" + text;

  // retention quality against the metric table (explicit or synthesized from
  // trajectory finals)
  std::optional<hms::metric_table> table;
  if (!table_path.empty()) {
    table = hms::read_metric_table(table_path);
  } else {
    hms::metric_table t;
    std::vector<double> acc;
    for (const auto& rec : records) {
      const auto it = rec.trajectories.find("accuracy");
      if (it == rec.trajectories.end() || it->second.points.empty()) continue;
      t.model_ids.push_back(rec.model_id);
      acc.push_back(it->second.points.back().value);
    }
    if (!t.model_ids.empty()) {
      t.add_column("accuracy", acc);
      table = std::move(t);
    }
  }
  if (table && table->has_column("accuracy")) {
    try {
      const auto q = hms::retention_quality(report, *table, "accuracy");
      text += "retained mean accuracy: " +
              (q.retained_mean ? hms::format_fixed(*q.retained_mean, 4) : "n/a") +
              "  discarded mean accuracy: " +
              (q.discarded_mean ? hms::format_fixed(*q.discarded_mean, 4) : "n/a") +
              "\nbest model " + q.best_model_id + " retained: " +
              (q.best_retained ? "yes" : "no") + "\n";
    } catch (const hms::invalid_input&) {
      // table does not cover every analyzed model; skip the comparison
    }
  }

  const fs::path out(out_dir);
  fs::create_directories(out);
  hms::atomic_write_file(out / "savings.csv", hms::encode_savings_report_csv(report));
  hms::atomic_write_file(out / "summary.txt", text);
  write_manifest_for(out, make_manifest(0, "", {traj_dir},
                                        {(out / "savings.csv").string(),
                                         (out / "summary.txt").string()}));
  std::fputs(text.c_str(), stdout);
}

// ---------------------------------------------------------------------------
// toy gen
// ---------------------------------------------------------------------------

struct toy_gen_options {
  bool stimuli = false;
  bool reference = false;
  bool trajectories = false;
  bool pgm = false;
  std::uint64_t seed = 1234;
  int m = 92;
  int categories = 6;
  int image_size = 16;
  double delta_in = 0.3;
  double delta_out = 1.2;
  double noise_sd = 0.02;
  int n_models = 95;
  int epochs = 150;
  int checkpoint_every = 5;
  double diverging_frac = 0.3;
  std::string out;
};

void cmd_toy_gen(const toy_gen_options& opt) {
  if (!opt.stimuli && !opt.reference && !opt.trajectories)
    throw hms::parse_error(
        "toy gen: pick at least one of --stimuli, --reference-rdm, --trajectories");
  const fs::path out(opt.out);
  fs::create_directories(out);
  std::vector<std::string> outputs;

  if (opt.stimuli || opt.reference) {
    const auto set = hms::gen_stimuli(opt.m, opt.categories, opt.image_size, opt.seed);
    if (opt.stimuli) {
      hms::write_activation_matrix(out / "stimuli.csv", stimuli_to_matrix(set.stimuli));
      hms::atomic_write_file(out / "labels.csv", hms::encode_labels(set.stimuli));
      outputs.push_back((out / "stimuli.csv").string());
      outputs.push_back((out / "labels.csv").string());
      if (opt.pgm) {
        fs::create_directories(out / "stimuli_pgm");
        for (const auto& s : set.stimuli)
          hms::atomic_write_file(out / "stimuli_pgm" / (s.id + ".pgm"),
                                 hms::encode_frame_pgm(s.image));
        outputs.push_back((out / "stimuli_pgm").string());
      }
    }
    if (opt.reference) {
      hms::reference_rdm_spec spec;
      spec.delta_in = opt.delta_in;
      spec.delta_out = opt.delta_out;
      spec.noise_sd = opt.noise_sd;
      spec.seed = hms::mix_seed(opt.seed, 0x4efull);
      hms::write_rdm(out / "reference_rdm.csv", hms::reference_rdm(spec, set.stimuli));
      outputs.push_back((out / "reference_rdm.csv").string());
    }
  }

  if (opt.trajectories) {
    fs::create_directories(out / "trajectories");
    const int n_diverging =
        static_cast<int>(std::lround(opt.diverging_frac * opt.n_models));
    hms::metric_table finals;
    std::vector<double> col_hms, col_acc, col_mse;
    for (int i = 0; i < opt.n_models; ++i) {
      const auto kind = i < opt.n_models - n_diverging
                            ? hms::profile_kind::converging
                            : hms::profile_kind::diverging;
      const auto profile = hms::make_trajectory_profile(
          kind, hms::mix_seed(opt.seed, static_cast<std::uint64_t>(i)));
      const auto trajs =
          hms::simulate_trajectory(profile, opt.epochs, opt.checkpoint_every);
      const auto id = hms::model_id_for(static_cast<std::size_t>(i),
                                        static_cast<std::size_t>(opt.n_models));
      hms::atomic_write_file(out / "trajectories" / (id + ".csv"),
                             hms::encode_trajectories(trajs));
      finals.model_ids.push_back(id);
      col_hms.push_back(trajs.at("hms").points.back().value);
      col_acc.push_back(trajs.at("accuracy").points.back().value);
      col_mse.push_back(trajs.at("mse").points.back().value);
    }
    finals.add_column("hms", col_hms);
    finals.add_column("accuracy", col_acc);
    finals.add_column("mse", col_mse);
    hms::write_metric_table(out / "metrics.csv", finals);
    outputs.push_back((out / "trajectories").string());
    outputs.push_back((out / "metrics.csv").string());
  }

  write_manifest_for(out, make_manifest(opt.seed, "", {}, outputs));
  std::printf("wrote %zu outputs -> %s\n", outputs.size(), opt.out.c_str());
}

// ---------------------------------------------------------------------------
// match eval
// ---------------------------------------------------------------------------

void cmd_match_eval(const std::string& trials_path, const std::string& out_dir) {
  const auto trials = hms::decode_matching_trials(hms::read_text_file(trials_path));
  std::string csv = "trial,predicted_index,true_index,correct\n";
  std::size_t correct = 0;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto outcome = hms::match_trial(trials[i]);
    if (outcome.correct) ++correct;
    std::printf("trial %zu: predicted=%zu true=%zu %s\n", i, outcome.predicted_index,
                trials[i].true_index, outcome.correct ? "correct" : "wrong");
    csv += std::to_string(i) + "," + std::to_string(outcome.predicted_index) + "," +
           std::to_string(trials[i].true_index) + "," + (outcome.correct ? "1" : "0") +
           "\n";
  }
  const double acc =
      static_cast<double>(correct) / static_cast<double>(trials.size());
  std::printf("accuracy = %.6f (%zu/%zu)\n", acc, correct, trials.size());
  if (!out_dir.empty()) {
    const fs::path out(out_dir);
    fs::create_directories(out);
    hms::atomic_write_file(out / "match_results.csv", csv);
    write_manifest_for(out, make_manifest(0, "", {trials_path},
                                          {(out / "match_results.csv").string()}));
  }
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) {
    if (i) g_command_line += ' ';
    g_command_line += argv[i];
  }

  CLI::App app{"human-model similarity toolkit"};
  app.set_version_flag("--version", hms::version_string);
  app.require_subcommand(1);
  app.footer(
      "File formats (all numeric fields use 17 significant digits and\n"
      "round-trip byte-exactly):\n"
      "  rdm            line 1 'rdm,v1,m=<m>', line 2 stimulus ids, line 3\n"
      "                 the m(m-1)/2 upper-triangle entries in row-major\n"
      "                 pair order (1,2),(1,3),...,(m-1,m)\n"
      "  activations    csv 'stimulus_id,f1..fn', one row per stimulus\n"
      "  metric table   csv 'model_id,<col>...', one row per model\n"
      "  trajectory     csv 'epoch,hms,accuracy,mse', blank = missing value\n"
      "  trials         csv 'trial,role,index,is_true,f1..fd',\n"
      "                 role in {probe, gallery}\n"
      "  frames         csv grid of intensities, or ASCII PGM (P2)\n"
      "Exit codes: 0 ok, 1 error, 2 parse error, 3 degenerate activations,\n"
      "4 stimulus mismatch, 5 unknown column.");

  // rdm build / rdm average
  auto* rdm_cmd = app.add_subcommand("rdm", "build and combine RDM files");
  rdm_cmd->require_subcommand(1);
  auto* rdm_build = rdm_cmd->add_subcommand("build", "build an RDM from activations");
  std::string rb_activations, rb_sequence, rb_pool = "mean", rb_out;
  rdm_build->add_option("--activations", rb_activations,
                        "activation matrix csv (single snapshot)");
  rdm_build->add_option("--sequence", rb_sequence,
                        "directory of per-frame activation csvs");
  rdm_build->add_option("--pool", rb_pool, "temporal pooling: mean|concat|last")
      ->check(CLI::IsMember({"mean", "concat", "last"}));
  rdm_build->add_option("--out", rb_out, "output rdm file")->required();
  rdm_build->callback([&] { cmd_rdm_build(rb_activations, rb_sequence, rb_pool, rb_out); });

  auto* rdm_average = rdm_cmd->add_subcommand("average", "element-wise mean of RDMs");
  std::vector<std::string> ra_inputs;
  std::string ra_out;
  rdm_average->add_option("--inputs", ra_inputs, "rdm files")->required()->expected(-1);
  rdm_average->add_option("--out", ra_out, "output rdm file")->required();
  rdm_average->callback([&] { cmd_rdm_average(ra_inputs, ra_out); });

  // hms
  auto* hms_cmd = app.add_subcommand("hms", "score two RDM files");
  std::string h_a, h_b;
  hms_cmd->add_option("rdm_a", h_a, "first rdm file")->required();
  hms_cmd->add_option("rdm_b", h_b, "second rdm file")->required();
  hms_cmd->callback([&] { cmd_hms(h_a, h_b); });

  // search run
  auto* search_cmd = app.add_subcommand("search", "Monte Carlo model search");
  search_cmd->require_subcommand(1);
  auto* search_run = search_cmd->add_subcommand("run", "run a seeded sweep");
  std::string sr_config, sr_out;
  search_run->add_option("--config", sr_config, "search config json")->required();
  search_run->add_option("--out", sr_out, "output directory")->required();
  search_run->callback([&] { cmd_search_run(sr_config, sr_out); });

  // report correlations / summary
  auto* report_cmd = app.add_subcommand("report", "statistical reports over a table");
  report_cmd->require_subcommand(1);
  auto* report_corr =
      report_cmd->add_subcommand("correlations", "pairwise Spearman correlations");
  std::string rc_table, rc_out = "report";
  std::vector<std::string> rc_columns;
  report_corr->add_option("--table", rc_table, "metric table csv")->required();
  report_corr->add_option("--columns", rc_columns,
                          "columns to correlate (default: all)");
  report_corr->add_option("--out", rc_out, "output directory");
  report_corr->callback([&] { cmd_report_correlations(rc_table, rc_columns, rc_out); });

  auto* report_summary = report_cmd->add_subcommand("summary", "mean/SD summary");
  std::string rs_table, rs_rank = "hms", rs_out = "report";
  std::size_t rs_top_k = 10;
  report_summary->add_option("--table", rs_table, "metric table csv")->required();
  report_summary->add_option("--rank-by", rs_rank, "ranking column");
  report_summary->add_option("--top-k", rs_top_k, "rows in the top/bottom subsets");
  report_summary->add_option("--out", rs_out, "output directory");
  report_summary->callback(
      [&] { cmd_report_summary(rs_table, rs_rank, rs_top_k, rs_out); });

  // earlystop analyze
  auto* early_cmd = app.add_subcommand("earlystop", "early-stopping analyses");
  early_cmd->require_subcommand(1);
  auto* early_analyze =
      early_cmd->add_subcommand("analyze", "apply a stopping policy to trajectories");
  std::string ea_dir, ea_policy = "stability", ea_threshold = "auto";
  std::string ea_gate = "stable", ea_metric = "hms", ea_table, ea_out = "earlystop";
  int ea_window = 25;
  double ea_sd_tol = 0.01;
  early_analyze->add_option("--trajectories", ea_dir, "directory of trajectory csvs")
      ->required();
  early_analyze->add_option("--policy", ea_policy, "stability|threshold")
      ->check(CLI::IsMember({"stability", "threshold"}));
  early_analyze->add_option("--window", ea_window, "stability window in epochs");
  early_analyze->add_option("--sd-tol", ea_sd_tol, "stability SD tolerance");
  early_analyze->add_option("--threshold", ea_threshold,
                            "threshold value or 'auto' (mean + SD of finals)");
  early_analyze->add_option("--gate-at", ea_gate, "threshold gate point: stable|final")
      ->check(CLI::IsMember({"stable", "final"}));
  early_analyze->add_option("--metric", ea_metric, "trajectory metric to stop on");
  early_analyze->add_option("--table", ea_table,
                            "metric table csv for retention quality");
  early_analyze->add_option("--out", ea_out, "output directory");
  early_analyze->callback([&] {
    cmd_earlystop_analyze(ea_dir, ea_policy, ea_window, ea_sd_tol, ea_threshold,
                          ea_gate, ea_metric, ea_table, ea_out);
  });

  // toy gen
  auto* toy_cmd = app.add_subcommand("toy", "synthetic data generators");
  toy_cmd->require_subcommand(1);
  auto* toy_gen = toy_cmd->add_subcommand("gen", "generate toy datasets");
  toy_gen_options tg;
  toy_gen->add_flag("--stimuli", tg.stimuli, "write stimuli.csv and labels.csv");
  toy_gen->add_flag("--pgm", tg.pgm, "also write stimuli as PGM images");
  toy_gen->add_flag("--reference-rdm", tg.reference, "write reference_rdm.csv");
  toy_gen->add_flag("--trajectories", tg.trajectories,
                    "write simulated trajectory csvs and metrics.csv");
  toy_gen->add_option("--seed", tg.seed, "master seed");
  toy_gen->add_option("--m", tg.m, "stimulus count");
  toy_gen->add_option("--categories", tg.categories, "category count");
  toy_gen->add_option("--image-size", tg.image_size, "stimulus image side length");
  toy_gen->add_option("--delta-in", tg.delta_in, "within-category dissimilarity");
  toy_gen->add_option("--delta-out", tg.delta_out, "cross-category dissimilarity");
  toy_gen->add_option("--noise-sd", tg.noise_sd, "reference rdm noise SD");
  toy_gen->add_option("--n-models", tg.n_models, "simulated model count");
  toy_gen->add_option("--epochs", tg.epochs, "simulated training epochs");
  toy_gen->add_option("--checkpoint-every", tg.checkpoint_every, "checkpoint interval");
  toy_gen->add_option("--diverging-frac", tg.diverging_frac,
                      "fraction of diverging profiles");
  toy_gen->add_option("--out", tg.out, "output directory")->required();
  toy_gen->callback([&] { cmd_toy_gen(tg); });

  // match eval
  auto* match_cmd = app.add_subcommand("match", "object matching evaluation");
  match_cmd->require_subcommand(1);
  auto* match_eval = match_cmd->add_subcommand("eval", "evaluate matching trials");
  std::string me_trials, me_out;
  match_eval->add_option("--trials", me_trials, "matching trial csv")->required();
  match_eval->add_option("--out", me_out, "optional output directory");
  match_eval->callback([&] { cmd_match_eval(me_trials, me_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const hms::parse_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const hms::zero_variance_vector& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const hms::zero_norm_vector& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const hms::degenerate_rdm& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const hms::degenerate_series& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const hms::stimulus_mismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const hms::unknown_column& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
