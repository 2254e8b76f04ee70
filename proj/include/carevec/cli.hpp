#pragma once

// The `carevec` command line: gen, prep, train, eval, interpret.
// Exit codes: 0 ok, 1 usage, 2 data, 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "carevec/checkpoint.hpp"
#include "carevec/eval.hpp"
#include "carevec/interpret.hpp"
#include "carevec/synthgen.hpp"
#include "carevec/trainer.hpp"

namespace carevec::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "': " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
}

// `report.json` -> `report<suffix>`.
inline std::string sibling(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  p.replace_extension();
  return p.string() + suffix;
}

inline int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("CAREVEC_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("CAREVEC_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

inline std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError("bad seed list '" + s + "'");
    }
  }
  if (out.empty()) throw UsageError("seed list is empty");
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

inline std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

// ---- gen --------------------------------------------------------------------

struct GenArgs {
  std::string config, out_claims, out_truth, out_codemap;
  std::optional<std::uint64_t> seed;
};

inline void run_gen(const GenArgs& a, std::ostream& log) {
  GenConfig cfg = a.config.empty() ? GenConfig{} : load_gen_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  auto corpus = generate(cfg);
  write_claims_file(a.out_claims, corpus.claims);
  write_json_file(a.out_truth, corpus.truth.to_json());
  if (!a.out_codemap.empty()) write_codemap_file(a.out_codemap, corpus.codemap);
  log << "gen: " << corpus.claims.size() << " claims for " << cfg.n_members << " members\n";
}

// ---- prep -------------------------------------------------------------------

struct PrepArgs {
  std::string claims, codemap, window = "2014-01-01:2015-12-31", out;
  int min_visits = 2;
};

inline void run_prep(const PrepArgs& a, std::ostream& log) {
  const auto window = DateRange::parse(a.window);
  const CodeMapTable table = a.codemap.empty() ? CodeMapTable{} : CodeMapTable::load(a.codemap);
  auto cohort = prepare_cohort(parse_claims_file(a.claims), table, window, a.min_visits);
  if (cohort.empty()) throw DataError("no member passes the cohort filter");
  write_cohort_file(a.out, cohort);
  log << "prep: " << cohort.size() << " members\n";
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string cohort, out, log, vocab_out;
  std::string mode = "pv_plus", optimizer = "adam", score_form = "bilinear";
  std::size_t dim = 100, code_dim = 0, visit_dim = 0, patient_dim = 0;
  double lambda = 1.0, gamma = 1.0, lr = 0.001;
  int negatives = 10, window = 1, batch = 100, epochs = 40, patience = 5, threads = 0;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> split_seed;
  bool weighted_negatives = false, log_counts = false, record_time = false;
};

inline TrainConfig train_config(const TrainArgs& a) {
  TrainConfig c;
  try {
    c.mode = parse_mode(a.mode);
    c.optimizer = parse_optimizer(a.optimizer);
    c.score_form = parse_score_form(a.score_form);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  c.code_dim = a.code_dim ? a.code_dim : a.dim;
  c.visit_dim = a.visit_dim ? a.visit_dim : a.dim;
  c.patient_dim = a.patient_dim ? a.patient_dim : a.dim;
  c.lambda = a.lambda;
  c.margin = a.gamma;
  c.learning_rate = a.lr;
  c.k_negatives = a.negatives;
  c.window = a.window;
  c.minibatch = a.batch;
  c.epochs = a.epochs;
  c.patience = a.patience;
  c.seed = a.seed;
  c.threads = resolve_threads(a.threads);
  c.weighted_negatives = a.weighted_negatives;
  c.log_counts = a.log_counts;
  c.record_time = a.record_time;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

inline void run_train(const TrainArgs& a, std::ostream& log) {
  const TrainConfig cfg = train_config(a);
  const std::uint64_t split_seed = a.split_seed.value_or(a.seed);
  auto split = split_dataset(read_cohort_file(a.cohort), SplitRatios{}, split_seed);
  const Vocabulary vocab = build_vocabulary(split.train);
  const auto train_set = encode_cohort(split.train, vocab);
  std::size_t skipped = 0;
  const auto valid_set = encode_cohort(split.valid, vocab, UnknownCodes::skip, &skipped);
  log << "train: " << train_set.size() << " train / " << valid_set.size() << " valid members, " << vocab.size()
      << " codes\n";
  auto result = train(train_set, valid_set, vocab, cfg);
  save_checkpoint(a.out, {result.params, vocab, split_seed, to_json(cfg)});
  if (!a.log.empty()) result.log.write_csv_file(a.log);
  if (!a.vocab_out.empty()) vocab.save_codes(a.vocab_out);
  log << "train: best epoch " << result.log.best_epoch << " of " << result.log.epochs.size() << ", valid loss "
      << fmt(result.log.best_valid_loss) << "\n";
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string model, cohort, rep = "pv_plus", seeds = "1,2,3,4,5", out, metrics_csv, high_risk_csv, regressor_out;
  std::vector<double> percents;
  bool visit_tasks = false;
  int bootstrap_rounds = 1000;
};

struct EvalInputs {
  Checkpoint ck;
  std::vector<PatientEncoding> cohort;
};

// Rebuilds the training vocabulary from the cohort with the checkpoint's split
// seed and refuses to go on if it disagrees with the checkpoint.
inline EvalInputs load_eval_inputs(const std::string& model, const std::string& cohort_path) {
  EvalInputs in;
  in.ck = load_checkpoint(model);
  const auto records = read_cohort_file(cohort_path);
  const auto split = split_dataset(records, SplitRatios{}, in.ck.split_seed);
  const Vocabulary rebuilt = build_vocabulary(split.train);
  if (rebuilt.hash() != in.ck.vocab.hash()) {
    throw DataError("vocabulary hash mismatch: cohort gives " + detail::hex64(rebuilt.hash()) + " but checkpoint has " +
                    detail::hex64(in.ck.vocab.hash()) + "; the cohort is not the one this model was trained on");
  }
  in.cohort = encode_cohort(records, in.ck.vocab, UnknownCodes::skip);
  return in;
}

inline Representation build_representation(const std::string& kind, const Checkpoint& ck,
                                           const std::vector<PatientEncoding>& cohort) {
  const bool log_counts = ck.train_config.value("log_counts", false);
  if (kind == "pv" || kind == "pv_plus" || kind == "patient") {
    if (ck.params.W_p.rows() == 0) {
      throw UsageError("model mode '" + std::string(to_string(ck.params.mode)) + "' has no patient vector");
    }
    return extract_patient_vectors(ck.params, cohort, log_counts);
  }
  if (kind == "raw_count") return raw_count_vectors(cohort, ck.vocab.size());
  if (kind == "skipgram_sum") return skipgram_sum_vectors(cohort, ck.params.W_c);
  if (kind == "med2vec_like") {
    if (ck.params.W_v.rows() == 0) throw UsageError("model has no visit pathway");
    return med2vec_like_vectors(ck.params, cohort);
  }
  if (kind == "prior_only") return empty_representation(cohort);
  throw UsageError("unknown representation '" + kind +
                   "' (expected pv, pv_plus, raw_count, skipgram_sum, med2vec_like or prior_only)");
}

inline void run_eval(const EvalArgs& a, std::ostream& log) {
  const auto seeds = parse_seeds(a.seeds);
  const auto in = load_eval_inputs(a.model, a.cohort);
  const auto rep = build_representation(a.rep, in.ck, in.cohort);

  EvalReport report;
  report.representation = rep.kind;
  report.seeds = seeds;
  RegressionRun current;
  if (rep.dim() > 0) {
    current = task_current_cost(rep, in.cohort, seeds);
    report.tasks.push_back(current.metrics);
  }
  const auto next = task_next_cost(rep, in.cohort, seeds);
  report.tasks.push_back(next.metrics);
  const auto& percents = a.percents.empty() ? default_percentiles() : a.percents;
  report.high_risk = high_risk_report(next, in.cohort, percents);
  if (a.visit_tasks) {
    if (in.ck.params.W_v.rows() == 0) throw UsageError("model has no visit pathway for the visit tasks");
    auto [vc, vn] = visit_cost_tasks(in.ck.params, in.cohort, seeds);
    report.tasks.push_back(vc.metrics);
    report.tasks.push_back(vn.metrics);
  }

  auto j = report.to_json();
  // Random selector at the same group sizes, per seed.
  nlohmann::json random = nlohmann::json::array();
  for (std::size_t p = 0; p < percents.size(); ++p) {
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      VectorXd actual(static_cast<Eigen::Index>(next.test_rows[s].size()));
      for (std::size_t i = 0; i < next.test_rows[s].size(); ++i) {
        actual(static_cast<Eigen::Index>(i)) = in.cohort[next.test_rows[s][i]].holdout_cost;
      }
      auto [m, sd] =
          random_selection_bootstrap(actual, report.high_risk.per_seed[s][p].selected, a.bootstrap_rounds, seeds[s]);
      per.push_back({{"seed", seeds[s]}, {"mean", m}, {"std", sd}});
    }
    random.push_back({{"percent", percents[p]}, {"per_seed", per}});
  }
  j["random_selector"] = random;
  j["vocab_hash"] = detail::hex64(in.ck.vocab.hash());
  j["model_mode"] = to_string(in.ck.params.mode);
  write_text_file(a.out, j.dump(2) + "\n");

  std::ostringstream metrics, hr;
  report.write_metrics_csv(metrics);
  report.write_high_risk_csv(hr);
  write_text_file(a.metrics_csv.empty() ? sibling(a.out, "_metrics.csv") : a.metrics_csv, metrics.str());
  write_text_file(a.high_risk_csv.empty() ? sibling(a.out, "_high_risk.csv") : a.high_risk_csv, hr.str());
  if (!current.models.empty()) {
    const std::string path = a.regressor_out.empty() ? sibling(a.out, "_regressor.json") : a.regressor_out;
    auto reg = regressor_json(current.models.front(), rep.kind, current.metrics.task);
    reg["seed"] = seeds.front();
    write_text_file(path, reg.dump(2) + "\n");
  }
  for (const auto& m : report.tasks) {
    log << "eval: " << m.task << " " << m.representation << " R2 " << fmt(m.r2_mean) << " +- " << fmt(m.r2_std)
        << "\n";
  }
}

// ---- interpret --------------------------------------------------------------

struct InterpretArgs {
  std::string model, regressor, truth, out_dir, cohort;
  int top_codes = 8, top_coords = 2;
};

inline void run_interpret(const InterpretArgs& a, std::ostream& log) {
  const auto ck = load_checkpoint(a.model);
  const auto truth = GroundTruth::load(a.truth);
  std::filesystem::create_directories(a.out_dir);
  const std::filesystem::path dir(a.out_dir);
  const auto& P = ck.params;

  // Coordinates report: the most influential coordinates and their top codes.
  nlohmann::json coords = nlohmann::json::array();
  std::ostringstream coords_csv;
  coords_csv << "rank,coordinate,influence,codes\n";
  if (!a.regressor.empty()) {
    const auto reg = read_json_file(a.regressor);
    std::vector<double> coef;
    try {
      reg.at("coef").get_to(coef);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("regressor '" + a.regressor + "': " + e.what());
    }
    const VectorXd w = Eigen::Map<const VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
    if (P.W_p.rows() == 0) throw DataError("model has no patient vector; influential coordinates need one");
    if (w.size() != P.W_p.rows()) {
      throw DataError("regressor has " + std::to_string(w.size()) + " weights but the model's patient vector has " +
                      std::to_string(P.W_p.rows()) + " coordinates");
    }
    const auto top = influential_coordinates(P, w, static_cast<std::size_t>(a.top_coords));
    for (std::size_t r = 0; r < top.size(); ++r) {
      const auto codes =
          top_codes_per_coordinate(P.W_c, ck.vocab, top[r].coordinate, static_cast<std::size_t>(a.top_codes));
      nlohmann::json groups = nlohmann::json::array();
      std::string joined;
      for (const auto& c : codes) {
        auto it = truth.code_group.find(c);
        groups.push_back(it == truth.code_group.end() ? nlohmann::json(nullptr) : nlohmann::json(it->second));
        joined += (joined.empty() ? "" : " ") + c;
      }
      coords.push_back({{"rank", r + 1},
                        {"coordinate", top[r].coordinate},
                        {"influence", top[r].score},
                        {"codes", codes},
                        {"groups", groups}});
      coords_csv << r + 1 << ',' << top[r].coordinate << ',' << fmt(top[r].score) << ',' << joined << '\n';
    }
  }
  write_text_file((dir / "coordinates.json").string(), coords.dump(2) + "\n");
  write_text_file((dir / "coordinates.csv").string(), coords_csv.str());

  // Coherence of the code vectors against the planted groups.
  const auto coh = group_coherence(P.W_c, ck.vocab, truth.code_group);
  const nlohmann::json cj{{"intra_group_cosine", coh.intra},
                          {"inter_group_cosine", coh.inter},
                          {"nn_purity", coh.nn_purity},
                          {"codes", coh.codes},
                          {"zero_vectors", coh.zero_vectors}};
  write_text_file((dir / "coherence.json").string(), cj.dump(2) + "\n");

  // 2-D projections: codes always, patients when a cohort is given.
  const MatrixXd code_xy = project_2d(P.W_c.transpose());
  std::ostringstream codes_csv;
  codes_csv << "id,x,y,label\n";
  for (std::size_t c = 0; c < ck.vocab.size(); ++c) {
    const auto& code = ck.vocab.code(static_cast<CodeId>(c));
    auto it = truth.code_group.find(code);
    const std::string label = it == truth.code_group.end() ? "noise" : "group" + std::to_string(it->second);
    const auto r = static_cast<Eigen::Index>(c);
    codes_csv << csv_field(code) << ',' << fmt(code_xy(r, 0)) << ',' << fmt(code_xy(r, 1)) << ',' << label << '\n';
  }
  write_text_file((dir / "codes_2d.csv").string(), codes_csv.str());

  if (!a.cohort.empty()) {
    const auto in = load_eval_inputs(a.model, a.cohort);
    const auto rep = build_representation("patient", in.ck, in.cohort);
    const MatrixXd xy = project_2d(rep.vectors);
    std::ostringstream pcsv;
    pcsv << "id,x,y,label\n";
    for (std::size_t i = 0; i < rep.members.size(); ++i) {
      const auto& m = rep.members[i];
      auto ch = truth.member_chronic.find(m);
      const std::string label = ch == truth.member_chronic.end() ? "unknown" : ch->second ? "chronic" : "other";
      const auto r = static_cast<Eigen::Index>(i);
      pcsv << csv_field(m) << ',' << fmt(xy(r, 0)) << ',' << fmt(xy(r, 1)) << ',' << label << '\n';
    }
    write_text_file((dir / "patients_2d.csv").string(), pcsv.str());
  }
  log << "interpret: nn_purity " << fmt(coh.nn_purity) << ", intra " << fmt(coh.intra) << ", inter "
      << fmt(coh.inter) << "\n";
}

// ---- entry point ------------------------------------------------------------

inline std::string version_text() {
  return "carevec " + std::string(kVersion) + "\ncheckpoint format " + std::to_string(kCheckpointVersion) + "\n";
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Patient and medical-code representations from claims data", "carevec"};
  app.require_subcommand(0, 1);
  bool show_version = false;
  app.add_flag("--version", show_version, "Print the program and file format versions");

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic claims corpus with planted structure");
  g->add_option("--config", gen.config, "Generator config (JSON); defaults when omitted")->check(CLI::ExistingFile);
  g->add_option("--out-claims", gen.out_claims, "Claims JSONL output")->required();
  g->add_option("--out-truth", gen.out_truth, "Ground truth JSON output")->required();
  g->add_option("--out-codemap", gen.out_codemap, "Code map JSON output (aliases to canonical codes)");
  g->add_option("--seed", gen.seed, "Override the config seed");

  PrepArgs prep;
  auto* p = app.add_subcommand("prep", "Turn raw claims into a cohort of visit sequences");
  p->add_option("--claims", prep.claims, "Claims JSONL input")->required()->check(CLI::ExistingFile);
  p->add_option("--codemap", prep.codemap, "Code map JSON")->check(CLI::ExistingFile);
  p->add_option("--window", prep.window, "Training window FROM:TO")->capture_default_str();
  p->add_option("--min-visits", prep.min_visits, "Minimum visits in the window")->capture_default_str();
  p->add_option("--out", prep.out, "Cohort JSONL output")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train code, visit and patient representations");
  t->add_option("--cohort", tr.cohort, "Cohort JSONL")->required()->check(CLI::ExistingFile);
  t->add_option("--mode", tr.mode, "pv, pv_plus, no_patient_vector or skipgram")->capture_default_str();
  t->add_option("--dim", tr.dim, "Size of code, visit and patient vectors")->capture_default_str();
  t->add_option("--code-dim", tr.code_dim, "Override the code vector size");
  t->add_option("--visit-dim", tr.visit_dim, "Override the visit vector size");
  t->add_option("--patient-dim", tr.patient_dim, "Override the patient vector size");
  t->add_option("--lambda", tr.lambda, "Skip-gram weight")->capture_default_str();
  t->add_option("--negatives", tr.negatives, "Negative codes per visit")->capture_default_str();
  t->add_option("--gamma", tr.gamma, "Ranking margin")->capture_default_str();
  t->add_option("--window", tr.window, "Neighbouring visits on each side")->capture_default_str();
  t->add_option("--batch", tr.batch, "Patients per minibatch")->capture_default_str();
  t->add_option("--epochs", tr.epochs, "Maximum epochs")->capture_default_str();
  t->add_option("--patience", tr.patience, "Early-stopping patience; 0 disables")->capture_default_str();
  t->add_option("--lr", tr.lr, "Learning rate")->capture_default_str();
  t->add_option("--optimizer", tr.optimizer, "adam or sgd")->capture_default_str();
  t->add_option("--score-form", tr.score_form, "bilinear or linear")->capture_default_str();
  t->add_flag("--weighted-negatives", tr.weighted_negatives, "Sample negatives by frequency^0.75");
  t->add_flag("--log-counts", tr.log_counts, "Use log1p of code counts for the patient input");
  t->add_flag("--record-time", tr.record_time, "Fill the seconds column of the log");
  t->add_option("--seed", tr.seed, "Training seed")->capture_default_str();
  t->add_option("--split-seed", tr.split_seed, "Cohort split seed; defaults to --seed");
  t->add_option("--threads", tr.threads, "Worker threads (or CAREVEC_THREADS)");
  t->add_option("--out", tr.out, "Checkpoint output")->required();
  t->add_option("--log", tr.log, "Training log CSV output");
  t->add_option("--vocab-out", tr.vocab_out, "Vocabulary text output");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Cost regressions and high-risk selection on a representation");
  e->add_option("--model", ev.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  e->add_option("--cohort", ev.cohort, "Cohort JSONL the model was trained on")->required()->check(CLI::ExistingFile);
  e->add_option("--rep", ev.rep, "pv, pv_plus, raw_count, skipgram_sum, med2vec_like or prior_only")
      ->capture_default_str();
  e->add_option("--seeds", ev.seeds, "Comma-separated split seeds")->capture_default_str();
  e->add_option("--percentiles", ev.percents, "High-risk percentages")->delimiter(',');
  e->add_option("--bootstrap", ev.bootstrap_rounds, "Random-selector rounds")->capture_default_str()->check(
      CLI::PositiveNumber);
  e->add_flag("--visit-tasks", ev.visit_tasks, "Also run the visit-level cost tasks");
  e->add_option("--out", ev.out, "Report JSON output")->required();
  e->add_option("--metrics-csv", ev.metrics_csv, "Per-seed metrics CSV (default <out>_metrics.csv)");
  e->add_option("--high-risk-csv", ev.high_risk_csv, "High-risk table CSV (default <out>_high_risk.csv)");
  e->add_option("--regressor-out", ev.regressor_out, "Current-cost regressor JSON (default <out>_regressor.json)");

  InterpretArgs in;
  auto* i = app.add_subcommand("interpret", "Influential coordinates, code coherence and 2-D projections");
  i->add_option("--model", in.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  i->add_option("--regressor", in.regressor, "Regressor JSON from eval")->check(CLI::ExistingFile);
  i->add_option("--truth", in.truth, "Ground truth JSON from gen")->required()->check(CLI::ExistingFile);
  i->add_option("--cohort", in.cohort, "Cohort JSONL for the patient projection")->check(CLI::ExistingFile);
  i->add_option("--top-codes", in.top_codes, "Codes listed per coordinate")->capture_default_str()->check(
      CLI::PositiveNumber);
  i->add_option("--top-coords", in.top_coords, "Influential coordinates reported")->capture_default_str()->check(
      CLI::PositiveNumber);
  i->add_option("--out-dir", in.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, err, err);
    return kUsage;
  }
  if (show_version) {
    out << version_text();
    return kOk;
  }
  try {
    if (g->parsed()) {
      run_gen(gen, out);
    } else if (p->parsed()) {
      run_prep(prep, out);
    } else if (t->parsed()) {
      run_train(tr, out);
    } else if (e->parsed()) {
      run_eval(ev, out);
    } else if (i->parsed()) {
      run_interpret(in, out);
    } else {
      err << app.help();
      return kUsage;
    }
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsage;
  } catch (const NumericalError& ex) {
    err << "numerical error: " << ex.what() << "\n";
    return kNumerical;
  } catch (const std::invalid_argument& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsage;
  } catch (const std::exception& ex) {
    err << "data error: " << ex.what() << "\n";
    return kData;
  }
  return kOk;
}

}  // namespace carevec::cli
