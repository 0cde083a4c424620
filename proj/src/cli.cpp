// SPDX-License-Identifier: Apache-2.0
#include "scalaw/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "scalaw/checkpoint.hpp"
#include "scalaw/errors.hpp"
#include "scalaw/evaluation.hpp"
#include "scalaw/fit.hpp"
#include "scalaw/meta.hpp"
#include "scalaw/report.hpp"
#include "scalaw/subset.hpp"
#include "scalaw/synth.hpp"
#include "scalaw/text.hpp"

namespace scalaw {

namespace fs = std::filesystem;

namespace {

// TOML config whose [sections] only group keys; every key names a global flag.
class FlatToml : public CLI::ConfigTOML {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigTOML::from_config(input);
    std::vector<CLI::ConfigItem> out;
    for (auto& item : items) {
      if (item.name == "++" || item.name == "--") continue;
      item.parents.clear();
      out.push_back(std::move(item));
    }
    return out;
  }
};

struct RunConfig {
  std::vector<std::string> inputs;
  std::string family;
  std::optional<std::string> corpus;
  std::string out_dir = ".";
  std::uint64_t seed = 0;

  // subset
  std::optional<int> num_models;
  std::optional<double> train_fraction;
  std::optional<double> suffix_fraction;
  std::optional<std::int64_t> cutoff_tokens;
  bool cut_early = false;
  std::optional<std::int64_t> max_train_params;
  double target_fraction = kDefaultTargetFraction;

  // fit
  std::string loss = "square";
  double delta = kDefaultHuberDelta;
  bool delta_e = false;
  int restarts = 32;
  int max_iterations = 2000;
  double tolerance = 1e-10;
  std::optional<double> freeze_A;
  std::optional<double> freeze_alpha;

  // grid
  std::string rows = "num_models";
  std::vector<double> row_values = {3, 4, 5};
  std::string cols = "train_fraction";
  std::vector<double> col_values = {0.25, 0.5, 1.0};
  std::vector<double> flop_levels;
  std::vector<double> star_thresholds = {kDefaultStarThresholds.begin(),
                                         kDefaultStarThresholds.end()};
  int threads = 1;
  bool emit_svg = true;

  // transfer / downscale / eval / pca
  std::optional<std::int64_t> train_params;
  int k = 3;
  std::string params_path;
  bool covariance = false;

  // synth
  std::string family_name = "synthetic";
  std::vector<double> truth;
  std::vector<std::int64_t> sizes;
  std::vector<std::int64_t> tokens = {2'000'000'000};
  int checkpoints = 20;
  double min_token_fraction = 0.01;
  int runs_per_size = 1;
  double noise_sigma = 0.0;
  double seed_sigma = 0.0;
  double bump_amplitude = 0.0;
  std::int64_t bump_span = 0;
  std::string format = "csv";

  SubsetSpec subset() const {
    SubsetSpec s;
    s.num_models = num_models;
    s.train_fraction_max = train_fraction;
    s.suffix_fraction = suffix_fraction;
    s.cutoff_tokens = cutoff_tokens;
    if (cut_early && !s.cutoff_tokens) s.cutoff_tokens = kDefaultCutoffTokens;
    s.max_train_params = max_train_params;
    s.target_fraction = target_fraction;
    s.validate();
    return s;
  }

  FitConfig fit_config() const {
    FitConfig c;
    if (loss == "huber")
      c.loss = LossKind::huber(delta_e ? std::exp(1.0) * 1e-3 : delta);
    else if (loss != "square")
      throw UsageError("--loss must be 'square' or 'huber'");
    c.restarts = restarts;
    c.max_iterations = max_iterations;
    c.tolerance = tolerance;
    c.rng_seed = seed;
    c.frozen.A = freeze_A;
    c.frozen.alpha = freeze_alpha;
    c.validate();
    return c;
  }
};

void register_options(CLI::App& app, RunConfig& c) {
  app.add_option("--input", c.inputs, "Checkpoint table(s), CSV or JSONL");
  app.add_option("--family", c.family, "family_id to analyze");
  app.add_option("--corpus", c.corpus, "loss_corpus to analyze");
  app.add_option("--out", c.out_dir, "Output directory")->capture_default_str();
  app.add_option("--seed", c.seed, "RNG seed for restarts and synthesis")->capture_default_str();

  auto* subset = app.add_option_group("subset");
  subset->add_option("--num-models", c.num_models, "Train on k sizes");
  subset->add_option("--train-fraction", c.train_fraction, "Keep tokens_seen <= q*total");
  subset->add_option("--suffix-fraction", c.suffix_fraction, "Keep tokens_seen >= (1-q)*total");
  subset->add_option("--cutoff-tokens", c.cutoff_tokens, "Drop tokens_seen < cutoff");
  subset->add_flag("--cut-early", c.cut_early, "Drop the first 10B tokens");
  subset->add_option("--max-train-params", c.max_train_params, "Largest training size");
  subset->add_option("--target-fraction", c.target_fraction, "q of the target tail")
      ->capture_default_str();

  auto* fitg = app.add_option_group("fit");
  fitg->add_option("--loss", c.loss, "square | huber")->capture_default_str();
  fitg->add_option("--delta", c.delta, "Huber delta")->capture_default_str();
  fitg->add_flag("--delta-e", c.delta_e, "Use delta = e * 1e-3");
  fitg->add_option("--restarts", c.restarts)->capture_default_str();
  fitg->add_option("--max-iterations", c.max_iterations)->capture_default_str();
  fitg->add_option("--tolerance", c.tolerance)->capture_default_str();
  fitg->add_option("--freeze-A", c.freeze_A, "Hold A at this value");
  fitg->add_option("--freeze-alpha", c.freeze_alpha, "Hold alpha at this value");

  auto* grid = app.add_option_group("grid");
  grid->add_option("--rows", c.rows, "num_models | train_fraction | scale_up")
      ->capture_default_str();
  grid->add_option("--row-values", c.row_values)->capture_default_str();
  grid->add_option("--cols", c.cols)->capture_default_str();
  grid->add_option("--col-values", c.col_values)->capture_default_str();
  grid->add_option("--flop-levels", c.flop_levels, "iso-FLOP levels (default: 4 log-spaced)");
  grid->add_option("--stars", c.star_thresholds, "ARE thresholds for efficiency stars")
      ->capture_default_str();
  grid->add_option("--threads", c.threads)->capture_default_str();
  grid->add_option("--emit-svg", c.emit_svg)->capture_default_str();

  auto* misc = app.add_option_group("protocol");
  misc->add_option("--train-params", c.train_params, "Training size for transfer");
  misc->add_option("--k", c.k, "Largest sizes used when downscaling")->capture_default_str();
  misc->add_option("--params", c.params_path, "Law parameters JSON for eval");
  misc->add_flag("--covariance", c.covariance, "PCA on the covariance matrix");

  auto* synth = app.add_option_group("synth");
  synth->add_option("--family-name", c.family_name)->capture_default_str();
  synth->add_option("--truth", c.truth, "E A alpha B beta")->expected(5);
  synth->add_option("--sizes", c.sizes);
  synth->add_option("--tokens", c.tokens, "Tokens per run (one, or one per size)")
      ->capture_default_str();
  synth->add_option("--checkpoints", c.checkpoints)->capture_default_str();
  synth->add_option("--min-token-fraction", c.min_token_fraction)->capture_default_str();
  synth->add_option("--runs-per-size", c.runs_per_size)->capture_default_str();
  synth->add_option("--noise-sigma", c.noise_sigma)->capture_default_str();
  synth->add_option("--seed-sigma", c.seed_sigma)->capture_default_str();
  synth->add_option("--bump-amplitude", c.bump_amplitude)->capture_default_str();
  synth->add_option("--bump-span", c.bump_span)->capture_default_str();
  synth->add_option("--format", c.format, "csv | jsonl")->capture_default_str();
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

class Command {
 public:
  Command(const RunConfig& c, std::ostream& out) : c_(c), out_(out) {}

  fs::path path(const std::string& name) const { return fs::path(c_.out_dir) / name; }
  void write(const std::string& name, const std::string& content) const {
    write_file_atomic(path(name), content);
  }

  std::vector<ScaledFamily> load_all() const {
    if (c_.inputs.empty()) throw UsageError("--input is required");
    std::map<std::string, std::vector<CheckpointRecord>> merged;
    for (const auto& p : c_.inputs) {
      if (!fs::exists(p)) throw UsageError("input '" + p + "' does not exist");
      for (const auto& fam : ingest_file(p))
        for (const auto& r : fam.records()) merged[fam.family_id()].push_back(r);
    }
    std::vector<ScaledFamily> out;
    for (auto& [id, recs] : merged) {
      if (!c_.family.empty() && id != c_.family) continue;
      out.emplace_back(id, std::move(recs));
    }
    if (!c_.family.empty() && out.empty())
      throw UsageError("family '" + c_.family + "' not found in input");
    return out;
  }

  ScaledFamily corpus_of(const ScaledFamily& fam) const {
    if (c_.corpus) return select_corpus(fam, *c_.corpus);
    if (fam.corpora().size() > 1)
      throw UsageError("family '" + fam.family_id() +
                       "' has several loss corpora; select one with --corpus");
    return fam;
  }

  ScaledFamily load_one() const {
    auto all = load_all();
    if (all.empty()) throw DataError("input holds no records");
    if (all.size() > 1) throw UsageError("input holds several families; select one with --family");
    return corpus_of(all.front());
  }

  void report_fit(const FitResult& fit, const EvalReport& eval, const FitConfig& config,
                  const SubsetSpec& spec) const {
    Json fj = to_json(fit);
    fj["config"] = to_json(config);
    fj["subset"] = to_json(spec);
    write("fit.json", dump(fj));
    Json ej = to_json(eval);
    write("eval.json", dump(ej));
    write("eval.csv", eval_csv(eval));
    out_ << "converged: " << (fit.converged ? "yes" : "no") << "\n"
         << "ARE: " << format_double(eval.are) << " over " << eval.n_targets << " targets"
         << " (meaningful-difference floor " << format_double(eval.meaningful_floor) << ")\n";
  }

  int fit_and_eval(const Split& split, const FitConfig& config, const SubsetSpec& spec) const {
    const auto fit = scalaw::fit(split.train, config);
    const auto eval = are(fit.params, split.target);
    report_fit(fit, eval, config, spec);
    return fit.converged ? 0 : static_cast<int>(ExitCode::kNonConvergence);
  }

  const RunConfig& c_;
  std::ostream& out_;
};

int cmd_ingest(const Command& cmd) {
  const auto families = cmd.load_all();
  Json j = Json::array();
  for (const auto& f : families) {
    const auto s = family_summary(f);
    cmd.out_ << s.family_id << ": " << s.num_runs << " runs, " << s.num_sizes << " sizes ("
             << s.min_params << ".." << s.max_params << " params), " << s.num_checkpoints
             << " checkpoints\n";
    j.push_back(to_json(s));
  }
  cmd.write("summary.json", dump(j));
  if (cmd.c_.format == "csv" || cmd.c_.format == "jsonl") {
    const auto fmt = cmd.c_.format == "csv" ? TableFormat::kCsv : TableFormat::kJsonl;
    cmd.write("normalized." + cmd.c_.format, serialize_string(families, fmt));
  } else {
    throw UsageError("--format must be 'csv' or 'jsonl'");
  }
  return 0;
}

int cmd_fit(const Command& cmd) {
  const auto family = cmd.load_one();
  const auto config = cmd.c_.fit_config();
  const auto spec = cmd.c_.subset();
  return cmd.fit_and_eval(select_train_target(family, spec), config, spec);
}

int cmd_eval(const Command& cmd) {
  const auto family = cmd.load_one();
  const auto split = select_train_target(family, cmd.c_.subset());
  Json j;
  std::string csv;
  if (!cmd.c_.params_path.empty()) {
    std::ifstream in(cmd.c_.params_path);
    if (!in) throw UsageError("cannot open --params '" + cmd.c_.params_path + "'");
    Json doc;
    try {
      doc = Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw UsageError(std::string("--params is not valid JSON: ") + e.what());
    }
    const auto law = are(law_params_from_json(doc), split.target);
    j["law"] = to_json(law);
    csv += eval_csv(law);
    cmd.out_ << "law ARE: " << format_double(law.are) << "\n";
  }
  const auto best = baseline_best_performance(split.train, split.target);
  const auto most = baseline_most_trained(split.train, split.target);
  j["best_performance"] = to_json(best);
  j["most_trained"] = to_json(most);
  auto strip_header = [](std::string s) { return s.substr(s.find('\n') + 1); };
  csv = csv.empty() ? eval_csv(best) : csv + strip_header(eval_csv(best));
  csv += strip_header(eval_csv(most));
  cmd.write("eval.json", dump(j));
  cmd.write("eval.csv", csv);
  cmd.out_ << "best-performance baseline ARE: " << format_double(best.are) << "\n"
           << "most-trained baseline ARE: " << format_double(most.are) << "\n"
           << "meaningful-difference floor: " << format_double(kMeaningfulFloor) << "\n";
  return 0;
}

int cmd_grid(const Command& cmd) {
  const auto family = cmd.load_one();
  const auto& c = cmd.c_;
  GridAxes axes;
  axes.row_axis = parse_axis(c.rows);
  axes.col_axis = parse_axis(c.cols);
  axes.row_values = c.row_values;
  axes.col_values = c.col_values;
  axes.base = c.subset();
  const auto report = run_grid(family, axes, c.fit_config(), c.threads);

  std::vector<ContourLevel> contours;
  const bool all_flops = std::all_of(report.cells.begin(), report.cells.end(),
                                     [](const GridCell& g) { return std::isfinite(g.train_flops); });
  if (all_flops) {
    auto levels = c.flop_levels.empty() ? default_flop_levels(report.cells) : c.flop_levels;
    contours = iso_flop_contours(report.cells, report.rows, report.cols, levels);
  }
  const auto stars = efficiency_stars(report.cells, c.star_thresholds);

  cmd.write("grid.json", dump(to_json(report, contours, stars)));
  cmd.write("grid.csv", grid_csv(report));
  cmd.write("contours.csv", contours_csv(report, contours));
  cmd.write("stars.csv", stars_csv(report, stars));
  if (c.emit_svg)
    cmd.write("grid.svg", grid_svg(report, contours, stars,
                                   family.family_id() + ": " + axis_name(axes.row_axis) + " vs " +
                                       axis_name(axes.col_axis)));
  std::size_t ok = 0;
  for (const auto& cell : report.cells) ok += cell.ok() ? 1 : 0;
  cmd.out_ << report.cells.size() << " cells, " << ok << " fitted\n";
  for (const auto& s : stars) {
    cmd.out_ << "star ARE<=" << format_double(s.threshold) << ": ";
    if (s.cell)
      cmd.out_ << "row " << report.cells[*s.cell].row << ", col " << report.cells[*s.cell].col
               << "\n";
    else
      cmd.out_ << "none\n";
  }
  return 0;
}

int cmd_transfer(const Command& cmd) {
  if (!cmd.c_.freeze_A || !cmd.c_.freeze_alpha)
    throw UsageError("transfer needs explicit --freeze-A and --freeze-alpha values");
  const auto family = cmd.load_one();
  const auto spec = cmd.c_.subset();
  const auto split = transfer_split(family, cmd.c_.train_params, spec);
  return cmd.fit_and_eval(split, cmd.c_.fit_config(), spec);
}

int cmd_downscale(const Command& cmd) {
  const auto family = cmd.load_one();
  const auto spec = cmd.c_.subset();
  const auto split = downscale_split(family, cmd.c_.k, spec);
  return cmd.fit_and_eval(split, cmd.c_.fit_config(), spec);
}

int cmd_cv(const Command& cmd) {
  const auto family = cmd.load_one();
  const auto rows = loo_family_cv(family, cmd.c_.fit_config(), cmd.c_.subset());
  cmd.write("cv.json", dump(to_json(rows)));
  cmd.write("cv.csv", cv_csv(rows));
  for (const auto& r : rows) {
    cmd.out_ << "held out " << r.held_out_params << ": ";
    if (r.are)
      cmd.out_ << "ARE " << format_double(*r.are) << "\n";
    else
      cmd.out_ << r.failure << "\n";
  }
  return 0;
}

int cmd_pca(const Command& cmd) {
  const auto families = cmd.load_all();
  const auto config = cmd.c_.fit_config();
  const auto spec = cmd.c_.subset();
  std::vector<LawParams> fits;
  std::vector<std::string> labels;
  Json per_family = Json::array();
  for (const auto& fam : families) {
    Json fj;
    fj["family_id"] = fam.family_id();
    try {
      const auto data = cmd.corpus_of(fam);
      const auto split = select_train_target(data, spec);
      const auto r = fit(split.train, config);
      fj["fit"] = to_json(r);
      if (r.converged) {
        fits.push_back(r.params);
        labels.push_back(fam.family_id());
      } else {
        fj["failure"] = kFailNoConverge;
      }
    } catch (const DataError& e) {
      fj["failure"] = e.what();
    }
    per_family.push_back(std::move(fj));
  }
  cmd.write("pca_fits.json", dump(per_family));
  const auto report = pca_params(fits, !cmd.c_.covariance);
  cmd.write("pca.json", dump(to_json(report, labels)));
  cmd.write("pca.csv", pca_csv(report, labels, fits));
  double cum = 0.0;
  for (std::size_t k = 0; k < report.explained_variance_ratio.size(); ++k) {
    cum += report.explained_variance_ratio[k];
    cmd.out_ << "pc" << (k + 1) << ": " << format_double(report.explained_variance_ratio[k])
             << " (cumulative " << format_double(cum) << ")\n";
  }
  return 0;
}

int cmd_synth(const Command& cmd) {
  const auto& c = cmd.c_;
  if (c.truth.size() != 5) throw UsageError("--truth needs 5 values: E A alpha B beta");
  if (c.sizes.empty()) throw UsageError("--sizes is required");
  SynthSpec spec;
  spec.family_id = c.family_name;
  spec.truth = {c.truth[0], c.truth[1], c.truth[2], c.truth[3], c.truth[4]};
  spec.sizes = c.sizes;
  spec.tokens_per_run = c.tokens;
  spec.checkpoints_per_run = c.checkpoints;
  spec.min_token_fraction = c.min_token_fraction;
  spec.runs_per_size = c.runs_per_size;
  spec.noise_sigma = c.noise_sigma;
  spec.seed_sigma = c.seed_sigma;
  if (c.bump_span > 0) spec.warmup_bump = WarmupBump{c.bump_amplitude, c.bump_span};
  spec.rng_seed = c.seed;
  if (c.format != "csv" && c.format != "jsonl")
    throw UsageError("--format must be 'csv' or 'jsonl'");
  const auto family = generate(spec);
  const std::vector<ScaledFamily> families{family};
  const auto fmt = c.format == "csv" ? TableFormat::kCsv : TableFormat::kJsonl;
  cmd.write("synth." + c.format, serialize_string(families, fmt));
  Json truth;
  truth["truth"] = to_json(spec.truth);
  truth["sizes"] = spec.sizes;
  truth["tokens_per_run"] = spec.tokens_per_run;
  truth["checkpoints_per_run"] = spec.checkpoints_per_run;
  truth["noise_sigma"] = spec.noise_sigma;
  truth["seed_sigma"] = spec.seed_sigma;
  truth["rng_seed"] = spec.rng_seed;
  cmd.write("synth_truth.json", dump(truth));
  cmd.out_ << "wrote " << family.size() << " checkpoints to "
           << cmd.path("synth." + c.format).string() << "\n";
  return 0;
}

void report_error(std::ostream& err, const char* kind, const std::string& message, int code) {
  Json j;
  j["error"] = {{"kind", kind}, {"message", message}, {"exit_code", code}};
  err << j.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fit, evaluate and meta-analyze scaling laws from checkpoint logs", "scalaw"};
  app.set_config("--config", "", "TOML config; flags override file values");
  app.config_formatter(std::make_shared<FlatToml>());
  app.require_subcommand(1);
  RunConfig config;
  register_options(app, config);

  using Handler = int (*)(const Command&);
  const std::vector<std::pair<std::string, std::pair<std::string, Handler>>> commands = {
      {"ingest", {"Validate checkpoint tables and summarize families", cmd_ingest}},
      {"fit", {"Fit on the smaller sizes, score the largest size's tail", cmd_fit}},
      {"eval", {"Score saved parameters and the fit-free baselines", cmd_eval}},
      {"grid", {"Meta-experiment grid with iso-FLOP contours and stars", cmd_grid}},
      {"transfer", {"Fit (E, B, beta) on one size with frozen (A, alpha)", cmd_transfer}},
      {"downscale", {"Predict the smallest size from the k largest", cmd_downscale}},
      {"cv", {"Leave-one-size-out cross-validation", cmd_cv}},
      {"pca", {"PCA over per-family fitted parameters", cmd_pca}},
      {"synth", {"Generate a synthetic family from known parameters", cmd_synth}},
  };
  std::map<std::string, Handler> handlers;
  for (const auto& [name, desc] : commands) {
    app.add_subcommand(name, desc.first)->fallthrough();
    handlers[name] = desc.second;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what(), static_cast<int>(ExitCode::kUsage));
    return static_cast<int>(ExitCode::kUsage);
  }

  const auto* sub = app.get_subcommands().front();
  try {
    Command cmd(config, out);
    return handlers.at(sub->get_name())(cmd);
  } catch (const Error& e) {
    const int code = static_cast<int>(e.exit_code());
    report_error(err, e.kind(), e.what(), code);
    return code;
  } catch (const fs::filesystem_error& e) {
    report_error(err, "usage", e.what(), static_cast<int>(ExitCode::kUsage));
    return static_cast<int>(ExitCode::kUsage);
  }
}

}  // namespace scalaw
