#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "wellsim/csv.hpp"
#include "wellsim/error.hpp"
#include "wellsim/manifest.hpp"
#include "wellsim/population.hpp"
#include "wellsim/preprocess.hpp"
#include "wellsim/report.hpp"
#include "wellsim/shap.hpp"
#include "wellsim/simulation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wellsim;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by every subcommand. Unset optionals leave the config file value alone.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string preset;
  std::string out;
  std::string input;
  std::optional<int> k;
  std::optional<int> episodes;
  std::optional<int> agents;
  bool quiet = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "master seed");
  sub->add_option("--preset", c.preset, "desk or full")->check(CLI::IsMember({"desk", "full"}));
  sub->add_option("--out", c.out, "output directory (default: $WELLSIM_OUTPUT_ROOT/<command>-<hash>)");
  sub->add_flag("--quiet", c.quiet, "no progress output");
}

void add_input(CLI::App* sub, Common& c) {
  sub->add_option("--input", c.input, "survey CSV (synthesised when omitted)")->check(CLI::ExistingFile);
}

void add_sim(CLI::App* sub, Common& c) {
  add_input(sub, c);
  sub->add_option("--k", c.k, "feature-set size used for the state");
  sub->add_option("--episodes", c.episodes, "episode budget");
  sub->add_option("--agents", c.agents, "agents simulated");
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return json::parse(in);
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

// Everything a run depends on, after presets and flag overrides.
json effective_config(const std::string& command, const Common& c, const json& extra) {
  json cfg = c.config_path.empty() ? json::object() : read_json(c.config_path);
  if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
  if (!c.preset.empty()) {
    const bool desk = c.preset == "desk";
    cfg["preset"] = c.preset;
    cfg["sim"]["agents"] = desk ? DeskPreset::agents : 561;
    cfg["sim"]["episodes"] = desk ? DeskPreset::episodes : 2000;
    cfg["sweep"]["seeds"] = desk ? DeskPreset::seeds : 5;
  }
  if (c.seed) cfg["seed"] = *c.seed;
  if (!cfg.contains("seed")) cfg["seed"] = 7;
  if (!c.input.empty()) cfg["population"]["input"] = fs::absolute(c.input).string();
  if (c.k) cfg["features"]["k"] = *c.k;
  if (c.episodes) cfg["sim"]["episodes"] = *c.episodes;
  if (c.agents) cfg["sim"]["agents"] = *c.agents;
  cfg.merge_patch(extra);
  cfg["command"] = command;
  return cfg;
}

class Run {
 public:
  Run(std::string command, json config, bool quiet)
      : command_(std::move(command)), config_(std::move(config)), quiet_(quiet) {
    manifest_.command = command_;
    manifest_.config = config_;
    manifest_.config_hash = config_hash(config_);
    manifest_.seed = config_.at("seed").get<std::uint64_t>();
    manifest_.started_at = utc_timestamp();
    if (config_.contains("population") && config_["population"].contains("input"))
      manifest_.inputs.push_back(config_["population"]["input"].get<std::string>());
  }

  void set_dir(const std::string& explicit_out) {
    if (!explicit_out.empty()) {
      dir_ = explicit_out;
    } else {
      const char* root = std::getenv("WELLSIM_OUTPUT_ROOT");
      dir_ = fs::path(root && *root ? root : "wellsim_out") / (command_ + "-" + manifest_.config_hash.substr(0, 12));
    }
    fs::create_directories(dir_);
  }

  const json& config() const { return config_; }
  std::uint64_t seed() const { return manifest_.seed; }
  const fs::path& dir() const { return dir_; }
  fs::path path(const std::string& name) const { return dir_ / name; }

  void input(const std::string& p) { manifest_.inputs.push_back(fs::absolute(p).string()); }
  void output(const fs::path& p) { manifest_.outputs.push_back(p.filename().string()); }

  void log(const std::string& msg) const {
    if (!quiet_) std::cerr << "[" << command_ << "] " << msg << '\n';
  }

  void finish() {
    manifest_.finished_at = utc_timestamp();
    manifest_.write(dir_ / "manifest.json");
    log("wrote " + std::to_string(manifest_.outputs.size()) + " files to " + dir_.string());
  }

 private:
  std::string command_;
  json config_;
  bool quiet_;
  RunManifest manifest_;
  fs::path dir_;
};

template <class T>
T cfg_value(const json& cfg, const std::string& section, const std::string& key, T fallback) {
  if (!cfg.contains(section) || !cfg[section].contains(key)) return fallback;
  return cfg[section][key].get<T>();
}

Population load_population(const Run& run) {
  const json& cfg = run.config();
  if (cfg.contains("population") && cfg["population"].contains("input")) {
    Population pop = ingest_csv(cfg["population"]["input"].get<std::string>());
    for (const auto& w : pop.warnings) run.log("warning: " + w);
    return pop;
  }
  CalibrationSpec cal;
  if (cfg.contains("population") && cfg["population"].contains("calibration"))
    cal = CalibrationSpec::from_json(cfg["population"]["calibration"]);
  const auto n = cfg_value<std::size_t>(cfg, "population", "n", kDefaultPopulationSize);
  return synthesize_population(n, run.seed(), cal);
}

SimConfig sim_config(const Run& run) {
  const json& cfg = run.config();
  SimConfig sc = SimConfig::from_json(cfg.value("sim", json::object()));
  sc.seed = run.seed();
  sc.feature_set = cfg_value<int>(cfg, "features", "k", sc.feature_set);
  sc.validate();
  return sc;
}

SimWorld make_world(Run& run, const Population& pop, const SimConfig& sc) {
  const json& cfg = run.config();
  std::vector<std::string> features;
  if (cfg.contains("features") && cfg["features"].contains("list")) {
    features = cfg["features"]["list"].get<std::vector<std::string>>();
  } else {
    run.log("selecting " + std::to_string(sc.feature_set) + " features by RFE");
    features = select_features(pop, sc.feature_set, run.seed(), nullptr,
                               cfg_value<int>(cfg, "features", "n_trees", 100));
  }
  SimWorld world = build_world(pop, features, sc.barrier);
  write_json(run.path("world.json"), {{"format_version", 1},
                                     {"features", world.features},
                                     {"state_dim", world.state_dim()},
                                     {"agents", world.agents()},
                                     {"barrier", world.barrier}});
  run.output(run.path("world.json"));
  return world;
}

void save_run(Run& run, const RunResult& r, const std::string& stem, int id) {
  RunResult copy = r;
  copy.checkpoint_ref = stem + "_checkpoint.json";
  write_json(run.path(copy.checkpoint_ref), r.checkpoint);
  run.output(run.path(copy.checkpoint_ref));
  write_json(run.path(stem + "_summary.json"), copy.summary_json());
  run.output(run.path(stem + "_summary.json"));
  {
    std::ofstream out(run.path(stem + "_run_log.csv"));
    write_run_log(out, r);
  }
  run.output(run.path(stem + "_run_log.csv"));
  const auto curve = run.path("learning_curve_" + std::to_string(id) + ".csv");
  std::ofstream out(curve);
  write_learning_curve(out, r);
  run.output(curve);
}

std::string describe(const RunResult& r) {
  std::ostringstream s;
  s << r.final_testers << "/" << r.agents << " testing, ";
  if (r.converged_at)
    s << "converged at episode " << *r.converged_at;
  else
    s << "not converged after " << r.per_episode.size() << " episodes";
  return s.str();
}

std::vector<int> parse_grid(const std::string& g) {
  int a = 0, b = 0, s = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(g);
  if (!(in >> a >> c1 >> b >> c2 >> s) || c1 != ':' || c2 != ':' || s <= 0 || a > b || a <= 0)
    throw UsageError("--grid expects lo:hi:step, e.g. 10:90:10");
  return {a, b, s};
}

// ---------------------------------------------------------------------------

void cmd_gen_pop(Run& run) {
  const json& cfg = run.config();
  CalibrationSpec cal;
  if (cfg.contains("population") && cfg["population"].contains("calibration"))
    cal = CalibrationSpec::from_json(cfg["population"]["calibration"]);
  const auto n = cfg_value<std::size_t>(cfg, "population", "n", kDefaultPopulationSize);
  LabelModel lm;
  const Population pop = synthesize_population(n, run.seed(), cal, &lm);
  write_population_csv(run.path("population.csv").string(), pop);
  run.output(run.path("population.csv"));
  write_json(run.path("label_model.json"), {{"format_version", 1},
                                           {"coefficients", lm.coefficients},
                                           {"intercept", lm.intercept},
                                           {"expected_rate", lm.expected_rate},
                                           {"realised_rate", adoption_rate(pop)},
                                           {"calibration", cal.to_json()}});
  run.output(run.path("label_model.json"));
  run.log(std::to_string(n) + " agents, adoption rate " + csv::format_double(adoption_rate(pop)));
}

void cmd_ingest(Run& run) {
  if (!run.config().contains("population") || !run.config()["population"].contains("input"))
    throw UsageError("ingest needs --input");
  const Population pop = load_population(run);
  write_population_csv(run.path("population.csv").string(), pop);
  run.output(run.path("population.csv"));
  write_json(run.path("ingest_report.json"), {{"format_version", 1},
                                             {"agents", pop.size()},
                                             {"features", pop.schema.size()},
                                             {"excluded_features", pop.excluded_features},
                                             {"unparseable_counts", pop.unparseable_counts},
                                             {"warnings", pop.warnings}});
  run.output(run.path("ingest_report.json"));
}

void cmd_preprocess(Run& run) {
  const Population pop = load_population(run);
  const DesignMatrix dm = fit_transform(pop);
  for (const auto& w : dm.warnings) run.log("warning: " + w);
  {
    std::ofstream out(run.path("design_matrix.csv"));
    csv::Row header{"agent_id"};
    header.insert(header.end(), dm.columns.begin(), dm.columns.end());
    csv::write_row(out, header);
    for (Eigen::Index i = 0; i < dm.n(); ++i) {
      csv::Row row{std::to_string(pop.agents[static_cast<std::size_t>(i)].agent_id)};
      for (Eigen::Index c = 0; c < dm.p(); ++c) row.push_back(csv::format_double(dm.rows(i, c)));
      csv::write_row(out, row);
    }
  }
  run.output(run.path("design_matrix.csv"));
  {
    std::ofstream out(run.path("outlier_flags.csv"));
    csv::write_row(out, {"agent_id", "column"});
    for (Eigen::Index i = 0; i < dm.flags.rows(); ++i)
      for (Eigen::Index c = 0; c < dm.flags.cols(); ++c)
        if (dm.flags(i, c))
          csv::write_row(out, {std::to_string(pop.agents[static_cast<std::size_t>(i)].agent_id),
                               dm.columns[static_cast<std::size_t>(c)]});
  }
  run.output(run.path("outlier_flags.csv"));
  write_json(run.path("transform.json"), dm.transform.to_json());
  run.output(run.path("transform.json"));
  write_json(run.path("preprocess_report.json"), {{"format_version", 1}, {"warnings", dm.warnings}});
  run.output(run.path("preprocess_report.json"));
}

void cmd_select_features(Run& run) {
  const json& cfg = run.config();
  const auto grid = parse_grid(cfg_value<std::string>(cfg, "features", "grid", "10:90:10"));
  const Population pop = load_population(run);
  const DesignMatrix dm = fit_transform(pop);
  Eigen::VectorXd y(dm.n());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (!pop.agents[i].label_adoption) throw ConfigError("every agent needs an adoption label for RFE");
    y[static_cast<Eigen::Index>(i)] = *pop.agents[i].label_adoption;
  }
  RfeParams p;
  p.min_features = grid[0];
  p.max_recorded = grid[1];
  p.step = grid[2];
  p.folds = cfg_value<int>(cfg, "features", "folds", p.folds);
  p.evaluate = cfg_value<bool>(cfg, "features", "evaluate", p.evaluate);
  p.forest.n_trees = cfg_value<int>(cfg, "features", "n_trees", p.forest.n_trees);
  p.forest.seed = run.seed();
  run.log("running RFE over " + std::to_string(dm.feature_names.size()) + " features");
  const RfeResult res = run_rfe(dm.rows, y, {dm.feature_names, dm.column_feature}, p);
  json j = res.to_json();
  j["format_version"] = 1;
  j["params"] = {{"min_features", p.min_features}, {"max_recorded", p.max_recorded}, {"step", p.step},
                 {"folds", p.folds}, {"evaluate", p.evaluate}, {"forest", p.forest.to_json()}};
  write_json(run.path("rfe.json"), j);
  run.output(run.path("rfe.json"));
}

void cmd_explain(Run& run) {
  const json& cfg = run.config();
  const Population pop = load_population(run);
  const DesignMatrix dm = fit_transform(pop);
  Eigen::VectorXd y(dm.n());
  for (std::size_t i = 0; i < pop.size(); ++i)
    y[static_cast<Eigen::Index>(i)] = pop.agents[i].label_adoption.value_or(0);
  ForestParams fp;
  fp.n_trees = cfg_value<int>(cfg, "explain", "n_trees", fp.n_trees);
  fp.seed = run.seed();
  const Forest forest = fit_forest(dm.rows, y, fp);
  const FeatureGroups groups{dm.feature_names, dm.column_feature};
  const ShapMatrix shap = aggregate_groups(tree_shap(forest, dm.rows, dm.columns), groups);

  // Colour axis per raw feature: the encoded value, or the hot category for one-hot groups.
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(dm.n(), static_cast<Eigen::Index>(groups.names.size()));
  std::vector<int> seen(groups.names.size(), 0);
  for (std::size_t c = 0; c < groups.column_group.size(); ++c) {
    const int g = groups.column_group[c];
    const int pos = seen[static_cast<std::size_t>(g)]++;
    const auto col = dm.rows.col(static_cast<Eigen::Index>(c));
    if (pos == 0 && std::count(groups.column_group.begin(), groups.column_group.end(), g) == 1)
      values.col(g) = col;
    else
      values.col(g) += col * static_cast<double>(pos);
  }
  std::vector<std::int64_t> ids;
  for (const auto& a : pop.agents) ids.push_back(a.agent_id);
  const int top_k = std::min<int>(cfg_value<int>(cfg, "explain", "top_k", 20), static_cast<int>(groups.names.size()));
  const ShapSummary summary = export_summary(shap, top_k, values, ids);
  {
    std::ofstream out(run.path("shap_importance.csv"));
    write_importance_csv(out, summary);
  }
  run.output(run.path("shap_importance.csv"));
  {
    std::ofstream out(run.path("shap_dots.csv"));
    write_dots_csv(out, summary);
  }
  run.output(run.path("shap_dots.csv"));
  write_json(run.path("shap_base.json"), {{"format_version", 1}, {"base_value", shap.base_value}});
  run.output(run.path("shap_base.json"));
  run.log("top feature: " + summary.importance.front().feature);
}

void cmd_train_baseline(Run& run) {
  const Population pop = load_population(run);
  SimConfig sc = sim_config(run);
  sc.model = ModelKind::adoption;
  sc.scenario.reset();
  const SimWorld world = make_world(run, pop, sc);
  run.log("training baseline: " + std::to_string(sc.agents) + " agents, up to " + std::to_string(sc.episodes) +
          " episodes");
  const RunResult r = train_run(sc, world);
  save_run(run, r, "baseline", 0);
  run.log(describe(r));
}

// Trains (or loads) the baseline and runs one scenario on top of it.
void cmd_scenario(Run& run) {
  const json& cfg = run.config();
  if (!cfg.contains("scenario") || !cfg["scenario"].contains("id")) throw UsageError("scenario needs --id");
  const int id = cfg["scenario"]["id"].get<int>();
  scenario_by_id(id);
  const Population pop = load_population(run);
  SimConfig sc = sim_config(run);
  const ModelKind model = sc.model;
  const SimWorld world = make_world(run, pop, sc);

  json baseline;
  if (cfg["scenario"].contains("baseline")) {
    const auto p = cfg["scenario"]["baseline"].get<std::string>();
    run.input(p);
    baseline = read_json(p);
  } else {
    SimConfig bc = sc;
    bc.model = ModelKind::adoption;
    bc.scenario.reset();
    run.log("no --baseline given, training one");
    const RunResult b = train_run(bc, world);
    save_run(run, b, "baseline", 0);
    baseline = b.checkpoint;
  }
  const SweepResult sw = [&] {
    SimConfig base = sc;
    base.model = model;
    const std::vector<json> ckpts{baseline};
    return sweep_scenarios(base, world, {id}, {sc.seed}, &ckpts);
  }();
  const RunResult& r = sw.scenarios.at(id).runs.front();
  save_run(run, r, "scenario_" + std::to_string(id), id);
  run.log(to_string(model) + " model, scenario " + std::to_string(id) + ": " + describe(r));
}

void cmd_sweep(Run& run) {
  const json& cfg = run.config();
  const Population pop = load_population(run);
  const SimConfig sc = sim_config(run);
  const SimWorld world = make_world(run, pop, sc);
  std::vector<int> ids = cfg_value<std::vector<int>>(cfg, "sweep", "ids", {});
  if (ids.empty()) throw UsageError("sweep needs --all or --ids");
  const int n_seeds = cfg_value<int>(cfg, "sweep", "seeds", DeskPreset::seeds);
  if (n_seeds < 1) throw UsageError("--seeds must be at least 1");
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < n_seeds; ++i) seeds.push_back(run.seed() + static_cast<std::uint64_t>(i));
  run.log("sweeping " + std::to_string(ids.size()) + " scenarios x " + std::to_string(n_seeds) + " seeds (" +
          to_string(sc.model) + " model)");
  const SweepResult sw = sweep_scenarios(sc, world, ids, seeds);
  std::map<int, ScenarioAggregate> all = sw.scenarios;
  all.emplace(0, sw.baseline());
  for (const auto& p : render_report(all, run.dir())) run.output(p);
  json j = {{"format_version", 1}, {"model", to_string(sc.model)}, {"seeds", seeds}};
  for (const auto& [id, a] : all) j["scenarios"].push_back(a.to_json());
  write_json(run.path("sweep.json"), j);
  run.output(run.path("sweep.json"));
  for (const auto& [id, a] : all)
    run.log(std::to_string(id) + " " + a.name + ": " + csv::format_double(a.testers_mean) + " testers");
}

void cmd_report(Run& run, const std::vector<std::string>& specs) {
  if (specs.empty()) throw UsageError("report needs at least one --run ID=DIR");
  std::map<int, RunResult> runs;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--run expects ID=DIR, got '" + s + "'");
    const int id = std::stoi(s.substr(0, eq));
    const fs::path dir = s.substr(eq + 1);
    fs::path summary, log;
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto name = e.path().filename().string();
      if (name.ends_with("_summary.json")) summary = e.path();
      if (name.ends_with("_run_log.csv")) log = e.path();
    }
    if (summary.empty() || log.empty()) throw std::runtime_error(dir.string() + " holds no run summary");
    run.input(summary.string());
    run.input(log.string());
    runs.emplace(id, read_run(summary, log));
  }
  for (const auto& p : render_report(runs, run.dir())) run.output(p);
}

void cmd_hyperparam_sweep(Run& run) {
  const json& cfg = run.config();
  const Population pop = load_population(run);
  const SimConfig sc = sim_config(run);
  const SimWorld world = make_world(run, pop, sc);
  const auto lrs = cfg_value<std::vector<double>>(cfg, "hyperparam", "lrs", TrainConfig::lr_grid());
  std::ofstream out(run.path("hyperparams.csv"));
  csv::write_row(out, {"lr", "status", "episodes", "final_testers", "decision_pct", "final_mse"});
  for (double lr : lrs) {
    SimConfig c = sc;
    c.train.lr = lr;
    const std::string tag = "lr_" + csv::format_double(lr);
    try {
      const RunResult r = train_run(c, world);
      save_run(run, r, tag, 0);
      csv::write_row(out, {csv::format_double(lr), r.converged_at ? "converged" : "budget",
                           std::to_string(r.per_episode.size()), std::to_string(r.final_testers),
                           csv::format_double(r.decision_performance_pct), csv::format_double(r.final_mse)});
      run.log("lr " + csv::format_double(lr) + ": " + describe(r));
    } catch (const DivergenceError& e) {
      write_json(run.path(tag + "_last_finite.json"), e.last_checkpoint());
      run.output(run.path(tag + "_last_finite.json"));
      csv::write_row(out, {csv::format_double(lr), "diverged", std::to_string(e.episode()), "", "", ""});
      run.log("lr " + csv::format_double(lr) + ": diverged in episode " + std::to_string(e.episode()));
    }
  }
  run.output(run.path("hyperparams.csv"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Well-testing adoption simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Common c;
  json extra = json::object();

  std::optional<std::size_t> n;
  auto* gen = app.add_subcommand("gen-pop", "synthesise a survey population");
  add_common(gen, c);
  gen->add_option("--n", n, "number of agents");

  auto* ingest = app.add_subcommand("ingest", "validate and normalise a survey CSV");
  add_common(ingest, c);
  add_input(ingest, c);

  auto* prep = app.add_subcommand("preprocess", "impute, flag, scale and encode");
  add_common(prep, c);
  add_input(prep, c);

  std::string grid;
  std::optional<int> trees;
  bool no_eval = false;
  auto* sel = app.add_subcommand("select-features", "recursive feature elimination");
  add_common(sel, c);
  add_input(sel, c);
  sel->add_option("--grid", grid, "lo:hi:step feature-set sizes");
  sel->add_option("--trees", trees, "trees per forest");
  sel->add_flag("--no-eval", no_eval, "skip cross-validation and holdout scoring");

  std::optional<int> top_k;
  auto* explain = app.add_subcommand("explain", "SHAP importances and dot-plot rows");
  add_common(explain, c);
  add_input(explain, c);
  explain->add_option("--top-k", top_k, "features to report");

  auto* train = app.add_subcommand("train-baseline", "train the adoption model without intervention");
  add_common(train, c);
  add_sim(train, c);

  std::optional<int> scen_id;
  std::string baseline, model;
  auto* scen = app.add_subcommand("scenario", "fine-tune the baseline under one scenario");
  add_common(scen, c);
  add_sim(scen, c);
  scen->add_option("--id", scen_id, "scenario id 1..14")->check(CLI::Range(1, 14));
  scen->add_option("--baseline", baseline, "baseline checkpoint")->check(CLI::ExistingFile);
  scen->add_option("--model", model, "adoption or frequency")->check(CLI::IsMember({"adoption", "frequency"}));

  bool all = false;
  std::vector<int> ids;
  std::optional<int> n_seeds;
  auto* sweep = app.add_subcommand("sweep", "every scenario over several seeds");
  add_common(sweep, c);
  add_sim(sweep, c);
  sweep->add_flag("--all", all, "scenarios 1..14");
  sweep->add_option("--ids", ids, "scenario ids")->delimiter(',')->check(CLI::Range(1, 14));
  sweep->add_option("--seeds", n_seeds, "number of seeds");
  sweep->add_option("--model", model, "adoption or frequency")->check(CLI::IsMember({"adoption", "frequency"}));

  std::vector<std::string> run_specs;
  auto* report = app.add_subcommand("report", "tables and learning curves from saved runs");
  add_common(report, c);
  report->add_option("--run", run_specs, "ID=DIR of a scenario or baseline run");

  std::vector<double> lrs;
  auto* hyper = app.add_subcommand("hyperparam-sweep", "baseline training over a learning-rate grid");
  add_common(hyper, c);
  add_sim(hyper, c);
  hyper->add_option("--lrs", lrs, "learning rates")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    if (n) extra["population"]["n"] = *n;
    if (!grid.empty()) extra["features"]["grid"] = grid;
    if (trees) extra["features"]["n_trees"] = *trees;
    if (no_eval) extra["features"]["evaluate"] = false;
    if (top_k) extra["explain"]["top_k"] = *top_k;
    if (scen_id) extra["scenario"]["id"] = *scen_id;
    if (!baseline.empty()) extra["scenario"]["baseline"] = fs::absolute(baseline).string();
    if (!model.empty()) extra["sim"]["model"] = model;
    if (all) {
      ids.clear();
      for (int i = 1; i <= 14; ++i) ids.push_back(i);
    }
    if (!ids.empty()) extra["sweep"]["ids"] = ids;
    if (n_seeds) extra["sweep"]["seeds"] = *n_seeds;
    if (!lrs.empty()) extra["hyperparam"]["lrs"] = lrs;
    if (!run_specs.empty()) extra["report"]["runs"] = run_specs;

    Run run(command, effective_config(command, c, extra), c.quiet);
    run.set_dir(c.out);
    if (command == "gen-pop") cmd_gen_pop(run);
    else if (command == "ingest") cmd_ingest(run);
    else if (command == "preprocess") cmd_preprocess(run);
    else if (command == "select-features") cmd_select_features(run);
    else if (command == "explain") cmd_explain(run);
    else if (command == "train-baseline") cmd_train_baseline(run);
    else if (command == "scenario") cmd_scenario(run);
    else if (command == "sweep") cmd_sweep(run);
    else if (command == "report") cmd_report(run, run_specs);
    else if (command == "hyperparam-sweep") cmd_hyperparam_sweep(run);
    run.finish();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << sub->help();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
