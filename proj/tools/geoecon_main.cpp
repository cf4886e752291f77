#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "geoecon/config.hpp"
#include "geoecon/csvio.hpp"
#include "geoecon/error.hpp"
#include "geoecon/eval.hpp"
#include "geoecon/features.hpp"
#include "geoecon/gridstore.hpp"
#include "geoecon/learners.hpp"
#include "geoecon/parallel.hpp"
#include "geoecon/render.hpp"
#include "geoecon/select.hpp"
#include "geoecon/synthworld.hpp"
#include "geoecon/target.hpp"
#include "geoecon/timeutil.hpp"

namespace fs = std::filesystem;
using namespace geoecon;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_dir = ".";
  uint64_t seed = 42;
  bool seed_from_flag = false;
  int threads = 0;
  bool threads_from_flag = false;
  std::string sample;  // empty = unrestricted / all four samples
  Config config;
};

void add_global_options(CLI::App* cmd, GlobalArgs& g) {
  cmd->add_option("--config", g.config_path, "key = value configuration file");
  cmd->add_option("--out", g.out_dir, "output directory");
  cmd->add_option("--seed", g.seed, "master seed")
      ->each([&g](const std::string&) { g.seed_from_flag = true; });
  cmd->add_option("--threads", g.threads, "worker threads (0 = all cores)")
      ->each([&g](const std::string&) { g.threads_from_flag = true; });
  cmd->add_option("--sample", g.sample,
                  "restrict to one sample: all|top|middle|bottom")
      ->check(CLI::IsMember({"all", "top", "middle", "bottom"}));
}

// flags override config, config overrides defaults
void finalize_globals(GlobalArgs& g) {
  if (!g.config_path.empty()) g.config = Config::load(g.config_path);
  if (!g.seed_from_flag)
    g.seed = static_cast<uint64_t>(
        g.config.get_int("seed", static_cast<int64_t>(g.seed)));
  if (!g.threads_from_flag)
    g.threads = static_cast<int>(g.config.get_int("threads", g.threads));
  set_threads(g.threads);
  fs::create_directories(g.out_dir);
}

void write_manifest(const GlobalArgs& g, const std::string& command,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = g.config_path;
  j["seed"] = g.seed;
  j["threads"] = thread_count();
  j["sample"] = g.sample.empty() ? "all" : g.sample;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["written_at"] = format_iso8601(static_cast<int64_t>(std::time(nullptr)));
  std::ofstream out(fs::path(g.out_dir) / ("manifest_" + command + ".json"));
  if (!out) throw IoError("cannot write manifest in '" + g.out_dir + "'");
  out << j.dump(2) << "\n";
}

std::vector<int> year_list(const GlobalArgs& g) {
  return g.config.get_int_list("years", {1990, 1995, 2000, 2005});
}

ForestParams rf_params(const Config& c) {
  ForestParams p;
  p.n_trees = static_cast<int>(c.get_int("rf.n_trees", p.n_trees));
  p.min_leaf = static_cast<int>(c.get_int("rf.min_leaf", p.min_leaf));
  p.mtry = static_cast<int>(c.get_int("rf.mtry", p.mtry));
  return p;
}

GBParams gb_params(const Config& c) {
  GBParams p;
  p.n_rounds = static_cast<int>(c.get_int("gb.n_rounds", p.n_rounds));
  p.learning_rate = c.get_double("gb.learning_rate", p.learning_rate);
  p.max_depth = static_cast<int>(c.get_int("gb.max_depth", p.max_depth));
  p.min_leaf = static_cast<int>(c.get_int("gb.min_leaf", p.min_leaf));
  return p;
}

SelectionParams selection_params(const Config& c) {
  SelectionParams p;
  p.top_k = static_cast<int>(c.get_int("select.top_k", p.top_k));
  p.stage_a_trees =
      static_cast<int>(c.get_int("select.stage_a_trees", p.stage_a_trees));
  p.n_realisations =
      static_cast<int>(c.get_int("select.n_realisations", p.n_realisations));
  p.vars_per_realisation = static_cast<int>(
      c.get_int("select.vars_per_realisation", p.vars_per_realisation));
  p.realisation_trees = static_cast<int>(
      c.get_int("select.realisation_trees", p.realisation_trees));
  p.k_folds = static_cast<int>(c.get_int("select.k_folds", p.k_folds));
  p.forward_trees =
      static_cast<int>(c.get_int("select.forward_trees", p.forward_trees));
  p.curve_trees =
      static_cast<int>(c.get_int("select.curve_trees", p.curve_trees));
  p.min_leaf = static_cast<int>(c.get_int("select.min_leaf", p.min_leaf));
  return p;
}

WorldConfig world_config(const GlobalArgs& g) {
  WorldConfig cfg = default_world();
  const Config& c = g.config;
  cfg.n_cells = static_cast<size_t>(
      c.get_int("world.n_cells", static_cast<int64_t>(cfg.n_cells)));
  cfg.years = year_list(g);
  cfg.lat_limit = c.get_double("world.lat_limit", cfg.lat_limit);
  cfg.base_level = c.get_double("world.base_level", cfg.base_level);
  cfg.noise_sd = c.get_double("world.noise_sd", cfg.noise_sd);
  cfg.yearly_jitter = c.get_double("world.yearly_jitter", cfg.yearly_jitter);
  cfg.offset.delta = c.get_double("world.offset_delta", cfg.offset.delta);
  cfg.offset.fraction =
      c.get_double("world.offset_fraction", cfg.offset.fraction);
  const auto drivers = c.get_list("world.drivers");
  if (!drivers.empty()) {
    cfg.drivers.clear();
    for (const auto& d : drivers) cfg.drivers.push_back(parse_driver_spec(d));
  }
  return cfg;
}

std::vector<std::string> read_name_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  return names;
}

SeriesSet load_series_set(const std::vector<std::string>& series_args,
                          const std::string& series_dir) {
  SeriesSet set;
  for (const auto& arg : series_args) {
    const size_t eq = arg.find('=');
    if (eq == std::string::npos)
      throw ValidationError("--series expects VAR=PATH, got '" + arg + "'");
    const auto var = var_from_name(arg.substr(0, eq));
    if (!var)
      throw ValidationError("unknown variable '" + arg.substr(0, eq) + "'");
    const std::string path = arg.substr(eq + 1);
    set.emplace(*var, load_series(path, *var, default_cadence(*var),
                                  format_from_path(path)));
  }
  if (!series_dir.empty()) {
    for (VarId v :
         {VarId::MSLP, VarId::UV10, VarId::T2, VarId::TMIN, VarId::TMAX,
          VarId::D2, VarId::TP, VarId::RH, VarId::SR, VarId::SUND}) {
      if (set.count(v)) continue;
      const fs::path p = fs::path(series_dir) /
                         ("series_" + std::string(var_name(v)) + ".geof");
      if (fs::exists(p)) set.emplace(v, load_series_geof(p.string()));
    }
  }
  return set;
}

TargetVector load_target_for_eval(const std::string& path) {
  TargetVector t = load_target_csv(path);
  bool labeled = false;
  for (auto ter : t.tercile)
    if (ter != Tercile::none) labeled = true;
  if (!labeled && t.included_count() >= 3) t = tercile_split(std::move(t));
  return t;
}

void write_truth_csv(const std::string& path, const CellTable& cells,
                     const GroundTruth& truth) {
  CsvWriter w(path);
  std::string header = "cell_id,target,target_clean,in_region";
  for (const auto& n : truth.driver_names) header += "," + n;
  w.write_raw_line(header);
  for (size_t c = 0; c < cells.size(); ++c) {
    std::string line = std::to_string(cells.ids[c]) + "," +
                       format_double(truth.target[c]) + "," +
                       format_double(truth.target_clean[c]) + "," +
                       std::to_string(static_cast<int>(truth.in_region[c]));
    for (const auto& dv : truth.driver_value)
      line += "," + format_double(dv[c]);
    w.write_raw_line(line);
  }
}

// ---------------------------------------------------------------------------

int cmd_synth(GlobalArgs& g, bool also_csv) {
  finalize_globals(g);
  const WorldConfig cfg = world_config(g);
  const fs::path out(g.out_dir);

  const CellTable cells = generate_cells(cfg, g.seed);
  const GroundTruth truth = make_ground_truth(cfg, g.seed, cells);
  const EconomyTable economy = make_economy(cfg, g.seed, cells, truth);

  write_cells_csv((out / "cells.csv").string(), cells);
  write_economy_csv((out / "economy.csv").string(), economy);
  write_truth_csv((out / "truth.csv").string(), cells, truth);

  std::vector<std::string> outputs{"cells.csv", "economy.csv", "truth.csv"};
  for (VarId v : {VarId::MSLP, VarId::UV10, VarId::T2, VarId::TMIN,
                  VarId::TMAX, VarId::D2, VarId::TP, VarId::RH, VarId::SR,
                  VarId::SUND}) {
    const auto series = synthesize_series(cfg, g.seed, cells, v);
    const std::string name = "series_" + std::string(var_name(v)) + ".geof";
    save_series_geof((out / name).string(), series);
    outputs.push_back(name);
    if (also_csv)
      write_series_csv(
          (out / ("series_" + std::string(var_name(v)) + ".csv")).string(),
          series);
  }
  write_manifest(g, "synth", {}, outputs);
  std::printf("synth: %zu cells, %zu economy records, 10 series -> %s\n",
              cells.size(), economy.size(), g.out_dir.c_str());
  return 0;
}

int cmd_ingest(GlobalArgs& g, const std::string& cells_path,
               const std::string& economy_path,
               const std::vector<std::string>& series_args) {
  finalize_globals(g);
  const fs::path out(g.out_dir);
  std::vector<std::string> inputs, outputs;

  if (!cells_path.empty()) {
    const auto cells = load_cells(cells_path, format_from_path(cells_path));
    save_cells_geof((out / "cells.geof").string(), cells);
    std::printf("ingest: %zu cells\n", cells.size());
    inputs.push_back(cells_path);
    outputs.push_back("cells.geof");
  }
  if (!economy_path.empty()) {
    const auto econ = load_economy(economy_path, year_list(g),
                                   format_from_path(economy_path));
    save_economy_geof((out / "economy.geof").string(), econ);
    std::printf("ingest: %zu economy records over %zu cells\n", econ.size(),
                econ.distinct_cells());
    inputs.push_back(economy_path);
    outputs.push_back("economy.geof");
  }
  for (const auto& arg : series_args) {
    const size_t eq = arg.find('=');
    if (eq == std::string::npos)
      throw ValidationError("--series expects VAR=PATH, got '" + arg + "'");
    const auto var = var_from_name(arg.substr(0, eq));
    if (!var)
      throw ValidationError("unknown variable '" + arg.substr(0, eq) + "'");
    const std::string path = arg.substr(eq + 1);
    const auto series =
        load_series(path, *var, default_cadence(*var), format_from_path(path));
    const std::string name = "series_" + std::string(var_name(*var)) + ".geof";
    save_series_geof((out / name).string(), series);
    std::printf("ingest: %s %zu cells x %zu steps\n",
                std::string(var_name(*var)).c_str(), series.n_cells(),
                series.n_steps);
    inputs.push_back(path);
    outputs.push_back(name);
  }
  if (inputs.empty())
    throw ValidationError(
        "ingest: nothing to do (see --cells/--economy/--series)");
  write_manifest(g, "ingest", inputs, outputs);
  return 0;
}

int cmd_features(GlobalArgs& g, const std::string& cells_path,
                 const std::vector<std::string>& series_args,
                 const std::string& series_dir, const std::string& census_path,
                 bool also_csv) {
  finalize_globals(g);
  if (cells_path.empty())
    throw ValidationError("features: --cells is required");
  const auto cells = load_cells(cells_path, format_from_path(cells_path));
  const auto series = load_series_set(series_args, series_dir);
  for (const auto& [var, s] : series) require_cells(s, cells.ids);

  std::vector<ColumnSpec> census;
  if (census_path.empty()) {
    census = default_census();
  } else {
    const auto names = read_name_file(census_path);
    census = census_from_names(names);
  }
  const auto m = build_feature_matrix(cells, series, census);

  const fs::path out(g.out_dir);
  save_features_geof((out / "features.geof").string(), m);
  std::vector<std::string> outputs{"features.geof"};
  if (also_csv) {
    write_features_csv((out / "features.csv").string(), m);
    outputs.push_back("features.csv");
  }
  size_t masked = 0;
  for (auto b : m.missing) masked += b;
  std::printf("features: %zu cells x %zu predictors (%zu masked values)\n",
              m.n_rows(), m.n_cols(), masked);
  write_manifest(g, "features", {cells_path}, outputs);
  return 0;
}

int cmd_target(GlobalArgs& g, const std::string& economy_path, bool probe) {
  finalize_globals(g);
  if (economy_path.empty())
    throw ValidationError("target: --economy is required");
  const auto years = year_list(g);
  const auto econ =
      load_economy(economy_path, years, format_from_path(economy_path));
  const fs::path out(g.out_dir);
  std::vector<std::string> outputs;

  auto t = tercile_split(build_target(econ, years));
  write_target_csv((out / "target.csv").string(), t);
  outputs.push_back("target.csv");
  const size_t excl = t.size() - t.included_count();
  std::printf(
      "target: %zu cells, %zu excluded; tercile thresholds %.4f / %.4f\n",
      t.size(), excl, t.thresholds[0], t.thresholds[1]);

  if (probe) {
    const auto st = stationarity_probe(econ, years);
    write_target_csv((out / "target_plus.csv").string(), tercile_split(st.plus));
    write_target_csv((out / "target_minus.csv").string(),
                     tercile_split(st.minus));
    outputs.push_back("target_plus.csv");
    outputs.push_back("target_minus.csv");
  }
  write_manifest(g, "target", {economy_path}, outputs);
  return 0;
}

AlignedData aligned_from_files(const GlobalArgs& g,
                               const std::string& features_path,
                               const std::string& target_path,
                               const std::string& predictors_path) {
  const auto m = load_features(features_path);
  const auto t = load_target_for_eval(target_path);
  AlignedData d = align(m, t);
  if (d.dropped_unmatched > 0)
    std::fprintf(
        stderr,
        "warning: %zu feature rows had no included target cell (untargetable)\n",
        d.dropped_unmatched);
  if (d.dropped_missing > 0)
    std::fprintf(stderr, "warning: %zu cells dropped for missing features\n",
                 d.dropped_missing);
  if (!predictors_path.empty())
    d = subset_columns(d, read_name_file(predictors_path));
  if (!g.sample.empty() && g.sample != "all") {
    const auto rows = d.rows_for(sample_from_name(g.sample));
    AlignedData sub;
    sub.names = d.names;
    sub.x_storage = gather_rows(d.X(), rows);
    for (size_t r : rows) {
      sub.cell_ids.push_back(d.cell_ids[r]);
      sub.y.push_back(d.y[r]);
      sub.tercile.push_back(d.tercile[r]);
    }
    return sub;
  }
  return d;
}

int cmd_select(GlobalArgs& g, const std::string& features_path,
               const std::string& target_path) {
  finalize_globals(g);
  if (features_path.empty() || target_path.empty())
    throw ValidationError("select: --features and --target are required");
  const auto data = aligned_from_files(g, features_path, target_path, "");
  const auto params = selection_params(g.config);
  const auto report = run_selection(data, g.seed, params);
  if (report.stage_a_top.size() < static_cast<size_t>(params.top_k))
    std::fprintf(stderr, "warning: only %zu predictors available\n",
                 report.stage_a_top.size());

  write_selection_csv(g.out_dir, report, data);
  std::vector<std::string> outputs{
      "selection_stage_a.csv", "selection_stage_b.csv", "selection_final.csv",
      "selection_curve.csv"};
  const fs::path out(g.out_dir);
  for (size_t step = 0; step < report.step_predictions.size(); ++step) {
    DiagnosticField f;
    f.kind = DiagnosticField::Kind::prediction;
    f.cell_ids = report.cell_ids;
    f.value = report.step_predictions[step];
    const std::string name =
        "prediction_step_" + std::to_string(step + 1) + ".csv";
    write_field_csv((out / name).string(), f);
    outputs.push_back(name);
    if (step > 0) {
      const auto delta = delta_field(
          report.cell_ids, report.step_predictions[step - 1], report.cell_ids,
          report.step_predictions[step], report.cell_ids, data.y);
      const std::string dname =
          "delta_step_" + std::to_string(step + 1) + ".csv";
      write_field_csv((out / dname).string(), delta);
      outputs.push_back(dname);
    }
  }
  std::printf("select: final ranking (%s sample, %zu cells)\n",
              g.sample.empty() ? "all" : g.sample.c_str(), data.n_rows());
  for (size_t i = 0; i < report.final_ranked.size(); ++i)
    std::printf("  %2zu. %-22s nMAE %.4f  corr %.4f\n", i + 1,
                report.final_ranked[i].c_str(), report.curve[i].nmae_value,
                report.curve[i].corr);
  write_manifest(g, "select", {features_path, target_path}, outputs);
  return 0;
}

int cmd_train(GlobalArgs& g, const std::string& features_path,
              const std::string& target_path, const std::string& model_name,
              const std::string& predictors_path, bool json_dump) {
  finalize_globals(g);
  if (features_path.empty() || target_path.empty())
    throw ValidationError("train: --features and --target are required");
  const auto data =
      aligned_from_files(g, features_path, target_path, predictors_path);

  ModelSpec spec;
  if (model_name == "rf")
    spec = ModelSpec::random_forest(rf_params(g.config));
  else if (model_name == "gb")
    spec = ModelSpec::gradient_boosting(gb_params(g.config));
  else if (model_name == "ml")
    spec = ModelSpec::least_squares();
  else
    throw ValidationError("train: unknown model '" + model_name +
                          "' (rf|gb|ml)");

  const auto model = fit_model(spec, data.X(), data.y, g.seed, data.names);
  const fs::path out(g.out_dir);
  save_model((out / "model.geom").string(), model);
  std::vector<std::string> outputs{"model.geom"};
  if (json_dump) {
    std::ofstream js(out / "model.json");
    js << model_to_json(model) << "\n";
    outputs.push_back("model.json");
  }
  if (const auto* rf = std::get_if<ForestModel>(&model)) {
    const auto imp = permutation_importance(*rf, data.X(), data.y, g.seed);
    CsvWriter w((out / "importance.csv").string());
    w.write_raw_line("predictor,importance,std_error");
    for (size_t j = 0; j < imp.names.size(); ++j)
      w.write_raw_line(imp.names[j] + "," + format_double(imp.importance[j]) +
                       "," + format_double(imp.std_error[j]));
    outputs.push_back("importance.csv");
  }
  std::printf("train: %s on %zu cells x %zu predictors -> model.geom\n",
              model_name.c_str(), data.n_rows(), data.names.size());
  write_manifest(g, "train", {features_path, target_path}, outputs);
  return 0;
}

int cmd_evaluate(GlobalArgs& g, const std::string& features_path,
                 const std::string& target_path, const std::string& models_arg,
                 const std::string& mode_arg, int k,
                 const std::string& predictors_path,
                 const std::string& norm_arg) {
  finalize_globals(g);
  if (features_path.empty() || target_path.empty())
    throw ValidationError("evaluate: --features and --target are required");
  // alignment keeps every tercile; --sample narrows the evaluated samples
  GlobalArgs g_all = g;
  g_all.sample = "all";
  const auto data =
      aligned_from_files(g_all, features_path, target_path, predictors_path);

  NmaeNorm norm;
  if (norm_arg == "per-sample")
    norm = NmaeNorm::per_sample;
  else if (norm_arg == "global")
    norm = NmaeNorm::global;
  else
    throw ValidationError("evaluate: --norm must be per-sample|global");

  std::vector<ModelSpec> specs;
  {
    std::string cur;
    for (char c : models_arg + ",") {
      if (c == ',') {
        if (cur == "rf")
          specs.push_back(ModelSpec::random_forest(rf_params(g.config)));
        else if (cur == "gb")
          specs.push_back(ModelSpec::gradient_boosting(gb_params(g.config)));
        else if (cur == "ml")
          specs.push_back(ModelSpec::least_squares());
        else if (!cur.empty())
          throw ValidationError("evaluate: unknown model '" + cur + "'");
        cur.clear();
      } else {
        cur += c;
      }
    }
  }

  std::vector<SampleId> samples;
  if (g.sample.empty())
    samples = {SampleId::all, SampleId::top_tercile, SampleId::middle_tercile,
               SampleId::bottom_tercile};
  else
    samples = {sample_from_name(g.sample)};

  std::vector<EvalMode> modes;
  if (mode_arg == "kfold")
    modes = {EvalMode::kfold};
  else if (mode_arg == "oob")
    modes = {EvalMode::oob};
  else if (mode_arg == "both")
    modes = {EvalMode::oob, EvalMode::kfold};
  else
    throw ValidationError("evaluate: --mode must be kfold|oob|both");

  const fs::path out(g.out_dir);
  std::vector<EvalReport> reports;
  std::vector<std::string> outputs{"eval_report.csv"};
  for (const auto& spec : specs) {
    for (EvalMode mode : modes) {
      if (mode == EvalMode::oob && spec.kind != ModelSpec::Kind::rf) continue;
      for (SampleId sample : samples) {
        const auto ev =
            evaluate_sample(spec, data, sample, mode, k, g.seed, norm);
        reports.push_back(ev.report);

        std::vector<double> y_sample;
        for (size_t r : data.rows_for(sample)) y_sample.push_back(data.y[r]);
        const auto res =
            residual_field(ev.cell_ids, ev.pred, ev.cell_ids, y_sample);
        const std::string tag = std::string(spec.name()) + "_" +
                                (mode == EvalMode::oob ? "oob" : "kfold") +
                                "_" + std::string(sample_name(sample));
        DiagnosticField pred_field;
        pred_field.kind = DiagnosticField::Kind::prediction;
        pred_field.cell_ids = ev.cell_ids;
        pred_field.value = ev.pred;
        write_field_csv((out / ("prediction_" + tag + ".csv")).string(),
                        pred_field);
        write_field_csv((out / ("residual_" + tag + ".csv")).string(), res);
        outputs.push_back("prediction_" + tag + ".csv");
        outputs.push_back("residual_" + tag + ".csv");
      }
    }
  }

  {
    CsvWriter w((out / "eval_report.csv").string());
    w.write_raw_line("model,mode,sample,nmae,corr,n_cells,seed");
    for (const auto& r : reports)
      w.write_raw_line(r.model + "," +
                       (r.mode == EvalMode::oob ? "oob" : "kfold") + "," +
                       std::string(sample_name(r.sample)) + "," +
                       format_double(r.nmae_value) + "," +
                       format_double(r.corr) + "," +
                       std::to_string(r.n_cells) + "," +
                       std::to_string(r.seed));
  }

  // comparison table: one row per model/mode, one nMAE/CORR block per sample
  std::printf("%-22s", "");
  for (SampleId s : samples)
    std::printf("  %-14s", std::string(sample_name(s)).c_str());
  std::printf("\n%-22s", "model");
  for (size_t i = 0; i < samples.size(); ++i) std::printf("  nMAE    CORR ");
  std::printf("\n");
  for (const auto& spec : specs) {
    for (EvalMode mode : modes) {
      if (mode == EvalMode::oob && spec.kind != ModelSpec::Kind::rf) continue;
      std::printf("%-22s", (std::string(spec.name()) +
                            (mode == EvalMode::oob ? " (OOB)" : " (5-fold)"))
                               .c_str());
      for (SampleId sample : samples) {
        for (const auto& r : reports)
          if (r.model == std::string(spec.name()) && r.mode == mode &&
              r.sample == sample)
            std::printf("  %.3f  %.3f", r.nmae_value, r.corr);
      }
      std::printf("\n");
    }
  }
  write_manifest(g, "evaluate", {features_path, target_path}, outputs);
  return 0;
}

int cmd_render(GlobalArgs& g, const std::string& cells_path,
               const std::string& field_path, const std::string& features_path,
               const std::string& column, const std::string& target_path,
               const std::string& mode_arg, const std::string& thresholds_arg,
               std::string out_name) {
  finalize_globals(g);
  if (cells_path.empty()) throw ValidationError("render: --cells is required");
  const auto cells = load_cells(cells_path, format_from_path(cells_path));

  std::vector<int64_t> ids;
  std::vector<double> value;
  std::string source;
  if (!field_path.empty()) {
    const auto f = load_field_csv(field_path);
    ids = f.cell_ids;
    value = f.value;
    source = field_path;
  } else if (!features_path.empty() && !column.empty()) {
    const auto m = load_features(features_path);
    const auto j = m.column_index(column);
    if (!j) throw ValidationError("render: no column '" + column + "'");
    ids = m.cell_ids;
    const auto col = m.column(*j);
    value.assign(col.begin(), col.end());
    source = features_path + ":" + column;
  } else if (!target_path.empty()) {
    const auto t = load_target_csv(target_path);
    ids = t.cell_ids;
    value = t.log_gcp_pc;
    source = target_path;
  } else {
    throw ValidationError(
        "render: need --field, or --features with --column, or --target");
  }

  std::vector<double> lat(ids.size()), lon(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) {
    const auto idx = cells.find(ids[i]);
    if (!idx)
      throw ValidationError("render: field cell " + std::to_string(ids[i]) +
                            " is not in the cell table");
    lat[i] = cells.lat[*idx];
    lon[i] = cells.lon[*idx];
  }

  MapOptions opt;
  if (mode_arg == "tercile")
    opt.mode = MapMode::tercile9;
  else if (mode_arg == "gray")
    opt.mode = MapMode::grayscale;
  else if (mode_arg == "ascii")
    opt.mode = MapMode::ascii;
  else
    throw ValidationError("render: --mode must be tercile|gray|ascii");
  if (!thresholds_arg.empty()) {
    const size_t comma = thresholds_arg.find(',');
    if (comma == std::string::npos)
      throw ValidationError("render: --thresholds expects A,B");
    opt.thresholds[0] = std::stod(thresholds_arg.substr(0, comma));
    opt.thresholds[1] = std::stod(thresholds_arg.substr(comma + 1));
  }
  if (out_name.empty())
    out_name = std::string("map.") + (opt.mode == MapMode::tercile9    ? "ppm"
                                      : opt.mode == MapMode::grayscale ? "pgm"
                                                                       : "txt");
  const auto path = (fs::path(g.out_dir) / out_name).string();
  render_map(path, lat, lon, value, opt);
  std::printf("render: %s -> %s (%dx%d)\n", source.c_str(), path.c_str(),
              kMapWidth, kMapHeight);
  write_manifest(g, "render", {cells_path, source}, {out_name});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridded geography/climate statistical-learning pipeline"};
  app.require_subcommand(1);

  GlobalArgs g;

  auto* synth = app.add_subcommand("synth", "generate a synthetic world");
  bool synth_csv = false;
  add_global_options(synth, g);
  synth->add_flag("--csv", synth_csv, "also write series as CSV");

  auto* ingest =
      app.add_subcommand("ingest", "validate inputs, write binaries");
  std::string in_cells, in_econ;
  std::vector<std::string> in_series;
  add_global_options(ingest, g);
  ingest->add_option("--cells", in_cells, "cell table (csv or geof)");
  ingest->add_option("--economy", in_econ, "economy table (csv or geof)");
  ingest->add_option("--series", in_series, "VAR=PATH (repeatable)");

  auto* features =
      app.add_subcommand("features", "derive the predictor matrix");
  std::string f_cells, f_dir, f_census;
  std::vector<std::string> f_series;
  bool f_csv = false;
  add_global_options(features, g);
  features->add_option("--cells", f_cells, "cell table");
  features->add_option("--series", f_series, "VAR=PATH (repeatable)");
  features->add_option("--series-dir", f_dir,
                       "directory holding series_<VAR>.geof files");
  features->add_option("--census", f_census,
                       "predictor name file (default: built-in census)");
  features->add_flag("--csv", f_csv, "also write features.csv");

  auto* target = app.add_subcommand("target", "build the masked log target");
  std::string t_econ;
  bool t_probe = false;
  add_global_options(target, g);
  target->add_option("--economy", t_econ, "economy table");
  target->add_flag("--probe", t_probe, "also write +/- one-sd probe targets");

  auto* select =
      app.add_subcommand("select", "three-stage predictor selection");
  std::string s_features, s_target;
  add_global_options(select, g);
  select->add_option("--features", s_features, "feature matrix (csv or geof)");
  select->add_option("--target", s_target, "target csv");

  auto* train = app.add_subcommand("train", "fit one model on the full sample");
  std::string tr_features, tr_target, tr_model = "rf", tr_predictors;
  bool tr_json = false;
  add_global_options(train, g);
  train->add_option("--features", tr_features, "feature matrix");
  train->add_option("--target", tr_target, "target csv");
  train->add_option("--model", tr_model, "rf|gb|ml");
  train->add_option("--predictors", tr_predictors, "predictor name file");
  train->add_flag("--json-dump", tr_json, "also write model.json");

  auto* evaluate = app.add_subcommand("evaluate", "cross-validated metrics");
  std::string e_features, e_target, e_models = "rf,gb,ml", e_mode = "both";
  std::string e_predictors, e_norm = "per-sample";
  int e_k = 5;
  add_global_options(evaluate, g);
  evaluate->add_option("--features", e_features, "feature matrix");
  evaluate->add_option("--target", e_target, "target csv");
  evaluate->add_option("--models", e_models, "comma list of rf|gb|ml");
  evaluate->add_option("--mode", e_mode, "kfold|oob|both");
  evaluate->add_option("--k", e_k, "folds");
  evaluate->add_option("--predictors", e_predictors, "predictor name file");
  evaluate->add_option("--norm", e_norm, "per-sample|global");

  auto* render = app.add_subcommand("render", "draw a field as a map");
  std::string r_cells, r_field, r_features, r_column, r_target;
  std::string r_mode = "tercile", r_thresholds, r_out;
  add_global_options(render, g);
  render->add_option("--cells", r_cells, "cell table");
  render->add_option("--field", r_field, "field csv (cell_id,value)");
  render->add_option("--features", r_features, "feature matrix");
  render->add_option("--column", r_column, "predictor column to draw");
  render->add_option("--target", r_target, "target csv to draw");
  render->add_option("--mode", r_mode, "tercile|gray|ascii");
  render->add_option("--thresholds", r_thresholds,
                     "explicit tercile boundaries A,B");
  render->add_option("--out-file", r_out, "output file name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(synth)) return cmd_synth(g, synth_csv);
    if (app.got_subcommand(ingest))
      return cmd_ingest(g, in_cells, in_econ, in_series);
    if (app.got_subcommand(features))
      return cmd_features(g, f_cells, f_series, f_dir, f_census, f_csv);
    if (app.got_subcommand(target)) return cmd_target(g, t_econ, t_probe);
    if (app.got_subcommand(select)) return cmd_select(g, s_features, s_target);
    if (app.got_subcommand(train))
      return cmd_train(g, tr_features, tr_target, tr_model, tr_predictors,
                       tr_json);
    if (app.got_subcommand(evaluate))
      return cmd_evaluate(g, e_features, e_target, e_models, e_mode, e_k,
                          e_predictors, e_norm);
    if (app.got_subcommand(render))
      return cmd_render(g, r_cells, r_field, r_features, r_column, r_target,
                        r_mode, r_thresholds, r_out);
  } catch (const Error& e) {
    std::fprintf(stderr, "geoecon: error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "geoecon: internal error: %s\n", e.what());
    return 4;
  }
  return 2;
}
