// rhc: command-line front end for world generation, training and closed-loop runs.

#include "rhc/harness.hpp"
#include "rhc/model_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>

using namespace rhc;
using nlohmann::json;

namespace {

GroupSet parse_groups(const std::string& text) {
  if (text.empty() || text == "all") return GroupSet::all();
  GroupSet g;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) g.insert(parse_group(part));
  return g;
}

json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return json::parse(is);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& sets) {
  json doc = path.empty() ? json::object() : read_json(path);
  for (const auto& s : sets) apply_override(doc, s);
  return config_from_json(doc);
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Receding-horizon forest flight simulator"};
  app.require_subcommand(1);

  // gen-world
  auto* gw = app.add_subcommand("gen-world", "Generate a forest scenario");
  double gw_density = 1.0 / 36.0, gw_length = 80.0, gw_width = 40.0;
  std::uint64_t gw_seed = 1;
  std::string gw_out;
  gw->add_option("--density", gw_density, "Trees per square metre");
  gw->add_option("--length", gw_length);
  gw->add_option("--width", gw_width);
  gw->add_option("--seed", gw_seed);
  gw->add_option("-o,--out", gw_out, "Output file (stdout if omitted)");

  // build-corpus
  auto* bc = app.add_subcommand("build-corpus", "Render frames and write the feature/depth corpus");
  CorpusConfig bc_cfg;
  std::string bc_out, bc_groups = "all";
  bool bc_measure = true;
  bc->add_option("--scenarios", bc_cfg.n_scenarios);
  bc->add_option("--frames", bc_cfg.frames_per_scenario, "Frames per scenario");
  bc->add_option("--patches", bc_cfg.patches_per_frame, "Patches sampled per frame (0 = all)");
  bc->add_flag("!--sparse-holdout", bc_cfg.full_holdout_frames, "Subsample held-out frames like training frames");
  bc->add_option("--seed", bc_cfg.seed);
  bc->add_option("--groups", bc_groups, "Comma-separated feature groups or 'all'");
  bc->add_flag("!--no-measure", bc_measure, "Skip timing the feature groups");
  bc->add_option("-o,--out", bc_out)->required();

  // select-features
  auto* sf = app.add_subcommand("select-features", "Greedy cost-aware feature group selection");
  std::string sf_corpus, sf_out;
  double sf_budget = 1e9;
  sf->add_option("--corpus", sf_corpus)->required();
  sf->add_option("--budget-ms", sf_budget);
  sf->add_option("-o,--out", sf_out, "Plan JSON (stdout if omitted)");

  // train
  auto* tr = app.add_subcommand("train", "Train the stagewise depth regressor and its LUT");
  std::string tr_corpus, tr_plan, tr_out;
  TrainConfig tr_cfg;
  tr->add_option("--corpus", tr_corpus)->required();
  tr->add_option("--stages", tr_cfg.n_stages);
  tr->add_option("--lambda", tr_cfg.options.lambda);
  tr->add_option("--lut-min-count", tr_cfg.lut_min_count);
  tr->add_option("--plan", tr_plan, "Plan JSON restricting the groups");
  tr->add_option("-o,--out", tr_out)->required();

  // build-lut
  auto* bl = app.add_subcommand("build-lut", "Rebuild a model's error LUT from the corpus holdout");
  std::string bl_corpus, bl_model, bl_out;
  int bl_min = 20;
  bl->add_option("--corpus", bl_corpus)->required();
  bl->add_option("--model", bl_model)->required();
  bl->add_option("--min-count", bl_min);
  bl->add_option("-o,--out", bl_out, "Output model (defaults to --model)");

  // trajlib
  auto* tl = app.add_subcommand("trajlib", "Build the dispersion-selected trajectory library");
  TrajLibConfig tl_cfg;
  std::string tl_out;
  tl->add_option("--grid", tl_cfg.grid);
  tl->add_option("--select", tl_cfg.select);
  tl->add_option("--length", tl_cfg.length);
  tl->add_option("--speed", tl_cfg.speed);
  tl->add_option("--yaw-rate-max", tl_cfg.yaw_rate_max);
  tl->add_option("-o,--out", tl_out);

  // run
  auto* rn = app.add_subcommand("run", "Fly one closed-loop episode");
  std::string rn_config, rn_model, rn_report, rn_log;
  std::vector<std::string> rn_sets;
  std::uint64_t rn_seed = 1;
  int rn_dodge = -1;
  bool rn_dump = false, rn_timing = false;
  rn->add_option("--config", rn_config, "JSON config file");
  rn->add_option("--set", rn_sets, "Override, e.g. --set planner.w_dir=0.5");
  rn->add_option("--model", rn_model);
  rn->add_option("--seed", rn_seed);
  rn->add_option("--dodge", rn_dodge, "Fly the scripted dodge scenario with this variant instead of a forest");
  rn->add_option("--report", rn_report, "Report JSON (stdout if omitted)");
  rn->add_option("--log", rn_log, "Per-cycle JSON-lines log");
  rn->add_flag("--dump-config", rn_dump, "Print the effective config and exit");
  rn->add_flag("--timing", rn_timing, "Print wall-clock timings to stderr");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Paired-seed comparison of prediction modes");
  std::string ev_config, ev_model, ev_csv, ev_json, ev_reports;
  std::vector<std::string> ev_sets, ev_modes{"single", "multiple"};
  std::vector<double> ev_densities{1.0 / 36.0, 1.0 / 144.0};
  int ev_seeds = 100;
  std::uint64_t ev_first = 1;
  ev->add_option("--config", ev_config);
  ev->add_option("--set", ev_sets);
  ev->add_option("--model", ev_model);
  ev->add_option("--modes", ev_modes)->delimiter(',');
  ev->add_option("--densities", ev_densities)->delimiter(',');
  ev->add_option("--seeds", ev_seeds);
  ev->add_option("--first-seed", ev_first);
  ev->add_option("--csv", ev_csv, "Aggregate CSV");
  ev->add_option("--json", ev_json, "Aggregate JSON (stdout if omitted)");
  ev->add_option("--reports", ev_reports, "Per-episode CSV");

  // bench
  auto* bn = app.add_subcommand("bench", "Feature group costs and planning-cycle timing");
  std::string bn_model;
  int bn_cycles = 20;
  bn->add_option("--model", bn_model, "Model to time (all groups are timed regardless)");
  bn->add_option("--cycles", bn_cycles);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gw) {
      const auto sc = generate_scenario(gw_density, Bounds::corridor(gw_length, gw_width), gw_seed);
      if (gw_out.empty())
        write_scenario(std::cout, sc);
      else
        save_scenario(gw_out, sc);
    } else if (*bc) {
      bc_cfg.groups = parse_groups(bc_groups);
      const auto t0 = std::chrono::steady_clock::now();
      Corpus c = build_corpus(bc_cfg);
      if (bc_measure) {
        const auto costs = measure_group_costs(bc_cfg.camera, bc_cfg.patch_size);
        for (auto& s : c.layout.slots) s.cost_ms = costs[static_cast<int>(s.group)];
      }
      save_corpus(bc_out, c);
      std::cerr << "corpus: " << c.rows() << " rows x " << c.X.cols() << " features in " << elapsed_s(t0) << " s\n";
    } else if (*sf) {
      const Corpus c = load_corpus(sf_corpus);
      Eigen::MatrixXd Xt, Xh;
      Eigen::VectorXd yt, yh;
      c.split(Xt, yt, Xh, yh);
      const BudgetPlan plan = select_budgeted_groups(Xt, yt, column_groups(c.layout), sf_budget);
      if (plan.warning) std::cerr << "warning: " << plan.message << '\n';
      write_text(sf_out, plan_to_json(plan).dump(2) + "\n");
    } else if (*tr) {
      const Corpus c = load_corpus(tr_corpus);
      const BudgetPlan plan = tr_plan.empty() ? BudgetPlan{} : plan_from_json(read_json(tr_plan));
      const DepthModel m = train_model(c, tr_cfg, plan);
      save_model(tr_out, m);
      Eigen::MatrixXd Xt, Xh;
      Eigen::VectorXd yt, yh;
      (plan.steps.empty() ? c : restrict_groups(c, m.layout.groups())).split(Xt, yt, Xh, yh);
      std::cerr << "holdout rmse: " << rmse(m.regressor.predict(Xh), yh) << " m over " << yh.size() << " rows\n";
    } else if (*bl) {
      DepthModel m = load_model(bl_model);
      const Corpus c = restrict_groups(load_corpus(bl_corpus), m.layout.groups());
      Eigen::MatrixXd Xt, Xh;
      Eigen::VectorXd yt, yh;
      c.split(Xt, yt, Xh, yh);
      const Eigen::VectorXd pred = m.regressor.predict(Xh).cwiseMax(kMinDepth).cwiseMin(kMaxDepth);
      m.lut = build_error_lut(pred, yh, bl_min);
      save_model(bl_out.empty() ? bl_model : bl_out, m);
    } else if (*tl) {
      const auto t0 = std::chrono::steady_clock::now();
      const TrajectoryLibrary lib = build_library(tl_cfg);
      std::cerr << "selected " << lib.selected.size() << " of " << lib.dense.size() << " in " << elapsed_s(t0)
                << " s\n";
      if (tl_out.empty())
        write_library(std::cout, lib);
      else
        save_library(tl_out, lib);
    } else if (*rn) {
      RunConfig cfg = load_run_config(rn_config, rn_sets);
      if (!rn_log.empty()) cfg.log_path = rn_log;
      if (rn_dump) {
        std::cout << config_to_json(cfg).dump(2) << '\n';
        return 0;
      }
      std::optional<DepthModel> model;
      if (!rn_model.empty()) model = load_model(rn_model);
      Harness h(cfg, model ? &*model : nullptr);
      RunTimings timings;
      const RunReport r = rn_dodge >= 0 ? h.run_episode(dodge_scenario(static_cast<std::uint64_t>(rn_dodge)), &timings)
                                        : h.run_episode(rn_seed, &timings);
      write_text(rn_report, report_to_json(r).dump(2) + "\n");
      if (rn_timing)
        std::cerr << "perception " << timings.perception_ms_mean << " ms mean / " << timings.perception_ms_max
                  << " max, planning " << timings.planning_ms_mean << " ms mean / " << timings.planning_ms_max
                  << " max, episode " << timings.total_s << " s\n";
    } else if (*ev) {
      const RunConfig base = load_run_config(ev_config, ev_sets);
      std::optional<DepthModel> model;
      if (!ev_model.empty()) model = load_model(ev_model);
      std::vector<SuiteEntry> entries;
      for (double d : ev_densities)
        for (const auto& m : ev_modes) {
          RunConfig c = base;
          c.density = d;
          c.mode = parse_mode(m);
          std::ostringstream label;
          label << m << "@" << d;
          entries.push_back({label.str(), c});
        }
      const SuiteResult res = evaluate_suite(entries, model ? &*model : nullptr, ev_seeds, ev_first);
      json out;
      out["summaries"] = json::array();
      for (const auto& s : res.summaries) out["summaries"].push_back(summary_to_json(s));
      // Pairwise sign tests between consecutive modes at each density.
      out["paired"] = json::array();
      const std::size_t per = ev_modes.size();
      for (std::size_t d = 0; d < ev_densities.size(); ++d)
        for (std::size_t a = 0; a + 1 < per; ++a)
          for (std::size_t b = a + 1; b < per; ++b) {
            const auto pc = compare_paired(res.reports[d * per + b], res.reports[d * per + a]);
            out["paired"].push_back({{"first", entries[d * per + b].label},
                                     {"second", entries[d * per + a].label},
                                     {"wins", pc.wins},
                                     {"losses", pc.losses},
                                     {"ties", pc.ties},
                                     {"p_value", pc.p_value}});
          }
      write_text(ev_json, out.dump(2) + "\n");
      if (!ev_csv.empty()) {
        std::ofstream os(ev_csv);
        write_summary_csv(os, res.summaries);
      }
      if (!ev_reports.empty()) {
        std::ofstream os(ev_reports);
        write_reports_csv(os, res, entries);
      }
    } else if (*bn) {
      const CameraModel cam;
      const auto costs = measure_group_costs(cam);
      for (int g = 0; g < kNumFeatureGroups; ++g)
        std::cout << group_name(static_cast<FeatureGroup>(g)) << ": " << costs[g] << " ms\n";
      if (!bn_model.empty()) {
        const DepthModel m = load_model(bn_model);
        const auto sc = generate_scenario(1.0 / 36.0, Bounds::corridor(40, 40), 3);
        DepthPredictor pred(m, cam);
        double total = 0.0;
        Frame prev = render(sc, Pose2{sc.start.x() - 0.3, sc.start.y(), 0.0}, cam, 0.0);
        for (int i = 0; i < bn_cycles; ++i) {
          const auto t0 = std::chrono::steady_clock::now();
          const Frame f = render(sc, Pose2{sc.start.x() + 0.3 * i, sc.start.y(), 0.0}, cam, 0.2 * (i + 1));
          const DepthGrid g = pred.predict(f, &prev);
          total += elapsed_s(t0);
          prev = f;
          (void)g;
        }
        std::cout << "render+predict: " << 1000.0 * total / bn_cycles << " ms per frame\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
