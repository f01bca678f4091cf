// navlab: single entry point for the gridworld navigation pipeline.
//
//   navlab gen-worlds --n 50 --seed 1 --out worlds/
//   navlab collect --worlds worlds/ --mix 2:5:3 --episodes 250 --out data/train
//   navlab label --dataset data/train
//   navlab train --stage 0 --dataset data/train --out-ckpt ckpt/s0.muvp
//   navlab train --stage 1 --dataset data/train --in-ckpt ckpt/s0.muvp --out-ckpt ckpt/s1.muvp
//   ...
//   navlab eval --worlds heldout/ --ckpt ckpt/s3.muvp --report out/eval

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "navlab/common.hpp"
#include "navlab/config.hpp"
#include "navlab/dataset.hpp"
#include "navlab/evalharness.hpp"
#include "navlab/gridsim.hpp"
#include "navlab/policy.hpp"
#include "navlab/render.hpp"
#include "navlab/training.hpp"

namespace fs = std::filesystem;
using namespace navlab;

namespace {

void write_config(const RunConfig& cfg, const std::string& path) { io::write_file(path, cfg.to_ini()); }

std::vector<World> load_worlds(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("worlds: not a directory: " + dir);
  std::vector<World> worlds;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") worlds.push_back(load_world(entry.path().string()));
  }
  if (worlds.empty()) throw ConfigError("worlds: no world files in " + dir);
  std::sort(worlds.begin(), worlds.end(), [](const World& a, const World& b) { return a.seed() < b.seed(); });
  return worlds;
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

bool dataset_labelled(const std::string& prefix) {
  DatasetReader reader(prefix);
  for (std::size_t i = 0; i < reader.size(); ++i) {
    if (!reader.header(i).contains("rtg")) return false;
  }
  return reader.size() > 0;
}

/// Full-knowledge map of a world, for rendering.
SemanticMap ground_truth_map(const World& world) {
  auto map = SemanticMap::covering(world);
  for (int y = 0; y < world.height(); ++y) {
    for (int x = 0; x < world.width(); ++x) {
      const Cell c{x, y};
      const auto m = map.to_map(c);
      if (!m) continue;
      map.set(world.obstacle(c) ? kObstacleChannel : kFreeChannel, m->x, m->y);
      if (world.semantic(c) > 0) map.set(semantic_channel(world.semantic(c)), m->x, m->y);
    }
  }
  return map;
}

int cmd_gen_worlds(const RunConfig& cfg, int n, std::uint64_t seed, const std::string& out) {
  if (n < 1) throw ConfigError("gen-worlds: --n must be >= 1");
  fs::create_directories(out);
  for (int i = 0; i < n; ++i) {
    const auto s = seed + static_cast<std::uint64_t>(i);
    save_world(generate_world(s, cfg.world), (fs::path(out) / ("world_" + std::to_string(s) + ".json")).string());
  }
  write_config(cfg, (fs::path(out) / "config.ini").string());
  std::cout << "wrote " << n << " worlds to " << out << "\n";
  return 0;
}

int cmd_collect(const RunConfig& cfg, const std::string& worlds_dir, const std::string& mix, std::size_t episodes,
                const std::string& out) {
  const auto worlds = load_worlds(worlds_dir);
  const auto demo_mix = mix.empty() ? cfg.mix : parse_mix(mix);
  const auto records = collect(worlds, episodes, demo_mix, derive_seed(cfg.seed, "collect"), cfg.episode);
  ensure_parent(out);
  save_dataset(out, records);
  RunConfig resolved = cfg;
  resolved.mix = demo_mix;
  write_config(resolved, out + ".config.ini");
  std::cout << "collected " << episodes << " episodes, " << records.size() << " step records -> " << out << "\n";
  return 0;
}

int cmd_label(RunConfig cfg, const std::string& dataset, std::optional<double> gamma, std::optional<int> window) {
  if (gamma) cfg.reward.gamma = *gamma;
  if (window) cfg.reward.window = *window;
  cfg.reward.validate();
  auto records = load_dataset(dataset);
  label_records(records, cfg.reward);
  rewrite_index(dataset, records);
  write_config(cfg, dataset + ".label.ini");
  std::cout << "labelled " << records.size() << " records in " << dataset << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, int stage, const std::string& dataset, const std::string& in_ckpt,
              const std::string& out_ckpt, bool allow_skip) {
  if (stage < 0 || stage > 3) throw ConfigError("train: --stage must be 0..3");
  std::vector<int> stages;
  Policy policy;
  if (!in_ckpt.empty()) {
    policy = Policy::load(in_ckpt);
    stages = read_manifest(in_ckpt).stages;
    if (policy.config().to_json() != cfg.policy.to_json()) {
      throw FormatError("train: checkpoint architecture does not match the config");
    }
  } else {
    policy = Policy(cfg.policy, derive_seed(derive_seed(cfg.seed, "train"), "init"));
  }
  if (!allow_skip) {
    for (int s = 0; s < stage; ++s) {
      if (std::find(stages.begin(), stages.end(), s) == stages.end()) {
        throw ConfigError("train: stage-order violation: stage " + std::to_string(stage) + " needs stage " +
                          std::to_string(s) + " first (pass --allow-skip for ablations)");
      }
    }
  }
  if (stage == 3 && !dataset_labelled(dataset)) {
    throw ConfigError("train: stage-order violation: stage 3 needs reward labels; run `navlab label` first");
  }
  const auto records = load_dataset(dataset);
  const auto report = run_stage(policy, records, cfg.stage(stage));
  stages.push_back(stage);
  ensure_parent(out_ckpt);
  policy.save(out_ckpt, stages, cfg.hash());
  io::write_file(out_ckpt + ".report.csv", report.to_csv());
  io::write_file(out_ckpt + ".report.json", report.to_json().dump(2) + "\n");
  write_config(cfg, out_ckpt + ".config.ini");
  if (!report.frozen_violations().empty()) throw NumericError("train: a frozen group changed during the stage");
  const auto& last = report.epochs.empty() ? EpochStats{} : report.epochs.back();
  std::cout << "stage " << stage << ": " << report.samples << " samples, " << report.epochs.size()
            << " epochs, final loss " << last.total << " (" << report.wall_seconds << " s) -> " << out_ckpt << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& worlds_dir, const std::string& ckpt, const std::string& agent,
             std::size_t episodes, const std::string& report) {
  const auto worlds = load_worlds(worlds_dir);
  auto tasks = plan_evaluation(worlds, cfg.eval_goals, derive_seed(cfg.seed, "eval"), cfg.episode);
  if (episodes > 0 && episodes < tasks.size()) tasks.resize(episodes);
  std::optional<Policy> policy;
  AgentKind kind = AgentKind::Random;
  if (agent == "policy") {
    if (ckpt.empty()) throw ConfigError("eval: --ckpt is required for the policy agent");
    policy = Policy::load(ckpt);
    kind = AgentKind::Policy;
  } else if (agent != "random") {
    throw ConfigError("eval: --agent must be policy or random");
  }
  RolloutConfig rc;
  rc.budget = cfg.episode.budget;
  rc.sensor = cfg.episode.sensor;
  const auto results = evaluate(worlds, tasks, kind, policy ? &*policy : nullptr, cfg.eval_decode, rc);
  const auto metrics = compute_metrics(results);
  ensure_parent(report);
  io::write_file(report + ".csv", results_csv(results));
  io::write_file(report + ".json", metrics.to_json().dump(2) + "\n");
  write_config(cfg, report + ".config.ini");
  std::cout << "n=" << metrics.n << " sr=" << metrics.sr << " spl=" << metrics.spl << " -> " << report << ".json\n";
  return 0;
}

int cmd_render(const std::string& world_path, const std::string& dataset, std::size_t index, const std::string& out) {
  if (world_path.empty() == dataset.empty()) throw ConfigError("render: pass exactly one of --map or --episode");
  SemanticMap map;
  if (!world_path.empty()) {
    map = ground_truth_map(load_world(world_path));
  } else {
    DatasetReader reader(dataset);
    if (index >= reader.size()) throw ConfigError("render: --index out of range");
    map = reader.read(index).ego_map;
  }
  ensure_parent(out);
  io::write_file(out, render_map(map, Palette::standard(map.categories())).to_ppm());
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_gradcheck(const RunConfig& cfg, std::size_t samples) {
  const auto seed = derive_seed(cfg.seed, "gradcheck");
  Policy policy(cfg.policy, seed);
  const auto record = make_probe_record(seed, cfg.world, cfg.episode);
  nn::GradCheckConfig gc;
  gc.samples_per_group = samples;
  gc.seed = seed;
  const auto report = policy_grad_check(policy, record, gc);
  for (const auto& g : report.groups) {
    std::cout << g.group << ": " << g.checked << " scalars, max rel err " << g.max_rel_err << "\n";
  }
  std::cout << "max rel err " << report.max_rel_err << " at " << report.worst << " (analytic "
            << report.worst_analytic << ", numeric " << report.worst_numeric << ") -> "
            << (report.passed ? "PASS" : "FAIL") << "\n";
  return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridworld object-navigation pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);

  auto* gen = app.add_subcommand("gen-worlds", "generate worlds with seeds seed..seed+n-1");
  int n = 0;
  std::uint64_t world_seed = 1;
  std::string out;
  gen->add_option("--n", n, "number of worlds")->required();
  gen->add_option("--seed", world_seed, "first world seed");
  gen->add_option("--out", out, "output directory")->required();

  auto* col = app.add_subcommand("collect", "run scripted policies and write a step-record corpus");
  std::string worlds_dir, mix;
  std::size_t episodes = 0;
  col->add_option("--worlds", worlds_dir, "world directory")->required();
  col->add_option("--mix", mix, "expert:frontier:noisy episode ratio");
  col->add_option("--episodes", episodes, "episode count")->required();
  col->add_option("--out", out, "dataset prefix")->required();

  auto* lab = app.add_subcommand("label", "attach progress rewards and return-to-go");
  std::string dataset;
  std::optional<double> gamma;
  std::optional<int> window;
  lab->add_option("--dataset", dataset, "dataset prefix")->required();
  lab->add_option("--gamma", gamma, "discount");
  lab->add_option("--window", window, "return-to-go horizon");

  auto* tr = app.add_subcommand("train", "run one training stage");
  int stage = -1;
  std::string in_ckpt, out_ckpt;
  bool allow_skip = false;
  tr->add_option("--stage", stage, "0 obs-encoder, 1 map understanding, 2 BC, 3 reward")->required();
  tr->add_option("--dataset", dataset, "dataset prefix")->required();
  tr->add_option("--in-ckpt", in_ckpt, "checkpoint to continue from");
  tr->add_option("--out-ckpt", out_ckpt, "checkpoint to write")->required();
  tr->add_flag("--allow-skip", allow_skip, "permit skipping earlier stages (ablations)");

  auto* ev = app.add_subcommand("eval", "roll out a policy on held-out worlds");
  std::string ckpt, report, agent = "policy";
  ev->add_option("--worlds", worlds_dir, "world directory")->required();
  ev->add_option("--ckpt", ckpt, "checkpoint");
  ev->add_option("--agent", agent, "policy or random");
  ev->add_option("--episodes", episodes, "cap on episodes (0 = all)");
  ev->add_option("--report", report, "report prefix (.csv and .json)")->required();

  auto* ren = app.add_subcommand("render", "render a world or a record's egocentric map as PPM");
  std::string map_path;
  std::size_t index = 0;
  ren->add_option("--map", map_path, "world file");
  ren->add_option("--episode", dataset, "dataset prefix");
  ren->add_option("--index", index, "record index for --episode");
  ren->add_option("--out", out, "output .ppm")->required();

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the full policy graph");
  std::size_t samples = 200;
  gc->add_option("--samples", samples, "scalars per parameter group");

  // Subcommand options may also carry --config.
  for (auto* sub : {gen, col, lab, tr, ev, ren, gc}) {
    sub->add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const auto cfg = RunConfig::load(config_path);
    if (*gen) return cmd_gen_worlds(cfg, n, world_seed, out);
    if (*col) return cmd_collect(cfg, worlds_dir, mix, episodes, out);
    if (*lab) return cmd_label(cfg, dataset, gamma, window);
    if (*tr) return cmd_train(cfg, stage, dataset, in_ckpt, out_ckpt, allow_skip);
    if (*ev) return cmd_eval(cfg, worlds_dir, ckpt, agent, episodes, report);
    if (*ren) return cmd_render(map_path, dataset, index, out);
    if (*gc) return cmd_gradcheck(cfg, samples);
  } catch (const std::exception& e) {
    std::cerr << "navlab: error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
