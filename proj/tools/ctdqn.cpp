// Command-line front end: train runs sessions x episodes and persists logs and
// checkpoints, eval runs the greedy policy of saved checkpoints on shared
// seeds, tutor-run rolls out the pure tutor baseline, and report renders
// metric tables and reward-curve plots from finished runs.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctdqn/harness/report.hpp"
#include "ctdqn/harness/run.hpp"

namespace {

using namespace ctdqn;
using namespace ctdqn::harness;

struct CommonFlags {
  std::string env;
  std::string algo;
  std::string preset = "desk";
  std::string config_path;
  double omega = -1.0;
  int sessions = -1;
  int episodes = -1;
  int steps = -1;
  long long seed = -1;
  std::string out;
  int jobs = -1;
  int checkpoint_every = -1;
};

ExperimentConfig resolve_train_config(const CommonFlags& f) {
  ExperimentConfig cfg;
  if (!f.config_path.empty()) {
    cfg = load_config_file(f.config_path);
  } else {
    if (f.env.empty())
      throw CLI::ValidationError("--env (or --config) is required");
    const Algo algo = f.algo.empty() ? Algo::kDqn : algo_from_string(f.algo);
    cfg = ExperimentConfig::preset(envs::env_kind_from_string(f.env), algo, f.preset);
  }
  if (!f.env.empty()) cfg.env = envs::env_kind_from_string(f.env);
  if (!f.algo.empty()) cfg.algo = algo_from_string(f.algo);
  if (f.omega >= 0.0) cfg.omega = f.omega;
  if (f.sessions > 0) cfg.sessions = f.sessions;
  if (f.episodes > 0) cfg.episodes = f.episodes;
  if (f.steps > 0) cfg.max_steps = f.steps;
  if (f.seed >= 0) cfg.master_seed = static_cast<std::uint64_t>(f.seed);
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.jobs > 0) cfg.jobs = f.jobs;
  if (f.checkpoint_every >= 0) cfg.checkpoint_every = f.checkpoint_every;
  cfg.validate();
  return cfg;
}

void print_records_summary(const std::vector<metrics::EpisodeRecord>& rows) {
  if (rows.empty()) {
    std::printf("no episodes\n");
    return;
  }
  double j = 0.0;
  int goals = 0, landed = 0;
  for (const auto& r : rows) {
    j += r.cumulative_reward;
    goals += r.goal_met ? 1 : 0;
    landed += r.settling_step.has_value() ? 1 : 0;
  }
  std::printf("episodes=%zu mean_J=%.3f goal_met=%d settled=%d\n", rows.size(),
              j / rows.size(), goals, landed);
}

int cmd_train(const CommonFlags& flags) {
  const ExperimentConfig cfg = resolve_train_config(flags);
  const RunArtifacts artifacts = run_training(cfg);
  std::printf("run complete: %s (%zu episode records)\n", artifacts.dir.c_str(),
              artifacts.episodes.size());
  return 0;
}

int cmd_eval(const std::string& run_dir, int episodes, long long seed, int steps_override,
             int at_episode) {
  ExperimentConfig cfg = load_config_file(run_dir + "/config.txt");
  if (steps_override > 0) cfg.max_steps = steps_override;
  const std::uint64_t eval_seed = seed >= 0 ? static_cast<std::uint64_t>(seed) : 1;

  std::vector<metrics::EpisodeRecord> all;
  for (int s = 1; s <= cfg.sessions; ++s) {
    std::string path = run_dir + "/checkpoints/session_" + std::to_string(s);
    if (at_episode > 0) path += "_ep" + std::to_string(at_episode);
    path += ".json";
    if (!std::filesystem::exists(path))
      throw std::runtime_error("checkpoint not found: " + path);
    const Checkpoint cp = load_checkpoint(path);
    auto rows = evaluate_greedy(cfg, cp.network, episodes, eval_seed);
    for (auto& r : rows) r.session = s;
    std::printf("session %d: ", s);
    print_records_summary(rows);
    all.insert(all.end(), rows.begin(), rows.end());
  }

  std::ofstream out(run_dir + "/eval.csv", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write eval.csv");
  out << episodes_csv_header() << '\n';
  for (const auto& r : all) out << episode_record_to_csv(r) << '\n';
  std::printf("wrote %s/eval.csv\n", run_dir.c_str());
  return 0;
}

int cmd_tutor_run(const std::string& env_name, int episodes, int steps, long long seed,
                  const std::string& out) {
  ExperimentConfig cfg = ExperimentConfig::preset(envs::env_kind_from_string(env_name),
                                                  Algo::kCtDqn, "desk");
  cfg.omega = 0.05;
  if (steps > 0) cfg.max_steps = steps;
  const auto rows =
      run_tutor_baseline(cfg, episodes, seed >= 0 ? static_cast<std::uint64_t>(seed) : 1);
  print_records_summary(rows);
  if (!out.empty()) {
    std::filesystem::create_directories(std::filesystem::path(out).parent_path().empty()
                                            ? "."
                                            : std::filesystem::path(out).parent_path().string());
    std::ofstream file(out, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write " + out);
    file << episodes_csv_header() << '\n';
    for (const auto& r : rows) file << episode_record_to_csv(r) << '\n';
    std::printf("wrote %s\n", out.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Control-tutored DQN workbench"};
  app.require_subcommand(1);

  CommonFlags flags;
  CLI::App* train = app.add_subcommand("train", "Train DQN or CT-DQN");
  train->add_option("--env", flags.env, "pendulum|lander|car");
  train->add_option("--algo", flags.algo, "dqn|ctdqn (default dqn)");
  train->add_option("--omega", flags.omega, "tutor switching probability (ctdqn)");
  train->add_option("--sessions", flags.sessions, "independent sessions");
  train->add_option("--episodes", flags.episodes, "episodes per session");
  train->add_option("--steps", flags.steps, "max steps per episode");
  train->add_option("--seed", flags.seed, "master seed");
  train->add_option("--out", flags.out, "output directory");
  train->add_option("--preset", flags.preset, "desk|paper scale (default desk)");
  train->add_option("--config", flags.config_path, "start from a config echo file");
  train->add_option("--jobs", flags.jobs, "concurrent sessions");
  train->add_option("--checkpoint-every", flags.checkpoint_every,
                    "also checkpoint every n episodes");

  std::string eval_run;
  int eval_episodes = 30;
  long long eval_seed = 1;
  int eval_steps = -1;
  int eval_at = 0;
  CLI::App* eval = app.add_subcommand("eval", "Greedy evaluation of run checkpoints");
  eval->add_option("--run", eval_run, "run directory (from train)")->required();
  eval->add_option("--episodes", eval_episodes, "evaluation episodes per session");
  eval->add_option("--seed", eval_seed, "evaluation seed (shared across runs)");
  eval->add_option("--steps", eval_steps, "max steps override");
  eval->add_option("--at", eval_at, "use the mid-run checkpoint of this episode");

  std::string tutor_env;
  int tutor_episodes = 50;
  int tutor_steps = -1;
  long long tutor_seed = 1;
  std::string tutor_out;
  CLI::App* tutor = app.add_subcommand("tutor-run", "Pure-tutor baseline rollouts");
  tutor->add_option("--env", tutor_env, "pendulum|lander|car")->required();
  tutor->add_option("--episodes", tutor_episodes, "episodes");
  tutor->add_option("--steps", tutor_steps, "max steps per episode");
  tutor->add_option("--seed", tutor_seed, "seed");
  tutor->add_option("--out", tutor_out, "optional CSV output path");

  std::vector<std::string> report_runs;
  std::string report_out = "report";
  CLI::App* report = app.add_subcommand("report", "Tables and plots from finished runs");
  report->add_option("runs", report_runs, "run directories")->required();
  report->add_option("--out", report_out, "report output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(flags);
    if (eval->parsed()) return cmd_eval(eval_run, eval_episodes, eval_seed, eval_steps, eval_at);
    if (tutor->parsed())
      return cmd_tutor_run(tutor_env, tutor_episodes, tutor_steps, tutor_seed, tutor_out);
    if (report->parsed()) {
      write_report(report_runs, report_out);
      std::printf("wrote report to %s\n", report_out.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
