// onramp: train, evaluate, replay and plot the on-ramp merging agents.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "onramp/checkpoint.hpp"
#include "onramp/config.hpp"
#include "onramp/trace.hpp"
#include "onramp/trainer.hpp"

using namespace onramp;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string mode;
  std::string reward_mode;
  std::int64_t seed = -1;
  int tn = -1;
  bool no_supervisor = false;
  std::string out;
  std::string init_from;
  std::int64_t steps = -1;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app->add_option("--mode", o.mode, "Traffic density")
      ->check(CLI::IsMember({"easy", "medium", "hard"}));
  app->add_option("--seed", o.seed, "Run seed");
  app->add_option("--tn", o.tn, "Supervisor horizon in policy steps")->check(CLI::PositiveNumber);
  app->add_flag("--no-supervisor", o.no_supervisor, "Disable the safety supervisor");
  app->add_option("--reward-mode", o.reward_mode, "Reward sharing")
      ->check(CLI::IsMember({"local", "global"}));
  app->add_option("--out", o.out, "Output directory");
}

TrainerConfig resolve(const CommonOptions& o) {
  TrainerConfig c;
  if (!o.config_path.empty()) c = load_trainer_config(o.config_path);
  if (!o.mode.empty()) c.env.mode = parse_traffic_mode(o.mode);
  if (!o.reward_mode.empty()) c.env.reward_mode = parse_reward_mode(o.reward_mode);
  if (o.seed >= 0) c.seed = static_cast<std::uint64_t>(o.seed);
  if (o.tn > 0) c.supervisor.horizon = o.tn;
  if (o.no_supervisor) c.use_supervisor = false;
  if (!o.out.empty()) c.out_dir = o.out;
  if (!o.init_from.empty()) c.init_from = o.init_from;
  if (o.steps > 0) c.total_steps = o.steps;
  return c;
}

void print_metrics(const Metrics& m) {
  std::cout << std::fixed << std::setprecision(4) << "episodes           " << m.episodes << '\n'
            << "mean reward        " << m.mean_reward << '\n'
            << "mean speed [m/s]   " << m.mean_speed << '\n'
            << "collision rate     " << m.collision_rate << '\n'
            << "intervention rate  " << m.intervention_rate << '\n'
            << "latency [ms]       " << m.supervisor_latency_ms << '\n'
            << "no-safe episodes   " << m.no_safe_action_episodes << '\n';
}

int cmd_train(const CommonOptions& o) {
  const auto config = resolve(o);
  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    std::ofstream(config.out_dir / "config.json") << to_json(config).dump(2) << '\n';
  }
  spdlog::info("training {} mode, {} steps, seed {}, supervisor {}", to_string(config.env.mode),
               config.total_steps, config.seed,
               config.use_supervisor ? std::to_string(config.supervisor.horizon) : "off");
  const auto summary = train(config);
  std::cout << "episodes " << summary.episodes << ", steps " << summary.steps << ", skipped updates "
            << summary.skipped_updates << '\n';
  std::cout << kMetricsHeader << '\n';
  for (const auto& row : summary.evaluations) {
    std::cout << format_metrics_row(row, config.record_latency) << '\n';
  }
  return 0;
}

int cmd_eval(const CommonOptions& o, const std::string& checkpoint, int episodes,
             const std::string& trace_path) {
  const auto config = resolve(o);
  NetworkParams params;
  if (checkpoint.empty()) {
    std::mt19937_64 rng(derive_seed(config.seed, 0));
    params = NetworkParams::random(rng);
    spdlog::info("no checkpoint given; evaluating untrained parameters");
  } else {
    params = load_checkpoint(checkpoint).params;
  }
  const auto seeds = evaluation_seeds(config.seed, episodes);
  if (trace_path.empty()) {
    print_metrics(evaluate(params, config, seeds));
    return 0;
  }
  std::ofstream trace(trace_path);
  if (!trace) throw std::runtime_error("cannot write " + trace_path);
  const SupervisorConfig* sup = config.use_supervisor ? &config.supervisor : nullptr;
  for (int e = 0; e < episodes; ++e) {
    EnvConfig env_cfg = config.env;
    env_cfg.seed = seeds[static_cast<std::size_t>(e)];
    MergeEnv env(env_cfg);
    env.reset();
    std::mt19937_64 rng(derive_seed(env_cfg.seed, 1));
    run_episode(env, params, sup, rng, false, {&trace, e});
  }
  print_metrics(evaluate(params, config, seeds));
  return 0;
}

int cmd_replay(const std::string& trace_path, int episode_filter) {
  std::ifstream in(trace_path);
  if (!in) throw std::runtime_error("cannot open " + trace_path);
  const auto records = read_trace(in);
  int last_step = -1;
  int last_episode = -1;
  for (const auto& r : records) {
    if (episode_filter >= 0 && r.episode != episode_filter) continue;
    if (r.episode != last_episode || r.step != last_step) {
      std::cout << "episode " << r.episode << " step " << r.step << '\n';
      last_episode = r.episode;
      last_step = r.step;
    }
    std::cout << "  " << (r.kind == VehicleKind::AV ? "av " : "hdv") << std::setw(3) << r.id
              << std::fixed << std::setprecision(2) << "  x " << std::setw(7) << r.x << "  y "
              << std::setw(5) << r.y << "  v " << std::setw(5) << r.speed << "  lane " << r.lane;
    if (r.action) std::cout << "  " << action_name(*r.action) << (r.replaced ? " (replaced)" : "");
    if (r.reward) std::cout << "  r " << std::setprecision(3) << r.reward->total;
    std::cout << '\n';
  }
  return 0;
}

// Minimal SVG line chart.
struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

void write_chart(const std::filesystem::path& path, const std::string& title,
                 const std::string& xlabel, const std::string& ylabel,
                 const std::vector<Series>& series) {
  constexpr double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      x0 = std::min(x0, x), x1 = std::max(x1, x);
      y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
  }
  if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x1 = x0 + 1;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title
      << "</text>\n"
      << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0;
    const double yv = y0 + (y1 - y0) * k / 4.0;
    out << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
        << std::setprecision(4) << xv << "</text>\n"
        << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << yv
        << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
      << xlabel << "</text>\n"
      << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (T + H - B) / 2 << ")\">" << ylabel << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = colors[i % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : series[i].points) out << px(x) << ',' << py(y) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 * (i + 1) << "\" text-anchor=\"end\" fill=\""
        << color << "\">" << series[i].label << "</text>\n";
  }
  out << "</svg>\n";
}

int cmd_plot(const std::vector<std::string>& metrics_paths, const std::string& trace_path,
             const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  if (!metrics_paths.empty()) {
    std::vector<Series> reward, speed;
    for (const auto& p : metrics_paths) {
      std::ifstream in(p);
      if (!in) throw std::runtime_error("cannot open " + p);
      std::string line;
      std::getline(in, line);
      if (line != kMetricsHeader) throw std::runtime_error(p + " is not a metrics log");
      Series r{std::filesystem::path(p).parent_path().filename().string(), {}};
      Series s{r.label, {}};
      while (std::getline(in, line)) {
        std::vector<double> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(std::stod(cell));
        if (f.size() != 7) throw std::runtime_error("malformed row in " + p + ": " + line);
        r.points.emplace_back(f[0], f[2]);
        s.points.emplace_back(f[0], f[3]);
      }
      reward.push_back(std::move(r));
      speed.push_back(std::move(s));
    }
    write_chart(std::filesystem::path(out_dir) / "reward.svg", "Evaluation reward", "training step",
                "episode reward", reward);
    write_chart(std::filesystem::path(out_dir) / "speed.svg", "Average speed", "training step",
                "speed [m/s]", speed);
  }
  if (!trace_path.empty()) {
    std::ifstream in(trace_path);
    if (!in) throw std::runtime_error("cannot open " + trace_path);
    std::map<std::pair<int, int>, Series> paths;
    for (const auto& r : read_trace(in)) {
      auto& s = paths[{r.episode, r.id}];
      s.label = "ep " + std::to_string(r.episode) + (r.kind == VehicleKind::AV ? " av " : " hdv ") +
                std::to_string(r.id);
      s.points.emplace_back(r.x, -r.y);
    }
    std::vector<Series> all;
    for (auto& [key, s] : paths) all.push_back(std::move(s));
    write_chart(std::filesystem::path(out_dir) / "trajectories.svg", "Vehicle trajectories", "x [m]",
                "-y [m]", all);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"On-ramp merging multi-agent trainer with a safety supervisor"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error"}));

  CommonOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train a shared policy");
  add_common(train_cmd, train_opts);
  train_cmd->add_option("--init-from", train_opts.init_from, "Warm-start checkpoint (curriculum)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--steps", train_opts.steps, "Total environment steps");

  CommonOptions eval_opts;
  std::string checkpoint, trace_out;
  int episodes = 3;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint greedily");
  add_common(eval_cmd, eval_opts);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->check(CLI::ExistingFile);
  eval_cmd->add_option("--episodes", episodes, "Number of evaluation episodes")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--trace", trace_out, "Write a JSON-lines trace of every episode");

  std::string replay_path;
  int replay_episode = -1;
  auto* replay_cmd = app.add_subcommand("replay", "Print a recorded trace");
  replay_cmd->add_option("trace", replay_path, "JSON-lines trace")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--episode", replay_episode, "Only this episode");

  std::vector<std::string> plot_metrics;
  std::string plot_trace, plot_out = ".";
  auto* plot_cmd = app.add_subcommand("plot", "Write SVG charts");
  plot_cmd->add_option("--metrics", plot_metrics, "metrics.csv files (one curve each)")
      ->check(CLI::ExistingFile);
  plot_cmd->add_option("--trace", plot_trace, "Trace to draw trajectories from")
      ->check(CLI::ExistingFile);
  plot_cmd->add_option("--out", plot_out, "Output directory");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*train_cmd) return cmd_train(train_opts);
    if (*eval_cmd) return cmd_eval(eval_opts, checkpoint, episodes, trace_out);
    if (*replay_cmd) return cmd_replay(replay_path, replay_episode);
    if (*plot_cmd) {
      if (plot_metrics.empty() && plot_trace.empty()) {
        std::cerr << "plot: give --metrics and/or --trace\n";
        return 2;
      }
      return cmd_plot(plot_metrics, plot_trace, plot_out);
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
