#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ctdqn/harness/csv.hpp"
#include "ctdqn/harness/experiment.hpp"
#include "ctdqn/metrics/metrics.hpp"
#include "ctdqn/metrics/welch.hpp"

// Report generation over one or more finished runs of the same environment:
// learning- and control-metric tables (means +- standard deviations across
// sessions, Welch significance flags against the DQN baseline) and smoothed
// reward curves with mean and +-1 std band across sessions, emitted as SVG.

namespace ctdqn::harness {

struct RunData {
  std::string dir;
  std::string label;
  ExperimentConfig cfg;
  std::vector<std::vector<metrics::EpisodeRecord>> sessions;       // training
  std::vector<std::vector<metrics::EpisodeRecord>> eval_sessions;  // greedy eval
};

namespace detail {

inline std::vector<std::vector<metrics::EpisodeRecord>> group_by_session(
    const std::vector<metrics::EpisodeRecord>& rows) {
  std::map<int, std::vector<metrics::EpisodeRecord>> by;
  for (const auto& r : rows) by[r.session].push_back(r);
  std::vector<std::vector<metrics::EpisodeRecord>> out;
  for (auto& [s, v] : by) out.push_back(std::move(v));
  return out;
}

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;
  int n = 0;
};

inline std::optional<Aggregate> aggregate(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  Aggregate a;
  a.n = static_cast<int>(values.size());
  for (double v : values) a.mean += v;
  a.mean /= a.n;
  if (a.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.stddev = std::sqrt(ss / (a.n - 1));
  }
  return a;
}

inline std::string format_value(const std::optional<Aggregate>& a, bool significant) {
  if (!a) return "N.A.";
  char buf[64];
  if (a->n > 1)
    std::snprintf(buf, sizeof(buf), "%.4g+-%.2g", a->mean, a->stddev);
  else
    std::snprintf(buf, sizeof(buf), "%.4g", a->mean);
  return std::string(buf) + (significant ? "*" : "");
}

// Welch significance against the baseline sample; degenerate samples simply
// carry no flag.
inline bool significant_vs(const std::vector<double>& a, const std::vector<double>& baseline) {
  if (a.size() < 2 || baseline.size() < 2) return false;
  try {
    return metrics::welch_t_test(a, baseline).significant;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

}  // namespace detail

inline RunData load_run(const std::string& dir) {
  RunData run;
  run.dir = dir;
  run.cfg = load_config_file(dir + "/config.txt");
  std::ostringstream label;
  if (run.cfg.algo == Algo::kDqn) {
    label << "DQN";
  } else {
    char om[32];
    std::snprintf(om, sizeof(om), "%g", run.cfg.omega);
    label << "CT-DQN (omega=" << om << ")";
  }
  run.label = label.str();
  run.sessions = detail::group_by_session(read_episodes_csv(dir + "/episodes.csv"));
  if (std::filesystem::exists(dir + "/eval.csv"))
    run.eval_sessions = detail::group_by_session(read_episodes_csv(dir + "/eval.csv"));
  return run;
}

// Per-session learning metric samples for one run.
struct LearningSamples {
  std::vector<double> j_avg;
  std::vector<double> terminal_episode;  // sessions where E_t exists
  std::vector<double> j_avg_after;       // same sessions
};

inline LearningSamples learning_samples(const RunData& run) {
  LearningSamples s;
  for (const auto& session : run.sessions) {
    s.j_avg.push_back(metrics::avg_cumulative_reward(session));
    if (const auto et = metrics::terminal_episode(session)) {
      s.terminal_episode.push_back(static_cast<double>(*et));
      s.j_avg_after.push_back(metrics::avg_reward_after_terminal(session, *et));
    }
  }
  return s;
}

// Per-session control metric samples from greedy evaluation rows.
struct ControlSamples {
  std::vector<double> j_greedy;        // one mean per session
  std::vector<double> settling;        // sessions with any settled episode
  std::vector<double> steady_error;
};

inline ControlSamples control_samples(const RunData& run) {
  ControlSamples s;
  for (const auto& session : run.eval_sessions) {
    s.j_greedy.push_back(metrics::avg_cumulative_reward(session));
    std::vector<double> ks, es;
    for (const auto& r : session) {
      if (r.settling_step) ks.push_back(static_cast<double>(*r.settling_step));
      if (r.steady_state_error) es.push_back(*r.steady_state_error);
    }
    if (!ks.empty()) {
      double m = 0.0;
      for (double v : ks) m += v;
      s.settling.push_back(m / ks.size());
    }
    if (!es.empty()) {
      double m = 0.0;
      for (double v : es) m += v;
      s.steady_error.push_back(m / es.size());
    }
  }
  return s;
}

inline int smoothing_window(envs::EnvKind env) {
  switch (env) {
    case envs::EnvKind::kPendulum: return 10;
    case envs::EnvKind::kLander: return 100;
    case envs::EnvKind::kCar: return 50;
  }
  return 1;
}

namespace detail {

struct Curve {
  std::string label;
  std::vector<double> mean;
  std::vector<double> stddev;
};

inline Curve reward_curve(const RunData& run) {
  Curve c;
  c.label = run.label;
  const int window = smoothing_window(run.cfg.env);
  std::vector<std::vector<double>> smoothed;
  size_t episodes = 0;
  for (const auto& session : run.sessions) {
    std::vector<double> j;
    for (const auto& r : session) j.push_back(r.cumulative_reward);
    smoothed.push_back(metrics::moving_average_left(j, window));
    episodes = std::max(episodes, j.size());
  }
  c.mean.resize(episodes, 0.0);
  c.stddev.resize(episodes, 0.0);
  for (size_t e = 0; e < episodes; ++e) {
    std::vector<double> vals;
    for (const auto& s : smoothed)
      if (e < s.size()) vals.push_back(s[e]);
    const auto agg = aggregate(vals);
    c.mean[e] = agg->mean;
    c.stddev[e] = agg->stddev;
  }
  return c;
}

inline void write_reward_svg(const std::string& path, const std::vector<Curve>& curves) {
  constexpr int kWidth = 880, kHeight = 520;
  constexpr double kLeft = 70, kRight = 30, kTop = 30, kBottom = 55;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  size_t episodes = 1;
  double lo = 0.0, hi = 1.0;
  bool first = true;
  for (const auto& c : curves) {
    episodes = std::max(episodes, c.mean.size());
    for (size_t e = 0; e < c.mean.size(); ++e) {
      const double a = c.mean[e] - c.stddev[e];
      const double b = c.mean[e] + c.stddev[e];
      lo = first ? a : std::min(lo, a);
      hi = first ? b : std::max(hi, b);
      first = false;
    }
  }
  if (hi == lo) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  auto x_of = [&](double episode) {
    return kLeft + plot_w * (episode - 1.0) / std::max<double>(1.0, episodes - 1.0);
  };
  auto y_of = [&](double v) { return kTop + plot_h * (1.0 - (v - lo) / (hi - lo)); };

  static const char* kColors[] = {"#444444", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                  "#9467bd"};
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='"
      << kHeight << "' viewBox='0 0 " << kWidth << " " << kHeight << "'>\n";
  svg << "<rect width='100%' height='100%' fill='white'/>\n";

  // Axes with ticks.
  svg << "<line x1='" << kLeft << "' y1='" << kTop + plot_h << "' x2='" << kLeft + plot_w
      << "' y2='" << kTop + plot_h << "' stroke='black'/>\n";
  svg << "<line x1='" << kLeft << "' y1='" << kTop << "' x2='" << kLeft << "' y2='"
      << kTop + plot_h << "' stroke='black'/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double ep = 1.0 + (episodes - 1.0) * t / 5.0;
    const double x = x_of(ep);
    svg << "<line x1='" << x << "' y1='" << kTop + plot_h << "' x2='" << x << "' y2='"
        << kTop + plot_h + 5 << "' stroke='black'/>\n";
    svg << "<text x='" << x << "' y='" << kTop + plot_h + 20
        << "' font-size='12' text-anchor='middle'>" << static_cast<int>(std::lround(ep))
        << "</text>\n";
    const double v = lo + (hi - lo) * t / 5.0;
    const double y = y_of(v);
    svg << "<line x1='" << kLeft - 5 << "' y1='" << y << "' x2='" << kLeft << "' y2='" << y
        << "' stroke='black'/>\n";
    char lab[32];
    std::snprintf(lab, sizeof(lab), "%.4g", v);
    svg << "<text x='" << kLeft - 8 << "' y='" << y + 4
        << "' font-size='12' text-anchor='end'>" << lab << "</text>\n";
  }
  svg << "<text x='" << kLeft + plot_w / 2 << "' y='" << kHeight - 12
      << "' font-size='14' text-anchor='middle'>Episode number</text>\n";
  svg << "<text x='18' y='" << kTop + plot_h / 2
      << "' font-size='14' text-anchor='middle' transform='rotate(-90 18 "
      << kTop + plot_h / 2 << ")'>Cumulative reward</text>\n";

  for (size_t ci = 0; ci < curves.size(); ++ci) {
    const Curve& c = curves[ci];
    const char* color = kColors[ci % 6];
    if (c.mean.size() > 1) {
      std::ostringstream band;
      for (size_t e = 0; e < c.mean.size(); ++e)
        band << (e ? " " : "") << x_of(e + 1.0) << "," << y_of(c.mean[e] + c.stddev[e]);
      for (size_t e = c.mean.size(); e-- > 0;)
        band << " " << x_of(e + 1.0) << "," << y_of(c.mean[e] - c.stddev[e]);
      svg << "<polygon points='" << band.str() << "' fill='" << color
          << "' fill-opacity='0.22' stroke='none'/>\n";
      std::ostringstream line;
      for (size_t e = 0; e < c.mean.size(); ++e)
        line << (e ? " " : "") << x_of(e + 1.0) << "," << y_of(c.mean[e]);
      svg << "<polyline points='" << line.str() << "' fill='none' stroke='" << color
          << "' stroke-width='1.8'/>\n";
    }
    const double ly = kTop + 18.0 * (ci + 1);
    svg << "<line x1='" << kLeft + plot_w - 170 << "' y1='" << ly << "' x2='"
        << kLeft + plot_w - 145 << "' y2='" << ly << "' stroke='" << color
        << "' stroke-width='3'/>\n";
    svg << "<text x='" << kLeft + plot_w - 140 << "' y='" << ly + 4
        << "' font-size='12'>" << c.label << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << svg.str();
}

}  // namespace detail

// Builds report.txt, learning_metrics.csv, control_metrics.csv and
// reward_curves.svg under out_dir. The first run with algo = dqn is the
// baseline for the Welch flags. All runs must share one environment.
inline void write_report(const std::vector<std::string>& run_dirs,
                         const std::string& out_dir) {
  if (run_dirs.empty()) throw std::invalid_argument("report: no runs given");
  std::vector<RunData> runs;
  for (const auto& dir : run_dirs) runs.push_back(load_run(dir));
  for (const auto& run : runs)
    if (run.cfg.env != runs.front().cfg.env)
      throw std::invalid_argument("report: runs mix different environments");

  const RunData* baseline = nullptr;
  for (const auto& run : runs)
    if (run.cfg.algo == Algo::kDqn) {
      baseline = &run;
      break;
    }

  std::filesystem::create_directories(out_dir);
  std::ostringstream text;
  text << "Environment: " << envs::to_string(runs.front().cfg.env) << "\n";
  text << "Sessions per run:";
  for (const auto& run : runs) text << " " << run.label << "=" << run.sessions.size();
  text << "\n\n";

  const LearningSamples base_learning =
      baseline ? learning_samples(*baseline) : LearningSamples{};

  std::ofstream lcsv(out_dir + "/learning_metrics.csv", std::ios::binary);
  lcsv << "algorithm,E_t_mean,E_t_std,E_t_sessions,J_avg_mean,J_avg_std,"
          "J_avg_t_mean,J_avg_t_std,sig_E_t,sig_J_avg,sig_J_avg_t\n";
  text << "Learning metrics (mean+-std across sessions; * = Welch p<0.05 vs DQN)\n";
  text << "  algorithm              E_t             J_avg           J_avg_t\n";
  for (const auto& run : runs) {
    const LearningSamples s = learning_samples(run);
    const bool is_base = baseline == &run;
    const bool sig_et = !is_base && baseline &&
                        detail::significant_vs(s.terminal_episode, base_learning.terminal_episode);
    const bool sig_j = !is_base && baseline &&
                       detail::significant_vs(s.j_avg, base_learning.j_avg);
    const bool sig_jt = !is_base && baseline &&
                        detail::significant_vs(s.j_avg_after, base_learning.j_avg_after);
    const auto et = detail::aggregate(s.terminal_episode);
    const auto j = detail::aggregate(s.j_avg);
    const auto jt = detail::aggregate(s.j_avg_after);
    char line[256];
    std::snprintf(line, sizeof(line), "  %-22s %-15s %-15s %-15s\n", run.label.c_str(),
                  detail::format_value(et, sig_et).c_str(),
                  detail::format_value(j, sig_j).c_str(),
                  detail::format_value(jt, sig_jt).c_str());
    text << line;
    lcsv << run.label << ',' << (et ? format_double(et->mean) : "NA") << ','
         << (et ? format_double(et->stddev) : "NA") << ',' << s.terminal_episode.size()
         << ',' << (j ? format_double(j->mean) : "NA") << ','
         << (j ? format_double(j->stddev) : "NA") << ','
         << (jt ? format_double(jt->mean) : "NA") << ','
         << (jt ? format_double(jt->stddev) : "NA") << ',' << sig_et << ',' << sig_j << ','
         << sig_jt << '\n';
  }

  const bool any_eval =
      std::any_of(runs.begin(), runs.end(),
                  [](const RunData& r) { return !r.eval_sessions.empty(); });
  if (any_eval) {
    const ControlSamples base_control =
        baseline ? control_samples(*baseline) : ControlSamples{};
    std::ofstream ccsv(out_dir + "/control_metrics.csv", std::ios::binary);
    ccsv << "algorithm,k_s_mean,k_s_std,e_s_mean,e_s_std,J_greedy_mean,J_greedy_std,"
            "sig_k_s,sig_e_s,sig_J_greedy\n";
    text << "\nControl metrics (greedy evaluation; * = Welch p<0.05 vs DQN)\n";
    text << "  algorithm              k_s             e_s             J_greedy\n";
    for (const auto& run : runs) {
      const ControlSamples s = control_samples(run);
      const bool is_base = baseline == &run;
      const bool sig_ks = !is_base && baseline &&
                          detail::significant_vs(s.settling, base_control.settling);
      const bool sig_es = !is_base && baseline &&
                          detail::significant_vs(s.steady_error, base_control.steady_error);
      const bool sig_j = !is_base && baseline &&
                         detail::significant_vs(s.j_greedy, base_control.j_greedy);
      const auto ks = detail::aggregate(s.settling);
      const auto es = detail::aggregate(s.steady_error);
      const auto j = detail::aggregate(s.j_greedy);
      char line[256];
      std::snprintf(line, sizeof(line), "  %-22s %-15s %-15s %-15s\n", run.label.c_str(),
                    detail::format_value(ks, sig_ks).c_str(),
                    detail::format_value(es, sig_es).c_str(),
                    detail::format_value(j, sig_j).c_str());
      text << line;
      ccsv << run.label << ',' << (ks ? format_double(ks->mean) : "NA") << ','
           << (ks ? format_double(ks->stddev) : "NA") << ','
           << (es ? format_double(es->mean) : "NA") << ','
           << (es ? format_double(es->stddev) : "NA") << ','
           << (j ? format_double(j->mean) : "NA") << ','
           << (j ? format_double(j->stddev) : "NA") << ',' << sig_ks << ',' << sig_es << ','
           << sig_j << '\n';
    }
  }

  std::vector<detail::Curve> curves;
  for (const auto& run : runs) curves.push_back(detail::reward_curve(run));
  detail::write_reward_svg(out_dir + "/reward_curves.svg", curves);

  std::ofstream rpt(out_dir + "/report.txt", std::ios::binary);
  if (!rpt) throw std::runtime_error("cannot write report.txt");
  rpt << text.str();
}

}  // namespace ctdqn::harness
