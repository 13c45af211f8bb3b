#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctdqn/metrics/metrics.hpp"

// episodes.csv reading/writing. Doubles are printed with %.17g so the files
// are byte-reproducible and round-trip exactly; absent optionals are "NA".

namespace ctdqn::harness {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline const char* episodes_csv_header() {
  return "session,episode,steps,J,goal_met,k_s,e_s,n_rl_greedy,n_rl_random,"
         "n_tutor_control,n_tutor_random,mean_loss";
}

inline std::string episode_record_to_csv(const metrics::EpisodeRecord& r) {
  std::ostringstream out;
  out << r.session << ',' << r.episode << ',' << r.steps << ','
      << format_double(r.cumulative_reward) << ',' << (r.goal_met ? 1 : 0) << ',';
  if (r.settling_step) out << *r.settling_step;
  else out << "NA";
  out << ',';
  if (r.steady_state_error) out << format_double(*r.steady_state_error);
  else out << "NA";
  out << ',' << r.n_rl_greedy << ',' << r.n_rl_random << ',' << r.n_tutor_control << ','
      << r.n_tutor_random << ',' << format_double(r.mean_loss);
  return out.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  return fields;
}

inline metrics::EpisodeRecord episode_record_from_csv(const std::string& line) {
  const std::vector<std::string> f = split_csv_line(line);
  if (f.size() != 12)
    throw std::runtime_error("episodes.csv: malformed row: " + line);
  metrics::EpisodeRecord r;
  r.session = std::stoi(f[0]);
  r.episode = std::stoi(f[1]);
  r.steps = std::stoi(f[2]);
  r.cumulative_reward = std::stod(f[3]);
  r.goal_met = f[4] == "1";
  if (f[5] != "NA") r.settling_step = std::stoi(f[5]);
  if (f[6] != "NA") r.steady_state_error = std::stod(f[6]);
  r.n_rl_greedy = std::stol(f[7]);
  r.n_rl_random = std::stol(f[8]);
  r.n_tutor_control = std::stol(f[9]);
  r.n_tutor_random = std::stol(f[10]);
  r.mean_loss = std::stod(f[11]);
  return r;
}

inline std::vector<metrics::EpisodeRecord> read_episodes_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != episodes_csv_header())
    throw std::runtime_error("episodes.csv: unexpected header in " + path);
  std::vector<metrics::EpisodeRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(episode_record_from_csv(line));
  }
  return records;
}

}  // namespace ctdqn::harness
