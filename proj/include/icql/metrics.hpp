#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "icql/replay.hpp"
#include "icql/trainer.hpp"

namespace icql {

// One CSV row per training iteration; the eval columns are filled on
// evaluation episodes only. The format is append-only UTF-8 with a fixed
// header, and every field is reproducible from (config, seed) alone.

struct MetricsRow {
  uint64_t seed = 0;
  long episode = 0;
  long env_steps = 0;
  Controller controller = Controller::Decentralized;
  double train_return = 0;
  int length = 0;
  std::optional<double> iql_loss;
  std::optional<double> central_loss;
  double mean_bonus = 0;
  double max_bonus = 0;
  long clamp_count = 0;
  double epsilon = 0;
  std::optional<double> eval_mean;
  std::optional<double> eval_stderr;
};

inline const char* metrics_csv_header() {
  return "seed,episode,env_steps,controller,train_return,ep_length,iql_loss,"
         "central_loss,mean_bonus,max_bonus,clamp_count,epsilon,eval_mean,eval_stderr";
}

namespace detail {

inline std::string csv_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string csv_opt(const std::optional<double>& v) {
  return v ? csv_double(*v) : std::string();
}

inline std::optional<double> parse_opt_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw std::runtime_error("metrics CSV: bad number '" + s + "'");
  return v;
}

}  // namespace detail

inline MetricsRow to_metrics_row(const IterationMetrics& it, uint64_t seed) {
  MetricsRow r;
  r.seed = seed;
  r.episode = it.episode;
  r.env_steps = it.env_steps;
  r.controller = it.controller;
  r.train_return = it.train_return;
  r.length = it.length;
  r.iql_loss = it.iql_loss;
  r.central_loss = it.central_loss;
  r.mean_bonus = it.mean_bonus;
  r.max_bonus = it.max_bonus;
  r.clamp_count = it.clamp_count;
  r.epsilon = it.epsilon;
  return r;
}

inline std::string metrics_row_to_csv(const MetricsRow& r) {
  using detail::csv_double;
  using detail::csv_opt;
  std::string out;
  out += std::to_string(r.seed);
  out += ',';
  out += std::to_string(r.episode);
  out += ',';
  out += std::to_string(r.env_steps);
  out += ',';
  out += controller_name(r.controller);
  out += ',';
  out += csv_double(r.train_return);
  out += ',';
  out += std::to_string(r.length);
  out += ',';
  out += csv_opt(r.iql_loss);
  out += ',';
  out += csv_opt(r.central_loss);
  out += ',';
  out += csv_double(r.mean_bonus);
  out += ',';
  out += csv_double(r.max_bonus);
  out += ',';
  out += std::to_string(r.clamp_count);
  out += ',';
  out += csv_double(r.epsilon);
  out += ',';
  out += csv_opt(r.eval_mean);
  out += ',';
  out += csv_opt(r.eval_stderr);
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline MetricsRow parse_metrics_row(const std::string& line) {
  const auto f = split_csv_line(line);
  if (f.size() != 14) throw std::runtime_error("metrics CSV: wrong field count");
  MetricsRow r;
  r.seed = static_cast<uint64_t>(std::stoull(f[0]));
  r.episode = std::stol(f[1]);
  r.env_steps = std::stol(f[2]);
  r.controller = f[3] == "central" ? Controller::Central : Controller::Decentralized;
  r.train_return = *detail::parse_opt_double(f[4]);
  r.length = std::stoi(f[5]);
  r.iql_loss = detail::parse_opt_double(f[6]);
  r.central_loss = detail::parse_opt_double(f[7]);
  r.mean_bonus = *detail::parse_opt_double(f[8]);
  r.max_bonus = *detail::parse_opt_double(f[9]);
  r.clamp_count = std::stol(f[10]);
  r.epsilon = *detail::parse_opt_double(f[11]);
  r.eval_mean = detail::parse_opt_double(f[12]);
  r.eval_stderr = detail::parse_opt_double(f[13]);
  return r;
}

inline std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics CSV '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty metrics CSV '" + path + "'");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(parse_metrics_row(line));
  }
  return rows;
}

// Incremental mean / standard error (Welford).
class RunningStat {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  long count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double std_dev() const { return std::sqrt(variance()); }
  double std_err() const { return n_ > 0 ? std_dev() / std::sqrt(static_cast<double>(n_)) : 0.0; }

 private:
  long n_ = 0;
  double mean_ = 0;
  double m2_ = 0;
};

}  // namespace icql
