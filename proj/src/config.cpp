/* Copyright 2026 The L2L Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "l2l/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "l2l/error.hpp"

namespace l2l {

namespace {

const std::vector<std::string>& sweepable_keys() {
  static const std::vector<std::string> keys = {
      "n_layers", "u", "ub", "schedule", "stash", "precision", "k"};
  return keys;
}

std::string where(std::size_t line, std::string_view key) {
  std::string s = line ? "line " + std::to_string(line) + ": " : "";
  return s + "key '" + std::string(key) + "': ";
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_uint(std::string_view key, std::string_view v,
                         std::size_t line) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(where(line, key) + "expected a non-negative integer, got '" +
                      std::string(v) + "'");
  }
  return out;
}

std::size_t parse_positive(std::string_view key, std::string_view v,
                           std::size_t line) {
  const std::uint64_t n = parse_uint(key, v, line);
  if (n == 0) throw ConfigError(where(line, key) + "must be positive");
  return static_cast<std::size_t>(n);
}

double parse_real(std::string_view key, std::string_view v, std::size_t line) {
  double d = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(where(line, key) + "expected a number, got '" +
                      std::string(v) + "'");
  }
  return d;
}

double parse_positive_real(std::string_view key, std::string_view v,
                           std::size_t line) {
  const double d = parse_real(key, v, line);
  if (!(d > 0.0)) throw ConfigError(where(line, key) + "must be positive");
  return d;
}

std::vector<std::string> split_list(std::string_view v) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto piece = trim(v.substr(start, comma == std::string_view::npos
                                                ? std::string_view::npos
                                                : comma - start));
    if (!piece.empty()) out.emplace_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

struct Line {
  std::size_t number;
  std::string key;
  std::string value;
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> out;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view raw = text.substr(
        pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++number;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) {
      raw = raw.substr(0, hash);
    }
    raw = trim(raw);
    if (!raw.empty()) {
      const auto eq = raw.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError("line " + std::to_string(number) +
                          ": expected key=value, got '" + std::string(raw) + "'");
      }
      out.push_back({number, std::string(trim(raw.substr(0, eq))),
                     std::string(trim(raw.substr(eq + 1)))});
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

}  // namespace

ModelSpec RunConfig::model() const {
  return ModelSpec::encoder_stack(n_layers, hidden, intermediate, seed);
}

void RunConfig::validate() const {
  if (n_layers == 0 || hidden == 0 || intermediate == 0) {
    throw ConfigError("n_layers, hidden and intermediate must be positive");
  }
  if (ub == 0 || u == 0 || k == 0) {
    throw ConfigError("ub, u and k must be positive");
  }
  if (schedule.kind == ScheduleKind::Conventional && u != 1) {
    throw ConfigError("schedule=conventional runs one microbatch; set u=1");
  }
  if (!(optimizer.lr >= 0.0)) throw ConfigError("lr must be non-negative");
  if (!(bandwidth_gbps > 0.0) || !(flops_tflops > 0.0)) {
    throw ConfigError("bandwidth_gbps and tflops must be positive");
  }
}

void apply_config_value(RunConfig& c, std::string_view key,
                        std::string_view value, std::size_t line) {
  if (key == "schedule") {
    if (value == "conventional") {
      c.schedule.kind = ScheduleKind::Conventional;
    } else if (value == "baseline_ag") {
      c.schedule.kind = ScheduleKind::BaselineAG;
    } else if (value == "l2l") {
      c.schedule.kind = ScheduleKind::L2L;
    } else {
      throw ConfigError(where(line, key) + "unsupported schedule '" +
                        std::string(value) +
                        "' (expected conventional, baseline_ag or l2l)");
    }
  } else if (key == "stash") {
    if (value == "host") {
      c.schedule.stash = StashPlacement::Host;
    } else if (value == "device") {
      c.schedule.stash = StashPlacement::Device;
    } else {
      throw ConfigError(where(line, key) + "expected host or device");
    }
  } else if (key == "precision") {
    if (value == "fp32") {
      c.precision = PrecisionPolicy::fp32();
    } else if (value == "cmp") {
      c.precision = PrecisionPolicy::cmp();
    } else if (value == "fp64") {
      c.precision = PrecisionPolicy::fp64();
    } else {
      throw ConfigError(where(line, key) + "expected fp32, cmp or fp64");
    }
  } else if (key == "optimizer") {
    if (value == "sgd") {
      c.optimizer.kind = OptimizerKind::SGD;
    } else if (value == "adam") {
      c.optimizer.kind = OptimizerKind::Adam;
    } else {
      throw ConfigError(where(line, key) + "expected sgd or adam");
    }
  } else if (key == "lr") {
    c.optimizer.lr = parse_real(key, value, line);
    if (c.optimizer.lr < 0.0) throw ConfigError(where(line, key) + "must be >= 0");
  } else if (key == "beta1") {
    c.optimizer.beta1 = parse_real(key, value, line);
  } else if (key == "beta2") {
    c.optimizer.beta2 = parse_real(key, value, line);
  } else if (key == "epsilon") {
    c.optimizer.epsilon = parse_positive_real(key, value, line);
  } else if (key == "n_layers") {
    c.n_layers = parse_positive(key, value, line);
  } else if (key == "hidden") {
    c.hidden = parse_positive(key, value, line);
  } else if (key == "intermediate") {
    c.intermediate = parse_positive(key, value, line);
  } else if (key == "ub") {
    c.ub = parse_positive(key, value, line);
  } else if (key == "u") {
    c.u = parse_positive(key, value, line);
  } else if (key == "k") {
    c.k = parse_positive(key, value, line);
  } else if (key == "seed") {
    c.seed = parse_uint(key, value, line);
  } else if (key == "steps") {
    c.steps = parse_positive(key, value, line);
  } else if (key == "device_budget") {
    c.device_budget = parse_positive(key, value, line);
  } else if (key == "bandwidth_gbps") {
    c.bandwidth_gbps = parse_positive_real(key, value, line);
  } else if (key == "tflops") {
    c.flops_tflops = parse_positive_real(key, value, line);
  } else {
    throw ConfigError(where(line, key) + "unknown key");
  }
}

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  std::optional<std::pair<std::size_t, std::size_t>> mb;  // (value, line)
  for (const Line& l : split_lines(text)) {
    if (l.key == "mb") {
      mb = {parse_positive(l.key, l.value, l.number), l.number};
      continue;
    }
    apply_config_value(c, l.key, l.value, l.number);
  }
  if (mb && mb->first != c.u * c.ub) {
    throw ConfigError(where(mb->second, "mb") + "mb=" + std::to_string(mb->first) +
                      " differs from u*ub=" + std::to_string(c.u * c.ub));
  }
  c.validate();
  return c;
}

std::size_t SweepSpec::run_count() const {
  std::size_t n = 1;
  for (const auto& [key, values] : axes) {
    n *= values.size();
    if (n > kMaxSweepRuns) return n;
  }
  return n;
}

std::vector<RunConfig> SweepSpec::expand() const {
  const std::size_t total = run_count();
  if (total > kMaxSweepRuns) {
    throw ConfigError("sweep expands to more than " +
                      std::to_string(kMaxSweepRuns) + " runs");
  }
  std::vector<RunConfig> out;
  out.reserve(total);
  std::vector<std::size_t> idx(axes.size(), 0);
  for (std::size_t r = 0; r < total; ++r) {
    RunConfig c = base;
    for (std::size_t a = 0; a < axes.size(); ++a)
      apply_config_value(c, axes[a].first, axes[a].second[idx[a]]);
    out.push_back(c);
    // Odometer with the last axis fastest.
    for (std::size_t a = axes.size(); a-- > 0;) {
      if (++idx[a] < axes[a].second.size()) break;
      idx[a] = 0;
    }
  }
  return out;
}

SweepSpec parse_sweep(std::string_view text) {
  SweepSpec s;
  for (const Line& l : split_lines(text)) {
    if (l.key.starts_with("sweep.")) {
      const std::string key = l.key.substr(6);
      bool ok = false;
      for (const auto& k : sweepable_keys()) ok = ok || k == key;
      if (!ok) {
        throw ConfigError(where(l.number, l.key) + "axis not sweepable");
      }
      auto values = split_list(l.value);
      if (values.empty()) throw ConfigError(where(l.number, l.key) + "empty axis");
      // Reject bad axis values up front rather than mid-sweep.
      RunConfig probe;
      for (const auto& v : values) apply_config_value(probe, key, v, l.number);
      s.axes.emplace_back(key, std::move(values));
    } else if (l.key == "mb") {
      throw ConfigError(where(l.number, l.key) +
                        "mb is derived from u*ub in sweeps");
    } else {
      apply_config_value(s.base, l.key, l.value, l.number);
    }
  }
  if (s.run_count() > kMaxSweepRuns) {
    throw ConfigError("sweep expands to more than " +
                      std::to_string(kMaxSweepRuns) + " runs");
  }
  return s;
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace l2l
