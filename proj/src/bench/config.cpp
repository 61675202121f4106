// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <variant>

#include "chanest/bench/experiment.hpp"

namespace chanest::bench {

namespace {

struct Value;
using Array = std::vector<Value>;
struct Value {
  std::variant<double, bool, std::string, Array> v;
  bool integral = false;  // number written without '.', 'e' or 'E'
};

class Parser {
 public:
  Parser(std::string origin, std::size_t line) : origin_(std::move(origin)), line_(line) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ValueError(origin_ + ":" + std::to_string(line_) + ": " + msg);
  }

  Value parse_value(std::string_view s) {
    std::size_t pos = 0;
    Value v = value(s, pos);
    skip_ws(s, pos);
    if (pos != s.size()) fail("unexpected text after value: '" + std::string(s.substr(pos)) + "'");
    return v;
  }

 private:
  static void skip_ws(std::string_view s, std::size_t& pos) {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  }

  Value value(std::string_view s, std::size_t& pos) {
    skip_ws(s, pos);
    if (pos >= s.size()) fail("missing value");
    const char c = s[pos];
    if (c == '[') return array(s, pos);
    if (c == '"') return string(s, pos);
    if (s.substr(pos, 4) == "true") {
      pos += 4;
      return {true};
    }
    if (s.substr(pos, 5) == "false") {
      pos += 5;
      return {false};
    }
    return number(s, pos);
  }

  Value array(std::string_view s, std::size_t& pos) {
    ++pos;
    Array items;
    skip_ws(s, pos);
    if (pos < s.size() && s[pos] == ']') {
      ++pos;
      return {items};
    }
    for (;;) {
      items.push_back(value(s, pos));
      if (std::holds_alternative<Array>(items.back().v)) fail("nested arrays are not supported");
      skip_ws(s, pos);
      if (pos >= s.size()) fail("unterminated array");
      if (s[pos] == ']') {
        ++pos;
        return {items};
      }
      if (s[pos] != ',') fail("expected ',' or ']' in array");
      ++pos;
      skip_ws(s, pos);
      if (pos >= s.size()) fail("unterminated array");
      if (s[pos] == ']') {  // trailing comma
        ++pos;
        return {items};
      }
    }
  }

  Value string(std::string_view s, std::size_t& pos) {
    const std::size_t end = s.find('"', pos + 1);
    if (end == std::string_view::npos) fail("unterminated string");
    std::string out(s.substr(pos + 1, end - pos - 1));
    if (out.find('\\') != std::string::npos) fail("escape sequences are not supported");
    pos = end + 1;
    return {out};
  }

  Value number(std::string_view s, std::size_t& pos) {
    std::size_t end = pos;
    while (end < s.size() && (std::isalnum(static_cast<unsigned char>(s[end])) || s[end] == '.' || s[end] == '+' ||
                              s[end] == '-' || s[end] == '_')) {
      ++end;
    }
    std::string token(s.substr(pos, end - pos));
    std::erase(token, '_');
    if (token.empty()) fail("expected a value");
    const char* first = token.data() + (token[0] == '+' ? 1 : 0);
    double d = 0.0;
    const auto res = std::from_chars(first, token.data() + token.size(), d);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size() || !std::isfinite(d)) {
      fail("invalid value '" + std::string(s.substr(pos, end - pos)) + "'");
    }
    Value v{d};
    v.integral = token.find_first_of(".eE") == std::string::npos;
    pos = end;
    return v;
  }

  std::string origin_;
  std::size_t line_;
};

// Strips a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

using Setter = std::function<void(ExperimentConfig&, const Value&, const Parser&)>;

double as_double(const Value& v, const Parser& p, const std::string& key) {
  if (!std::holds_alternative<double>(v.v)) p.fail(key + " must be a number");
  return std::get<double>(v.v);
}

std::uint64_t as_uint(const Value& v, const Parser& p, const std::string& key) {
  const double d = as_double(v, p, key);
  if (!v.integral || d < 0.0 || d > 9.007199254740992e15) p.fail(key + " must be a non-negative integer");
  return static_cast<std::uint64_t>(d);
}

bool as_bool(const Value& v, const Parser& p, const std::string& key) {
  if (!std::holds_alternative<bool>(v.v)) p.fail(key + " must be true or false");
  return std::get<bool>(v.v);
}

const std::string& as_string(const Value& v, const Parser& p, const std::string& key) {
  if (!std::holds_alternative<std::string>(v.v)) p.fail(key + " must be a string");
  return std::get<std::string>(v.v);
}

const Array& as_array(const Value& v, const Parser& p, const std::string& key) {
  if (!std::holds_alternative<Array>(v.v)) p.fail(key + " must be an array");
  return std::get<Array>(v.v);
}

template <class T, class Conv>
std::vector<T> map_array(const Value& v, const Parser& p, const std::string& key, Conv conv) {
  std::vector<T> out;
  for (const auto& item : as_array(v, p, key)) out.push_back(conv(item, p, key));
  return out;
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto size_key = [&t](const std::string& key, std::size_t ExperimentConfig::*field) {
      t[key] = [=](ExperimentConfig& c, const Value& v, const Parser& p) { c.*field = as_uint(v, p, key); };
    };
    t["scenario"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      try {
        c.scenario = parse_scenario(as_string(v, p, "scenario"));
      } catch (const ValueError& e) {
        p.fail(e.what());
      }
    };
    t["snr_db"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.snr_db = map_array<double>(v, p, "snr_db", as_double);
    };
    t["fixed_snr_db"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.fixed_snr_db = as_double(v, p, "fixed_snr_db");
    };
    size_key("pilot_len", &ExperimentConfig::pilot_len);
    t["pilot_lens"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.pilot_lens = map_array<std::size_t>(v, p, "pilot_lens", as_uint);
    };
    t["seeds"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.seeds = map_array<std::uint64_t>(v, p, "seeds", as_uint);
    };
    t["seed_base"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.seed_base = as_uint(v, p, "seed_base");
    };
    t["estimators"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.estimators.clear();
      for (const auto& item : as_array(v, p, "estimators")) {
        try {
          c.estimators.push_back(parse_estimator(as_string(item, p, "estimators")));
        } catch (const ValueError& e) {
          p.fail(e.what());
        }
      }
    };
    size_key("n_cov_samples", &ExperimentConfig::n_cov_samples);
    size_key("lmmse_cov_samples", &ExperimentConfig::lmmse_cov_samples);

    t["channel.n_rx"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.channel.n_rx = as_uint(v, p, "channel.n_rx");
    };
    t["channel.n_tx"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.channel.n_tx = as_uint(v, p, "channel.n_tx");
    };
    t["channel.n_paths"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.channel.n_paths = as_uint(v, p, "channel.n_paths");
    };
    t["channel.los"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.channel.los = as_bool(v, p, "channel.los");
    };
    t["channel.los_power"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.channel.los_power = as_double(v, p, "channel.los_power");
    };
    t["channel.angle_spread"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.channel.angle_spread = as_double(v, p, "channel.angle_spread");
    };

    t["denoiser.depth"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.unet.depth = as_uint(v, p, "denoiser.depth");
    };
    t["denoiser.base_width"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.unet.base_width = as_uint(v, p, "denoiser.base_width");
    };
    t["denoiser.wide_width"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.unet.wide_width = as_uint(v, p, "denoiser.wide_width");
    };
    t["denoiser.dropout"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.unet.dropout = as_double(v, p, "denoiser.dropout");
    };
    t["denoiser.p_drop"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.denoiser.p_drop = as_double(v, p, "denoiser.p_drop");
    };
    t["denoiser.iterations"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.denoiser.iterations = as_uint(v, p, "denoiser.iterations");
    };
    t["denoiser.ensemble"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.denoiser.ensemble = as_uint(v, p, "denoiser.ensemble");
    };
    t["denoiser.learning_rate"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.denoiser.learning_rate = as_double(v, p, "denoiser.learning_rate");
    };

    t["mobility.frames"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.mobility.n_frames = as_uint(v, p, "mobility.frames");
    };
    t["mobility.hold_frames"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.mobility.hold_frames = as_uint(v, p, "mobility.hold_frames");
    };
    t["mobility.aoa_drift"] = [](ExperimentConfig& c, const Value& v, const Parser& p) {
      c.mobility.aoa_drift = as_double(v, p, "mobility.aoa_drift");
    };
    return t;
  }();
  return table;
}

}  // namespace

ExperimentConfig parse_config_text(std::string_view text, const std::string& origin, const ExperimentConfig& base) {
  ExperimentConfig cfg = base;
  const std::set<std::string> sections{"channel", "denoiser", "mobility"};
  std::set<std::string> seen_sections, seen_keys;
  std::string section;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    const std::string_view raw = text.substr(start, nl == std::string_view::npos ? text.npos : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const Parser parser(origin, line_no);
    const std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') parser.fail("malformed table header");
      const std::string name(trim(line.substr(1, line.size() - 2)));
      if (!sections.contains(name)) parser.fail("unknown table [" + name + "]");
      if (!seen_sections.insert(name).second) parser.fail("table [" + name + "] appears twice");
      section = name;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) parser.fail("expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) parser.fail("missing key before '='");
    const std::string full = section.empty() ? key : section + "." + key;
    const auto it = setters().find(full);
    if (it == setters().end()) parser.fail("unknown key '" + full + "'");
    if (!seen_keys.insert(full).second) parser.fail("key '" + full + "' is set twice");
    Parser value_parser(origin, line_no);
    it->second(cfg, value_parser.parse_value(trim(line.substr(eq + 1))), parser);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path, const ExperimentConfig& base) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str(), path.string(), base);
}

}  // namespace chanest::bench
