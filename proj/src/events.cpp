#include "sentinel/events.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <ostream>

#include "sentinel/error.hpp"
#include "sentinel/util.hpp"

namespace sentinel {

namespace {

constexpr std::array<std::string_view, kActionKindCount> kActionNames = {
    "FileWrite", "FileDelete", "Execute", "ProcessSpawn", "RegistryWrite", "RegistryDelete"};

constexpr auto kRegexFlags =
    std::regex::ECMAScript | std::regex::icase | std::regex::optimize;

}  // namespace

std::string_view to_string(ActionKind action) { return kActionNames[static_cast<std::size_t>(action)]; }

std::optional<ActionKind> parse_action(std::string_view token) {
  for (std::size_t i = 0; i < kActionNames.size(); ++i) {
    if (kActionNames[i] == token) return static_cast<ActionKind>(i);
  }
  return std::nullopt;
}

std::string_view to_string(Environment env) {
  switch (env) {
    case Environment::Sandbox: return "sandbox";
    case Environment::Enterprise: return "enterprise";
    case Environment::Synthetic: return "synthetic";
  }
  return "sandbox";
}

std::optional<Environment> parse_environment(std::string_view token) {
  if (token == "sandbox") return Environment::Sandbox;
  if (token == "enterprise") return Environment::Enterprise;
  if (token == "synthetic") return Environment::Synthetic;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

PathRegularizer PathRegularizer::defaults() {
  PathRegularizer r;
  r.add_rule(R"(\\(Users|Documents and Settings)\\[^\\]+)", R"(\$1\[USER])");
  r.add_rule(R"(S-1-5-21(-[0-9]+)+)", "[SID]");
  r.add_rule(R"(\{?[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}\}?)", "[GUID]");
  r.add_rule(R"(\\(~df|tmp|~\$)?[0-9a-f]{4,}\.tmp$)", R"(\[TMP].tmp)");
  return r;
}

PathRegularizer PathRegularizer::from_stream(std::istream& in) {
  PathRegularizer r;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("rule file line " + std::to_string(line_number) + ": expected pattern<TAB>replacement");
    }
    try {
      r.add_rule(line.substr(0, tab), line.substr(tab + 1));
    } catch (const std::regex_error& e) {
      throw DataError("rule file line " + std::to_string(line_number) + ": bad pattern: " + e.what());
    }
  }
  return r;
}

PathRegularizer PathRegularizer::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open rule file " + path.string());
  return from_stream(in);
}

void PathRegularizer::add_rule(std::string pattern, std::string replacement) {
  std::regex compiled(pattern, kRegexFlags);
  rules_.push_back({std::move(pattern), std::move(replacement), std::move(compiled)});
}

std::string PathRegularizer::apply(std::string_view raw) const {
  std::string current(raw);
  for (const auto& rule : rules_) {
    current = std::regex_replace(current, rule.compiled, rule.replacement);
  }
  return current;
}

std::string regularize_path(std::string_view raw, const PathRegularizer& regularizer) {
  return regularizer.apply(raw);
}

// ---------------------------------------------------------------------------

std::optional<std::string> parse_event_line(std::string_view line, const PathRegularizer& regularizer,
                                            NormalizedEvent& out) {
  std::array<std::string_view, 3> head;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < head.size(); ++f) {
    auto bar = line.find('|', pos);
    if (bar == std::string_view::npos) return "expected 4 '|'-separated fields";
    head[f] = line.substr(pos, bar - pos);
    pos = bar + 1;
  }
  auto ts = parse_int(head[0]);
  if (!ts || *ts < 0) return "bad timestamp '" + std::string(head[0]) + "'";
  auto pid = parse_int(head[1]);
  if (!pid || *pid < 0) return "bad process id '" + std::string(head[1]) + "'";
  auto action = parse_action(trim(head[2]));
  if (!action) return "unknown action '" + std::string(head[2]) + "'";

  std::string target;
  auto rest = line.substr(pos);
  target.reserve(rest.size());
  for (std::size_t i = 0; i < rest.size(); ++i) {
    if (rest[i] == '\\' && i + 1 < rest.size() && rest[i + 1] == '|') {
      target.push_back('|');
      ++i;
    } else if (rest[i] == '|') {
      return "unescaped '|' in target";
    } else {
      target.push_back(rest[i]);
    }
  }
  if (target.empty()) return "empty target";
  target = regularizer.apply(target);
  if (target.empty()) return "target empty after regularization";

  out.timestamp_ms = *ts;
  out.process_id = static_cast<std::uint64_t>(*pid);
  out.action = *action;
  out.target = std::move(target);
  return std::nullopt;
}

ParseResult parse_event_stream(std::istream& in, const PathRegularizer& regularizer, bool strict) {
  ParseResult result;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    NormalizedEvent event;
    if (auto reason = parse_event_line(line, regularizer, event)) {
      if (strict) throw DataError("line " + std::to_string(line_number) + ": " + *reason);
      result.rejects.push_back({line_number, std::move(*reason)});
      continue;
    }
    result.events.push_back(std::move(event));
  }
  return result;
}

std::string format_event_line(const NormalizedEvent& event) {
  std::string line = std::to_string(event.timestamp_ms);
  line += '|';
  line += std::to_string(event.process_id);
  line += '|';
  line += to_string(event.action);
  line += '|';
  line += escape_pipes(event.target);
  return line;
}

void write_rejects(std::ostream& out, std::span<const ParseReject> rejects) {
  for (const auto& r : rejects) out << r.line_number << '\t' << r.reason << '\n';
}

// ---------------------------------------------------------------------------

std::vector<LogWindow> window_stream(std::span<const NormalizedEvent> events, std::string_view source_id,
                                     std::int64_t duration_ms, Environment env) {
  if (duration_ms <= 0) throw UsageError("window duration must be positive");
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].timestamp_ms < events[i - 1].timestamp_ms) {
      throw DataError("events of source '" + std::string(source_id) + "' not time-ordered at index " +
                      std::to_string(i));
    }
  }
  std::vector<LogWindow> windows;
  if (events.empty()) return windows;
  const std::int64_t anchor = events.front().timestamp_ms;
  std::int64_t current = -1;
  for (const auto& e : events) {
    const std::int64_t k = (e.timestamp_ms - anchor) / duration_ms;
    if (k != current) {
      current = k;
      LogWindow w;
      w.window_id = std::string(source_id) + "#" + std::to_string(k);
      w.source_id = std::string(source_id);
      w.environment = env;
      w.start_time = anchor + k * duration_ms;
      w.duration_ms = duration_ms;
      windows.push_back(std::move(w));
    }
    windows.back().events.push_back(e);
  }
  return windows;
}

LogWindow single_window(std::span<const NormalizedEvent> events, std::string_view source_id,
                        Environment env) {
  LogWindow w;
  w.window_id = std::string(source_id);
  w.source_id = std::string(source_id);
  w.environment = env;
  if (events.empty()) {
    w.duration_ms = 1;
    return w;
  }
  std::int64_t lo = events.front().timestamp_ms;
  std::int64_t hi = lo;
  for (const auto& e : events) {
    lo = std::min(lo, e.timestamp_ms);
    hi = std::max(hi, e.timestamp_ms);
  }
  w.start_time = lo;
  w.duration_ms = hi - lo + 1;
  w.events.assign(events.begin(), events.end());
  std::stable_sort(w.events.begin(), w.events.end(),
                   [](const auto& a, const auto& b) { return a.timestamp_ms < b.timestamp_ms; });
  return w;
}

std::map<std::uint64_t, std::vector<NormalizedEvent>> group_by_process(const LogWindow& window) {
  std::map<std::uint64_t, std::vector<NormalizedEvent>> groups;
  for (const auto& e : window.events) groups[e.process_id].push_back(e);
  return groups;
}

void write_windows(std::ostream& out, std::span<const LogWindow> windows) {
  for (const auto& w : windows) {
    out << "#window\t" << w.window_id << '\t' << w.source_id << '\t' << to_string(w.environment) << '\t'
        << w.start_time << '\t' << w.duration_ms << '\n';
    for (const auto& e : w.events) out << format_event_line(e) << '\n';
  }
}

std::vector<LogWindow> read_windows(std::istream& in) {
  std::vector<LogWindow> windows;
  const PathRegularizer identity;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "window file line " + std::to_string(line_number);
    if (line.rfind("#window\t", 0) == 0) {
      auto f = split(line, '\t');
      if (f.size() != 6) throw DataError(where + ": malformed #window header");
      LogWindow w;
      w.window_id = std::string(f[1]);
      w.source_id = std::string(f[2]);
      auto env = parse_environment(f[3]);
      auto start = parse_int(f[4]);
      auto duration = parse_int(f[5]);
      if (!env || !start || !duration) throw DataError(where + ": malformed #window header");
      w.environment = *env;
      w.start_time = *start;
      w.duration_ms = *duration;
      windows.push_back(std::move(w));
      continue;
    }
    if (windows.empty()) throw DataError(where + ": event before any #window header");
    NormalizedEvent e;
    if (auto reason = parse_event_line(line, identity, e)) throw DataError(where + ": " + *reason);
    windows.back().events.push_back(std::move(e));
  }
  return windows;
}

}  // namespace sentinel
