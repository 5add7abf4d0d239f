#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sentinel {

// Recorded audit actions. Reads are excluded at the parser and have no value here.
enum class ActionKind : std::uint8_t {
  FileWrite,
  FileDelete,
  Execute,
  ProcessSpawn,
  RegistryWrite,
  RegistryDelete,
};

inline constexpr int kActionKindCount = 6;

std::string_view to_string(ActionKind action);
std::optional<ActionKind> parse_action(std::string_view token);

enum class Environment : std::uint8_t { Sandbox, Enterprise, Synthetic };

std::string_view to_string(Environment env);
std::optional<Environment> parse_environment(std::string_view token);

struct NormalizedEvent {
  std::int64_t timestamp_ms = 0;
  std::uint64_t process_id = 0;
  ActionKind action = ActionKind::FileWrite;
  std::string target;

  bool operator==(const NormalizedEvent&) const = default;
};

/// Ordered regex rewrite rules that abstract host-specific path fragments
/// (user names, SIDs, GUIDs, random temp names).
///
/// Rules run top to bottom. Every shipped rule maps its own output to itself,
/// so the full rule list is idempotent.
class PathRegularizer {
 public:
  struct Rule {
    std::string pattern;
    std::string replacement;
    std::regex compiled;
  };

  PathRegularizer() = default;

  static PathRegularizer defaults();
  // One rule per line: pattern<TAB>replacement. Blank lines and '#' comments skipped.
  static PathRegularizer from_stream(std::istream& in);
  static PathRegularizer from_file(const std::filesystem::path& path);

  void add_rule(std::string pattern, std::string replacement);
  std::string apply(std::string_view raw) const;

  const std::vector<Rule>& rules() const { return rules_; }

 private:
  std::vector<Rule> rules_;
};

std::string regularize_path(std::string_view raw, const PathRegularizer& regularizer);

struct ParseReject {
  std::size_t line_number = 0;
  std::string reason;
};

struct ParseResult {
  std::vector<NormalizedEvent> events;
  std::vector<ParseReject> rejects;
};

// Parses `timestamp_ms|process_id|action|target` lines. Malformed lines are
// collected as rejects; in strict mode the first one throws DataError.
ParseResult parse_event_stream(std::istream& in, const PathRegularizer& regularizer,
                               bool strict = false);

// Parses one line; returns the reject reason on failure.
std::optional<std::string> parse_event_line(std::string_view line, const PathRegularizer& regularizer,
                                            NormalizedEvent& out);

std::string format_event_line(const NormalizedEvent& event);
void write_rejects(std::ostream& out, std::span<const ParseReject> rejects);

inline constexpr std::int64_t kDefaultWindowMs = 240'000;

struct LogWindow {
  std::string window_id;
  std::string source_id;
  Environment environment = Environment::Enterprise;
  std::int64_t start_time = 0;
  std::int64_t duration_ms = kDefaultWindowMs;
  std::vector<NormalizedEvent> events;
};

/// Splits a time-sorted stream into disjoint windows anchored at the first
/// event: [t0 + k*duration, t0 + (k+1)*duration). Empty windows are skipped.
/// Throws DataError naming the first out-of-order index.
std::vector<LogWindow> window_stream(std::span<const NormalizedEvent> events, std::string_view source_id,
                                     std::int64_t duration_ms = kDefaultWindowMs,
                                     Environment env = Environment::Enterprise);

// A whole sandbox run as one window covering [first, last].
LogWindow single_window(std::span<const NormalizedEvent> events, std::string_view source_id,
                        Environment env = Environment::Sandbox);

std::map<std::uint64_t, std::vector<NormalizedEvent>> group_by_process(const LogWindow& window);

// Window file: `#window<TAB>id<TAB>source<TAB>environment<TAB>start<TAB>duration`
// followed by that window's event lines.
void write_windows(std::ostream& out, std::span<const LogWindow> windows);
std::vector<LogWindow> read_windows(std::istream& in);

}  // namespace sentinel
