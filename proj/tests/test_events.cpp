#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "sentinel/error.hpp"
#include "sentinel/events.hpp"

using namespace sentinel;

namespace {

NormalizedEvent ev(std::int64_t t, std::uint64_t pid, std::string target = "C:\\a",
                   ActionKind action = ActionKind::FileWrite) {
  return {t, pid, action, std::move(target)};
}

std::string random_path(std::mt19937_64& rng) {
  static const char* pieces[] = {"C:\\Users\\", "C:\\Documents and Settings\\", "HKU\\S-1-5-21-", "\\", "{",
                                 "}",          "-",                           "~df",           "tmp", ".tmp",
                                 "Temp",       "alice",                       "[USER]",        "[SID]", "0",
                                 "9",          "a3f",                         "DEADBEEF",      "x",    "Software"};
  std::uniform_int_distribution<int> n(1, 12), pick(0, 19);
  std::string s;
  const int parts = n(rng);
  for (int i = 0; i < parts; ++i) s += pieces[pick(rng)];
  return s;
}

}  // namespace

TEST_CASE("parse applies the regularizer to the target") {
  PathRegularizer rules;
  rules.add_rule(R"(\\Users\\[^\\]+)", R"(\Users\[USER])");
  std::istringstream in("1000|412|FileWrite|C:\\Users\\alice\\x.tmp\n");
  auto r = parse_event_stream(in, rules);
  REQUIRE(r.events.size() == 1);
  CHECK(r.rejects.empty());
  CHECK(r.events[0] == ev(1000, 412, "C:\\Users\\[USER]\\x.tmp"));
}

TEST_CASE("empty input gives nothing") {
  std::istringstream in("");
  auto r = parse_event_stream(in, PathRegularizer::defaults());
  CHECK(r.events.empty());
  CHECK(r.rejects.empty());
}

TEST_CASE("reads are rejected, the rest of the stream survives") {
  std::istringstream in("1|1|FileRead|C:\\x\n2|1|Execute|C:\\y.exe\n");
  auto r = parse_event_stream(in, PathRegularizer::defaults());
  REQUIRE(r.rejects.size() == 1);
  CHECK(r.rejects[0].line_number == 1);
  REQUIRE(r.events.size() == 1);
  CHECK(r.events[0].action == ActionKind::Execute);
  CHECK_FALSE(parse_action("FileRead").has_value());
}

TEST_CASE("strict mode throws on the first bad line") {
  std::istringstream in("1|1|Execute|x\nnot an event\n");
  CHECK_THROWS_AS(parse_event_stream(in, PathRegularizer::defaults(), true), DataError);
}

TEST_CASE("malformed lines") {
  const auto rules = PathRegularizer::defaults();
  NormalizedEvent e;
  CHECK(parse_event_line("x|1|Execute|a", rules, e));
  CHECK(parse_event_line("1|-4|Execute|a", rules, e));
  CHECK(parse_event_line("1|1|Execute|", rules, e));
  CHECK(parse_event_line("1|1|Execute", rules, e));
  CHECK(parse_event_line("1|1|Execute|a|b", rules, e));
  CHECK_FALSE(parse_event_line("1|1|Execute|a\\|b", rules, e));
  CHECK(e.target == "a|b");
}

TEST_CASE("escaped pipes round-trip through the line format") {
  const auto e = ev(5, 9, "HKLM\\x|y\\z", ActionKind::RegistryDelete);
  NormalizedEvent back;
  REQUIRE_FALSE(parse_event_line(format_event_line(e), PathRegularizer{}, back));
  CHECK(back == e);
}

TEST_CASE("default rules") {
  const auto rules = PathRegularizer::defaults();
  CHECK(regularize_path("HKU\\S-1-5-21-1234567\\Software\\K", rules) == "HKU\\[SID]\\Software\\K");
  CHECK(regularize_path("C:\\Windows\\notepad.exe", rules) == "C:\\Windows\\notepad.exe");
  CHECK(regularize_path("C:\\Documents and Settings\\bob\\a.txt", rules) == "C:\\Documents and Settings\\[USER]\\a.txt");
  CHECK(regularize_path("HKLM\\{0F1E2D3C-4B5A-6978-8796-A5B4C3D2E1F0}\\v", rules) == "HKLM\\[GUID]\\v");
  CHECK(regularize_path("C:\\Temp\\~DF12AB.tmp", rules) == "C:\\Temp\\[TMP].tmp");
}

TEST_CASE("default rules are idempotent on random paths") {
  const auto rules = PathRegularizer::defaults();
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto s = random_path(rng);
    const auto once = regularize_path(s, rules);
    CHECK_MESSAGE(regularize_path(once, rules) == once, s);
  }
}

TEST_CASE("rule file parsing") {
  std::istringstream in("# comment\n\nfoo\tbar\n");
  auto r = PathRegularizer::from_stream(in);
  CHECK(r.apply("xfooy") == "xbary");
  std::istringstream bad("no tab here\n");
  CHECK_THROWS_AS(PathRegularizer::from_stream(bad), DataError);
  std::istringstream bad_regex("(\tx\n");
  CHECK_THROWS_AS(PathRegularizer::from_stream(bad_regex), DataError);
}

TEST_CASE("windows anchor at the first event") {
  std::vector<NormalizedEvent> es{ev(0, 1), ev(100'000, 1), ev(250'000, 1)};
  auto w = window_stream(es, "h", 240'000);
  REQUIRE(w.size() == 2);
  CHECK(w[0].start_time == 0);
  CHECK(w[0].events.size() == 2);
  CHECK(w[1].start_time == 240'000);
  CHECK(w[1].events.size() == 1);

  auto one = window_stream(std::vector{ev(77, 3)}, "h");
  REQUIRE(one.size() == 1);
  CHECK(one[0].events.size() == 1);
  CHECK(window_stream({}, "h").empty());
}

TEST_CASE("out-of-order streams are rejected") {
  std::vector<NormalizedEvent> es{ev(10, 1), ev(5, 1)};
  CHECK_THROWS_AS(window_stream(es, "h"), DataError);
  CHECK_THROWS_AS(window_stream(es, "h", 0), UsageError);
}

TEST_CASE("random streams partition into disjoint windows") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::int64_t> t(0, 3'600'000);
  std::vector<NormalizedEvent> es;
  for (int i = 0; i < 10'000; ++i) es.push_back(ev(t(rng), i % 7));
  std::sort(es.begin(), es.end(), [](auto& a, auto& b) { return a.timestamp_ms < b.timestamp_ms; });
  const auto w = window_stream(es, "h", 240'000);
  std::size_t total = 0;
  const auto anchor = es.front().timestamp_ms;
  for (std::size_t k = 0; k < w.size(); ++k) {
    total += w[k].events.size();
    if (k > 0) CHECK(w[k - 1].start_time + w[k - 1].duration_ms <= w[k].start_time);
    for (const auto& e : w[k].events) {
      // Brute-force reassignment.
      CHECK(w[k].start_time == anchor + (e.timestamp_ms - anchor) / 240'000 * 240'000);
    }
  }
  CHECK(total == es.size());
}

TEST_CASE("group_by_process") {
  LogWindow w;
  w.events = {ev(1, 1, "a"), ev(2, 2, "b"), ev(3, 1, "c")};
  auto g = group_by_process(w);
  REQUIRE(g.size() == 2);
  CHECK(g[1] == std::vector{ev(1, 1, "a"), ev(3, 1, "c")});
  CHECK(g[2] == std::vector{ev(2, 2, "b")});

  LogWindow same;
  same.events = {ev(1, 4, "a"), ev(1, 4, "b"), ev(2, 4, "c")};
  auto s = group_by_process(same);
  REQUIRE(s.size() == 1);
  CHECK(s[4] == same.events);
}

TEST_CASE("regrouping a random window reproduces it") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pid(1, 6), dt(0, 3);
  for (int rep = 0; rep < 50; ++rep) {
    LogWindow w;
    std::int64_t t = 0;
    for (int i = 0; i < 200; ++i) {
      t += dt(rng);
      w.events.push_back(ev(t, pid(rng), std::to_string(i)));
    }
    std::vector<NormalizedEvent> merged;
    for (auto& [p, es] : group_by_process(w)) {
      for (std::size_t i = 1; i < es.size(); ++i) CHECK(std::stoi(es[i - 1].target) < std::stoi(es[i].target));
      merged.insert(merged.end(), es.begin(), es.end());
    }
    std::sort(merged.begin(), merged.end(), [](auto& a, auto& b) { return std::stoi(a.target) < std::stoi(b.target); });
    CHECK(merged == w.events);
  }
}

TEST_CASE("window file round trip") {
  std::vector<NormalizedEvent> es{ev(0, 1, "a|b"), ev(300'000, 2, "c", ActionKind::ProcessSpawn)};
  auto w = window_stream(es, "host1", 240'000);
  std::ostringstream out;
  write_windows(out, w);
  std::istringstream in(out.str());
  auto back = read_windows(in);
  REQUIRE(back.size() == w.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    CHECK(back[k].window_id == w[k].window_id);
    CHECK(back[k].start_time == w[k].start_time);
    CHECK(back[k].events == w[k].events);
  }
  std::istringstream orphan("1|1|Execute|x\n");
  CHECK_THROWS_AS(read_windows(orphan), DataError);
}

TEST_CASE("single sandbox window keeps every event") {
  std::vector<NormalizedEvent> es{ev(50, 1), ev(10, 2), ev(900'000, 1)};
  auto w = single_window(es, "sb1");
  CHECK(w.events.size() == 3);
  CHECK(w.start_time == 10);
  CHECK(w.events.front().timestamp_ms == 10);
}
