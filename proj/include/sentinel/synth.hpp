#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sentinel {

/// Generative model for a self-contained labelled corpus: Zipf-distributed
/// background behavior shared by all classes, a set of planted grams emitted
/// with class-dependent probability, and optional sandbox-only environment
/// grams.
struct SyntheticCorpusSpec {
  std::size_t sandbox_benign = 1000;
  std::size_t sandbox_malicious = 1000;
  std::size_t enterprise_hosts = 10;
  std::size_t enterprise_windows_per_host = 100;

  std::size_t planted_grams = 20;
  double planted_p_malicious = 0.6;
  double planted_p_benign = 0.01;

  std::size_t background_vocab = 50'000;
  double zipf_exponent = 1.0;

  std::size_t sandbox_processes_min = 2, sandbox_processes_max = 6;
  std::size_t enterprise_processes_min = 10, enterprise_processes_max = 25;
  std::size_t events_per_process_min = 3, events_per_process_max = 12;

  std::size_t environment_grams = 0;
  double environment_p_benign_sandbox = 0.3;
  double environment_p_malicious_sandbox = 1.0;

  std::size_t families = 40;
  double generic_family_fraction = 0.1;
  int year_min = 1998, year_max = 2014;
  double corrupted_year_fraction = 0.02;
  double drift_per_year = 0.0;  // planted emission decays for later years
  double ambiguous_fraction = 0.0;
  double underrun_fraction = 0.0;

  std::uint64_t seed = 7;

  // Throws UsageError when probabilities fall outside [0, 1] or counts are inconsistent.
  void validate() const;
  void set(const std::string& key, const std::string& value);
  static SyntheticCorpusSpec from_file(const std::filesystem::path& path);
};

struct SyntheticCorpusFiles {
  std::vector<std::filesystem::path> sandbox_logs;
  std::vector<std::filesystem::path> enterprise_logs;
  std::filesystem::path scores;
  std::filesystem::path sources;
  std::filesystem::path truth;  // planted / environment event keys
};

/// Writes event-line logs (`sandbox/<id>.log`, `enterprise/<host>.log`), a
/// score CSV and a source-tag file under `out_dir`.
SyntheticCorpusFiles generate_corpus(const SyntheticCorpusSpec& spec, const std::filesystem::path& out_dir);

// Event-key strings (action:target, regularized) of the planted and environment grams.
std::vector<std::string> planted_key_strings(const SyntheticCorpusSpec& spec);
std::vector<std::string> environment_key_strings(const SyntheticCorpusSpec& spec);

}  // namespace sentinel
