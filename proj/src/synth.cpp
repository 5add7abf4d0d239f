#include "sentinel/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>

#include "sentinel/error.hpp"
#include "sentinel/events.hpp"
#include "sentinel/labeler.hpp"
#include "sentinel/util.hpp"

namespace sentinel {

namespace {

constexpr std::int64_t kSandboxEpoch = 1'400'000'000'000;
constexpr std::int64_t kEnterpriseEpoch = 1'500'000'000'000;
constexpr std::int64_t kRunMs = 240'000;
constexpr int kEngines = 60;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t between(std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(engine_() % (hi - lo + 1)); }
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

struct Host {
  std::string user;
  std::string sid;
};

std::string guid(Rng& rng) {
  static const char* hex = "0123456789abcdef";
  std::string g = "{";
  for (int t = 0; t < 32; ++t) {
    if (t == 8 || t == 12 || t == 16 || t == 20) g += '-';
    g += hex[rng.bits() & 15];
  }
  return g + "}";
}

NormalizedEvent background_event(std::size_t k, const Host& host, Rng& rng) {
  NormalizedEvent e;
  const auto group = std::to_string(k / 97);
  const auto id = std::to_string(k);
  switch (k % 6) {
    case 0:
      e.action = ActionKind::FileWrite;
      e.target = "C:\\Users\\" + host.user + "\\AppData\\Local\\Vendor" + group + "\\cache" + id + ".dat";
      break;
    case 1:
      e.action = ActionKind::FileDelete;
      e.target = "C:\\Users\\" + host.user + "\\AppData\\Local\\Temp\\Vendor" + group + "\\part" + id + ".bin";
      break;
    case 2:
      e.action = ActionKind::Execute;
      e.target = "C:\\Program Files\\App" + group + "\\module" + id + ".dll";
      break;
    case 3:
      e.action = ActionKind::ProcessSpawn;
      e.target = "C:\\Program Files\\App" + group + "\\tool" + id + ".exe";
      break;
    case 4:
      e.action = ActionKind::RegistryWrite;
      if (k % 4 == 0) {
        e.target = "HKLM\\Software\\Classes\\CLSID\\" + guid(rng) + "\\Handler" + id;
      } else {
        e.target = "HKU\\" + host.sid + "\\Software\\Vendor" + group + "\\Setting" + id;
      }
      break;
    default:
      e.action = ActionKind::RegistryDelete;
      e.target = "HKU\\" + host.sid + "\\Software\\Vendor" + group + "\\Cache" + id;
      break;
  }
  return e;
}

NormalizedEvent planted_event(std::size_t k, const Host& host) {
  NormalizedEvent e;
  e.action = k % 2 == 0 ? ActionKind::FileWrite : ActionKind::ProcessSpawn;
  e.target = "C:\\Users\\" + host.user + "\\AppData\\Roaming\\svc" + std::to_string(k) + "\\payload" +
             std::to_string(k) + ".exe";
  return e;
}

NormalizedEvent environment_event(std::size_t k) {
  NormalizedEvent e;
  e.action = ActionKind::Execute;
  e.target = "C:\\analyzer\\monitor" + std::to_string(k) + ".dll";
  return e;
}

class ZipfSampler {
 public:
  ZipfSampler(std::size_t n, double exponent) : cdf_(n) {
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      total += 1.0 / std::pow(static_cast<double>(k + 1), exponent);
      cdf_[k] = total;
    }
  }
  std::size_t sample(Rng& rng) const {
    const double u = rng.uniform() * cdf_.back();
    return std::min(static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin()),
                    cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

// Processes of one log as event sequences (targets not yet timestamped).
using Processes = std::vector<std::vector<NormalizedEvent>>;

Processes background_processes(std::size_t nproc, const SyntheticCorpusSpec& spec, const ZipfSampler& zipf,
                               const Host& host, Rng& rng) {
  Processes procs(nproc);
  for (auto& p : procs) {
    const auto len = rng.between(spec.events_per_process_min, spec.events_per_process_max);
    for (std::size_t t = 0; t < len; ++t) p.push_back(background_event(zipf.sample(rng), host, rng));
  }
  return procs;
}

void insert_randomly(Processes& procs, NormalizedEvent e, Rng& rng) {
  auto& p = procs[rng.between(0, procs.size() - 1)];
  p.insert(p.begin() + static_cast<std::ptrdiff_t>(rng.between(0, p.size())), std::move(e));
}

// Assigns pids and time-sorted timestamps within [start, start + span); the
// first emitted event lands exactly on `start`.
std::vector<NormalizedEvent> timestamp(Processes& procs, std::int64_t start, std::int64_t span, Rng& rng) {
  std::vector<NormalizedEvent> out;
  std::uint64_t pid = 1000 + 4 * rng.between(0, 500);
  for (auto& p : procs) {
    pid += 4 * rng.between(1, 50);
    std::vector<std::int64_t> times(p.size());
    for (auto& t : times) t = start + static_cast<std::int64_t>(rng.between(0, static_cast<std::size_t>(span - 1)));
    std::sort(times.begin(), times.end());
    for (std::size_t t = 0; t < p.size(); ++t) {
      p[t].timestamp_ms = times[t];
      p[t].process_id = pid;
      out.push_back(p[t]);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.timestamp_ms < b.timestamp_ms; });
  // Pull the earliest event onto the anchor; relative order is unchanged.
  if (!out.empty()) out.front().timestamp_ms = start;
  return out;
}

void write_log(const std::filesystem::path& path, const std::vector<NormalizedEvent>& events) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& e : events) out << format_event_line(e) << '\n';
}

Host sandbox_host(Rng& rng) {
  return {"user" + std::to_string(rng.between(1, 9999)),
          "S-1-5-21-" + std::to_string(rng.between(100000, 999999)) + "-" + std::to_string(rng.between(100000, 999999)) +
              "-1001"};
}

const char* kTypes[] = {"Trojan", "Worm", "Backdoor", "Virus", "Adware"};

std::string variant(Rng& rng) {
  std::string v;
  for (int t = 0; t < 3; ++t) v += static_cast<char>('a' + rng.between(0, 25));
  return v;
}

}  // namespace

void SyntheticCorpusSpec::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError(std::string(name) + " must be in [0,1]");
  };
  prob(planted_p_malicious, "planted_p_malicious");
  prob(planted_p_benign, "planted_p_benign");
  prob(environment_p_benign_sandbox, "environment_p_benign_sandbox");
  prob(environment_p_malicious_sandbox, "environment_p_malicious_sandbox");
  prob(generic_family_fraction, "generic_family_fraction");
  prob(corrupted_year_fraction, "corrupted_year_fraction");
  prob(ambiguous_fraction, "ambiguous_fraction");
  prob(underrun_fraction, "underrun_fraction");
  if (background_vocab == 0) throw UsageError("background_vocab must be positive");
  if (sandbox_processes_min == 0 || sandbox_processes_min > sandbox_processes_max ||
      enterprise_processes_min == 0 || enterprise_processes_min > enterprise_processes_max ||
      events_per_process_min == 0 || events_per_process_min > events_per_process_max) {
    throw UsageError("process/event count ranges must satisfy 0 < min <= max");
  }
  if (year_min > year_max) throw UsageError("year_min must not exceed year_max");
  if (families == 0 && sandbox_malicious > 0) throw UsageError("families must be positive");
}

void SyntheticCorpusSpec::set(const std::string& key, const std::string& value) {
  auto as_size = [&](std::size_t& field) {
    auto v = parse_int(value);
    if (!v || *v < 0) throw UsageError("synth key '" + key + "': expected a non-negative integer");
    field = static_cast<std::size_t>(*v);
  };
  auto as_int = [&](int& field) {
    auto v = parse_int(value);
    if (!v) throw UsageError("synth key '" + key + "': expected an integer");
    field = static_cast<int>(*v);
  };
  auto as_double = [&](double& field) {
    auto v = parse_double(value);
    if (!v) throw UsageError("synth key '" + key + "': expected a number");
    field = *v;
  };
  const std::map<std::string, std::function<void()>> setters = {
      {"sandbox_benign", [&] { as_size(sandbox_benign); }},
      {"sandbox_malicious", [&] { as_size(sandbox_malicious); }},
      {"enterprise_hosts", [&] { as_size(enterprise_hosts); }},
      {"enterprise_windows_per_host", [&] { as_size(enterprise_windows_per_host); }},
      {"planted_grams", [&] { as_size(planted_grams); }},
      {"planted_p_malicious", [&] { as_double(planted_p_malicious); }},
      {"planted_p_benign", [&] { as_double(planted_p_benign); }},
      {"background_vocab", [&] { as_size(background_vocab); }},
      {"zipf_exponent", [&] { as_double(zipf_exponent); }},
      {"sandbox_processes_min", [&] { as_size(sandbox_processes_min); }},
      {"sandbox_processes_max", [&] { as_size(sandbox_processes_max); }},
      {"enterprise_processes_min", [&] { as_size(enterprise_processes_min); }},
      {"enterprise_processes_max", [&] { as_size(enterprise_processes_max); }},
      {"events_per_process_min", [&] { as_size(events_per_process_min); }},
      {"events_per_process_max", [&] { as_size(events_per_process_max); }},
      {"environment_grams", [&] { as_size(environment_grams); }},
      {"environment_p_benign_sandbox", [&] { as_double(environment_p_benign_sandbox); }},
      {"environment_p_malicious_sandbox", [&] { as_double(environment_p_malicious_sandbox); }},
      {"families", [&] { as_size(families); }},
      {"generic_family_fraction", [&] { as_double(generic_family_fraction); }},
      {"year_min", [&] { as_int(year_min); }},
      {"year_max", [&] { as_int(year_max); }},
      {"corrupted_year_fraction", [&] { as_double(corrupted_year_fraction); }},
      {"drift_per_year", [&] { as_double(drift_per_year); }},
      {"ambiguous_fraction", [&] { as_double(ambiguous_fraction); }},
      {"underrun_fraction", [&] { as_double(underrun_fraction); }},
      {"seed", [&] {
         auto v = parse_int(value);
         if (!v) throw UsageError("synth key 'seed': expected an integer");
         seed = static_cast<std::uint64_t>(*v);
       }},
  };
  auto it = setters.find(key);
  if (it == setters.end()) throw UsageError("unknown synth key '" + key + "'");
  it->second();
}

SyntheticCorpusSpec SyntheticCorpusSpec::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open synth spec " + path.string());
  SyntheticCorpusSpec spec;
  std::string line;
  while (std::getline(in, line)) {
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw UsageError("synth spec: expected key = value");
    spec.set(std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1))));
  }
  spec.validate();
  return spec;
}

std::vector<std::string> planted_key_strings(const SyntheticCorpusSpec& spec) {
  const PathRegularizer reg = PathRegularizer::defaults();
  const Host host{"anyone", "S-1-5-21-1-1-1001"};
  std::vector<std::string> out;
  for (std::size_t k = 0; k < spec.planted_grams; ++k) {
    const auto e = planted_event(k, host);
    out.push_back(std::string(to_string(e.action)) + ":" + reg.apply(e.target));
  }
  return out;
}

std::vector<std::string> environment_key_strings(const SyntheticCorpusSpec& spec) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < spec.environment_grams; ++k) {
    const auto e = environment_event(k);
    out.push_back(std::string(to_string(e.action)) + ":" + e.target);
  }
  return out;
}

SyntheticCorpusFiles generate_corpus(const SyntheticCorpusSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "sandbox");
  fs::create_directories(out_dir / "enterprise");
  const ZipfSampler zipf(spec.background_vocab, spec.zipf_exponent);

  SyntheticCorpusFiles files;
  std::vector<ScoreRecord> scores;
  std::ofstream tags(out_dir / "sources.tsv");

  const std::size_t total = spec.sandbox_benign + spec.sandbox_malicious;
  std::vector<char> is_malicious(total, 0);
  std::fill(is_malicious.begin() + static_cast<std::ptrdiff_t>(spec.sandbox_benign), is_malicious.end(), 1);
  {
    Rng order(mix64(spec.seed ^ 0x0cde));
    for (std::size_t i = total; i > 1; --i) std::swap(is_malicious[i - 1], is_malicious[order.bits() % i]);
  }
  for (std::size_t i = 0; i < total; ++i) {
    Rng rng(mix64(spec.seed ^ mix64(i + 1)));
    const bool malicious = is_malicious[i] != 0;
    char id[32];
    std::snprintf(id, sizeof(id), "sb%05zu", i);
    const Host host = sandbox_host(rng);

    ScoreRecord rec;
    rec.sample_id = id;
    int year = static_cast<int>(rng.between(static_cast<std::size_t>(spec.year_min), static_cast<std::size_t>(spec.year_max)));
    rec.compile_year = year;
    if (rng.bernoulli(spec.corrupted_year_fraction)) rec.compile_year = rng.bernoulli(0.5) ? 1970 : 2030;
    SourceTag tag = SourceTag::UVPN;
    if (malicious) {
      const bool ambiguous = rng.bernoulli(spec.ambiguous_fraction);
      const auto detections = ambiguous ? rng.between(1, 17) : rng.between(18, kEngines);
      rec.s = static_cast<double>(detections) / kEngines;
      const auto family = rng.between(0, spec.families - 1);
      if (rng.bernoulli(spec.generic_family_fraction)) {
        rec.family_label = "Trojan.Win32.Generic";
      } else {
        rec.family_label = std::string(kTypes[family % 5]) + ".Win32.Fam" + std::to_string(family) + "." + variant(rng);
      }
      const double u = rng.uniform();
      tag = ambiguous ? SourceTag::MAL2M : u < 0.10 ? SourceTag::MAL3P : u < 0.15 ? SourceTag::MALAPT : SourceTag::MAL2M;
    } else {
      rec.s = 0.0;
      tag = rng.bernoulli(0.2) ? SourceTag::OS : SourceTag::UVPN;
    }

    Processes procs;
    if (rng.bernoulli(spec.underrun_fraction)) {
      procs = Processes(1);
      procs[0].push_back(background_event(zipf.sample(rng), host, rng));
    } else {
      procs = background_processes(rng.between(spec.sandbox_processes_min, spec.sandbox_processes_max), spec, zipf, host,
                                   rng);
    }
    double planted_p = spec.planted_p_benign;
    if (malicious) {
      planted_p = spec.planted_p_malicious * std::max(0.0, 1.0 - spec.drift_per_year * (year - spec.year_min));
    }
    for (std::size_t k = 0; k < spec.planted_grams; ++k) {
      if (rng.bernoulli(planted_p)) insert_randomly(procs, planted_event(k, host), rng);
    }
    const double env_p = malicious ? spec.environment_p_malicious_sandbox : spec.environment_p_benign_sandbox;
    for (std::size_t k = 0; k < spec.environment_grams; ++k) {
      if (rng.bernoulli(env_p)) insert_randomly(procs, environment_event(k), rng);
    }
    const auto events = timestamp(procs, kSandboxEpoch + static_cast<std::int64_t>(i) * 1'000'000, kRunMs, rng);
    const auto path = out_dir / "sandbox" / (std::string(id) + ".log");
    write_log(path, events);
    files.sandbox_logs.push_back(path);
    scores.push_back(std::move(rec));
    tags << id << '\t' << to_string(tag) << '\n';
  }

  for (std::size_t h = 0; h < spec.enterprise_hosts; ++h) {
    Rng rng(mix64(spec.seed ^ 0xe17e ^ mix64(h + 1)));
    const Host host{"employee" + std::to_string(h), "S-1-5-21-77" + std::to_string(h) + "-4242-" + std::to_string(1100 + h)};
    std::vector<NormalizedEvent> stream;
    const std::int64_t anchor = kEnterpriseEpoch + static_cast<std::int64_t>(h) * 1'000'000'000;
    for (std::size_t w = 0; w < spec.enterprise_windows_per_host; ++w) {
      auto procs = background_processes(rng.between(spec.enterprise_processes_min, spec.enterprise_processes_max), spec,
                                        zipf, host, rng);
      for (std::size_t k = 0; k < spec.planted_grams; ++k) {
        if (rng.bernoulli(spec.planted_p_benign)) insert_randomly(procs, planted_event(k, host), rng);
      }
      auto events = timestamp(procs, anchor + static_cast<std::int64_t>(w) * kRunMs, kRunMs, rng);
      stream.insert(stream.end(), events.begin(), events.end());
    }
    char name[32];
    std::snprintf(name, sizeof(name), "host%03zu.log", h);
    const auto path = out_dir / "enterprise" / name;
    write_log(path, stream);
    files.enterprise_logs.push_back(path);
  }

  files.scores = out_dir / "scores.csv";
  {
    std::ofstream out(files.scores);
    write_score_file(out, scores);
  }
  files.sources = out_dir / "sources.tsv";
  files.truth = out_dir / "truth.tsv";
  std::ofstream truth(files.truth);
  for (const auto& k : planted_key_strings(spec)) truth << "planted\t" << k << '\n';
  for (const auto& k : environment_key_strings(spec)) truth << "environment\t" << k << '\n';
  return files;
}

}  // namespace sentinel
