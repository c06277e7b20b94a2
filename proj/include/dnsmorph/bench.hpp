#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dnsmorph/bytes.hpp"
#include "dnsmorph/runtime.hpp"
#include "dnsmorph/simnet.hpp"

namespace dnsmorph::bench {

struct RunRecord {
  int run = 0;
  bool success = false;
  double time_s = 0;
  std::size_t bytes = 0;  // DNS payload bytes, both directions
  std::size_t datagrams = 0;
  std::string failure;
};

// Aggregates follow the reporting convention that timing statistics cover
// successful runs only; the success rate carries the failures.
struct Summary {
  std::size_t runs = 0;
  std::size_t successes = 0;
  double success_rate = 0;
  double min_s = 0;
  double max_s = 0;
  double avg_s = 0;
  double median_s = 0;
  double avg_bytes = 0;
  double avg_datagrams = 0;
};

struct Report {
  std::string target;  // "simnet" or "loopback"
  std::string mode;    // "shortened" or "original"
  std::vector<RunRecord> runs;
  Summary summary;
};

inline Summary summarize(const std::vector<RunRecord>& runs) {
  Summary s;
  s.runs = runs.size();
  std::vector<double> times;
  double bytes = 0, datagrams = 0;
  for (const auto& r : runs) {
    if (!r.success) continue;
    ++s.successes;
    times.push_back(r.time_s);
    bytes += static_cast<double>(r.bytes);
    datagrams += static_cast<double>(r.datagrams);
  }
  if (s.runs > 0) s.success_rate = static_cast<double>(s.successes) / static_cast<double>(s.runs);
  if (s.successes == 0) return s;
  std::sort(times.begin(), times.end());
  s.min_s = times.front();
  s.max_s = times.back();
  double sum = 0;
  for (double t : times) sum += t;
  s.avg_s = sum / static_cast<double>(times.size());
  const std::size_t mid = times.size() / 2;
  s.median_s = times.size() % 2 == 1 ? times[mid] : (times[mid - 1] + times[mid]) / 2;
  s.avg_bytes = bytes / static_cast<double>(s.successes);
  s.avg_datagrams = datagrams / static_cast<double>(s.successes);
  return s;
}

inline std::string mode_name(std::size_t pad_max) {
  return pad_max <= 100 ? "shortened" : "original";
}

// Fresh client and fresh server state every run; nothing carries over.
inline Report bench_simnet(const session::ClientConfig& client_cfg,
                           const session::ServerConfig& server_cfg,
                           const simnet::NetProfile& profile, int n_runs, std::uint64_t seed) {
  Report rep;
  rep.target = "simnet";
  rep.mode = mode_name(client_cfg.pad_max);
  for (int i = 1; i <= n_runs; ++i) {
    const auto sc = simnet::run_scenario(client_cfg, server_cfg, profile,
                                         mix_seed(seed, static_cast<std::uint64_t>(i)), 1);
    RunRecord r;
    r.run = i;
    r.success = sc.success && sc.keys_match;
    r.time_s = sc.duration_s;
    r.bytes = sc.total_bytes;
    r.datagrams = sc.total_datagrams;
    r.failure = sc.success ? "" : sc.failure;
    rep.runs.push_back(std::move(r));
  }
  rep.summary = summarize(rep.runs);
  return rep;
}

// Real sockets against a live bridge; wall-clock timing covers the UDP
// handshake only. Client state is created fresh per run. When the bridge's
// TCP endpoint is given, each completed session is handed over and thereby
// released server-side; without that, completed sessions linger until idle
// eviction and a later run drawing the same session id cannot bootstrap.
inline Report bench_loopback(const session::ClientConfig& client_cfg,
                             const runtime::Endpoint& bridge_udp, int n_runs, std::uint64_t seed,
                             std::optional<runtime::Endpoint> bridge_tcp = std::nullopt) {
  Report rep;
  rep.target = "loopback";
  rep.mode = mode_name(client_cfg.pad_max);
  for (int i = 1; i <= n_runs; ++i) {
    const auto out = runtime::run_client_handshake(client_cfg, bridge_udp,
                                                   mix_seed(seed, static_cast<std::uint64_t>(i)));
    RunRecord r;
    r.run = i;
    r.success = out.success;
    r.time_s = out.elapsed_s;
    r.bytes = out.stats.bytes_sent + out.stats.bytes_received;
    r.datagrams = out.stats.datagrams_sent + out.stats.datagrams_received;
    r.failure = out.failure;
    if (out.success && bridge_tcp) {
      try {
        runtime::TcpTunnel tunnel(*bridge_tcp, out.keys);
      } catch (const Error& e) {
        r.success = false;
        r.failure = std::string("handover failed: ") + e.what();
      }
    }
    rep.runs.push_back(std::move(r));
  }
  rep.summary = summarize(rep.runs);
  return rep;
}

inline nlohmann::json to_json_value(const Report& rep) {
  nlohmann::json j;
  j["target"] = rep.target;
  j["mode"] = rep.mode;
  j["runs"] = nlohmann::json::array();
  for (const auto& r : rep.runs) {
    j["runs"].push_back({{"run", r.run},
                         {"success", r.success},
                         {"time_s", r.time_s},
                         {"bytes", r.bytes},
                         {"datagrams", r.datagrams},
                         {"failure", r.failure}});
  }
  j["summary"] = {{"runs", rep.summary.runs},
                  {"successes", rep.summary.successes},
                  {"success_rate", rep.summary.success_rate},
                  {"min_s", rep.summary.min_s},
                  {"max_s", rep.summary.max_s},
                  {"avg_s", rep.summary.avg_s},
                  {"median_s", rep.summary.median_s},
                  {"avg_bytes", rep.summary.avg_bytes},
                  {"avg_datagrams", rep.summary.avg_datagrams}};
  return j;
}

inline std::string to_json(const Report& rep) { return to_json_value(rep).dump(2) + "\n"; }

// Same fields as the JSON form: one row per run, then the summary as trailing
// key=value comment lines.
inline std::string to_csv(const Report& rep) {
  std::string out = "run,success,time_s,bytes,datagrams,failure\n";
  const auto esc = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += "\"\"";
      else q.push_back(c);
    }
    return q + "\"";
  };
  for (const auto& r : rep.runs) {
    out += std::to_string(r.run) + "," + (r.success ? "1" : "0") + "," +
           std::to_string(r.time_s) + "," + std::to_string(r.bytes) + "," +
           std::to_string(r.datagrams) + "," + esc(r.failure) + "\n";
  }
  const auto& s = rep.summary;
  out += "# target=" + rep.target + "\n";
  out += "# mode=" + rep.mode + "\n";
  out += "# runs=" + std::to_string(s.runs) + "\n";
  out += "# successes=" + std::to_string(s.successes) + "\n";
  out += "# success_rate=" + std::to_string(s.success_rate) + "\n";
  out += "# min_s=" + std::to_string(s.min_s) + "\n";
  out += "# max_s=" + std::to_string(s.max_s) + "\n";
  out += "# avg_s=" + std::to_string(s.avg_s) + "\n";
  out += "# median_s=" + std::to_string(s.median_s) + "\n";
  out += "# avg_bytes=" + std::to_string(s.avg_bytes) + "\n";
  out += "# avg_datagrams=" + std::to_string(s.avg_datagrams) + "\n";
  return out;
}

}  // namespace dnsmorph::bench
