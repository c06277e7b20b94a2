#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dnsmorph/dnsmorph.hpp"

namespace {

volatile std::sig_atomic_t g_interrupted = 0;

void on_signal(int) { g_interrupted = 1; }

struct CommonOpts {
  std::string password;
  std::string domain = "bridge.example";
  std::size_t pad_max = 100;
  std::uint64_t seed = 1;
};

void add_common(CLI::App* cmd, CommonOpts& c, bool need_password) {
  auto* pw = cmd->add_option("--password", c.password, "Shared bridge password");
  if (need_password) pw->required();
  cmd->add_option("--domain", c.domain, "Bridge domain the tunnel hides under")
      ->capture_default_str();
  cmd->add_option("--pad-max", c.pad_max, "Handshake padding bound: 100 or 1308")
      ->check(CLI::IsMember({100, 1308}))
      ->capture_default_str();
  cmd->add_option("--seed", c.seed, "Deterministic seed (testing)")->capture_default_str();
}

dnsmorph::session::ClientConfig client_config(const CommonOpts& c) {
  dnsmorph::session::ClientConfig cfg;
  cfg.password = c.password;
  cfg.domain = c.domain;
  cfg.pad_max = c.pad_max;
  return cfg;
}

dnsmorph::session::ServerConfig server_config(const CommonOpts& c) {
  dnsmorph::session::ServerConfig cfg;
  cfg.password = c.password;
  cfg.domain = c.domain;
  cfg.pad_max = c.pad_max;
  return cfg;
}

void write_out(const std::string& text, const std::string& out_file) {
  if (out_file.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out_file, std::ios::binary);
  if (!f) throw dnsmorph::ConfigError("cannot open output file '" + out_file + "'");
  f << text;
}

dnsmorph::simnet::NetProfile profile_from(double drop, double dup, double reorder, double latency,
                                          double jitter, bool case_flip, bool inject, bool replay) {
  dnsmorph::simnet::NetProfile p;
  p.drop_p = drop;
  p.dup_p = dup;
  p.reorder_p = reorder;
  p.latency_s = latency;
  p.jitter_s = jitter;
  p.case_flip = case_flip;
  p.inject_random = inject;
  p.replay_capture = replay;
  return p;
}

int run_server(const CommonOpts& common, std::uint16_t udp_port, std::uint16_t tcp_port,
               bool decoy, const std::string& mode, const std::string& resolver,
               const std::string& upstream, double run_for, bool print_config,
               const std::string& effective_config) {
  if (mode == "forward" && resolver.empty()) {
    std::cerr << "error: --mode forward requires --resolver host:port\n";
    return 2;
  }
  if (print_config) {
    std::cout << effective_config;
    return 0;
  }
  dnsmorph::runtime::BridgeConfig bc;
  bc.server = server_config(common);
  bc.udp_port = udp_port;
  bc.tcp_port = tcp_port;
  bc.decoy_http = decoy;
  bc.forward_unrelated = mode == "forward";
  bc.resolver = resolver;
  bc.upstream = upstream;
  bc.seed = common.seed;
  dnsmorph::runtime::Bridge bridge(bc);
  nlohmann::json up;
  up["listening"] = {{"udp", bridge.udp_port()},
                     {"tcp", bridge.tcp_port()},
                     {"decoy_http", bridge.decoy_port()}};
  std::cout << up.dump() << "\n" << std::flush;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto start = std::chrono::steady_clock::now();
  while (!g_interrupted) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    if (run_for > 0 && dnsmorph::runtime::seconds_since(start) > run_for) break;
  }
  bridge.stop();
  nlohmann::json down;
  down["accepted_sessions"] = bridge.accepts();
  down["rejected_messages"] = bridge.rejects();
  down["handovers"] = bridge.handovers();
  std::cout << down.dump() << "\n";
  return 0;
}

int run_client(const CommonOpts& common, const std::string& mode, const std::string& server,
               const std::string& resolver, const std::string& tcp, std::size_t echo_bytes) {
  if (mode == "indirect" && resolver.empty()) {
    std::cerr << "error: --mode indirect requires --resolver host:port\n";
    return 2;
  }
  if (mode == "direct" && server.empty()) {
    std::cerr << "error: --mode direct requires --server host:port\n";
    return 2;
  }
  const auto dest = dnsmorph::runtime::parse_hostport(mode == "indirect" ? resolver : server);
  const auto out = dnsmorph::runtime::run_client_handshake(client_config(common), dest,
                                                           common.seed);
  nlohmann::json j;
  j["success"] = out.success;
  j["elapsed_s"] = out.elapsed_s;
  j["session_id"] = out.session_id;
  j["datagrams_sent"] = out.stats.datagrams_sent;
  j["datagrams_received"] = out.stats.datagrams_received;
  j["bytes_total"] = out.stats.bytes_sent + out.stats.bytes_received;
  if (!out.success) j["failure"] = out.failure;
  bool ok = out.success;
  if (out.success && !tcp.empty()) {
    try {
      dnsmorph::runtime::TcpTunnel tunnel(dnsmorph::runtime::parse_hostport(tcp), out.keys);
      j["handover"] = true;
      if (echo_bytes > 0) {
        dnsmorph::Rng rng(common.seed ^ 0xEC40);
        std::size_t left = echo_bytes;
        bool echo_ok = true;
        while (left > 0 && echo_ok) {
          const std::size_t take = std::min(left, dnsmorph::framing::kMaxPlaintext);
          const dnsmorph::Bytes chunk = rng.bytes(take);
          tunnel.send(dnsmorph::view(chunk));
          const auto back = tunnel.recv(5.0);
          echo_ok = back.has_value() && *back == chunk;
          left -= take;
        }
        j["echo_ok"] = echo_ok;
        ok = ok && echo_ok;
      }
    } catch (const dnsmorph::Error& e) {
      j["handover"] = false;
      j["handover_error"] = e.what();
      ok = false;
    }
  }
  std::cout << j.dump() << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DNS-shaped bootstrapping tunnel: bridge, client, simulator, benchmarks"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file with key=value lines (sections per subcommand)");

  // server
  auto* server_cmd = app.add_subcommand("server", "Run the bridge: DNS persona plus TCP handover");
  CommonOpts server_common;
  std::uint16_t udp_port = 5353, tcp_port = 5354;
  bool decoy = false, server_print_config = false;
  std::string server_mode = "embedded", server_resolver, server_upstream;
  double run_for = 0;
  add_common(server_cmd, server_common, true);
  server_cmd->add_option("--udp-port", udp_port, "DNS listener port (0 = ephemeral)")
      ->capture_default_str();
  server_cmd->add_option("--tcp-port", tcp_port, "Handover listener port (0 = ephemeral)")
      ->capture_default_str();
  server_cmd->add_flag("--decoy-http", decoy, "Serve a fortune page on a decoy HTTP port");
  server_cmd->add_option("--mode", server_mode, "Unrelated-name policy: embedded or forward")
      ->check(CLI::IsMember({"embedded", "forward"}))
      ->capture_default_str();
  server_cmd->add_option("--resolver", server_resolver, "Upstream resolver for forward mode");
  server_cmd->add_option("--upstream", server_upstream,
                         "TCP host:port the tunnel connects to after handover (default: echo)");
  server_cmd->add_option("--run-for", run_for, "Exit after this many seconds (testing)");
  server_cmd->add_flag("--print-config", server_print_config,
                       "Print the effective configuration and exit");

  // client
  auto* client_cmd = app.add_subcommand("client", "Run one handshake (and optional echo) as client");
  CommonOpts client_common;
  std::string client_mode = "direct", client_server, client_resolver, client_tcp;
  std::size_t echo_bytes = 0;
  add_common(client_cmd, client_common, true);
  client_cmd->add_option("--mode", client_mode, "direct (straight to bridge) or indirect (via resolver)")
      ->check(CLI::IsMember({"direct", "indirect"}))
      ->capture_default_str();
  client_cmd->add_option("--server", client_server, "Bridge UDP host:port for direct mode");
  client_cmd->add_option("--resolver", client_resolver, "Recursive resolver host:port for indirect mode");
  client_cmd->add_option("--tcp", client_tcp, "Bridge TCP host:port to hand the session over to");
  client_cmd->add_option("--echo-bytes", echo_bytes, "Bytes to push through the post-handover echo");

  // sim
  auto* sim_cmd = app.add_subcommand("sim", "Run seeded in-process scenarios, no sockets");
  CommonOpts sim_common;
  sim_common.password = "simulated-password";
  int sim_runs = 1, sim_attempts = 1;
  double drop = 0, dup = 0, reorder = 0, latency = 0.02, jitter = 0.01;
  bool case_flip = false, inject = false, replay = false;
  std::string transcript_file;
  add_common(sim_cmd, sim_common, false);
  sim_cmd->add_option("--runs", sim_runs, "Scenario count")->capture_default_str();
  sim_cmd->add_option("--attempts", sim_attempts, "Handshake attempts per scenario")
      ->capture_default_str();
  sim_cmd->add_option("--drop", drop, "Datagram drop probability");
  sim_cmd->add_option("--dup", dup, "Datagram duplication probability");
  sim_cmd->add_option("--reorder", reorder, "Delay-spike probability");
  sim_cmd->add_option("--latency", latency, "One-way latency seconds")->capture_default_str();
  sim_cmd->add_option("--jitter", jitter, "Added uniform jitter seconds")->capture_default_str();
  sim_cmd->add_flag("--case-flip", case_flip, "Flip name-label letter case in transit");
  sim_cmd->add_flag("--inject", inject, "Adversary injects forged datagrams");
  sim_cmd->add_flag("--replay", replay, "Adversary replays captured datagrams");
  sim_cmd->add_option("--transcript", transcript_file, "Write the last run's transcript as NDJSON");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Measure handshakes and report CSV/JSON");
  CommonOpts bench_common;
  bench_common.password = "bench-password";
  std::string bench_target = "simnet", bench_out = "json", bench_out_file;
  int bench_runs = 30;
  add_common(bench_cmd, bench_common, false);
  bench_cmd->add_option("--target", bench_target, "simnet or loopback")
      ->check(CLI::IsMember({"simnet", "loopback"}))
      ->capture_default_str();
  bench_cmd->add_option("--runs", bench_runs, "Handshakes to measure")->capture_default_str();
  bench_cmd->add_option("--out", bench_out, "Report format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  bench_cmd->add_option("--out-file", bench_out_file, "Write the report here instead of stdout");

  // entropy-check
  auto* entropy_cmd =
      app.add_subcommand("entropy-check", "Compression ratios of a name-prefix corpus");
  std::string entropy_file;
  std::size_t from_sim = 0;
  CommonOpts entropy_common;
  entropy_common.password = "entropy-password";
  add_common(entropy_cmd, entropy_common, false);
  entropy_cmd->add_option("--file", entropy_file, "File with one name prefix per line");
  entropy_cmd->add_option("--from-sim", from_sim,
                          "Generate this many prefixes from seeded scenarios instead");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*server_cmd) {
      return run_server(server_common, udp_port, tcp_port, decoy, server_mode, server_resolver,
                        server_upstream, run_for, server_print_config,
                        app.config_to_str(true, false));
    }
    if (*client_cmd) {
      return run_client(client_common, client_mode, client_server, client_resolver, client_tcp,
                        echo_bytes);
    }
    if (*sim_cmd) {
      const auto profile =
          profile_from(drop, dup, reorder, latency, jitter, case_flip, inject, replay);
      const auto ccfg = client_config(sim_common);
      const auto scfg = server_config(sim_common);
      int successes = 0;
      double datagrams = 0, bytes = 0;
      std::string last_hash;
      dnsmorph::simnet::ScenarioResult last;
      for (int i = 1; i <= sim_runs; ++i) {
        last = dnsmorph::simnet::run_scenario(
            ccfg, scfg, profile, dnsmorph::mix_seed(sim_common.seed, static_cast<std::uint64_t>(i)),
            sim_attempts);
        if (last.success && last.keys_match) ++successes;
        datagrams += static_cast<double>(last.total_datagrams);
        bytes += static_cast<double>(last.total_bytes);
        last_hash = dnsmorph::simnet::transcript_hash(last.transcript);
      }
      if (!transcript_file.empty()) {
        write_out(dnsmorph::simnet::transcript_ndjson(last.transcript), transcript_file);
      }
      nlohmann::json j;
      j["runs"] = sim_runs;
      j["successes"] = successes;
      j["mean_datagrams"] = sim_runs > 0 ? datagrams / sim_runs : 0.0;
      j["mean_bytes"] = sim_runs > 0 ? bytes / sim_runs : 0.0;
      j["last_transcript_hash"] = last_hash;
      j["last_transcript_problems"] = last.transcript_problems.size();
      std::cout << j.dump() << "\n";
      return successes == sim_runs ? 0 : 1;
    }
    if (*bench_cmd) {
      dnsmorph::bench::Report rep;
      if (bench_target == "simnet") {
        rep = dnsmorph::bench::bench_simnet(client_config(bench_common),
                                            server_config(bench_common),
                                            dnsmorph::simnet::NetProfile{}, bench_runs,
                                            bench_common.seed);
      } else {
        dnsmorph::runtime::BridgeConfig bc;
        bc.server = server_config(bench_common);
        bc.seed = bench_common.seed;
        dnsmorph::runtime::Bridge bridge(bc);
        rep = dnsmorph::bench::bench_loopback(
            client_config(bench_common),
            dnsmorph::runtime::make_endpoint("127.0.0.1", bridge.udp_port()), bench_runs,
            bench_common.seed,
            dnsmorph::runtime::make_endpoint("127.0.0.1", bridge.tcp_port()));
        bridge.stop();
      }
      write_out(bench_out == "json" ? dnsmorph::bench::to_json(rep) : dnsmorph::bench::to_csv(rep),
                bench_out_file);
      return 0;
    }
    if (*entropy_cmd) {
      std::string text;
      if (from_sim > 0) {
        std::vector<dnsmorph::simnet::TranscriptEntry> entries;
        std::uint64_t salt = 1;
        while (true) {
          const auto sc = dnsmorph::simnet::run_scenario(
              client_config(entropy_common), server_config(entropy_common),
              dnsmorph::simnet::NetProfile{}, dnsmorph::mix_seed(entropy_common.seed, salt++), 1);
          entries.insert(entries.end(), sc.transcript.begin(), sc.transcript.end());
          const auto lines = dnsmorph::entropy::prefix_lines_from_transcript(entries, from_sim);
          if (static_cast<std::size_t>(std::count(lines.begin(), lines.end(), '\n')) >= from_sim ||
              salt > 64) {
            text = lines;
            break;
          }
        }
      } else if (!entropy_file.empty()) {
        std::ifstream f(entropy_file, std::ios::binary);
        if (!f) {
          std::cerr << "error: cannot read '" << entropy_file << "'\n";
          return 2;
        }
        std::ostringstream ss;
        ss << f.rdbuf();
        text = ss.str();
      } else {
        std::cerr << "error: pass --file or --from-sim\n";
        return 2;
      }
      const auto rep = dnsmorph::entropy::check_prefix_lines(text);
      nlohmann::json j;
      j["corpus_bytes"] = rep.corpus_bytes;
      j["prefixes"] = rep.prefixes;
      j["deflate_ratio"] = rep.deflate;
      j["block_sort_ratio"] = rep.block_sort;
      std::cout << j.dump() << "\n";
      return 0;
    }
  } catch (const dnsmorph::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
