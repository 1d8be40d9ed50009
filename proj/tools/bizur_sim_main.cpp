// Copyright (c) the bizur-sim authors.
// Licensed under the Apache 2.0 License.
//
// bizur-sim: scenario-driven runner for the simulated Bizur cluster.
//
//   bizur-sim run scenario.json [--out DIR] [--seed N] [--trace]
//   bizur-sim check --seeds A:B [options]
//
// `run` executes one scenario and writes per-second metrics as CSV.
// `check` runs generate -> simulate -> verify for a seed range and reports
// pass/violation counts; failing histories are persisted for triage.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bizur/harness/checker_run.hpp"
#include "bizur/harness/scenario.hpp"

namespace fs = std::filesystem;
using namespace bizur;

namespace {

std::string read_file(const std::string& path, std::string* error) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    *error = "cannot open " + path;
    return {};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out << content;
  return true;
}

int run_one(const harness::ScenarioConfig& cfg, const fs::path& dir,
            std::string* summary_row) {
  harness::ScenarioResult result = harness::run_scenario(cfg);

  fs::path csv_path = dir / (cfg.name + ".csv");
  write_file(csv_path, result.csv);
  if (cfg.trace) write_file(dir / (cfg.name + ".trace"), result.trace);

  std::cout << "scenario " << cfg.name << " seed=" << cfg.seed
            << " acked=" << result.acked << "/" << result.invoked
            << " throughput=" << result.throughput_ops << " ops/s"
            << " mean=" << result.latency_mean_ms << "ms"
            << " p99=" << result.latency_p99_ms << "ms\n";

  for (const auto& v : result.observer_violations)
    std::cerr << "LEADER SAFETY VIOLATION: " << v << "\n";
  if (result.verdict) {
    std::cout << "checker: " << checker::verdict_name(result.verdict->kind);
    if (!result.verdict->detail.empty())
      std::cout << " (" << result.verdict->detail << ")";
    std::cout << "\n";
    if (!result.verdict->ok()) {
      fs::path hist_path = dir / (cfg.name + ".history");
      write_file(hist_path, result.history.to_text());
      std::cout << "history: " << hist_path.string() << "\n";
    }
  }
  if (summary_row) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.3f,%.3f,%.3f\n", result.throughput_ops,
                  result.latency_mean_ms, result.latency_p99_ms);
    *summary_row = buf;
  }
  return result.exit_code;
}

int cmd_run(const std::string& scenario_path, const std::string& out_dir,
            int64_t seed_override, bool trace_override) {
  std::string error;
  std::string text = read_file(scenario_path, &error);
  if (!error.empty()) {
    std::cerr << "error: " << error << "\n";
    return 64;
  }
  auto cfg = harness::parse_scenario(text, &error);
  if (!cfg) {
    std::cerr << "error: " << scenario_path << ": " << error << "\n";
    return 64;
  }
  if (seed_override >= 0) cfg->seed = static_cast<uint64_t>(seed_override);
  if (trace_override) cfg->trace = true;

  fs::path dir(out_dir);
  fs::create_directories(dir);

  // Sweeps expand into one run per value plus a summary table.
  if (!cfg->sweep_keys.empty() || !cfg->sweep_drop.empty()) {
    bool by_keys = !cfg->sweep_keys.empty();
    std::string summary = by_keys
                              ? "keys,throughput_ops,latency_mean_ms,latency_p99_ms\n"
                              : "drop_rate,throughput_ops,latency_mean_ms,latency_p99_ms\n";
    int exit_code = 0;
    size_t n = by_keys ? cfg->sweep_keys.size() : cfg->sweep_drop.size();
    for (size_t i = 0; i < n; ++i) {
      harness::ScenarioConfig sub = *cfg;
      sub.sweep_keys.clear();
      sub.sweep_drop.clear();
      char tag[48];
      if (by_keys) {
        sub.keys = cfg->sweep_keys[i];
        std::snprintf(tag, sizeof(tag), "%s-keys%u", cfg->name.c_str(),
                      sub.keys);
      } else {
        sub.drop_rate = cfg->sweep_drop[i];
        std::snprintf(tag, sizeof(tag), "%s-drop%.3f", cfg->name.c_str(),
                      sub.drop_rate);
      }
      sub.name = tag;
      std::string row;
      exit_code = std::max(exit_code, run_one(sub, dir, &row));
      if (by_keys)
        summary += std::to_string(sub.keys) + "," + row;
      else
        summary += std::to_string(sub.drop_rate) + "," + row;
    }
    write_file(dir / (cfg->name + "-summary.csv"), summary);
    std::cout << "summary: " << (dir / (cfg->name + "-summary.csv")).string()
              << "\n";
    return exit_code;
  }
  return run_one(*cfg, dir, nullptr);
}

int cmd_check(const std::string& seeds, const std::string& out_dir,
              harness::CheckerRunParams params) {
  uint64_t lo = 1, hi = 100;
  if (!seeds.empty()) {
    auto colon = seeds.find(':');
    if (colon == std::string::npos) {
      lo = hi = std::stoull(seeds);
    } else {
      lo = std::stoull(seeds.substr(0, colon));
      hi = std::stoull(seeds.substr(colon + 1));
    }
  }
  fs::path dir(out_dir);
  fs::create_directories(dir);

  uint64_t pass = 0, violations = 0, budget = 0;
  for (uint64_t seed = lo; seed <= hi; ++seed) {
    auto r = harness::run_checker_once(seed, params);
    const char* name = checker::verdict_name(r.verdict.kind);
    switch (r.verdict.kind) {
      case checker::Verdict::Kind::Linearizable:
        ++pass;
        break;
      case checker::Verdict::Kind::Violation: {
        ++violations;
        fs::path hist = dir / ("violation-seed-" + std::to_string(seed) +
                               ".history");
        write_file(hist, r.history.to_text());
        std::cout << "seed=" << seed << " " << name << " key="
                  << r.verdict.failing_key << " (" << r.verdict.detail
                  << ") history=" << hist.string() << "\n";
        break;
      }
      case checker::Verdict::Kind::SearchBudgetExceeded:
        ++budget;
        std::cout << "seed=" << seed << " " << name << "\n";
        break;
    }
    if (!r.observer_violations.empty()) {
      ++violations;
      for (const auto& v : r.observer_violations)
        std::cerr << "seed=" << seed << " LEADER SAFETY VIOLATION: " << v
                  << "\n";
    }
  }
  std::cout << "checked seeds " << lo << ".." << hi << ": pass=" << pass
            << " violations=" << violations << " budget_exceeded=" << budget
            << "\n";
  if (violations > 0) return 3;
  if (budget > 0) return 4;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bizur-sim: seeded Bizur consensus simulator"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir = "out";
  int64_t seed_override = -1;
  bool trace = false;
  CLI::App* run = app.add_subcommand("run", "execute one scenario");
  run->add_option("scenario", scenario_path, "scenario JSON file")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed_override, "override the scenario seed");
  run->add_flag("--trace", trace, "write the event trace");

  std::string seeds = "1:100";
  std::string check_out = "out";
  harness::CheckerRunParams params;
  std::string mutant = "none";
  CLI::App* check = app.add_subcommand(
      "check", "run the randomized serializability checker over seeds");
  check->add_option("--seeds", seeds, "seed range A:B (default 1:100)");
  check->add_option("--out", check_out, "output directory for violations");
  check->add_option("--clients", params.clients, "concurrent clients");
  check->add_option("--keys", params.keys,
                    "key-set size; 0 derives 1..64 from the seed");
  check->add_option("--drop", params.drop_rate, "packet drop rate");
  check->add_option("--duration-ms", params.duration_ms, "virtual duration");
  check->add_option("--mutant", mutant,
                    "protocol mutant: none | skip_recovery_writeback");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed())
    return cmd_run(scenario_path, out_dir, seed_override, trace);

  if (mutant == "skip_recovery_writeback") {
    // The broken recovery only becomes visible when in-flight writes strand
    // on the crashing leader's side of a partition; use the kill profile
    // built for that.
    params.fault = NodeFault::SkipRecoveryWriteback;
    params.servers = 5;
    params.kill_at = {0.35, 0.55};
    params.half_write_kills = true;
    params.drop_rate = 0.02;
    params.mix = {0.55, 0.35, 0.05, 0.05};
    if (params.keys == 0) params.keys = 2;
  } else if (mutant != "none") {
    std::cerr << "unknown mutant: " << mutant << "\n";
    return 64;
  }
  return cmd_check(seeds, check_out, params);
}
