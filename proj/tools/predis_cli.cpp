// Command-line front end: experiments, synthetic data, and the three
// pipeline roles as separate processes.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "predis/computing_server.hpp"
#include "predis/detection_server.hpp"
#include "predis/domain_agent.hpp"
#include "predis/harness.hpp"
#include "predis/log.hpp"

using namespace predis;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void wait_for_signal(ServerPort& port) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop && !port.closed()) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  port.close();
}

ChannelOptions channel_options(bool insecure) {
  return insecure ? ChannelOptions{Security::kPlain, true} : ChannelOptions{};
}

std::size_t parse_budget(const std::string& text) {
  if (text == "unbounded") return kUnboundedBudget;
  return std::stoull(text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving DDoS detection pipeline"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log informational messages");

  // run
  auto* run = app.add_subcommand("run", "Cross-validated detection experiment");
  std::string config_path;
  std::string jsonl_path;
  run->add_option("--config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
  run->add_option("--jsonl", jsonl_path, "Also write per-fold results as JSON lines");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic SYN-flood flow CSV");
  ScenarioParams sp;
  std::string synth_out;
  synth->add_option("--seed", sp.seed);
  synth->add_option("--windows", sp.windows)->check(CLI::PositiveNumber);
  synth->add_option("--attack-fraction", sp.attack_fraction)->check(CLI::Range(0.0, 1.0));
  synth->add_option("--window-ms", sp.window_ms)->check(CLI::Range(1000, 3600000));
  synth->add_option("--start-ms", sp.start_ms);
  synth->add_option("--out", synth_out, "Output CSV path")->required();

  // training
  auto* training = app.add_subcommand("training", "Build a training CSV from a flow CSV");
  std::string flows_in;
  std::string training_out;
  std::int64_t training_window_ms = kDefaultWindowMs;
  std::uint64_t training_scale = 1000;
  training->add_option("--flows", flows_in)->required()->check(CLI::ExistingFile);
  training->add_option("--out", training_out)->required();
  training->add_option("--window-ms", training_window_ms)->check(CLI::Range(1000, 3600000));
  training->add_option("--scale", training_scale)->check(CLI::PositiveNumber);

  // scale
  auto* scale = app.add_subcommand("scale", "Wall time against the number of domains");
  std::size_t max_domains = 6;
  std::size_t windows_per_domain = 200;
  std::size_t repetitions = 3;
  std::string scale_config;
  std::string scale_jsonl;
  scale->add_option("--max-domains", max_domains)->check(CLI::Range(2, 64));
  scale->add_option("--windows", windows_per_domain)->check(CLI::PositiveNumber);
  scale->add_option("--repetitions", repetitions)->check(CLI::PositiveNumber);
  scale->add_option("--config", scale_config)->check(CLI::ExistingFile);
  scale->add_option("--jsonl", scale_jsonl);

  // serve-cs
  auto* serve_cs = app.add_subcommand("serve-cs", "Run the computing server");
  std::string cs_listen = "127.0.0.1:7001";
  std::string cs_ds = "127.0.0.1:7002";
  std::string cs_train;
  std::uint64_t cs_scale = 1000;
  bool cs_insecure = false;
  serve_cs->add_option("--listen", cs_listen);
  serve_cs->add_option("--ds", cs_ds, "Detection server address");
  serve_cs->add_option("--train", cs_train, "Training CSV")->required()->check(CLI::ExistingFile);
  serve_cs->add_option("--scale", cs_scale)->check(CLI::PositiveNumber);
  serve_cs->add_flag("--insecure", cs_insecure, "Allow unencrypted connections");

  // serve-ds
  auto* serve_ds = app.add_subcommand("serve-ds", "Run the detection server");
  std::string ds_listen = "127.0.0.1:7002";
  std::size_t ds_k = kDefaultK;
  std::string ds_budget = std::to_string(kDefaultNodeBudget);
  std::string ds_alarm_log;
  bool ds_insecure = false;
  serve_ds->add_option("--listen", ds_listen);
  serve_ds->add_option("-k", ds_k)->check(CLI::PositiveNumber);
  serve_ds->add_option("--budget", ds_budget, "Node budget or 'unbounded'");
  serve_ds->add_option("--alarm-log", ds_alarm_log, "Append alarms as JSON lines");
  serve_ds->add_flag("--insecure", ds_insecure, "Allow unencrypted connections");

  // agent
  auto* agent = app.add_subcommand("agent", "Stream one domain's flows through the pipeline");
  AgentConfig agent_cfg;
  std::string agent_flows;
  std::string agent_cs = "127.0.0.1:7001";
  std::string agent_ds = "127.0.0.1:7002";
  bool agent_insecure = false;
  agent->add_option("--domain", agent_cfg.domain_id)->check(CLI::PositiveNumber);
  agent->add_option("--flows", agent_flows)->required()->check(CLI::ExistingFile);
  agent->add_option("--cs", agent_cs);
  agent->add_option("--ds", agent_ds);
  agent->add_option("--window-ms", agent_cfg.window_length_ms)->check(CLI::Range(1000, 3600000));
  agent->add_option("--scale", agent_cfg.scale)->check(CLI::PositiveNumber);
  agent->add_flag("--insecure", agent_insecure, "Allow unencrypted connections");

  CLI11_PARSE(app, argc, argv);
  log::set_level(verbose ? log::Level::kInfo : log::Level::kWarn);

  try {
    if (*run) {
      const auto cfg = load_experiment_config(config_path);
      const auto report = run_experiment(cfg);
      print_report(std::cout, report);
      if (!jsonl_path.empty()) {
        std::ofstream out(jsonl_path);
        write_report_jsonl(out, report);
      }
    } else if (*synth) {
      write_flows_csv(synth_out, synth_scenario(sp));
    } else if (*training) {
      const FixedPointCodec codec(training_scale);
      const auto windows = window_flows(load_flows_csv(flows_in), 1, training_window_ms);
      std::ofstream out(training_out);
      write_training_csv(out, training_from_windows(windows, codec), codec);
    } else if (*scale) {
      const auto cfg = scale_config.empty() ? ExperimentConfig{} : load_experiment_config(scale_config);
      const auto report = run_scaling(cfg, max_domains, windows_per_domain, repetitions);
      print_scaling(std::cout, report);
      if (!scale_jsonl.empty()) {
        std::ofstream out(scale_jsonl);
        write_scaling_jsonl(out, report);
      }
    } else if (*serve_cs) {
      const auto options = channel_options(cs_insecure);
      ComputingServer cs;
      cs.load_training(load_training_csv(cs_train, FixedPointCodec(cs_scale)));
      auto ds = open_channel(Endpoint::parse(cs_ds), options);
      TcpServerPort port(Endpoint::parse(cs_listen), options);
      std::cerr << "computing server listening on port " << port.port() << '\n';
      std::thread worker([&] { cs.serve(port, *ds); });
      wait_for_signal(port);
      worker.join();
      std::cerr << cs.tuples_processed() << " tuples processed\n";
    } else if (*serve_ds) {
      DetectionConfig cfg;
      cfg.k = ds_k;
      cfg.node_budget = parse_budget(ds_budget);
      DetectionServer ds(cfg);
      std::ofstream alarm_log;
      if (!ds_alarm_log.empty()) {
        alarm_log.open(ds_alarm_log, std::ios::app);
        ds.set_alarm_log(&alarm_log);
      }
      TcpServerPort port(Endpoint::parse(ds_listen), channel_options(ds_insecure));
      std::cerr << "detection server listening on port " << port.port() << '\n';
      std::thread worker([&] { ds.serve(port); });
      wait_for_signal(port);
      worker.join();
      std::cerr << ds.verdict_count() << " windows classified, " << ds.join_timeouts() << " join timeouts\n";
    } else if (*agent) {
      const auto options = channel_options(agent_insecure);
      agent_cfg.wait_for_alarms = false;
      auto cs = open_channel(Endpoint::parse(agent_cs), options);
      auto ds = open_channel(Endpoint::parse(agent_ds), options);
      DomainAgent a(agent_cfg);
      DomainAgent::Observer observer;
      observer.on_alarm = [](const Alarm& alarm) { write_alarm_json(std::cout, alarm); };
      const auto summary = a.run_flows(load_flows_csv(agent_flows), *cs, *ds, observer);
      // Alarms for the last windows can trail the final Ack.
      while (auto msg = ds->receive(std::chrono::milliseconds(1000))) {
        if (const auto* alarm = std::get_if<AlarmMsg>(&*msg)) write_alarm_json(std::cout, alarm->alarm);
      }
      std::cerr << summary.windows_dispatched << " windows dispatched, " << summary.acks << " acknowledged\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
