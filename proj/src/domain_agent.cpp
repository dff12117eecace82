#include "predis/domain_agent.hpp"

namespace predis {

namespace {

MaskGenerator make_generator(const AgentConfig& cfg) {
  return cfg.rng_seed ? MaskGenerator(*cfg.rng_seed) : MaskGenerator();
}

const AgentConfig& checked(const AgentConfig& cfg) {
  if (cfg.window_length_ms <= 0) throw AgentError(AgentErrc::kBadConfig, "window_length_ms must be positive");
  if (cfg.scale == 0) throw AgentError(AgentErrc::kBadConfig, "scale must be positive");
  if (cfg.max_in_flight == 0) throw AgentError(AgentErrc::kBadConfig, "max_in_flight must be positive");
  return cfg;
}

}  // namespace

DomainAgent::DomainAgent(AgentConfig config)
    : config_(checked(config)), codec_(config_.scale), rng_(make_generator(config_)) {}

PretreatResult DomainAgent::pretreat(const FlowWindow& window) {
  if (window.domain_id != config_.domain_id) {
    throw AgentError(AgentErrc::kDomainMismatch, "window belongs to domain " + std::to_string(window.domain_id));
  }
  const FeatureTuple tuple = extract_features(window, codec_);
  MaskVector mask = gen_masks(rng_, tuple.serial_number, tuple.time);
  return {apply_mask(tuple, mask), mask};
}

AgentSummary DomainAgent::run(std::span<const FlowWindow> windows, Channel& cs, Channel& ds,
                              const Observer& observer) {
  AgentSummary summary;
  std::size_t in_flight = 0;

  auto surface = [&](const Message& msg) {
    if (const auto* alarm = std::get_if<AlarmMsg>(&msg)) {
      summary.alarms.push_back(alarm->alarm);
      if (observer.on_alarm) observer.on_alarm(alarm->alarm);
    }
  };
  auto poll_alarms = [&] {
    while (auto msg = ds.receive(std::chrono::milliseconds(0))) surface(*msg);
  };
  auto closed_error = [&](const char* which) {
    while (auto msg = cs.receive(std::chrono::milliseconds(0))) {
      if (std::holds_alternative<AckMsg>(*msg)) ++summary.acks;
    }
    poll_alarms();
    return AgentError(AgentErrc::kChannelClosed,
                      std::string(which) + " channel closed after " + std::to_string(summary.acks) + " of " +
                          std::to_string(windows.size()) + " windows were acknowledged");
  };
  auto await_ack = [&] {
    auto msg = cs.receive(config_.ack_timeout);
    if (!msg) {
      if (cs.closed()) throw closed_error("computing-server");
      throw AgentError(AgentErrc::kBackpressure, "no Ack from the computing server within the timeout");
    }
    if (!std::holds_alternative<AckMsg>(*msg)) {
      throw AgentError(AgentErrc::kProtocol, "unexpected message from the computing server");
    }
    --in_flight;
    ++summary.acks;
  };

  for (const auto& window : windows) {
    const auto start = Clock::now();
    auto [masked, mask] = pretreat(window);
    summary.pretreat_time += Clock::now() - start;

    while (in_flight >= config_.max_in_flight) await_ack();

    try {
      ds.send(MaskMsg{mask});
    } catch (const TransportError&) {
      throw closed_error("detection-server");
    }
    try {
      cs.send(TupleMsg{masked});
    } catch (const TransportError&) {
      throw closed_error("computing-server");
    }
    ++in_flight;
    ++summary.windows_dispatched;
    if (observer.on_dispatched) observer.on_dispatched(masked.key());
    poll_alarms();
  }
  while (in_flight > 0) await_ack();

  if (config_.wait_for_alarms) {
    while (auto msg = ds.receive()) surface(*msg);
  } else {
    poll_alarms();
  }
  return summary;
}

AgentSummary DomainAgent::run_flows(const std::vector<FlowRecord>& flows, Channel& cs, Channel& ds,
                                    const Observer& observer) {
  const auto windows = window_flows(flows, config_.domain_id, config_.window_length_ms);
  return run(windows, cs, ds, observer);
}

}  // namespace predis
