#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "predis/error.hpp"
#include "predis/features.hpp"
#include "predis/flow_model.hpp"
#include "predis/masking.hpp"
#include "predis/messages.hpp"
#include "predis/transport.hpp"

namespace predis {

struct AgentConfig {
  std::uint32_t domain_id = 1;
  std::int64_t window_length_ms = kDefaultWindowMs;
  std::uint64_t scale = 1000;
  Endpoint cs_endpoint;
  Endpoint ds_endpoint;
  // Set in tests for reproducible masks; system entropy otherwise.
  std::optional<std::uint64_t> rng_seed;
  std::size_t max_in_flight = 16;
  std::chrono::milliseconds ack_timeout{10000};
  // After the last window, keep reading alarms until the DS closes the
  // connection.
  bool wait_for_alarms = true;
};

enum class AgentErrc { kBadConfig, kDomainMismatch, kChannelClosed, kBackpressure, kProtocol };
using AgentError = Error<AgentErrc>;

struct PretreatResult {
  MaskedTuple masked;
  MaskVector mask;
};

struct AgentSummary {
  std::size_t windows_dispatched = 0;
  std::size_t acks = 0;
  std::vector<Alarm> alarms;
  std::chrono::nanoseconds pretreat_time{0};
};

/// One SDN domain: windows its flow table, extracts and masks the feature
/// tuple, and ships the masked tuple to the computing server and the mask to
/// the detection server.
class DomainAgent {
 public:
  explicit DomainAgent(AgentConfig config);

  const AgentConfig& config() const noexcept { return config_; }

  PretreatResult pretreat(const FlowWindow& window);

  struct Observer {
    std::function<void(const WindowKey&)> on_dispatched;
    std::function<void(const Alarm&)> on_alarm;
  };

  /// Dispatches one TupleMsg to cs and one MaskMsg to ds per window, keeping
  /// at most max_in_flight tuples unacknowledged. Alarms arriving on ds are
  /// reported to the observer and collected in the summary.
  ///
  /// Throws AgentError(kChannelClosed) if a channel closes before every
  /// window was acknowledged; alarms and dispatches seen up to that point have
  /// already been reported. Throws kBackpressure when the in-flight limit is
  /// reached and no Ack arrives within ack_timeout.
  AgentSummary run(std::span<const FlowWindow> windows, Channel& cs, Channel& ds, const Observer& observer = {});

  AgentSummary run_flows(const std::vector<FlowRecord>& flows, Channel& cs, Channel& ds,
                         const Observer& observer = {});

 private:
  AgentConfig config_;
  FixedPointCodec codec_;
  MaskGenerator rng_;
};

}  // namespace predis
