#pragma once

#include <array>
#include <cstdint>
#include <variant>
#include <vector>

#include "predis/knn.hpp"
#include "predis/masking.hpp"

namespace predis {

/// Perturbed differences for one masked test tuple: for every training node,
/// in tree order, (train - masked_test) mod 2^33 per feature.
struct PreliminaryResult {
  std::uint64_t serial_number = 0;
  std::uint64_t time = 0;
  std::vector<std::array<std::uint64_t, kFeatureCount>> per_instance_diffs;

  WindowKey key() const { return {serial_number, time}; }
  friend bool operator==(const PreliminaryResult&, const PreliminaryResult&) = default;
};

/// Notification that window (serial_number, time) was classified ATTACK.
/// neighbor_margin is the number of ATTACK votes among the k neighbors.
struct Alarm {
  std::uint64_t serial_number = 0;
  std::uint64_t time = 0;
  std::uint32_t neighbor_margin = 0;

  WindowKey key() const { return {serial_number, time}; }
  friend bool operator==(const Alarm&, const Alarm&) = default;
};

enum class MsgType : std::uint8_t {
  kTuple = 0x01,
  kMask = 0x02,
  kTopology = 0x03,
  kPrelim = 0x04,
  kAlarm = 0x05,
  kAck = 0x06,
};

struct TupleMsg {
  MaskedTuple tuple;
  friend bool operator==(const TupleMsg&, const TupleMsg&) = default;
};
struct MaskMsg {
  MaskVector mask;
  friend bool operator==(const MaskMsg&, const MaskMsg&) = default;
};
struct TopologyMsg {
  KdTreeModel topology;
  friend bool operator==(const TopologyMsg&, const TopologyMsg&) = default;
};
struct PrelimMsg {
  PreliminaryResult result;
  friend bool operator==(const PrelimMsg&, const PrelimMsg&) = default;
};
struct AlarmMsg {
  Alarm alarm;
  friend bool operator==(const AlarmMsg&, const AlarmMsg&) = default;
};
struct AckMsg {
  friend bool operator==(const AckMsg&, const AckMsg&) = default;
};

using Message = std::variant<TupleMsg, MaskMsg, TopologyMsg, PrelimMsg, AlarmMsg, AckMsg>;

MsgType message_type(const Message& msg);

}  // namespace predis
