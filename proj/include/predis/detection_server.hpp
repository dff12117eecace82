#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <unordered_map>
#include <vector>

#include "predis/error.hpp"
#include "predis/knn.hpp"
#include "predis/messages.hpp"
#include "predis/transport.hpp"

namespace predis {

enum class DetectionErrc { kKeyMismatch, kTopologyMissing, kSizeMismatch };
using DetectionError = Error<DetectionErrc>;

struct DetectionConfig {
  std::size_t k = kDefaultK;
  std::size_t node_budget = kDefaultNodeBudget;
  std::chrono::milliseconds join_ttl{30000};
};

struct Detection {
  WindowKey key;
  ClassLabel verdict = ClassLabel::kNormal;
  std::uint32_t attack_votes = 0;
  NeighborSet neighbors{1};
};

/// Unmasks every per-node difference, runs BBF and votes. Throws
/// kKeyMismatch when the halves belong to different windows and
/// kTopologyMissing when no tree is known.
Detection detect(const PreliminaryResult& prelim, const MaskVector& mask, const KdTreeModel* topology, std::size_t k,
                 std::size_t node_budget);

/// Unmasking step on its own: diffs[node][dim] = remove_mask_from_difference.
std::vector<DiffVector> unmask_differences(const PreliminaryResult& prelim, const MaskVector& mask);

std::optional<Alarm> make_alarm(const Detection& detection);

/// Pairs masks with preliminary results by window key. An entry leaves the
/// store when both halves are present; singletons older than the TTL are
/// expired. Keys already joined are remembered for one TTL so repeats are
/// rejected.
class JoinStore {
 public:
  using TimePoint = Clock::time_point;

  enum class Outcome { kPending, kJoined, kDuplicate };

  struct Joined {
    MaskVector mask;
    PreliminaryResult prelim;
  };

  explicit JoinStore(std::chrono::milliseconds ttl) : ttl_(ttl) {}

  Outcome offer_mask(MaskVector mask, TimePoint now, std::optional<Joined>& joined);
  Outcome offer_prelim(PreliminaryResult prelim, TimePoint now, std::optional<Joined>& joined);

  /// Drops singletons older than the TTL and returns their keys.
  std::vector<WindowKey> expire(TimePoint now);

  std::size_t pending() const noexcept { return entries_.size(); }

 private:
  struct Entry {
    std::optional<MaskVector> mask;
    std::optional<PreliminaryResult> prelim;
    TimePoint first_seen;
  };

  Outcome finish(const WindowKey& key, Entry& entry, TimePoint now, std::optional<Joined>& joined);

  std::chrono::milliseconds ttl_;
  std::unordered_map<WindowKey, Entry, WindowKeyHash> entries_;
  std::unordered_map<WindowKey, TimePoint, WindowKeyHash> completed_;
};

struct Verdict {
  WindowKey key;
  ClassLabel label = ClassLabel::kNormal;
  std::uint32_t attack_votes = 0;

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// Writes {"serial":n,"time":s,"margin":m} as one JSON line.
void write_alarm_json(std::ostream& out, const Alarm& alarm);

class DetectionServer {
 public:
  using ClockFn = std::function<Clock::time_point()>;

  explicit DetectionServer(DetectionConfig config, ClockFn clock = [] { return Clock::now(); });

  const DetectionConfig& config() const noexcept { return config_; }

  void set_topology(KdTreeModel topology);
  bool has_topology() const;

  /// Feed one half; returns the detection if it completed a join. Duplicate
  /// halves are ignored and counted.
  std::optional<Detection> handle_mask(const MaskVector& mask);
  std::optional<Detection> handle_prelim(const PreliminaryResult& prelim);

  /// Expires stale singletons (logged as join timeouts).
  std::vector<WindowKey> expire();

  /// Consumes masks from agents, topology and prelims from the computing
  /// server, and routes alarms back to the agent that sent the window's mask.
  /// Returns when the port is closed.
  void serve(ServerPort& port, std::chrono::milliseconds tick = std::chrono::milliseconds(100));

  /// Alarms are also appended here as JSON lines when set.
  void set_alarm_log(std::ostream* out);

  std::vector<Verdict> verdicts() const;
  std::size_t verdict_count() const;
  /// Blocks until at least n verdicts exist or the timeout passes.
  bool wait_for_verdicts(std::size_t n, std::chrono::milliseconds timeout) const;
  /// Like wait_for_verdicts, but counts detections serve() has finished
  /// with, alarm delivery included.
  bool wait_for_served(std::size_t n, std::chrono::milliseconds timeout) const;

  std::size_t join_timeouts() const;
  std::size_t duplicates() const;
  std::size_t errors() const;
  std::chrono::nanoseconds detect_time() const;

 private:
  std::optional<Detection> run_joined(std::optional<JoinStore::Joined>& joined);
  void mark_served();

  DetectionConfig config_;
  ClockFn clock_;

  mutable std::mutex mutex_;
  mutable std::condition_variable verdict_cv_;
  std::shared_ptr<const KdTreeModel> topology_;
  JoinStore joins_;
  std::vector<Verdict> verdicts_;
  std::ostream* alarm_log_ = nullptr;
  std::size_t timeouts_ = 0;
  std::size_t duplicates_ = 0;
  std::size_t errors_ = 0;
  std::size_t served_ = 0;
  std::chrono::nanoseconds detect_time_{0};
};

}  // namespace predis
