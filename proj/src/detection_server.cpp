#include "predis/detection_server.hpp"

#include <algorithm>
#include <ostream>

#include <json.hpp>

#include "predis/log.hpp"

namespace predis {

std::vector<DiffVector> unmask_differences(const PreliminaryResult& prelim, const MaskVector& mask) {
  std::vector<DiffVector> diffs(prelim.per_instance_diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    for (std::size_t d = 0; d < kFeatureCount; ++d) {
      diffs[i][d] = remove_mask_from_difference(prelim.per_instance_diffs[i][d], mask.masks[d]);
    }
  }
  return diffs;
}

Detection detect(const PreliminaryResult& prelim, const MaskVector& mask, const KdTreeModel* topology, std::size_t k,
                 std::size_t node_budget) {
  if (prelim.key() != mask.key()) throw DetectionError(DetectionErrc::kKeyMismatch, "mask and prelim keys differ");
  if (topology == nullptr || topology->empty()) {
    throw DetectionError(DetectionErrc::kTopologyMissing, "no tree topology received");
  }
  if (prelim.per_instance_diffs.size() != topology->size()) {
    throw DetectionError(DetectionErrc::kSizeMismatch, "preliminary result does not match the tree size");
  }
  const auto diffs = unmask_differences(prelim, mask);
  Detection out;
  out.key = prelim.key();
  out.neighbors = bbf_search(*topology, diffs, k, node_budget);
  out.verdict = vote(out.neighbors);
  out.attack_votes = static_cast<std::uint32_t>(out.neighbors.count(ClassLabel::kAttack));
  return out;
}

std::optional<Alarm> make_alarm(const Detection& detection) {
  if (detection.verdict != ClassLabel::kAttack) return std::nullopt;
  return Alarm{detection.key.serial, detection.key.time, detection.attack_votes};
}

void write_alarm_json(std::ostream& out, const Alarm& alarm) {
  nlohmann::ordered_json j;
  j["serial"] = alarm.serial_number;
  j["time"] = alarm.time;
  j["margin"] = alarm.neighbor_margin;
  out << j.dump() << '\n';
}

// ---------------------------------------------------------------------------

JoinStore::Outcome JoinStore::finish(const WindowKey& key, Entry& entry, TimePoint now,
                                     std::optional<Joined>& joined) {
  if (!entry.mask || !entry.prelim) return Outcome::kPending;
  joined = Joined{std::move(*entry.mask), std::move(*entry.prelim)};
  entries_.erase(key);
  completed_[key] = now;
  return Outcome::kJoined;
}

JoinStore::Outcome JoinStore::offer_mask(MaskVector mask, TimePoint now, std::optional<Joined>& joined) {
  const auto key = mask.key();
  if (completed_.count(key) > 0) return Outcome::kDuplicate;
  auto [it, inserted] = entries_.try_emplace(key, Entry{std::nullopt, std::nullopt, now});
  if (it->second.mask) return Outcome::kDuplicate;
  it->second.mask = std::move(mask);
  return finish(key, it->second, now, joined);
}

JoinStore::Outcome JoinStore::offer_prelim(PreliminaryResult prelim, TimePoint now, std::optional<Joined>& joined) {
  const auto key = prelim.key();
  if (completed_.count(key) > 0) return Outcome::kDuplicate;
  auto [it, inserted] = entries_.try_emplace(key, Entry{std::nullopt, std::nullopt, now});
  if (it->second.prelim) return Outcome::kDuplicate;
  it->second.prelim = std::move(prelim);
  return finish(key, it->second, now, joined);
}

std::vector<WindowKey> JoinStore::expire(TimePoint now) {
  std::vector<WindowKey> expired;
  for (auto it = entries_.begin(); it != entries_.end();) {
    if (now - it->second.first_seen >= ttl_) {
      expired.push_back(it->first);
      it = entries_.erase(it);
    } else {
      ++it;
    }
  }
  for (auto it = completed_.begin(); it != completed_.end();) {
    it = now - it->second >= ttl_ ? completed_.erase(it) : std::next(it);
  }
  std::sort(expired.begin(), expired.end());
  return expired;
}

// ---------------------------------------------------------------------------

DetectionServer::DetectionServer(DetectionConfig config, ClockFn clock)
    : config_(config), clock_(std::move(clock)), joins_(config.join_ttl) {
  if (config_.k == 0) throw KnnError(KnnErrc::kBadK, "k must be >= 1");
  if (config_.node_budget == 0) throw KnnError(KnnErrc::kBudgetZero, "node budget must be positive");
}

void DetectionServer::set_topology(KdTreeModel topology) {
  std::lock_guard lock(mutex_);
  topology_ = std::make_shared<const KdTreeModel>(std::move(topology));
}

bool DetectionServer::has_topology() const {
  std::lock_guard lock(mutex_);
  return topology_ != nullptr;
}

void DetectionServer::set_alarm_log(std::ostream* out) {
  std::lock_guard lock(mutex_);
  alarm_log_ = out;
}

std::optional<Detection> DetectionServer::run_joined(std::optional<JoinStore::Joined>& joined) {
  if (!joined) return std::nullopt;
  std::shared_ptr<const KdTreeModel> topology;
  {
    std::lock_guard lock(mutex_);
    topology = topology_;
  }
  const auto start = Clock::now();
  Detection d;
  try {
    d = detect(joined->prelim, joined->mask, topology.get(), config_.k, config_.node_budget);
  } catch (const std::exception& e) {
    std::lock_guard lock(mutex_);
    ++errors_;
    log::error("ds", e.what());
    throw;
  }
  const auto elapsed = Clock::now() - start;
  {
    std::lock_guard lock(mutex_);
    detect_time_ += std::chrono::duration_cast<std::chrono::nanoseconds>(elapsed);
    verdicts_.push_back({d.key, d.verdict, d.attack_votes});
    if (alarm_log_ != nullptr) {
      if (auto alarm = make_alarm(d)) write_alarm_json(*alarm_log_, *alarm);
    }
  }
  verdict_cv_.notify_all();
  return d;
}

std::optional<Detection> DetectionServer::handle_mask(const MaskVector& mask) {
  std::optional<JoinStore::Joined> joined;
  {
    std::lock_guard lock(mutex_);
    if (joins_.offer_mask(mask, clock_(), joined) == JoinStore::Outcome::kDuplicate) {
      ++duplicates_;
      log::warn("ds", "duplicate mask for serial " + std::to_string(mask.serial_number) + " time " +
                          std::to_string(mask.time));
    }
  }
  return run_joined(joined);
}

std::optional<Detection> DetectionServer::handle_prelim(const PreliminaryResult& prelim) {
  std::optional<JoinStore::Joined> joined;
  {
    std::lock_guard lock(mutex_);
    if (joins_.offer_prelim(prelim, clock_(), joined) == JoinStore::Outcome::kDuplicate) {
      ++duplicates_;
      log::warn("ds", "duplicate preliminary result for serial " + std::to_string(prelim.serial_number) + " time " +
                          std::to_string(prelim.time));
    }
  }
  return run_joined(joined);
}

std::vector<WindowKey> DetectionServer::expire() {
  std::lock_guard lock(mutex_);
  auto expired = joins_.expire(clock_());
  for (const auto& key : expired) {
    log::warn("ds", "join timeout for serial " + std::to_string(key.serial) + " time " + std::to_string(key.time));
  }
  timeouts_ += expired.size();
  return expired;
}

void DetectionServer::serve(ServerPort& port, std::chrono::milliseconds tick) {
  std::map<std::uint64_t, ConnectionId> routes;
  auto last_sweep = Clock::now();
  while (true) {
    auto env = port.receive(tick);
    if (Clock::now() - last_sweep >= tick) {
      expire();
      last_sweep = Clock::now();
    }
    if (!env) {
      if (port.closed()) return;
      continue;
    }
    try {
      std::optional<Detection> detection;
      if (auto* topo = std::get_if<TopologyMsg>(&env->message)) {
        set_topology(std::move(topo->topology));
      } else if (auto* mask = std::get_if<MaskMsg>(&env->message)) {
        routes[mask->mask.serial_number] = env->from;
        detection = handle_mask(mask->mask);
      } else if (auto* prelim = std::get_if<PrelimMsg>(&env->message)) {
        detection = handle_prelim(prelim->result);
      } else {
        log::warn("ds", "ignoring unexpected message type");
      }
      if (detection) {
        if (auto alarm = make_alarm(*detection)) {
          const auto route = routes.find(alarm->serial_number);
          if (route != routes.end()) port.send(route->second, AlarmMsg{*alarm});
          else log::warn("ds", "no route for alarm serial " + std::to_string(alarm->serial_number));
        }
      }
      if (detection) mark_served();
    } catch (const TransportError& e) {
      log::warn("ds", std::string("alarm delivery failed: ") + e.what());
      mark_served();
    } catch (const std::exception&) {
      // Detection failures are counted in errors(); keep serving.
    }
  }
}

void DetectionServer::mark_served() {
  {
    std::lock_guard lock(mutex_);
    ++served_;
  }
  verdict_cv_.notify_all();
}

bool DetectionServer::wait_for_served(std::size_t n, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  return verdict_cv_.wait_for(lock, timeout, [&] { return served_ >= n; });
}

std::vector<Verdict> DetectionServer::verdicts() const {
  std::lock_guard lock(mutex_);
  return verdicts_;
}

std::size_t DetectionServer::verdict_count() const {
  std::lock_guard lock(mutex_);
  return verdicts_.size();
}

bool DetectionServer::wait_for_verdicts(std::size_t n, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  return verdict_cv_.wait_for(lock, timeout, [&] { return verdicts_.size() >= n; });
}

std::size_t DetectionServer::join_timeouts() const {
  std::lock_guard lock(mutex_);
  return timeouts_;
}

std::size_t DetectionServer::duplicates() const {
  std::lock_guard lock(mutex_);
  return duplicates_;
}

std::size_t DetectionServer::errors() const {
  std::lock_guard lock(mutex_);
  return errors_;
}

std::chrono::nanoseconds DetectionServer::detect_time() const {
  std::lock_guard lock(mutex_);
  return detect_time_;
}

}  // namespace predis
