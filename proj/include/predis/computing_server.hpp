#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <shared_mutex>
#include <vector>

#include "predis/error.hpp"
#include "predis/knn.hpp"
#include "predis/messages.hpp"
#include "predis/transport.hpp"

namespace predis {

enum class ServerErrc { kNotLoaded, kBadTrainingFile };
using ServerError = Error<ServerErrc>;

/// Training CSV: instance_id,mpf,mbf,pcf,gop,gsi,label with features in
/// natural units; label is NORMAL or ATTACK.
std::vector<TrainingInstance> load_training_csv(std::istream& in, const FixedPointCodec& codec);
std::vector<TrainingInstance> load_training_csv(const std::filesystem::path& path, const FixedPointCodec& codec);
void write_training_csv(std::ostream& out, const std::vector<TrainingInstance>& train, const FixedPointCodec& codec);

/// Holds the labeled training set and answers masked tuples with perturbed
/// per-node differences. Never sees masks or plaintext test features.
class ComputingServer {
 public:
  ComputingServer() = default;

  /// Replaces the training set and rebuilds the tree. Waits for in-flight
  /// computations to finish.
  void load_training(std::span<const TrainingInstance> train);

  bool loaded() const;
  KdTreeModel topology() const;
  std::uint64_t generation() const;

  PreliminaryResult preliminary_compute(const MaskedTuple& masked) const;

  /// Serves agents until the port is closed: each TupleMsg yields a PrelimMsg
  /// on ds and an Ack to the sender. The current topology is sent to ds
  /// first and again after every reload.
  void serve(ServerPort& agents, Channel& ds);

  std::chrono::nanoseconds compute_time() const { return std::chrono::nanoseconds(compute_ns_.load()); }
  std::size_t tuples_processed() const { return processed_.load(); }

 private:
  mutable std::shared_mutex mutex_;
  std::shared_ptr<const KdTree> tree_;
  std::uint64_t generation_ = 0;
  mutable std::atomic<std::int64_t> compute_ns_{0};
  std::atomic<std::size_t> processed_{0};
};

}  // namespace predis
