#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "predis/error.hpp"
#include "predis/features.hpp"

namespace predis {

enum class ClassLabel : std::uint8_t { kNormal = 0, kAttack = 1 };

std::string_view to_string(ClassLabel label);

inline constexpr std::size_t kDefaultK = 23;
inline constexpr std::size_t kDefaultNodeBudget = 512;
inline constexpr std::size_t kUnboundedBudget = std::numeric_limits<std::size_t>::max();
inline constexpr std::uint32_t kNoChild = 0xFFFFFFFFu;

struct TrainingInstance {
  std::uint32_t instance_id = 0;
  FixedFeatures features{};
  ClassLabel label = ClassLabel::kNormal;

  friend bool operator==(const TrainingInstance&, const TrainingInstance&) = default;
};

/// Per-dimension signed difference train - test, in fixed-point units.
using DiffVector = std::array<std::int64_t, kFeatureCount>;

/// Exact squared Euclidean distance. Five squared 33-bit differences need
/// more than 64 bits.
using Distance2 = unsigned __int128;

Distance2 distance2(const DiffVector& diff);

struct KdNode {
  std::uint32_t instance_id = 0;
  std::uint8_t split_dim = 0;
  std::uint32_t left = kNoChild;
  std::uint32_t right = kNoChild;
  ClassLabel label = ClassLabel::kNormal;

  friend bool operator==(const KdNode&, const KdNode&) = default;
};

enum class KnnErrc {
  kEmptyTrainingSet,
  kDuplicateInstance,
  kBudgetZero,
  kEmptyNeighborSet,
  kBadTopology,
  kDiffCountMismatch,
  kBadK,
};
using KnnError = Error<KnnErrc>;

/// KD-tree topology and labels. Nodes are stored in pre-order, so node 0 is
/// the root and "tree order" means node-index order. Feature values are not
/// part of the model; the party that built it keeps them separately.
class KdTreeModel {
 public:
  KdTreeModel() = default;
  explicit KdTreeModel(std::vector<KdNode> nodes);  // validates

  std::span<const KdNode> nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }
  std::uint32_t root() const noexcept { return nodes_.empty() ? kNoChild : 0; }
  std::size_t height() const;

  /// node count u32, then per node {instance_id u32, split_dim u8, left u32,
  /// right u32, label u8}; little-endian, absent children = 0xFFFFFFFF.
  std::vector<std::uint8_t> serialize() const;
  static KdTreeModel deserialize(std::span<const std::uint8_t> bytes);

  friend bool operator==(const KdTreeModel&, const KdTreeModel&) = default;

 private:
  std::vector<KdNode> nodes_;
};

/// A built tree plus the training features rearranged into node order.
struct KdTree {
  KdTreeModel model;
  std::vector<FixedFeatures> features_by_node;
};

/// Recursive median split on the dimension of widest spread. Among instances
/// sharing the median value the lowest instance_id becomes the node; all
/// other instances with value <= median go left, the rest go right.
KdTree build_kdtree(std::span<const TrainingInstance> train);

struct Neighbor {
  Distance2 distance2 = 0;
  std::uint32_t instance_id = 0;
  ClassLabel label = ClassLabel::kNormal;

  double distance() const;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// At most k neighbors, ascending by (distance, instance_id).
class NeighborSet {
 public:
  explicit NeighborSet(std::size_t k);

  // Returns true when the candidate was kept.
  bool offer(const Neighbor& candidate);

  bool full() const noexcept { return entries_.size() == k_; }
  const Neighbor& worst() const { return entries_.back(); }
  std::size_t k() const noexcept { return k_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::span<const Neighbor> entries() const noexcept { return entries_; }
  std::size_t count(ClassLabel label) const;

  friend bool operator==(const NeighborSet&, const NeighborSet&) = default;

 private:
  std::size_t k_;
  std::vector<Neighbor> entries_;
};

struct SearchStats {
  std::size_t nodes_examined = 0;
  std::size_t descents = 0;
  bool budget_exhausted = false;
};

/// Best-Bin-First k-nearest-neighbor search over a tree whose per-node
/// train - test differences are given in node order. The first descent from
/// the root always runs to a leaf; after that at most node_budget nodes in
/// total are examined. With kUnboundedBudget the result is exact.
NeighborSet bbf_search(const KdTreeModel& tree, std::span<const DiffVector> diffs_by_node, std::size_t k,
                       std::size_t node_budget = kDefaultNodeBudget, SearchStats* stats = nullptr);

struct LabeledDiff {
  std::uint32_t instance_id = 0;
  ClassLabel label = ClassLabel::kNormal;
  DiffVector diff{};
};

/// Exhaustive k-nearest search; k larger than the input returns everything.
NeighborSet linear_scan(std::span<const LabeledDiff> diffs, std::size_t k);

std::vector<LabeledDiff> label_diffs(const KdTreeModel& tree, std::span<const DiffVector> diffs_by_node);

/// train - test per node, computed in the clear.
std::vector<DiffVector> plaintext_diffs(const KdTree& tree, const FixedFeatures& test);

/// Strict majority; an exact tie is ATTACK.
ClassLabel vote(const NeighborSet& neighbors);

}  // namespace predis
