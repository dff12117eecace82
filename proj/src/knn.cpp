#include "predis/knn.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_set>

namespace predis {

std::string_view to_string(ClassLabel label) { return label == ClassLabel::kAttack ? "ATTACK" : "NORMAL"; }

Distance2 distance2(const DiffVector& diff) {
  Distance2 sum = 0;
  for (auto d : diff) {
    const auto mag = static_cast<std::uint64_t>(d < 0 ? -d : d);
    sum += static_cast<Distance2>(mag) * mag;
  }
  return sum;
}

double Neighbor::distance() const { return std::sqrt(static_cast<long double>(distance2)); }

// ---------------------------------------------------------------------------
// Topology

KdTreeModel::KdTreeModel(std::vector<KdNode> nodes) : nodes_(std::move(nodes)) {
  const std::size_t n = nodes_.size();
  std::vector<std::uint8_t> referenced(n, 0);
  std::unordered_set<std::uint32_t> ids;
  for (const auto& node : nodes_) {
    if (node.split_dim >= kFeatureCount) throw KnnError(KnnErrc::kBadTopology, "split dimension out of range");
    if (node.label != ClassLabel::kNormal && node.label != ClassLabel::kAttack) {
      throw KnnError(KnnErrc::kBadTopology, "invalid node label");
    }
    if (!ids.insert(node.instance_id).second) throw KnnError(KnnErrc::kBadTopology, "duplicate instance id");
    for (auto child : {node.left, node.right}) {
      if (child == kNoChild) continue;
      if (child >= n || child == 0 || referenced[child]++) {
        throw KnnError(KnnErrc::kBadTopology, "child index invalid or shared");
      }
    }
  }
  if (n > 0 && height() == 0) throw KnnError(KnnErrc::kBadTopology, "unreachable nodes");
}

std::size_t KdTreeModel::height() const {
  if (nodes_.empty()) return 0;
  std::size_t best = 0;
  std::size_t visited = 0;
  std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 1}};
  while (!stack.empty()) {
    const auto [idx, depth] = stack.back();
    stack.pop_back();
    if (++visited > nodes_.size()) return 0;
    best = std::max(best, depth);
    for (auto child : {nodes_[idx].left, nodes_[idx].right}) {
      if (child != kNoChild) stack.emplace_back(child, depth + 1);
    }
  }
  // Not every node reachable from the root.
  return visited == nodes_.size() ? best : 0;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | in[at + static_cast<std::size_t>(i)];
  return v;
}

constexpr std::size_t kNodeBytes = 4 + 1 + 4 + 4 + 1;

}  // namespace

std::vector<std::uint8_t> KdTreeModel::serialize() const {
  std::vector<std::uint8_t> out;
  out.reserve(4 + nodes_.size() * kNodeBytes);
  put_u32(out, static_cast<std::uint32_t>(nodes_.size()));
  for (const auto& node : nodes_) {
    put_u32(out, node.instance_id);
    out.push_back(node.split_dim);
    put_u32(out, node.left);
    put_u32(out, node.right);
    out.push_back(static_cast<std::uint8_t>(node.label));
  }
  return out;
}

KdTreeModel KdTreeModel::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw KnnError(KnnErrc::kBadTopology, "topology truncated");
  const std::size_t n = get_u32(bytes, 0);
  if (bytes.size() != 4 + n * kNodeBytes) throw KnnError(KnnErrc::kBadTopology, "topology length mismatch");
  std::vector<KdNode> nodes(n);
  std::size_t at = 4;
  for (auto& node : nodes) {
    node.instance_id = get_u32(bytes, at);
    node.split_dim = bytes[at + 4];
    node.left = get_u32(bytes, at + 5);
    node.right = get_u32(bytes, at + 9);
    const auto label = bytes[at + 13];
    if (label > 1) throw KnnError(KnnErrc::kBadTopology, "invalid node label");
    node.label = static_cast<ClassLabel>(label);
    at += kNodeBytes;
  }
  return KdTreeModel(std::move(nodes));
}

// ---------------------------------------------------------------------------
// Construction

namespace {

class TreeBuilder {
 public:
  explicit TreeBuilder(std::span<const TrainingInstance> train) : train_(train) {
    nodes_.reserve(train.size());
    features_.reserve(train.size());
  }

  std::uint32_t build(std::span<std::size_t> idx, std::uint8_t parent_dim) {
    const auto slot = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    features_.emplace_back();

    const std::uint8_t dim = widest_dimension(idx, parent_dim);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      const auto va = train_[a].features[dim];
      const auto vb = train_[b].features[dim];
      return va != vb ? va < vb : train_[a].instance_id < train_[b].instance_id;
    });

    const std::size_t mid = (idx.size() - 1) / 2;
    const auto median_value = train_[idx[mid]].features[dim];
    std::size_t pivot = mid;
    while (pivot > 0 && train_[idx[pivot - 1]].features[dim] == median_value) --pivot;
    std::size_t right_begin = mid + 1;
    while (right_begin < idx.size() && train_[idx[right_begin]].features[dim] == median_value) ++right_begin;

    const auto& chosen = train_[idx[pivot]];
    nodes_[slot].instance_id = chosen.instance_id;
    nodes_[slot].split_dim = dim;
    nodes_[slot].label = chosen.label;
    features_[slot] = chosen.features;

    // Left: everything <= median except the pivot. Rotate the pivot out of
    // the way so the left range is contiguous.
    std::rotate(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(pivot),
                idx.begin() + static_cast<std::ptrdiff_t>(pivot) + 1);
    const auto left = idx.subspan(1, right_begin - 1);
    const auto right = idx.subspan(right_begin);
    const auto left_child = left.empty() ? kNoChild : build(left, dim);
    const auto right_child = right.empty() ? kNoChild : build(right, dim);
    nodes_[slot].left = left_child;
    nodes_[slot].right = right_child;
    return slot;
  }

  KdTree finish() && { return KdTree{KdTreeModel(std::move(nodes_)), std::move(features_)}; }

 private:
  std::uint8_t widest_dimension(std::span<const std::size_t> idx, std::uint8_t fallback) const {
    std::uint64_t best_spread = 0;
    std::uint8_t best = fallback;
    for (std::uint8_t d = 0; d < kFeatureCount; ++d) {
      auto lo = train_[idx[0]].features[d];
      auto hi = lo;
      for (auto i : idx) {
        lo = std::min(lo, train_[i].features[d]);
        hi = std::max(hi, train_[i].features[d]);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        best = d;
      }
    }
    return best;
  }

  std::span<const TrainingInstance> train_;
  std::vector<KdNode> nodes_;
  std::vector<FixedFeatures> features_;
};

}  // namespace

KdTree build_kdtree(std::span<const TrainingInstance> train) {
  if (train.empty()) throw KnnError(KnnErrc::kEmptyTrainingSet, "training set is empty");
  std::unordered_set<std::uint32_t> ids;
  for (const auto& t : train) {
    if (!ids.insert(t.instance_id).second) {
      throw KnnError(KnnErrc::kDuplicateInstance, "duplicate instance id " + std::to_string(t.instance_id));
    }
  }
  std::vector<std::size_t> idx(train.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  TreeBuilder builder(train);
  builder.build(idx, 0);
  return std::move(builder).finish();
}

// ---------------------------------------------------------------------------
// Search

namespace {

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.distance2 != b.distance2 ? a.distance2 < b.distance2 : a.instance_id < b.instance_id;
}

}  // namespace

NeighborSet::NeighborSet(std::size_t k) : k_(k) {
  if (k == 0) throw KnnError(KnnErrc::kBadK, "k must be >= 1");
  entries_.reserve(k);
}

bool NeighborSet::offer(const Neighbor& candidate) {
  if (full() && !closer(candidate, entries_.back())) return false;
  const auto pos = std::upper_bound(entries_.begin(), entries_.end(), candidate, closer);
  entries_.insert(pos, candidate);
  if (entries_.size() > k_) entries_.pop_back();
  return true;
}

std::size_t NeighborSet::count(ClassLabel label) const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [&](const Neighbor& n) { return n.label == label; }));
}

NeighborSet bbf_search(const KdTreeModel& tree, std::span<const DiffVector> diffs_by_node, std::size_t k,
                       std::size_t node_budget, SearchStats* stats) {
  if (node_budget == 0) throw KnnError(KnnErrc::kBudgetZero, "node budget must be positive");
  if (diffs_by_node.size() != tree.size()) {
    throw KnnError(KnnErrc::kDiffCountMismatch, "need one difference vector per tree node");
  }
  NeighborSet result(k);
  SearchStats local;
  if (tree.empty()) {
    if (stats) *stats = local;
    return result;
  }

  struct Bin {
    Distance2 bound;
    std::size_t seq;
    std::uint32_t node;
  };
  auto later = [](const Bin& a, const Bin& b) { return a.bound != b.bound ? a.bound > b.bound : a.seq > b.seq; };
  std::priority_queue<Bin, std::vector<Bin>, decltype(later)> frontier(later);
  std::size_t seq = 0;
  frontier.push({0, seq++, tree.root()});

  const auto nodes = tree.nodes();
  bool first_descent = true;
  while (!frontier.empty()) {
    const Bin bin = frontier.top();
    frontier.pop();
    if (result.full() && bin.bound > result.worst().distance2) break;

    std::uint32_t cur = bin.node;
    bool counted = false;
    while (cur != kNoChild) {
      if (!first_descent && local.nodes_examined >= node_budget) {
        local.budget_exhausted = true;
        if (stats) *stats = local;
        return result;
      }
      ++local.nodes_examined;
      if (!counted) {
        ++local.descents;
        counted = true;
      }
      const auto& node = nodes[cur];
      const auto& diff = diffs_by_node[cur];
      result.offer({distance2(diff), node.instance_id, node.label});

      // diff = train - test: positive means the test point lies on the
      // lower side of the split, where the left subtree lives.
      const std::int64_t d = diff[node.split_dim];
      const bool go_left = d >= 0;
      const auto near = go_left ? node.left : node.right;
      const auto far = go_left ? node.right : node.left;
      if (far != kNoChild) {
        const auto mag = static_cast<std::uint64_t>(d < 0 ? -d : d);
        const Distance2 bound = static_cast<Distance2>(mag) * mag;
        if (!(result.full() && bound > result.worst().distance2)) frontier.push({bound, seq++, far});
      }
      cur = near;
    }
    first_descent = false;
  }
  if (stats) *stats = local;
  return result;
}

NeighborSet linear_scan(std::span<const LabeledDiff> diffs, std::size_t k) {
  NeighborSet result(k);
  for (const auto& item : diffs) result.offer({distance2(item.diff), item.instance_id, item.label});
  return result;
}

std::vector<LabeledDiff> label_diffs(const KdTreeModel& tree, std::span<const DiffVector> diffs_by_node) {
  if (diffs_by_node.size() != tree.size()) {
    throw KnnError(KnnErrc::kDiffCountMismatch, "need one difference vector per tree node");
  }
  std::vector<LabeledDiff> out;
  out.reserve(tree.size());
  const auto nodes = tree.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) out.push_back({nodes[i].instance_id, nodes[i].label, diffs_by_node[i]});
  return out;
}

std::vector<DiffVector> plaintext_diffs(const KdTree& tree, const FixedFeatures& test) {
  std::vector<DiffVector> out(tree.features_by_node.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t d = 0; d < kFeatureCount; ++d) {
      out[i][d] = static_cast<std::int64_t>(tree.features_by_node[i][d]) - static_cast<std::int64_t>(test[d]);
    }
  }
  return out;
}

ClassLabel vote(const NeighborSet& neighbors) {
  if (neighbors.empty()) throw KnnError(KnnErrc::kEmptyNeighborSet, "cannot vote on an empty neighbor set");
  const auto attacks = neighbors.count(ClassLabel::kAttack);
  return 2 * attacks >= neighbors.size() ? ClassLabel::kAttack : ClassLabel::kNormal;
}

}  // namespace predis
