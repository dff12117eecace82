#include "predis/computing_server.hpp"

#include <fstream>
#include <mutex>
#include <sstream>

#include "predis/log.hpp"

namespace predis {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

constexpr const char* kTrainingHeader = "instance_id,mpf,mbf,pcf,gop,gsi,label";

}  // namespace

std::vector<TrainingInstance> load_training_csv(std::istream& in, const FixedPointCodec& codec) {
  std::string line;
  if (!std::getline(in, line) || split(line) != split(kTrainingHeader)) {
    throw ServerError(ServerErrc::kBadTrainingFile, std::string("training CSV header must be ") + kTrainingHeader);
  }
  std::vector<TrainingInstance> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto cells = split(line);
    try {
      if (cells.size() != 7) throw std::invalid_argument("expected 7 cells");
      TrainingInstance t;
      const auto id = std::stoull(cells[0]);
      if (id > 0xFFFFFFFFull) throw std::out_of_range("instance_id exceeds 32 bits");
      t.instance_id = static_cast<std::uint32_t>(id);
      for (std::size_t d = 0; d < kFeatureCount; ++d) t.features[d] = codec.encode(std::stod(cells[d + 1])).value;
      if (cells[6] == "NORMAL") t.label = ClassLabel::kNormal;
      else if (cells[6] == "ATTACK") t.label = ClassLabel::kAttack;
      else throw std::invalid_argument("label must be NORMAL or ATTACK");
      out.push_back(t);
    } catch (const std::exception& e) {
      throw ServerError(ServerErrc::kBadTrainingFile, "training CSV row " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TrainingInstance> load_training_csv(const std::filesystem::path& path, const FixedPointCodec& codec) {
  std::ifstream in(path);
  if (!in) throw ServerError(ServerErrc::kBadTrainingFile, "cannot open " + path.string());
  return load_training_csv(in, codec);
}

void write_training_csv(std::ostream& out, const std::vector<TrainingInstance>& train, const FixedPointCodec& codec) {
  out << kTrainingHeader << '\n';
  out.precision(17);
  for (const auto& t : train) {
    out << t.instance_id;
    for (auto v : t.features) out << ',' << codec.decode(v);
    out << ',' << to_string(t.label) << '\n';
  }
}

void ComputingServer::load_training(std::span<const TrainingInstance> train) {
  auto tree = std::make_shared<const KdTree>(build_kdtree(train));
  std::unique_lock lock(mutex_);
  tree_ = std::move(tree);
  ++generation_;
}

bool ComputingServer::loaded() const {
  std::shared_lock lock(mutex_);
  return tree_ != nullptr;
}

KdTreeModel ComputingServer::topology() const {
  std::shared_lock lock(mutex_);
  if (!tree_) throw ServerError(ServerErrc::kNotLoaded, "no training set loaded");
  return tree_->model;
}

std::uint64_t ComputingServer::generation() const {
  std::shared_lock lock(mutex_);
  return generation_;
}

PreliminaryResult ComputingServer::preliminary_compute(const MaskedTuple& masked) const {
  const auto start = Clock::now();
  std::shared_lock lock(mutex_);
  if (!tree_) throw ServerError(ServerErrc::kNotLoaded, "no training set loaded");

  PreliminaryResult out;
  out.serial_number = masked.serial_number;
  out.time = masked.time;
  out.per_instance_diffs.resize(tree_->features_by_node.size());
  for (std::size_t i = 0; i < out.per_instance_diffs.size(); ++i) {
    const auto& train = tree_->features_by_node[i];
    auto& row = out.per_instance_diffs[i];
    for (std::size_t d = 0; d < kFeatureCount; ++d) row[d] = (train[d] - masked.masked_features[d]) & kAttributeMask;
  }
  compute_ns_ += std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
  return out;
}

void ComputingServer::serve(ServerPort& agents, Channel& ds) {
  std::uint64_t sent_generation = 0;
  auto sync_topology = [&] {
    std::shared_lock lock(mutex_);
    if (!tree_ || generation_ == sent_generation) return;
    const auto gen = generation_;
    TopologyMsg msg{tree_->model};
    lock.unlock();
    ds.send(msg);
    sent_generation = gen;
  };

  sync_topology();
  while (auto env = agents.receive()) {
    const auto* tuple = std::get_if<TupleMsg>(&env->message);
    if (tuple == nullptr) {
      log::warn("cs", "ignoring non-tuple message from connection " + std::to_string(env->from));
      continue;
    }
    try {
      sync_topology();
      ds.send(PrelimMsg{preliminary_compute(tuple->tuple)});
      ++processed_;
      agents.send(env->from, AckMsg{});
    } catch (const TransportError& e) {
      if (ds.closed()) {
        log::error("cs", std::string("detection server unreachable: ") + e.what());
        return;
      }
      log::warn("cs", std::string("dropping reply: ") + e.what());
    } catch (const ServerError& e) {
      log::warn("cs", e.what());
    }
  }
}

}  // namespace predis
