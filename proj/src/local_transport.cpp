#include <condition_variable>
#include <deque>
#include <mutex>
#include <unordered_map>

#include "predis/transport.hpp"

namespace predis {

namespace {

template <typename Pred>
bool wait_until(std::condition_variable& cv, std::unique_lock<std::mutex>& lock, std::chrono::milliseconds timeout,
                Pred pred) {
  if (timeout < std::chrono::milliseconds::zero()) {
    cv.wait(lock, pred);
    return true;
  }
  return cv.wait_for(lock, timeout, pred);
}

// Hub -> client direction of one connection.
struct Pipe {
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<Message> queue;
  bool closed = false;

  void close() {
    {
      std::lock_guard lock(mutex);
      closed = true;
    }
    cv.notify_all();
  }
};

}  // namespace

struct LocalHub::State {
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<Envelope> inbox;
  std::unordered_map<ConnectionId, std::shared_ptr<Pipe>> connections;
  ConnectionId next_id = 1;
  bool closed = false;
};

namespace {

class LocalChannel : public Channel {
 public:
  LocalChannel(std::shared_ptr<LocalHub::State> hub, std::shared_ptr<Pipe> pipe, ConnectionId id, Tap tap)
      : hub_(std::move(hub)), pipe_(std::move(pipe)), id_(id), tap_(std::move(tap)) {}

  ~LocalChannel() override { close(); }

  void send(const Message& msg) override {
    {
      std::lock_guard lock(pipe_->mutex);
      if (pipe_->closed) throw TransportError(TransportErrc::kChannelClosed, "local channel closed");
    }
    if (tap_) tap_(msg);
    {
      std::lock_guard lock(hub_->mutex);
      if (hub_->closed) throw TransportError(TransportErrc::kChannelClosed, "local hub closed");
      hub_->inbox.push_back({id_, msg});
    }
    hub_->cv.notify_one();
  }

  std::optional<Message> receive(std::chrono::milliseconds timeout) override {
    std::unique_lock lock(pipe_->mutex);
    wait_until(pipe_->cv, lock, timeout, [&] { return !pipe_->queue.empty() || pipe_->closed; });
    if (pipe_->queue.empty()) return std::nullopt;
    Message msg = std::move(pipe_->queue.front());
    pipe_->queue.pop_front();
    lock.unlock();
    if (tap_) tap_(msg);
    return msg;
  }

  bool closed() const override {
    std::lock_guard lock(pipe_->mutex);
    return pipe_->closed;
  }

  void close() override {
    pipe_->close();
    std::lock_guard lock(hub_->mutex);
    hub_->connections.erase(id_);
  }

 private:
  std::shared_ptr<LocalHub::State> hub_;
  std::shared_ptr<Pipe> pipe_;
  ConnectionId id_;
  Tap tap_;
};

}  // namespace

LocalHub::LocalHub() : state_(std::make_shared<State>()) {}

LocalHub::~LocalHub() { close(); }

std::unique_ptr<Channel> LocalHub::connect(Tap tap) {
  auto pipe = std::make_shared<Pipe>();
  ConnectionId id = 0;
  {
    std::lock_guard lock(state_->mutex);
    if (state_->closed) throw TransportError(TransportErrc::kConnectFailed, "local hub closed");
    id = state_->next_id++;
    state_->connections.emplace(id, pipe);
  }
  return std::make_unique<LocalChannel>(state_, std::move(pipe), id, std::move(tap));
}

std::optional<Envelope> LocalHub::receive(std::chrono::milliseconds timeout) {
  std::unique_lock lock(state_->mutex);
  wait_until(state_->cv, lock, timeout, [&] { return !state_->inbox.empty() || state_->closed; });
  if (state_->inbox.empty()) return std::nullopt;
  Envelope env = std::move(state_->inbox.front());
  state_->inbox.pop_front();
  return env;
}

void LocalHub::send(ConnectionId to, const Message& msg) {
  std::shared_ptr<Pipe> pipe;
  {
    std::lock_guard lock(state_->mutex);
    const auto it = state_->connections.find(to);
    if (it == state_->connections.end()) throw TransportError(TransportErrc::kChannelClosed, "no such connection");
    pipe = it->second;
  }
  {
    std::lock_guard lock(pipe->mutex);
    if (pipe->closed) throw TransportError(TransportErrc::kChannelClosed, "connection closed");
    pipe->queue.push_back(msg);
  }
  pipe->cv.notify_one();
}

void LocalHub::close() {
  std::unordered_map<ConnectionId, std::shared_ptr<Pipe>> conns;
  {
    std::lock_guard lock(state_->mutex);
    state_->closed = true;
    conns.swap(state_->connections);
  }
  state_->cv.notify_all();
  for (auto& [id, pipe] : conns) pipe->close();
}

bool LocalHub::closed() const {
  std::lock_guard lock(state_->mutex);
  return state_->closed;
}

}  // namespace predis
