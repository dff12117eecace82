#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "predis/transport.hpp"

namespace predis {

namespace {

std::string errno_text() { return std::strerror(errno); }

class TcpStream : public ByteStream {
 public:
  explicit TcpStream(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  ~TcpStream() override { ::close(fd_); }
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;

  std::size_t read_some(std::span<std::uint8_t> buf) override {
    while (true) {
      const auto n = ::recv(fd_, buf.data(), buf.size(), 0);
      if (n >= 0) return static_cast<std::size_t>(n);
      if (errno == EINTR) continue;
      if (errno == ECONNRESET || errno == ENOTCONN) return 0;
      throw TransportError(TransportErrc::kIo, "recv: " + errno_text());
    }
  }

  void write_all(std::span<const std::uint8_t> data) override {
    while (!data.empty()) {
      const auto n = ::send(fd_, data.data(), data.size(), MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw TransportError(TransportErrc::kChannelClosed, "send: " + errno_text());
      }
      data = data.subspan(static_cast<std::size_t>(n));
    }
  }

  bool wait_readable(std::chrono::milliseconds timeout) override {
    pollfd p{fd_, POLLIN, 0};
    const int ms = timeout.count() < 0 ? -1 : static_cast<int>(timeout.count());
    while (true) {
      const int rc = ::poll(&p, 1, ms);
      if (rc >= 0) return rc > 0;
      if (errno != EINTR) throw TransportError(TransportErrc::kIo, "poll: " + errno_text());
    }
  }

  void shutdown() override { ::shutdown(fd_, SHUT_RDWR); }

 private:
  int fd_;
};

constexpr std::chrono::milliseconds kHandshakeTimeout{5000};

std::mutex g_provider_mutex;
std::shared_ptr<SecureTransport> g_provider;

}  // namespace

void set_secure_transport(std::shared_ptr<SecureTransport> provider) {
  std::lock_guard lock(g_provider_mutex);
  g_provider = std::move(provider);
}

std::shared_ptr<SecureTransport> secure_transport() {
  std::lock_guard lock(g_provider_mutex);
  return g_provider;
}

void check_security(const ChannelOptions& options) {
  if (options.security == Security::kPlain && !options.allow_insecure) {
    throw TransportError(TransportErrc::kInsecureRefused, "plaintext channel refused without the insecure flag");
  }
  if (options.security == Security::kSecure && !secure_transport()) {
    throw TransportError(TransportErrc::kHandshakeFailed, "no secure transport provider registered");
  }
}

Endpoint Endpoint::parse(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 == text.size()) {
    throw std::invalid_argument("endpoint must be host:port, got '" + text + "'");
  }
  Endpoint e;
  e.host = text.substr(0, colon);
  const auto port = std::stoul(text.substr(colon + 1));
  if (port > 65535) throw std::invalid_argument("port out of range: " + text);
  e.port = static_cast<std::uint16_t>(port);
  return e;
}

std::string Endpoint::to_string() const { return host + ":" + std::to_string(port); }

// ---------------------------------------------------------------------------

struct StreamChannel::Impl {
  std::unique_ptr<ByteStream> stream;
  Tap tap;
  FrameDecoder decoder;
  std::mutex send_mutex;
  std::mutex recv_mutex;
  std::atomic<bool> closed{false};
};

StreamChannel::StreamChannel(std::unique_ptr<ByteStream> stream, Tap tap) : impl_(std::make_unique<Impl>()) {
  impl_->stream = std::move(stream);
  impl_->tap = std::move(tap);
  const std::uint8_t version = kProtocolVersion;
  try {
    impl_->stream->write_all({&version, 1});
  } catch (const TransportError& e) {
    throw TransportError(TransportErrc::kHandshakeFailed, std::string("version exchange failed: ") + e.what());
  }
  std::uint8_t peer = 0;
  if (!impl_->stream->wait_readable(kHandshakeTimeout)) {
    throw TransportError(TransportErrc::kHandshakeFailed, "peer sent no protocol version");
  }
  if (impl_->stream->read_some({&peer, 1}) != 1) {
    throw TransportError(TransportErrc::kHandshakeFailed, "peer closed during version exchange");
  }
  if (peer != kProtocolVersion) {
    throw TransportError(TransportErrc::kHandshakeFailed, "unsupported protocol version " + std::to_string(peer));
  }
}

StreamChannel::~StreamChannel() {
  if (impl_) close();
}

void StreamChannel::send(const Message& msg) {
  if (impl_->closed) throw TransportError(TransportErrc::kChannelClosed, "channel closed");
  const auto frame = encode_frame(msg);
  if (impl_->tap) impl_->tap(msg);
  std::lock_guard lock(impl_->send_mutex);
  impl_->stream->write_all(frame);
}

std::optional<Message> StreamChannel::receive(std::chrono::milliseconds timeout) {
  std::lock_guard lock(impl_->recv_mutex);
  const auto deadline = Clock::now() + timeout;
  std::array<std::uint8_t, 64 * 1024> buf{};
  while (true) {
    if (auto msg = impl_->decoder.next()) {
      if (impl_->tap) impl_->tap(*msg);
      return msg;
    }
    if (impl_->closed) return std::nullopt;
    auto wait = std::chrono::milliseconds(-1);
    if (timeout.count() >= 0) {
      wait = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (wait.count() < 0) return std::nullopt;
    }
    if (!impl_->stream->wait_readable(wait)) return std::nullopt;
    const auto n = impl_->stream->read_some(buf);
    if (n == 0) {
      impl_->closed = true;
      if (impl_->decoder.buffered() > 0) {
        throw TransportError(TransportErrc::kTruncatedFrame, "stream ended inside a frame");
      }
      return std::nullopt;
    }
    impl_->decoder.feed({buf.data(), n});
  }
}

bool StreamChannel::closed() const { return impl_->closed; }

void StreamChannel::close() {
  impl_->closed = true;
  impl_->stream->shutdown();
}

namespace {

int connect_tcp(const Endpoint& endpoint) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const auto port = std::to_string(endpoint.port);
  if (const int rc = ::getaddrinfo(endpoint.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw TransportError(TransportErrc::kConnectFailed, "resolve " + endpoint.to_string() + ": " + gai_strerror(rc));
  }
  int fd = -1;
  for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportError(TransportErrc::kConnectFailed, "connect " + endpoint.to_string() + ": " + errno_text());
  return fd;
}

}  // namespace

std::unique_ptr<Channel> open_channel(const Endpoint& endpoint, const ChannelOptions& options, Tap tap) {
  check_security(options);
  std::unique_ptr<ByteStream> stream = std::make_unique<TcpStream>(connect_tcp(endpoint));
  if (options.security == Security::kSecure) {
    try {
      stream = secure_transport()->wrap_client(std::move(stream), endpoint);
    } catch (const TransportError&) {
      throw;
    } catch (const std::exception& e) {
      throw TransportError(TransportErrc::kHandshakeFailed, e.what());
    }
  }
  return std::make_unique<StreamChannel>(std::move(stream), std::move(tap));
}

// ---------------------------------------------------------------------------

struct TcpServerPort::Impl {
  ChannelOptions options;
  int listen_fd = -1;
  std::uint16_t port = 0;
  std::thread acceptor;

  std::mutex mutex;
  std::condition_variable cv;
  std::deque<Envelope> inbox;
  std::unordered_map<ConnectionId, std::shared_ptr<StreamChannel>> connections;
  std::vector<std::thread> readers;
  ConnectionId next_id = 1;
  bool closed = false;

  void accept_loop() {
    while (true) {
      pollfd p{listen_fd, POLLIN, 0};
      const int rc = ::poll(&p, 1, 100);
      {
        std::lock_guard lock(mutex);
        if (closed) return;
      }
      if (rc <= 0) continue;
      const int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) continue;
      std::lock_guard lock(mutex);
      if (closed) {
        ::close(fd);
        return;
      }
      const ConnectionId id = next_id++;
      readers.emplace_back([this, fd, id] { serve_connection(fd, id); });
    }
  }

  void serve_connection(int fd, ConnectionId id) {
    std::shared_ptr<StreamChannel> channel;
    try {
      std::unique_ptr<ByteStream> stream = std::make_unique<TcpStream>(fd);
      if (options.security == Security::kSecure) stream = secure_transport()->wrap_server(std::move(stream));
      channel = std::make_shared<StreamChannel>(std::move(stream));
    } catch (const std::exception&) {
      return;
    }
    {
      std::lock_guard lock(mutex);
      if (closed) return;
      connections.emplace(id, channel);
    }
    try {
      while (auto msg = channel->receive()) {
        {
          std::lock_guard lock(mutex);
          inbox.push_back({id, std::move(*msg)});
        }
        cv.notify_one();
      }
    } catch (const std::exception&) {
      // Protocol error: drop the connection.
    }
    channel->close();
    std::lock_guard lock(mutex);
    connections.erase(id);
  }
};

TcpServerPort::TcpServerPort(const Endpoint& bind, const ChannelOptions& options) : impl_(std::make_unique<Impl>()) {
  check_security(options);
  impl_->options = options;
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError(TransportErrc::kIo, "socket: " + errno_text());
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(bind.port);
  if (::inet_pton(AF_INET, bind.host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw TransportError(TransportErrc::kIo, "bad bind address " + bind.host);
  }
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd, 64) != 0) {
    const auto why = errno_text();
    ::close(fd);
    throw TransportError(TransportErrc::kIo, "bind/listen " + bind.to_string() + ": " + why);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  impl_->listen_fd = fd;
  impl_->port = ntohs(addr.sin_port);
  impl_->acceptor = std::thread([impl = impl_.get()] { impl->accept_loop(); });
}

TcpServerPort::~TcpServerPort() { close(); }

std::uint16_t TcpServerPort::port() const { return impl_->port; }

std::optional<Envelope> TcpServerPort::receive(std::chrono::milliseconds timeout) {
  std::unique_lock lock(impl_->mutex);
  auto ready = [&] { return !impl_->inbox.empty() || impl_->closed; };
  if (timeout.count() < 0) impl_->cv.wait(lock, ready);
  else impl_->cv.wait_for(lock, timeout, ready);
  if (impl_->inbox.empty()) return std::nullopt;
  Envelope env = std::move(impl_->inbox.front());
  impl_->inbox.pop_front();
  return env;
}

void TcpServerPort::send(ConnectionId to, const Message& msg) {
  std::shared_ptr<StreamChannel> channel;
  {
    std::lock_guard lock(impl_->mutex);
    const auto it = impl_->connections.find(to);
    if (it == impl_->connections.end()) throw TransportError(TransportErrc::kChannelClosed, "no such connection");
    channel = it->second;
  }
  channel->send(msg);
}

void TcpServerPort::close() {
  std::vector<std::thread> readers;
  std::unordered_map<ConnectionId, std::shared_ptr<StreamChannel>> conns;
  {
    std::lock_guard lock(impl_->mutex);
    if (impl_->closed && impl_->listen_fd < 0) return;
    impl_->closed = true;
    conns = impl_->connections;
  }
  impl_->cv.notify_all();
  for (auto& [id, ch] : conns) ch->close();
  if (impl_->acceptor.joinable()) impl_->acceptor.join();
  {
    std::lock_guard lock(impl_->mutex);
    readers.swap(impl_->readers);
  }
  for (auto& t : readers) t.join();
  if (impl_->listen_fd >= 0) {
    ::close(impl_->listen_fd);
    impl_->listen_fd = -1;
  }
}

bool TcpServerPort::closed() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->closed;
}

}  // namespace predis
