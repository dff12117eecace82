#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "predis/error.hpp"
#include "predis/messages.hpp"

namespace predis {

enum class TransportErrc {
  kUnknownType,
  kTruncatedFrame,
  kOversizeFrame,
  kMalformedPayload,
  kConnectFailed,
  kHandshakeFailed,
  kInsecureRefused,
  kChannelClosed,
  kIo,
};
using TransportError = Error<TransportErrc>;

inline constexpr std::uint8_t kProtocolVersion = 0x01;
inline constexpr std::size_t kMaxPayloadBytes = std::size_t{64} << 20;
inline constexpr std::size_t kFrameHeaderBytes = 5;

// ---------------------------------------------------------------------------
// Framing: u32 big-endian length (= 1 + payload), u8 type, payload.

std::vector<std::uint8_t> encode_payload(const Message& msg);
Message decode_payload(MsgType type, std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_frame(const Message& msg);

/// Decodes exactly one frame. Short input is kTruncatedFrame; bytes after
/// the frame are kMalformedPayload.
Message decode_frame(std::span<const std::uint8_t> bytes);

/// Reassembles frames from arbitrarily chunked stream input.
class FrameDecoder {
 public:
  void feed(std::span<const std::uint8_t> chunk);

  /// Next complete frame, or nullopt if more bytes are needed. Throws on
  /// protocol errors (unknown type, oversize length, bad payload).
  std::optional<Message> next();

  std::size_t buffered() const noexcept { return buffer_.size() - offset_; }

 private:
  std::vector<std::uint8_t> buffer_;
  std::size_t offset_ = 0;
};

std::vector<std::uint8_t> encode_prelim(const PreliminaryResult& result);
PreliminaryResult decode_prelim(std::span<const std::uint8_t> payload);

// ---------------------------------------------------------------------------
// Channels.

using Clock = std::chrono::steady_clock;
inline constexpr std::chrono::milliseconds kWaitForever{-1};

/// Client side of a connection: ordered, reliable, bidirectional.
class Channel {
 public:
  virtual ~Channel() = default;

  /// Throws TransportError(kChannelClosed) once either side has closed.
  virtual void send(const Message& msg) = 0;

  /// Blocks up to timeout (kWaitForever = no limit). Returns nullopt on
  /// timeout or when the peer closed and nothing is left; closed()
  /// distinguishes the two.
  virtual std::optional<Message> receive(std::chrono::milliseconds timeout = kWaitForever) = 0;

  virtual bool closed() const = 0;
  virtual void close() = 0;
};

using ConnectionId = std::uint32_t;

struct Envelope {
  ConnectionId from = 0;
  Message message;
};

/// Server side: one inbox for all accepted connections, processed in arrival
/// order, and addressed replies.
class ServerPort {
 public:
  virtual ~ServerPort() = default;

  virtual std::optional<Envelope> receive(std::chrono::milliseconds timeout = kWaitForever) = 0;

  /// Throws TransportError(kChannelClosed) if the connection is gone.
  virtual void send(ConnectionId to, const Message& msg) = 0;

  /// Stops accepting, closes every connection and wakes blocked receivers.
  virtual void close() = 0;
  virtual bool closed() const = 0;
};

/// Observer invoked with every message crossing a channel, used by tests to
/// check what each party gets to see.
using Tap = std::function<void(const Message&)>;

/// In-memory server. connect() hands out client channels whose messages land
/// in this hub's inbox. Thread-safe.
class LocalHub : public ServerPort {
 public:
  LocalHub();
  ~LocalHub() override;

  std::unique_ptr<Channel> connect(Tap tap = {});

  std::optional<Envelope> receive(std::chrono::milliseconds timeout = kWaitForever) override;
  void send(ConnectionId to, const Message& msg) override;
  void close() override;
  bool closed() const override;

  struct State;

 private:
  std::shared_ptr<State> state_;
};

// ---------------------------------------------------------------------------
// Byte streams and the secure-channel boundary.

class ByteStream {
 public:
  virtual ~ByteStream() = default;
  /// Returns 0 at end of stream.
  virtual std::size_t read_some(std::span<std::uint8_t> buf) = 0;
  virtual void write_all(std::span<const std::uint8_t> data) = 0;
  /// True when bytes (or EOF) can be read without blocking.
  virtual bool wait_readable(std::chrono::milliseconds timeout) = 0;
  virtual void shutdown() = 0;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  static Endpoint parse(const std::string& text);  // "host:port"
  std::string to_string() const;
};

enum class Security { kPlain, kSecure };

/// A transport-security layer (TLS or equivalent) providing confidentiality,
/// integrity and server authentication. Deployments register one; the
/// library ships none.
class SecureTransport {
 public:
  virtual ~SecureTransport() = default;
  virtual std::unique_ptr<ByteStream> wrap_client(std::unique_ptr<ByteStream> raw, const Endpoint& peer) = 0;
  virtual std::unique_ptr<ByteStream> wrap_server(std::unique_ptr<ByteStream> raw) = 0;
};

void set_secure_transport(std::shared_ptr<SecureTransport> provider);
std::shared_ptr<SecureTransport> secure_transport();

struct ChannelOptions {
  Security security = Security::kSecure;
  // PLAIN is refused unless this is set.
  bool allow_insecure = false;
};

/// Frames messages over a byte stream. The version byte is exchanged on
/// construction.
class StreamChannel : public Channel {
 public:
  explicit StreamChannel(std::unique_ptr<ByteStream> stream, Tap tap = {});
  ~StreamChannel() override;

  void send(const Message& msg) override;
  std::optional<Message> receive(std::chrono::milliseconds timeout = kWaitForever) override;
  bool closed() const override;
  void close() override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Connects over TCP and applies the requested security mode.
std::unique_ptr<Channel> open_channel(const Endpoint& endpoint, const ChannelOptions& options, Tap tap = {});

/// TCP listener feeding a single inbox. Port 0 picks a free port.
class TcpServerPort : public ServerPort {
 public:
  TcpServerPort(const Endpoint& bind, const ChannelOptions& options);
  ~TcpServerPort() override;

  std::uint16_t port() const;

  std::optional<Envelope> receive(std::chrono::milliseconds timeout = kWaitForever) override;
  void send(ConnectionId to, const Message& msg) override;
  void close() override;
  bool closed() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

void check_security(const ChannelOptions& options);

}  // namespace predis
