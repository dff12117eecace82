#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <map>
#include <random>
#include <thread>

#include "../support/fixtures.hpp"
#include "predis/transport.hpp"

using namespace predis;
using namespace std::chrono_literals;

namespace {

using Bytes = std::vector<std::uint8_t>;

std::uint64_t attr(std::mt19937_64& rng) { return rng() & kAttributeMask; }

Message random_message(std::mt19937_64& rng) {
  switch (rng() % 6) {
    case 0: {
      MaskedTuple t{attr(rng), attr(rng), {}};
      for (auto& v : t.masked_features) v = attr(rng);
      return TupleMsg{t};
    }
    case 1: {
      MaskVector m{attr(rng), attr(rng), {}};
      for (auto& v : m.masks) v = attr(rng);
      return MaskMsg{m};
    }
    case 2: {
      auto train = fixtures::random_training(rng, 1 + rng() % 40);
      return TopologyMsg{build_kdtree(train).model};
    }
    case 3: {
      PreliminaryResult r{attr(rng), attr(rng), {}};
      r.per_instance_diffs.resize(rng() % 40);
      for (auto& row : r.per_instance_diffs) {
        for (auto& v : row) v = attr(rng);
      }
      return PrelimMsg{r};
    }
    case 4: return AlarmMsg{Alarm{attr(rng), attr(rng), static_cast<std::uint32_t>(rng())}};
    default: return AckMsg{};
  }
}

// Reference MSB-first bit packer for layout checks.
struct HandBits {
  Bytes out;
  std::size_t pos = 0;
  void put(std::uint64_t v, unsigned width) {
    for (int b = static_cast<int>(width) - 1; b >= 0; --b, ++pos) {
      if (out.size() * 8 <= pos) out.push_back(0);
      if ((v >> b) & 1) out[pos / 8] |= static_cast<std::uint8_t>(0x80u >> (pos % 8));
    }
  }
};

TransportErrc error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const TransportError& e) {
    return e.code();
  }
  FAIL("expected a TransportError");
  return TransportErrc::kIo;
}

ChannelOptions plain() { return {Security::kPlain, true}; }

// Pass-through provider that counts how often it is used.
struct CountingProvider : SecureTransport {
  std::atomic<int> clients{0};
  std::atomic<int> servers{0};
  std::unique_ptr<ByteStream> wrap_client(std::unique_ptr<ByteStream> raw, const Endpoint&) override {
    ++clients;
    return raw;
  }
  std::unique_ptr<ByteStream> wrap_server(std::unique_ptr<ByteStream> raw) override {
    ++servers;
    return raw;
  }
};

}  // namespace

TEST_CASE("frame layout examples") {
  CHECK(encode_frame(AckMsg{}) == Bytes{0x00, 0x00, 0x00, 0x01, 0x06});
  const auto tuple = encode_frame(TupleMsg{});
  REQUIRE(tuple.size() == 34);
  CHECK(Bytes(tuple.begin(), tuple.begin() + 5) == Bytes{0x00, 0x00, 0x00, 0x1E, 0x01});
  CHECK(std::all_of(tuple.begin() + 5, tuple.end(), [](std::uint8_t b) { return b == 0; }));
  CHECK(message_type(MaskMsg{}) == MsgType::kMask);
  CHECK(encode_frame(MaskMsg{})[4] == 0x02);
}

TEST_CASE("prelim and alarm payload layouts") {
  PreliminaryResult r{5, 7, {{1, 2, 3, 4, kAttributeMask}, {0, 0, 0, 0, 9}}};
  HandBits hb;
  hb.put(5, 33);
  hb.put(7, 33);
  hb.put(2, 32);
  for (const auto& row : r.per_instance_diffs) {
    for (auto v : row) hb.put(v, 33);
  }
  CHECK(encode_prelim(r) == hb.out);
  CHECK(decode_prelim(hb.out) == r);
  CHECK(hb.out.size() == (33 + 33 + 32 + 2 * 5 * 33 + 7) / 8);

  HandBits ha;
  ha.put(3, 33);
  ha.put(600, 33);
  ha.put(17, 32);
  CHECK(ha.out.size() == 13);
  CHECK(encode_payload(AlarmMsg{Alarm{3, 600, 17}}) == ha.out);

  const auto topo = build_kdtree(std::vector<TrainingInstance>{{1, {}, ClassLabel::kAttack}}).model;
  CHECK(encode_payload(TopologyMsg{topo}) == topo.serialize());
}

TEST_CASE("codec round trip over 10^4 random messages") {
  std::mt19937_64 rng(79);
  for (int i = 0; i < 10000; ++i) {
    const auto msg = random_message(rng);
    REQUIRE(decode_frame(encode_frame(msg)) == msg);
  }
}

TEST_CASE("frame decoder survives arbitrary re-chunking") {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Message> sent;
    Bytes stream;
    const auto count = 1 + rng() % 30;
    for (std::size_t i = 0; i < count; ++i) {
      sent.push_back(random_message(rng));
      const auto f = encode_frame(sent.back());
      stream.insert(stream.end(), f.begin(), f.end());
    }
    FrameDecoder dec;
    std::vector<Message> got;
    for (std::size_t pos = 0; pos < stream.size();) {
      const std::size_t chunk = std::min<std::size_t>(stream.size() - pos, 1 + rng() % (trial % 2 ? 3 : 64));
      dec.feed(std::span(stream).subspan(pos, chunk));
      pos += chunk;
      while (auto m = dec.next()) got.push_back(*m);
    }
    CHECK(dec.buffered() == 0);
    REQUIRE(got == sent);
  }
}

TEST_CASE("codec errors") {
  CHECK(error_of([] { decode_frame(Bytes{0x00, 0x00, 0x00, 0x01, 0x07}); }) == TransportErrc::kUnknownType);
  CHECK(error_of([] { decode_frame(Bytes{0x00, 0x00, 0x00, 0x1E, 0x01, 0x00}); }) == TransportErrc::kTruncatedFrame);
  CHECK(error_of([] { decode_frame(Bytes{0x00, 0x00}); }) == TransportErrc::kTruncatedFrame);
  CHECK(error_of([] { decode_frame(Bytes{0x05, 0x00, 0x00, 0x01, 0x04}); }) == TransportErrc::kOversizeFrame);
  CHECK(error_of([] { decode_frame(Bytes{0x00, 0x00, 0x00, 0x01, 0x06, 0xAA}); }) == TransportErrc::kMalformedPayload);
  CHECK(error_of([] { decode_frame(Bytes{0x00, 0x00, 0x00, 0x02, 0x06, 0x00}); }) == TransportErrc::kMalformedPayload);
  {
    FrameDecoder zero;
    zero.feed(Bytes{0x00, 0x00, 0x00, 0x00, 0x06});
    CHECK(error_of([&] { zero.next(); }) == TransportErrc::kMalformedPayload);
  }

  auto prelim = encode_frame(PrelimMsg{PreliminaryResult{1, 1, {{1, 1, 1, 1, 1}}}});
  prelim.push_back(0);
  prelim[3] += 1;  // length now disagrees with n_train
  CHECK(error_of([&] { decode_frame(prelim); }) == TransportErrc::kMalformedPayload);

  // The unknown type is reported as soon as the header is complete.
  FrameDecoder dec;
  dec.feed(Bytes{0x00, 0x00, 0x10, 0x00, 0x09});
  CHECK(error_of([&] { dec.next(); }) == TransportErrc::kUnknownType);
}

TEST_CASE("LocalHub preserves per-connection order") {
  LocalHub hub;
  auto a = hub.connect();
  auto b = hub.connect();
  std::thread ta([&] {
    for (std::uint32_t i = 0; i < 1000; ++i) a->send(AlarmMsg{Alarm{1, i, 0}});
  });
  std::thread tb([&] {
    for (std::uint32_t i = 0; i < 1000; ++i) b->send(AlarmMsg{Alarm{2, i, 0}});
  });
  std::map<std::uint64_t, std::uint64_t> next;
  std::map<std::uint64_t, ConnectionId> conn;
  for (int i = 0; i < 2000; ++i) {
    auto env = hub.receive(5s);
    REQUIRE(env);
    const auto& alarm = std::get<AlarmMsg>(env->message).alarm;
    CHECK(alarm.time == next[alarm.serial_number]++);
    conn[alarm.serial_number] = env->from;
  }
  ta.join();
  tb.join();
  hub.send(conn[2], AckMsg{});
  CHECK(b->receive(1s) == Message{AckMsg{}});
  CHECK_FALSE(a->receive(10ms));
  hub.close();
  CHECK_FALSE(a->receive(1s));
  CHECK(a->closed());
  CHECK(error_of([&] { a->send(AckMsg{}); }) == TransportErrc::kChannelClosed);
}

TEST_CASE("taps observe both directions") {
  LocalHub hub;
  std::vector<Message> seen;
  auto ch = hub.connect([&](const Message& m) { seen.push_back(m); });
  ch->send(AlarmMsg{Alarm{1, 2, 3}});
  auto env = hub.receive(1s);
  REQUIRE(env);
  hub.send(env->from, AckMsg{});
  CHECK(ch->receive(1s));
  REQUIRE(seen.size() == 2);
  CHECK(std::holds_alternative<AlarmMsg>(seen[0]));
  CHECK(std::holds_alternative<AckMsg>(seen[1]));
}

TEST_CASE("security policy") {
  CHECK(error_of([] { check_security(ChannelOptions{Security::kPlain, false}); }) == TransportErrc::kInsecureRefused);
  CHECK(error_of([] { TcpServerPort(Endpoint{"127.0.0.1", 0}, ChannelOptions{Security::kPlain, false}); }) ==
        TransportErrc::kInsecureRefused);
  TcpServerPort server(Endpoint{"127.0.0.1", 0}, plain());
  CHECK(error_of([&] { open_channel({"127.0.0.1", server.port()}, ChannelOptions{Security::kPlain, false}); }) ==
        TransportErrc::kInsecureRefused);
  set_secure_transport(nullptr);
  CHECK(error_of([&] { open_channel({"127.0.0.1", server.port()}, ChannelOptions{}); }) ==
        TransportErrc::kHandshakeFailed);
}

TEST_CASE("secure mode routes through the registered provider") {
  auto provider = std::make_shared<CountingProvider>();
  set_secure_transport(provider);
  {
    TcpServerPort server(Endpoint{"127.0.0.1", 0}, ChannelOptions{});
    auto ch = open_channel({"127.0.0.1", server.port()}, ChannelOptions{});
    ch->send(AckMsg{});
    auto env = server.receive(5s);
    REQUIRE(env);
    CHECK(std::holds_alternative<AckMsg>(env->message));
    CHECK(provider->clients == 1);
    CHECK(provider->servers == 1);
    server.close();
  }
  set_secure_transport(nullptr);
}

TEST_CASE("loopback TCP delivers 1000 frames in order") {
  TcpServerPort server(Endpoint{"127.0.0.1", 0}, plain());
  auto ch = open_channel({"127.0.0.1", server.port()}, plain());
  std::mt19937_64 rng(89);
  std::vector<Message> sent;
  for (int i = 0; i < 1000; ++i) sent.push_back(random_message(rng));
  std::thread sender([&] {
    for (const auto& m : sent) ch->send(m);
  });
  std::vector<Message> got;
  ConnectionId from = 0;
  while (got.size() < sent.size()) {
    auto env = server.receive(10s);
    REQUIRE(env);
    from = env->from;
    got.push_back(env->message);
  }
  sender.join();
  CHECK(got == sent);

  // Echo back on the same connection.
  for (std::uint32_t i = 0; i < 1000; ++i) server.send(from, AlarmMsg{Alarm{1, i, i}});
  for (std::uint32_t i = 0; i < 1000; ++i) {
    auto m = ch->receive(10s);
    REQUIRE(m);
    CHECK(std::get<AlarmMsg>(*m).alarm.time == i);
  }
  server.close();
  CHECK_FALSE(ch->receive(5s));
  CHECK(ch->closed());
}

TEST_CASE("connect and handshake failures") {
  // Grab a free port, then close it so nothing listens there.
  std::uint16_t port = 0;
  {
    TcpServerPort tmp(Endpoint{"127.0.0.1", 0}, plain());
    port = tmp.port();
    tmp.close();
  }
  CHECK(error_of([&] { open_channel({"127.0.0.1", port}, plain()); }) == TransportErrc::kConnectFailed);

  // A peer that answers with the wrong version byte.
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  REQUIRE(::listen(fd, 1) == 0);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  std::thread peer([fd] {
    const int c = ::accept(fd, nullptr, nullptr);
    const std::uint8_t bad = 0x02;
    (void)::send(c, &bad, 1, 0);
    std::uint8_t buf[8];
    (void)::recv(c, buf, sizeof buf, 0);
    ::close(c);
  });
  CHECK(error_of([&] { open_channel({"127.0.0.1", ntohs(addr.sin_port)}, plain()); }) ==
        TransportErrc::kHandshakeFailed);
  peer.join();
  ::close(fd);

  CHECK_THROWS_AS(Endpoint::parse("nohost"), std::invalid_argument);
  CHECK(Endpoint::parse("10.1.2.3:80").port == 80);
  CHECK(Endpoint::parse("10.1.2.3:80").to_string() == "10.1.2.3:80");
}
