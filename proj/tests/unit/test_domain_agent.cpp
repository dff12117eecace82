#include <doctest.h>

#include <atomic>
#include <thread>

#include "../support/fixtures.hpp"
#include "predis/domain_agent.hpp"

using namespace predis;
using namespace std::chrono_literals;

namespace {

std::vector<FlowWindow> scenario_windows(std::uint32_t domain, std::size_t count, std::uint64_t seed = 5) {
  ScenarioParams p;
  p.seed = seed;
  p.windows = count;
  return window_flows_from(synth_scenario(p), domain, p.window_ms, p.start_ms);
}

AgentConfig seeded(std::uint32_t domain, std::uint64_t seed = 1) {
  AgentConfig cfg;
  cfg.domain_id = domain;
  cfg.rng_seed = seed;
  cfg.wait_for_alarms = false;
  cfg.ack_timeout = 5s;
  return cfg;
}

// Acknowledges every tuple and keeps what it received.
struct AckingServer {
  LocalHub hub;
  std::vector<MaskedTuple> tuples;
  std::size_t ack_limit = SIZE_MAX;
  std::thread worker;

  void start() {
    worker = std::thread([this] {
      while (auto env = hub.receive()) {
        if (const auto* t = std::get_if<TupleMsg>(&env->message)) {
          tuples.push_back(t->tuple);
          if (tuples.size() > ack_limit) {
            hub.close();
            return;
          }
          hub.send(env->from, AckMsg{});
        }
      }
    });
  }
  ~AckingServer() {
    hub.close();
    if (worker.joinable()) worker.join();
  }
};

template <class Errc>
Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error<Errc>& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc{};
}

}  // namespace

TEST_CASE("agent sends one tuple and one mask per window with matching keys") {
  const auto windows = scenario_windows(3, 10);
  REQUIRE(windows.size() == 10);
  AckingServer cs;
  cs.start();
  LocalHub ds;
  auto cs_ch = cs.hub.connect();
  auto ds_ch = ds.connect();

  std::vector<WindowKey> dispatched;
  DomainAgent agent(seeded(3));
  const auto summary = agent.run(windows, *cs_ch, *ds_ch, {[&](const WindowKey& k) { dispatched.push_back(k); }, {}});
  CHECK(summary.windows_dispatched == 10);
  CHECK(summary.acks == 10);
  CHECK(dispatched.size() == 10);

  std::vector<MaskVector> masks;
  while (auto env = ds.receive(100ms)) masks.push_back(std::get<MaskMsg>(env->message).mask);
  cs.hub.close();
  cs.worker.join();
  REQUIRE(masks.size() == 10);
  REQUIRE(cs.tuples.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(cs.tuples[i].key() == masks[i].key());
    CHECK(cs.tuples[i].key() == dispatched[i]);
    CHECK(masks[i].serial_number == 3);
    CHECK(masks[i].time == static_cast<std::uint64_t>(windows[i].window_start_ms / 1000));
    // The two halves recombine into the plaintext tuple.
    CHECK(remove_mask(cs.tuples[i], masks[i]).features == extract_features(windows[i]).features);
  }
}

TEST_CASE("alarms from the detection server reach the observer") {
  const auto windows = scenario_windows(2, 6);
  AckingServer cs;
  cs.start();
  LocalHub ds;
  std::thread ds_worker([&] {
    for (int i = 0; i < 6; ++i) {
      auto env = ds.receive(5s);
      if (!env) return;
      const auto& m = std::get<MaskMsg>(env->message).mask;
      ds.send(env->from, AlarmMsg{Alarm{m.serial_number, m.time, 7}});
    }
    ds.close();
  });
  auto cs_ch = cs.hub.connect();
  auto ds_ch = ds.connect();
  auto cfg = seeded(2);
  cfg.wait_for_alarms = true;
  std::vector<Alarm> seen;
  DomainAgent agent(cfg);
  const auto summary = agent.run(windows, *cs_ch, *ds_ch, {{}, [&](const Alarm& a) { seen.push_back(a); }});
  ds_worker.join();
  CHECK(summary.alarms.size() == 6);
  CHECK(seen == summary.alarms);
  for (const auto& a : seen) {
    CHECK(a.serial_number == 2);
    CHECK(a.neighbor_margin == 7);
  }
}

TEST_CASE("a closed computing-server channel is reported after draining") {
  const auto windows = scenario_windows(1, 10);
  AckingServer cs;
  cs.ack_limit = 3;
  cs.start();
  LocalHub ds;
  auto cs_ch = cs.hub.connect();
  auto ds_ch = ds.connect();
  auto cfg = seeded(1);
  cfg.max_in_flight = 1;
  DomainAgent agent(cfg);
  try {
    agent.run(windows, *cs_ch, *ds_ch);
    FAIL("expected ChannelClosed");
  } catch (const AgentError& e) {
    CHECK(e.code() == AgentErrc::kChannelClosed);
    CHECK(std::string(e.what()).find("3 of 10") != std::string::npos);
  }
}

TEST_CASE("no Ack within the timeout is backpressure") {
  const auto windows = scenario_windows(1, 5);
  LocalHub cs, ds;
  auto cs_ch = cs.connect();
  auto ds_ch = ds.connect();
  auto cfg = seeded(1);
  cfg.max_in_flight = 2;
  cfg.ack_timeout = 50ms;
  DomainAgent agent(cfg);
  CHECK(code_of<AgentErrc>([&] { agent.run(windows, *cs_ch, *ds_ch); }) == AgentErrc::kBackpressure);
  std::size_t tuples = 0;
  while (cs.receive(10ms)) ++tuples;
  CHECK(tuples == 2);
}

TEST_CASE("pretreat") {
  const auto windows = scenario_windows(4, 3);
  SUBCASE("seeded agents are reproducible") {
    DomainAgent a(seeded(4, 11)), b(seeded(4, 11));
    for (const auto& w : windows) {
      const auto ra = a.pretreat(w);
      const auto rb = b.pretreat(w);
      CHECK(ra.masked == rb.masked);
      CHECK(ra.mask == rb.mask);
    }
  }
  SUBCASE("an empty window still produces a masked zero tuple") {
    DomainAgent a(seeded(4));
    const auto r = a.pretreat(FlowWindow{4, 9000, 3000, {}});
    CHECK(r.masked.key() == WindowKey{4, 9});
    CHECK(remove_mask(r.masked, r.mask).features == FixedFeatures{});
  }
  SUBCASE("errors") {
    DomainAgent a(seeded(5));
    CHECK(code_of<AgentErrc>([&] { a.pretreat(windows[0]); }) == AgentErrc::kDomainMismatch);
    auto bad = seeded(1);
    bad.max_in_flight = 0;
    CHECK(code_of<AgentErrc>([&] { DomainAgent{bad}; }) == AgentErrc::kBadConfig);
    bad = seeded(1);
    bad.window_length_ms = 0;
    CHECK(code_of<AgentErrc>([&] { DomainAgent{bad}; }) == AgentErrc::kBadConfig);
  }
}

TEST_CASE("each server sees only its half") {
  const auto windows = scenario_windows(6, 20);
  AckingServer cs;
  cs.start();
  LocalHub ds;
  std::vector<Message> cs_seen, ds_seen;
  auto cs_ch = cs.hub.connect([&](const Message& m) { cs_seen.push_back(m); });
  auto ds_ch = ds.connect([&](const Message& m) { ds_seen.push_back(m); });
  DomainAgent agent(seeded(6));
  agent.run(windows, *cs_ch, *ds_ch);

  std::size_t differing = 0;
  std::size_t i = 0;
  for (const auto& m : cs_seen) {
    CHECK_FALSE(std::holds_alternative<MaskMsg>(m));
    if (const auto* t = std::get_if<TupleMsg>(&m)) {
      differing += t->tuple.masked_features != extract_features(windows[i++]).features;
    }
  }
  CHECK(i == windows.size());
  CHECK(differing == windows.size());
  for (const auto& m : ds_seen) CHECK(std::holds_alternative<MaskMsg>(m));
  CHECK(ds_seen.size() == windows.size());
}
