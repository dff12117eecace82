#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "predis/flow_model.hpp"

namespace predis {

namespace {

constexpr std::uint32_t kClientBase = 0x0A000000;    // 10.0.0.0
constexpr std::uint32_t kServerBase = 0xAC100000;    // 172.16.0.0
constexpr std::uint32_t kAttackerBase = 0xC6336400;  // 198.51.100.0

struct Service {
  std::uint16_t port;
  Protocol protocol;
};
constexpr Service kServices[] = {{80, Protocol::kTcp}, {443, Protocol::kTcp}, {22, Protocol::kTcp},
                                 {53, Protocol::kUdp}, {25, Protocol::kTcp}};

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

template <typename T>
T uniform(std::mt19937_64& rng, T lo, T hi) {
  return std::uniform_int_distribution<T>(lo, hi)(rng);
}

std::uint32_t client_address(std::uint32_t i) { return kClientBase + ((i / 250) << 8) + (i % 250) + 1; }

std::uint32_t spoofed_address(std::mt19937_64& rng) {
  // Unicast space 1.0.0.0 - 223.255.255.255, skipping 10/8, 127/8, 172.16/12, 192.168/16.
  while (true) {
    const auto a = uniform<std::uint32_t>(rng, 0x01000000u, 0xDFFFFFFFu);
    const auto top = a >> 24;
    if (top == 10 || top == 127) continue;
    if ((a & 0xFFF00000u) == 0xAC100000u) continue;
    if ((a & 0xFFFF0000u) == 0xC0A80000u) continue;
    return a;
  }
}

}  // namespace

std::vector<FlowRecord> synth_syn_flood(const SynthParams& p) {
  if (p.attack_flows > 0 && p.attacker_count == 0) throw std::invalid_argument("synth: attacker_count must be >= 1");
  if (p.duration_ms <= 0) throw std::invalid_argument("synth: duration must be positive");
  if (p.client_count == 0 || p.server_count == 0) throw std::invalid_argument("synth: empty address pool");

  std::mt19937_64 rng(p.seed);
  std::vector<FlowRecord> flows;
  flows.reserve(p.normal_flows + 1 + p.attack_flows);
  const std::int64_t end = p.start_ms + p.duration_ms;

  const std::size_t pairs = (p.normal_flows + 1) / 2;
  for (std::size_t i = 0; i < pairs; ++i) {
    const auto client = client_address(uniform<std::uint32_t>(rng, 0, p.client_count - 1));
    const auto server_idx = uniform<std::uint32_t>(rng, 0, p.server_count - 1);
    const auto server = server_idx == 0 ? p.victim_ip : kServerBase + server_idx;
    const auto& svc = kServices[uniform<std::size_t>(rng, 0, std::size(kServices) - 1)];
    const auto eph = uniform<std::uint16_t>(rng, 1024, 65535);
    const auto t = uniform<std::int64_t>(rng, p.start_ms, end - 1);

    FlowRecord req;
    req.src_ip = client;
    req.dst_ip = server;
    req.src_port = eph;
    req.dst_port = svc.port;
    req.protocol = svc.protocol;
    req.packets = uniform<std::uint64_t>(rng, 4, 40);
    req.bytes = req.packets * uniform<std::uint64_t>(rng, 60, 600);
    req.timestamp_ms = t;
    req.label = Label::kNormal;

    FlowRecord resp = req;
    std::swap(resp.src_ip, resp.dst_ip);
    std::swap(resp.src_port, resp.dst_port);
    resp.packets = uniform<std::uint64_t>(rng, 4, 60);
    resp.bytes = resp.packets * uniform<std::uint64_t>(rng, 200, 1400);
    resp.timestamp_ms = std::min(end - 1, t + uniform<std::int64_t>(rng, 0, 30));

    flows.push_back(req);
    flows.push_back(resp);
  }

  if (p.attack_flows > 0) {
    // Each attacker paces its share evenly over the duration with jitter.
    std::vector<double> phase(p.attacker_count);
    for (auto& ph : phase) ph = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    for (std::size_t j = 0; j < p.attack_flows; ++j) {
      const std::size_t attacker = j % p.attacker_count;
      const std::size_t share = (p.attack_flows - attacker + p.attacker_count - 1) / p.attacker_count;
      const std::size_t nth = j / p.attacker_count;
      const double slot = (static_cast<double>(nth) + phase[attacker]) / static_cast<double>(share);
      const double jitter = std::uniform_real_distribution<double>(-0.5, 0.5)(rng) / static_cast<double>(share);
      const double frac = std::clamp(slot + jitter, 0.0, 1.0 - 1e-9);

      FlowRecord f;
      // Mostly spoofed sources; occasionally the attacker's own address.
      f.src_ip = uniform<int>(rng, 0, 15) == 0 ? kAttackerBase + static_cast<std::uint32_t>(attacker) + 1
                                                : spoofed_address(rng);
      f.dst_ip = p.victim_ip;
      f.src_port = uniform<std::uint16_t>(rng, 1024, 65535);
      f.dst_port = p.victim_port;
      f.protocol = Protocol::kTcp;
      f.packets = uniform<std::uint64_t>(rng, 1, 3);
      f.bytes = f.packets * uniform<std::uint64_t>(rng, 40, 60);
      f.timestamp_ms = p.start_ms + static_cast<std::int64_t>(std::floor(frac * static_cast<double>(p.duration_ms)));
      f.label = Label::kAttack;
      f.stage = Stage::kAttacking;
      flows.push_back(f);
    }
  }

  std::stable_sort(flows.begin(), flows.end(),
                   [](const FlowRecord& a, const FlowRecord& b) { return a.timestamp_ms < b.timestamp_ms; });
  return flows;
}

std::vector<FlowRecord> synth_syn_flood(std::uint64_t seed, std::size_t normal_flows, std::size_t attack_flows,
                                        std::size_t attacker_count, std::int64_t duration_ms) {
  SynthParams p;
  p.seed = seed;
  p.normal_flows = normal_flows;
  p.attack_flows = attack_flows;
  p.attacker_count = attacker_count;
  p.duration_ms = duration_ms;
  return synth_syn_flood(p);
}

std::vector<FlowRecord> synth_scenario(const ScenarioParams& p) {
  if (p.window_ms <= 0) throw std::invalid_argument("synth_scenario: window_ms must be positive");
  if (p.burst_windows == 0) throw std::invalid_argument("synth_scenario: burst_windows must be >= 1");
  if (p.normal_min > p.normal_max || p.attack_min > p.attack_max) throw std::invalid_argument("synth_scenario: bad range");

  std::mt19937_64 rng(p.seed);
  const std::size_t blocks = (p.windows + p.burst_windows - 1) / p.burst_windows;
  const auto attack_blocks =
      static_cast<std::size_t>(std::llround(static_cast<double>(blocks) * std::clamp(p.attack_fraction, 0.0, 1.0)));
  std::vector<bool> block_attack(blocks, false);
  std::fill_n(block_attack.begin(), attack_blocks, true);
  std::shuffle(block_attack.begin(), block_attack.end(), rng);

  std::vector<FlowRecord> flows;
  for (std::size_t w = 0; w < p.windows; ++w) {
    SynthParams sp;
    sp.seed = splitmix(p.seed ^ splitmix(w + 1));
    sp.normal_flows = uniform<std::size_t>(rng, p.normal_min, p.normal_max);
    sp.attack_flows = block_attack[w / p.burst_windows] ? uniform<std::size_t>(rng, p.attack_min, p.attack_max) : 0;
    sp.attacker_count = p.attacker_count;
    sp.start_ms = p.start_ms + static_cast<std::int64_t>(w) * p.window_ms;
    sp.duration_ms = p.window_ms;
    auto part = synth_syn_flood(sp);
    flows.insert(flows.end(), part.begin(), part.end());
  }
  return flows;
}

}  // namespace predis
