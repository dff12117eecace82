#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "predis/error.hpp"

namespace predis {

enum class Protocol : std::uint8_t { kTcp, kUdp, kIcmp, kOther };
enum class Label : std::uint8_t { kNormal, kAttack, kUnlabeled };
enum class Stage : std::uint8_t { kNone, kScanning, kIntrusion, kAttacking };

std::string_view to_string(Protocol p);
std::string_view to_string(Label l);
std::string_view to_string(Stage s);
std::optional<Protocol> parse_protocol(std::string_view s);
std::optional<Label> parse_label(std::string_view s);
std::optional<Stage> parse_stage(std::string_view s);

std::string format_ipv4(std::uint32_t addr);
std::optional<std::uint32_t> parse_ipv4(std::string_view s);

/// One flow-table entry. Addresses are IPv4 in host byte order.
struct FlowRecord {
  std::uint32_t src_ip = 0;
  std::uint32_t dst_ip = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  Protocol protocol = Protocol::kTcp;
  std::uint64_t bytes = 0;
  std::uint64_t packets = 1;
  std::int64_t timestamp_ms = 0;
  Label label = Label::kUnlabeled;
  Stage stage = Stage::kNone;

  friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

/// Returns an empty string when the record satisfies packets >= 1 and
/// (stage != NONE implies label == ATTACK); otherwise a description.
std::string validate(const FlowRecord& flow);

inline constexpr std::int64_t kDefaultWindowMs = 3000;

/// A fixed-length slice of one domain's flow stream. Flows lie in
/// [window_start_ms, window_start_ms + window_length_ms).
struct FlowWindow {
  std::uint32_t domain_id = 0;
  std::int64_t window_start_ms = 0;
  std::int64_t window_length_ms = kDefaultWindowMs;
  std::vector<FlowRecord> flows;

  bool has_attack() const;
};

enum class FlowErrc { kMissingColumn, kBadValue, kEmptyFile, kIo };

class FlowLoadError : public Error<FlowErrc> {
 public:
  FlowLoadError(FlowErrc code, const std::string& what, std::size_t row = 0, std::string column = {})
      : Error(code, what), row_(row), column_(std::move(column)) {}

  // 1-based data row (header excluded); 0 when not row-specific.
  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

inline constexpr std::string_view kFlowCsvHeader =
    "src_ip,dst_ip,src_port,dst_port,protocol,bytes,packets,timestamp_ms,label,stage";

std::vector<FlowRecord> load_flows_csv(std::istream& in);
std::vector<FlowRecord> load_flows_csv(const std::filesystem::path& path);

void write_flows_csv(std::ostream& out, const std::vector<FlowRecord>& flows);
void write_flows_csv(const std::filesystem::path& path, const std::vector<FlowRecord>& flows);

/// Splits flows into consecutive windows of window_length_ms starting at the
/// earliest timestamp. Empty windows inside the span are kept. Flow order
/// within a window follows input order.
std::vector<FlowWindow> window_flows(const std::vector<FlowRecord>& flows, std::uint32_t domain_id,
                                     std::int64_t window_length_ms = kDefaultWindowMs);

/// Same tiling, but with window boundaries aligned to origin_ms instead of the
/// earliest timestamp. The first window is still the one holding the earliest
/// flow.
/// Flows before origin_ms are rejected with std::invalid_argument.
std::vector<FlowWindow> window_flows_from(const std::vector<FlowRecord>& flows, std::uint32_t domain_id,
                                          std::int64_t window_length_ms, std::int64_t origin_ms);

// ---------------------------------------------------------------------------
// Synthetic SYN-flood traffic.

struct SynthParams {
  std::uint64_t seed = 1;
  std::size_t normal_flows = 0;
  std::size_t attack_flows = 0;
  std::size_t attacker_count = 5;
  std::int64_t duration_ms = 3000;
  std::int64_t start_ms = 0;

  // Address pools for the legitimate side.
  std::uint32_t client_count = 40;
  std::uint32_t server_count = 8;
  std::uint32_t victim_ip = 0xC0A80A0A;  // 192.168.10.10
  std::uint16_t victim_port = 80;
};

/// Generates a deterministic mix of legitimate and SYN-flood flows.
///
/// Legitimate traffic is emitted as request/response pairs between a client
/// pool and a server pool, so every normal flow has a reverse partner with the
/// same protocol. An odd normal_flows is rounded up to the next even count.
/// Attack flows come from attacker_count hosts that spoof a fresh source
/// address and port per flow, carry 1-3 packets and are labeled
/// ATTACK/ATTACKING. Output is sorted by timestamp.
std::vector<FlowRecord> synth_syn_flood(const SynthParams& params);

std::vector<FlowRecord> synth_syn_flood(std::uint64_t seed, std::size_t normal_flows, std::size_t attack_flows,
                                        std::size_t attacker_count, std::int64_t duration_ms);

/// Per-window traffic intensities for a multi-window scenario.
struct ScenarioParams {
  std::uint64_t seed = 1;
  std::size_t windows = 200;
  double attack_fraction = 0.5;
  std::int64_t window_ms = kDefaultWindowMs;
  std::int64_t start_ms = 0;
  std::size_t normal_min = 40;
  std::size_t normal_max = 120;
  std::size_t attack_min = 150;
  std::size_t attack_max = 600;
  std::size_t attacker_count = 5;
  // Attack windows occur in contiguous bursts of this many windows.
  std::size_t burst_windows = 5;
};

/// Builds a window-aligned scenario: a background of legitimate traffic in
/// every window, with SYN-flood bursts covering about attack_fraction of the
/// windows. Each window's traffic is produced by synth_syn_flood.
std::vector<FlowRecord> synth_scenario(const ScenarioParams& params);

}  // namespace predis
