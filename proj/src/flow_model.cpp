#include "predis/flow_model.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace predis {

namespace {

constexpr std::array<std::string_view, 10> kColumns = {"src_ip",  "dst_ip",       "src_port", "dst_port",
                                                       "protocol", "bytes",       "packets",  "timestamp_ms",
                                                       "label",    "stage"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

template <typename T>
std::optional<T> parse_int(std::string_view s) {
  T value{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
  return value;
}

}  // namespace

std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::kTcp: return "TCP";
    case Protocol::kUdp: return "UDP";
    case Protocol::kIcmp: return "ICMP";
    case Protocol::kOther: return "OTHER";
  }
  return "OTHER";
}

std::string_view to_string(Label l) {
  switch (l) {
    case Label::kNormal: return "NORMAL";
    case Label::kAttack: return "ATTACK";
    case Label::kUnlabeled: return "UNLABELED";
  }
  return "UNLABELED";
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kNone: return "NONE";
    case Stage::kScanning: return "SCANNING";
    case Stage::kIntrusion: return "INTRUSION";
    case Stage::kAttacking: return "ATTACKING";
  }
  return "NONE";
}

std::optional<Protocol> parse_protocol(std::string_view s) {
  if (s == "TCP") return Protocol::kTcp;
  if (s == "UDP") return Protocol::kUdp;
  if (s == "ICMP") return Protocol::kIcmp;
  if (s == "OTHER") return Protocol::kOther;
  return std::nullopt;
}

std::optional<Label> parse_label(std::string_view s) {
  if (s == "NORMAL") return Label::kNormal;
  if (s == "ATTACK") return Label::kAttack;
  if (s == "UNLABELED") return Label::kUnlabeled;
  return std::nullopt;
}

std::optional<Stage> parse_stage(std::string_view s) {
  if (s == "NONE") return Stage::kNone;
  if (s == "SCANNING") return Stage::kScanning;
  if (s == "INTRUSION") return Stage::kIntrusion;
  if (s == "ATTACKING") return Stage::kAttacking;
  return std::nullopt;
}

std::string format_ipv4(std::uint32_t addr) {
  std::ostringstream os;
  os << (addr >> 24) << '.' << ((addr >> 16) & 0xFF) << '.' << ((addr >> 8) & 0xFF) << '.' << (addr & 0xFF);
  return os.str();
}

std::optional<std::uint32_t> parse_ipv4(std::string_view s) {
  std::uint32_t addr = 0;
  for (int octet = 0; octet < 4; ++octet) {
    const auto dot = s.find('.');
    const bool last = octet == 3;
    if (last != (dot == std::string_view::npos)) return std::nullopt;
    const auto part = last ? s : s.substr(0, dot);
    if (part.empty() || part.size() > 3) return std::nullopt;
    const auto v = parse_int<unsigned>(part);
    if (!v || *v > 255) return std::nullopt;
    addr = (addr << 8) | *v;
    if (!last) s.remove_prefix(dot + 1);
  }
  return addr;
}

std::string validate(const FlowRecord& flow) {
  if (flow.packets < 1) return "packets must be >= 1";
  if (flow.stage != Stage::kNone && flow.label != Label::kAttack) return "stage set on a non-ATTACK flow";
  return {};
}

bool FlowWindow::has_attack() const {
  return std::any_of(flows.begin(), flows.end(), [](const FlowRecord& f) { return f.label == Label::kAttack; });
}

std::vector<FlowRecord> load_flows_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) throw FlowLoadError(FlowErrc::kEmptyFile, "flow CSV: no header");

  const auto header = split_csv(line);
  std::array<std::size_t, kColumns.size()> index{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    const auto it = std::find(header.begin(), header.end(), kColumns[c]);
    if (it == header.end()) {
      throw FlowLoadError(FlowErrc::kMissingColumn, "flow CSV: missing column '" + std::string(kColumns[c]) + "'", 0,
                          std::string(kColumns[c]));
    }
    index[c] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<FlowRecord> flows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_csv(line);
    auto cell = [&](std::size_t c) -> std::string_view {
      if (index[c] >= cells.size()) {
        throw FlowLoadError(FlowErrc::kBadValue, "flow CSV row " + std::to_string(row) + ": too few cells", row,
                            std::string(kColumns[c]));
      }
      return cells[index[c]];
    };
    auto bad = [&](std::size_t c, const std::string& why = "unparseable") {
      return FlowLoadError(FlowErrc::kBadValue,
                           "flow CSV row " + std::to_string(row) + " column " + std::string(kColumns[c]) + ": " + why,
                           row, std::string(kColumns[c]));
    };

    FlowRecord f;
    if (auto v = parse_ipv4(cell(0))) f.src_ip = *v; else throw bad(0);
    if (auto v = parse_ipv4(cell(1))) f.dst_ip = *v; else throw bad(1);
    if (auto v = parse_int<std::uint16_t>(cell(2))) f.src_port = *v; else throw bad(2);
    if (auto v = parse_int<std::uint16_t>(cell(3))) f.dst_port = *v; else throw bad(3);
    if (auto v = parse_protocol(cell(4))) f.protocol = *v; else throw bad(4);
    if (auto v = parse_int<std::uint64_t>(cell(5))) f.bytes = *v; else throw bad(5);
    if (auto v = parse_int<std::uint64_t>(cell(6))) f.packets = *v; else throw bad(6);
    if (f.packets < 1) throw bad(6, "packets must be >= 1");
    if (auto v = parse_int<std::int64_t>(cell(7))) f.timestamp_ms = *v; else throw bad(7);
    if (auto v = parse_label(cell(8))) f.label = *v; else throw bad(8);
    if (auto v = parse_stage(cell(9))) f.stage = *v; else throw bad(9);
    if (f.stage != Stage::kNone && f.label != Label::kAttack) throw bad(9, "stage requires label ATTACK");
    flows.push_back(f);
  }
  if (flows.empty()) throw FlowLoadError(FlowErrc::kEmptyFile, "flow CSV: no data rows");
  return flows;
}

std::vector<FlowRecord> load_flows_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FlowLoadError(FlowErrc::kIo, "cannot open " + path.string());
  return load_flows_csv(in);
}

void write_flows_csv(std::ostream& out, const std::vector<FlowRecord>& flows) {
  out << kFlowCsvHeader << '\n';
  for (const auto& f : flows) {
    out << format_ipv4(f.src_ip) << ',' << format_ipv4(f.dst_ip) << ',' << f.src_port << ',' << f.dst_port << ','
        << to_string(f.protocol) << ',' << f.bytes << ',' << f.packets << ',' << f.timestamp_ms << ','
        << to_string(f.label) << ',' << to_string(f.stage) << '\n';
  }
}

void write_flows_csv(const std::filesystem::path& path, const std::vector<FlowRecord>& flows) {
  std::ofstream out(path);
  if (!out) throw FlowLoadError(FlowErrc::kIo, "cannot write " + path.string());
  write_flows_csv(out, flows);
}

std::vector<FlowWindow> window_flows_from(const std::vector<FlowRecord>& flows, std::uint32_t domain_id,
                                          std::int64_t window_length_ms, std::int64_t origin_ms) {
  if (window_length_ms <= 0) throw std::invalid_argument("window_flows: window length must be positive");
  if (flows.empty()) return {};

  const auto [lo, hi] = std::minmax_element(flows.begin(), flows.end(), [](const auto& a, const auto& b) {
    return a.timestamp_ms < b.timestamp_ms;
  });
  if (lo->timestamp_ms < origin_ms) throw std::invalid_argument("window_flows: flow precedes origin");

  const std::int64_t first = (lo->timestamp_ms - origin_ms) / window_length_ms;
  const std::int64_t last = (hi->timestamp_ms - origin_ms) / window_length_ms;
  std::vector<FlowWindow> windows(static_cast<std::size_t>(last - first + 1));
  for (std::size_t i = 0; i < windows.size(); ++i) {
    windows[i].domain_id = domain_id;
    windows[i].window_length_ms = window_length_ms;
    windows[i].window_start_ms = origin_ms + (first + static_cast<std::int64_t>(i)) * window_length_ms;
  }
  for (const auto& f : flows) {
    const auto slot = (f.timestamp_ms - origin_ms) / window_length_ms - first;
    windows[static_cast<std::size_t>(slot)].flows.push_back(f);
  }
  return windows;
}

std::vector<FlowWindow> window_flows(const std::vector<FlowRecord>& flows, std::uint32_t domain_id,
                                     std::int64_t window_length_ms) {
  if (window_length_ms <= 0) throw std::invalid_argument("window_flows: window length must be positive");
  if (flows.empty()) return {};
  const auto origin = std::min_element(flows.begin(), flows.end(), [](const auto& a, const auto& b) {
                        return a.timestamp_ms < b.timestamp_ms;
                      })->timestamp_ms;
  return window_flows_from(flows, domain_id, window_length_ms, origin);
}

}  // namespace predis
