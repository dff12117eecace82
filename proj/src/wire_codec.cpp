#include <algorithm>

#include "predis/bitpack.hpp"
#include "predis/transport.hpp"

namespace predis {

namespace {

constexpr unsigned kCountBits = 32;

TransportError malformed(const std::string& what) { return TransportError(TransportErrc::kMalformedPayload, what); }

bool known_type(std::uint8_t t) { return t >= 0x01 && t <= 0x06; }

std::size_t prelim_payload_bytes(std::uint64_t n) {
  const std::uint64_t bits = 2 * kAttributeBits + kCountBits + n * kFeatureCount * kAttributeBits;
  return static_cast<std::size_t>((bits + 7) / 8);
}

std::array<std::uint8_t, kTupleBlockBytes> block_of(std::span<const std::uint8_t> payload) {
  if (payload.size() != kTupleBlockBytes) throw malformed("block payload must be 29 bytes");
  std::array<std::uint8_t, kTupleBlockBytes> b{};
  std::copy(payload.begin(), payload.end(), b.begin());
  return b;
}

}  // namespace

MsgType message_type(const Message& msg) {
  return std::visit(
      [](const auto& m) -> MsgType {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, TupleMsg>) return MsgType::kTuple;
        else if constexpr (std::is_same_v<T, MaskMsg>) return MsgType::kMask;
        else if constexpr (std::is_same_v<T, TopologyMsg>) return MsgType::kTopology;
        else if constexpr (std::is_same_v<T, PrelimMsg>) return MsgType::kPrelim;
        else if constexpr (std::is_same_v<T, AlarmMsg>) return MsgType::kAlarm;
        else return MsgType::kAck;
      },
      msg);
}

std::vector<std::uint8_t> encode_prelim(const PreliminaryResult& r) {
  std::vector<std::uint8_t> out;
  out.reserve(prelim_payload_bytes(r.per_instance_diffs.size()));
  BitWriter w(out);
  w.write(r.serial_number, kAttributeBits);
  w.write(r.time, kAttributeBits);
  w.write(r.per_instance_diffs.size(), kCountBits);
  for (const auto& row : r.per_instance_diffs) {
    for (auto v : row) {
      if (v > kAttributeMask) throw malformed("preliminary value exceeds 33 bits");
      w.write(v, kAttributeBits);
    }
  }
  w.flush();
  return out;
}

PreliminaryResult decode_prelim(std::span<const std::uint8_t> payload) {
  if (payload.size() < prelim_payload_bytes(0)) throw malformed("prelim payload truncated");
  BitReader r(payload);
  PreliminaryResult out;
  out.serial_number = r.read(kAttributeBits);
  out.time = r.read(kAttributeBits);
  const auto n = r.read(kCountBits);
  if (payload.size() != prelim_payload_bytes(n)) throw malformed("prelim payload length does not match n_train");
  out.per_instance_diffs.resize(n);
  for (auto& row : out.per_instance_diffs) {
    for (auto& v : row) v = r.read(kAttributeBits);
  }
  if (r.bits_remaining() > 0 && r.read(static_cast<unsigned>(r.bits_remaining())) != 0) {
    throw malformed("prelim padding not zero");
  }
  return out;
}

std::vector<std::uint8_t> encode_payload(const Message& msg) {
  return std::visit(
      [](const auto& m) -> std::vector<std::uint8_t> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, TupleMsg>) {
          const auto b = encode_masked_tuple(m.tuple);
          return {b.begin(), b.end()};
        } else if constexpr (std::is_same_v<T, MaskMsg>) {
          const auto b = encode_mask(m.mask);
          return {b.begin(), b.end()};
        } else if constexpr (std::is_same_v<T, TopologyMsg>) {
          return m.topology.serialize();
        } else if constexpr (std::is_same_v<T, PrelimMsg>) {
          return encode_prelim(m.result);
        } else if constexpr (std::is_same_v<T, AlarmMsg>) {
          std::vector<std::uint8_t> out;
          BitWriter w(out);
          w.write(m.alarm.serial_number, kAttributeBits);
          w.write(m.alarm.time, kAttributeBits);
          w.write(m.alarm.neighbor_margin, kCountBits);
          w.flush();
          return out;
        } else {
          return {};
        }
      },
      msg);
}

Message decode_payload(MsgType type, std::span<const std::uint8_t> payload) {
  try {
    switch (type) {
      case MsgType::kTuple: return TupleMsg{decode_masked_tuple(block_of(payload))};
      case MsgType::kMask: return MaskMsg{decode_mask(block_of(payload))};
      case MsgType::kTopology: return TopologyMsg{KdTreeModel::deserialize(payload)};
      case MsgType::kPrelim: return PrelimMsg{decode_prelim(payload)};
      case MsgType::kAlarm: {
        if (payload.size() != 13) throw malformed("alarm payload must be 13 bytes");
        BitReader r(payload);
        Alarm a;
        a.serial_number = r.read(kAttributeBits);
        a.time = r.read(kAttributeBits);
        a.neighbor_margin = static_cast<std::uint32_t>(r.read(kCountBits));
        if (r.read(static_cast<unsigned>(r.bits_remaining())) != 0) throw malformed("alarm padding not zero");
        return AlarmMsg{a};
      }
      case MsgType::kAck:
        if (!payload.empty()) throw malformed("ack carries no payload");
        return AckMsg{};
    }
  } catch (const TransportError&) {
    throw;
  } catch (const std::exception& e) {
    throw malformed(e.what());
  }
  throw TransportError(TransportErrc::kUnknownType, "unknown message type");
}

std::vector<std::uint8_t> encode_frame(const Message& msg) {
  const auto payload = encode_payload(msg);
  if (payload.size() > kMaxPayloadBytes) throw TransportError(TransportErrc::kOversizeFrame, "payload exceeds 64 MiB");
  const auto length = static_cast<std::uint32_t>(payload.size() + 1);
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderBytes + payload.size());
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(length >> shift));
  out.push_back(static_cast<std::uint8_t>(message_type(msg)));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

void FrameDecoder::feed(std::span<const std::uint8_t> chunk) {
  if (offset_ > 0 && offset_ >= buffer_.size() / 2) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset_));
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), chunk.begin(), chunk.end());
}

std::optional<Message> FrameDecoder::next() {
  if (buffered() < kFrameHeaderBytes) return std::nullopt;
  const std::uint8_t* p = buffer_.data() + offset_;
  const std::uint32_t length = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
                               (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
  if (length == 0) throw malformed("frame length must include the type byte");
  if (length - 1 > kMaxPayloadBytes) throw TransportError(TransportErrc::kOversizeFrame, "frame exceeds 64 MiB");
  if (!known_type(p[4])) throw TransportError(TransportErrc::kUnknownType, "unknown message type " + std::to_string(p[4]));
  if (buffered() < 4 + std::size_t{length}) return std::nullopt;

  const auto type = static_cast<MsgType>(p[4]);
  const std::span<const std::uint8_t> payload(p + kFrameHeaderBytes, length - 1);
  auto msg = decode_payload(type, payload);
  offset_ += 4 + std::size_t{length};
  if (offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  return msg;
}

Message decode_frame(std::span<const std::uint8_t> bytes) {
  FrameDecoder dec;
  dec.feed(bytes);
  auto msg = dec.next();
  if (!msg) throw TransportError(TransportErrc::kTruncatedFrame, "incomplete frame");
  if (dec.buffered() != 0) throw malformed("trailing bytes after frame");
  return std::move(*msg);
}

}  // namespace predis
