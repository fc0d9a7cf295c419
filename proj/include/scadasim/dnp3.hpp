#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "scadasim/util.hpp"

// DNP3 link-frame and application-fragment codec.
//
// Framing follows the IEEE 1815 link layer: a 10-octet header
// (05 64 | length | control | destination | source | crc) followed by the
// user payload split into 16-octet blocks, each with a trailing 2-octet CRC.
// One deliberate simplification: the payload may be up to 292 octets, which
// exceeds what the single length octet can express, so the stored length is
// (5 + payload) mod 256 and decode derives the true payload size from the
// buffer (frame boundaries come from the transport, which delivers exactly
// one frame per message).
//
// The application layer uses a fixed explicit-index qualifier for all four
// point-group kinds; analog values travel as little-endian IEEE doubles.

namespace scadasim::dnp3 {

// ---------------------------------------------------------------------------
// CRC
// ---------------------------------------------------------------------------

// DNP3 link CRC: polynomial 0x3D65 (reflected form 0xA6BC), zero initial
// value, final one's-complement. check("123456789") == 0xEA82.
namespace detail {
constexpr std::array<std::uint16_t, 256> make_crc_table() {
  std::array<std::uint16_t, 256> table{};
  for (std::uint16_t i = 0; i < 256; ++i) {
    std::uint16_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? static_cast<std::uint16_t>((c >> 1) ^ 0xA6BC) : static_cast<std::uint16_t>(c >> 1);
    table[i] = c;
  }
  return table;
}
inline constexpr std::array<std::uint16_t, 256> kCrcTable = make_crc_table();
}  // namespace detail

inline std::uint16_t crc(ByteView data) {
  std::uint16_t c = 0;
  for (std::uint8_t b : data) c = static_cast<std::uint16_t>((c >> 8) ^ detail::kCrcTable[(c ^ b) & 0xFF]);
  return static_cast<std::uint16_t>(~c);
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class DecodeStatus {
  BadSync,
  BadHeaderCrc,
  BadBlockCrc,
  Truncated,
  UnknownFunctionCode,
  Malformed,
};

inline const char* to_string(DecodeStatus s) {
  switch (s) {
    case DecodeStatus::BadSync: return "BadSync";
    case DecodeStatus::BadHeaderCrc: return "BadHeaderCrc";
    case DecodeStatus::BadBlockCrc: return "BadBlockCrc";
    case DecodeStatus::Truncated: return "Truncated";
    case DecodeStatus::UnknownFunctionCode: return "UnknownFunctionCode";
    case DecodeStatus::Malformed: return "Malformed";
  }
  return "?";
}

class DecodeError : public std::runtime_error {
 public:
  DecodeError(DecodeStatus status, const std::string& what, int block = -1)
      : std::runtime_error(what), status_(status), block_(block) {}
  DecodeStatus status() const { return status_; }
  int block_index() const { return block_; }

 private:
  DecodeStatus status_;
  int block_;
};

class EncodeError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Link frame
// ---------------------------------------------------------------------------

constexpr std::size_t kMaxPayload = 292;
constexpr std::size_t kBlockSize = 16;
constexpr std::size_t kHeaderSize = 10;
constexpr std::uint8_t kSync0 = 0x05;
constexpr std::uint8_t kSync1 = 0x64;

struct LinkHeader {
  std::uint8_t link_control = 0xC4;
  std::uint16_t destination = 0;
  std::uint16_t source = 0;
};

struct Frame {
  LinkHeader header;
  Bytes payload;
};

inline std::size_t encoded_frame_size(std::size_t payload_len) {
  return kHeaderSize + payload_len + 2 * ((payload_len + kBlockSize - 1) / kBlockSize);
}

inline Bytes encode_frame(const LinkHeader& h, ByteView payload) {
  if (payload.size() > kMaxPayload)
    throw EncodeError("PayloadTooLarge: " + std::to_string(payload.size()) + " > " +
                      std::to_string(kMaxPayload));
  Bytes out;
  out.reserve(encoded_frame_size(payload.size()));
  out.push_back(kSync0);
  out.push_back(kSync1);
  out.push_back(static_cast<std::uint8_t>((5 + payload.size()) & 0xFF));
  out.push_back(h.link_control);
  put_u16(out, h.destination);
  put_u16(out, h.source);
  put_u16(out, crc(ByteView(out.data(), 8)));
  for (std::size_t off = 0; off < payload.size(); off += kBlockSize) {
    std::size_t n = std::min(kBlockSize, payload.size() - off);
    ByteView block(payload.data() + off, n);
    out.insert(out.end(), block.begin(), block.end());
    put_u16(out, crc(block));
  }
  return out;
}

inline Frame decode_frame(ByteView raw) {
  if (raw.size() < kHeaderSize)
    throw DecodeError(DecodeStatus::Truncated, "frame shorter than 10-octet header");
  if (raw[0] != kSync0 || raw[1] != kSync1)
    throw DecodeError(DecodeStatus::BadSync, "bad sync octets");
  if (get_u16(raw, 8) != crc(raw.subspan(0, 8)))
    throw DecodeError(DecodeStatus::BadHeaderCrc, "header CRC mismatch");

  // Payload length is implied by the buffer: k full 18-octet blocks plus an
  // optional partial block of 3..17 octets (1..15 data + CRC).
  std::size_t body = raw.size() - kHeaderSize;
  std::size_t full = body / (kBlockSize + 2);
  std::size_t rem = body % (kBlockSize + 2);
  std::size_t payload_len;
  if (rem == 0) {
    payload_len = full * kBlockSize;
  } else if (rem >= 3) {
    payload_len = full * kBlockSize + (rem - 2);
  } else {
    throw DecodeError(DecodeStatus::Truncated, "frame body not decomposable into CRC blocks");
  }
  if (payload_len > kMaxPayload)
    throw DecodeError(DecodeStatus::Truncated, "implied payload exceeds 292 octets");
  if (raw[2] != ((5 + payload_len) & 0xFF))
    throw DecodeError(DecodeStatus::Truncated, "length octet inconsistent with frame size");

  Frame f;
  f.header.link_control = raw[3];
  f.header.destination = get_u16(raw, 4);
  f.header.source = get_u16(raw, 6);
  f.payload.reserve(payload_len);
  std::size_t off = kHeaderSize;
  int block_index = 0;
  while (off < raw.size()) {
    std::size_t n = std::min(kBlockSize, raw.size() - 2 - off);
    ByteView block = raw.subspan(off, n);
    if (get_u16(raw, off + n) != crc(block))
      throw DecodeError(DecodeStatus::BadBlockCrc,
                        "block " + std::to_string(block_index) + " CRC mismatch", block_index);
    f.payload.insert(f.payload.end(), block.begin(), block.end());
    off += n + 2;
    ++block_index;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Transport layer (single segment per frame)
// ---------------------------------------------------------------------------

constexpr std::uint8_t kTransportFin = 0x80;
constexpr std::uint8_t kTransportFir = 0x40;

inline Bytes wrap_transport(std::uint8_t seq, ByteView app) {
  Bytes out;
  out.reserve(app.size() + 1);
  out.push_back(static_cast<std::uint8_t>(kTransportFin | kTransportFir | (seq & 0x3F)));
  out.insert(out.end(), app.begin(), app.end());
  return out;
}

inline ByteView unwrap_transport(ByteView payload) {
  if (payload.empty()) throw DecodeError(DecodeStatus::Malformed, "empty transport payload");
  if ((payload[0] & (kTransportFin | kTransportFir)) != (kTransportFin | kTransportFir))
    throw DecodeError(DecodeStatus::Malformed, "multi-segment transport not supported");
  return payload.subspan(1);
}

// ---------------------------------------------------------------------------
// Application layer
// ---------------------------------------------------------------------------

enum class FunctionCode : std::uint8_t {
  Confirm = 0x00,
  Read = 0x01,
  Read2 = 0x02,
  Select = 0x03,
  Operate = 0x04,
  DirectOperate = 0x05,
  SolicitedResponse = 0x81,
  UnsolicitedResponse = 0x82,
};

inline std::optional<FunctionCode> to_function_code(std::uint8_t octet) {
  switch (octet) {
    case 0x00: return FunctionCode::Confirm;
    case 0x01: return FunctionCode::Read;
    case 0x02: return FunctionCode::Read2;
    case 0x03: return FunctionCode::Select;
    case 0x04: return FunctionCode::Operate;
    case 0x05: return FunctionCode::DirectOperate;
    case 0x81: return FunctionCode::SolicitedResponse;
    case 0x82: return FunctionCode::UnsolicitedResponse;
    default: return std::nullopt;
  }
}

inline bool is_response(FunctionCode f) {
  return f == FunctionCode::SolicitedResponse || f == FunctionCode::UnsolicitedResponse;
}

inline const char* to_string(FunctionCode f) {
  switch (f) {
    case FunctionCode::Confirm: return "Confirm";
    case FunctionCode::Read: return "Read";
    case FunctionCode::Read2: return "Read2";
    case FunctionCode::Select: return "Select";
    case FunctionCode::Operate: return "Operate";
    case FunctionCode::DirectOperate: return "DirectOperate";
    case FunctionCode::SolicitedResponse: return "SolicitedResponse";
    case FunctionCode::UnsolicitedResponse: return "UnsolicitedResponse";
  }
  return "?";
}

// CROB-style control codes: trip/close use the IEEE 1815 trip-close pair
// bits over a pulse-on operation; latch variants are plain operation codes.
enum class ControlCode : std::uint8_t {
  LatchOn = 0x03,
  LatchOff = 0x04,
  Close = 0x41,
  Trip = 0x81,
};

inline std::optional<ControlCode> to_control_code(std::uint8_t octet) {
  switch (octet) {
    case 0x03: return ControlCode::LatchOn;
    case 0x04: return ControlCode::LatchOff;
    case 0x41: return ControlCode::Close;
    case 0x81: return ControlCode::Trip;
    default: return std::nullopt;
  }
}

inline const char* to_string(ControlCode c) {
  switch (c) {
    case ControlCode::LatchOn: return "LATCH_ON";
    case ControlCode::LatchOff: return "LATCH_OFF";
    case ControlCode::Close: return "CLOSE";
    case ControlCode::Trip: return "TRIP";
  }
  return "?";
}

enum class GroupKind : std::uint8_t {
  BinaryInput = 0x01,
  AnalogInput = 0x02,
  BinaryOutputCommand = 0x03,
  AnalogOutputCommand = 0x04,
};

inline std::optional<GroupKind> to_group_kind(std::uint8_t octet) {
  if (octet >= 0x01 && octet <= 0x04) return static_cast<GroupKind>(octet);
  return std::nullopt;
}

inline const char* to_string(GroupKind k) {
  switch (k) {
    case GroupKind::BinaryInput: return "BinaryInput";
    case GroupKind::AnalogInput: return "AnalogInput";
    case GroupKind::BinaryOutputCommand: return "BinaryOutputCommand";
    case GroupKind::AnalogOutputCommand: return "AnalogOutputCommand";
  }
  return "?";
}

// Value alternative must match the owning group's kind:
// BinaryInput -> bool, AnalogInput/AnalogOutputCommand -> double,
// BinaryOutputCommand -> ControlCode.
using PointValue = std::variant<bool, ControlCode, double>;

struct Point {
  std::uint16_t index = 0;
  PointValue value;
};

struct PointGroup {
  GroupKind kind = GroupKind::BinaryInput;
  std::vector<Point> points;
};

struct AppControl {
  std::uint8_t seq = 0;  // 0..15
  bool fir = true;
  bool fin = true;
  bool con = false;
  bool uns = false;
};

struct AppFragment {
  AppControl control;
  FunctionCode function = FunctionCode::Read;
  std::optional<std::uint16_t> iin;  // responses only
  std::vector<PointGroup> objects;
};

namespace detail {

inline bool value_matches_kind(GroupKind kind, const PointValue& v) {
  switch (kind) {
    case GroupKind::BinaryInput: return std::holds_alternative<bool>(v);
    case GroupKind::AnalogInput: return std::holds_alternative<double>(v);
    case GroupKind::BinaryOutputCommand: return std::holds_alternative<ControlCode>(v);
    case GroupKind::AnalogOutputCommand: return std::holds_alternative<double>(v);
  }
  return false;
}

}  // namespace detail

inline Bytes encode_app(const AppFragment& frag) {
  if (is_response(frag.function) != frag.iin.has_value())
    throw EncodeError(is_response(frag.function) ? "response fragment requires an iin field"
                                                 : "request fragment must not carry iin");
  if (frag.control.seq > 15) throw EncodeError("application sequence out of range");
  Bytes out;
  out.push_back(static_cast<std::uint8_t>((frag.control.fir ? 0x80 : 0) | (frag.control.fin ? 0x40 : 0) |
                                          (frag.control.con ? 0x20 : 0) | (frag.control.uns ? 0x10 : 0) |
                                          (frag.control.seq & 0x0F)));
  out.push_back(static_cast<std::uint8_t>(frag.function));
  if (frag.iin) put_u16(out, *frag.iin);
  for (const auto& group : frag.objects) {
    if (group.points.size() > 0xFFFF) throw EncodeError("too many points in group");
    out.push_back(static_cast<std::uint8_t>(group.kind));
    put_u16(out, static_cast<std::uint16_t>(group.points.size()));
    std::int32_t prev = -1;
    for (const auto& pt : group.points) {
      if (pt.index <= prev) throw EncodeError("point indices must be strictly increasing");
      prev = pt.index;
      if (!detail::value_matches_kind(group.kind, pt.value))
        throw EncodeError("point value does not match group kind");
      put_u16(out, pt.index);
      switch (group.kind) {
        case GroupKind::BinaryInput:
          out.push_back(std::get<bool>(pt.value) ? 0x01 : 0x00);
          break;
        case GroupKind::AnalogInput:
          put_f64(out, std::get<double>(pt.value));
          break;
        case GroupKind::BinaryOutputCommand:
          out.push_back(static_cast<std::uint8_t>(std::get<ControlCode>(pt.value)));
          break;
        case GroupKind::AnalogOutputCommand:
          put_f64(out, std::get<double>(pt.value));
          break;
      }
    }
  }
  return out;
}

inline AppFragment decode_app(ByteView raw) {
  std::size_t at = 0;
  auto need = [&](std::size_t n) {
    if (at + n > raw.size())
      throw DecodeError(DecodeStatus::Malformed, "application fragment truncated");
  };
  need(2);
  AppFragment frag;
  std::uint8_t ctl = raw[at++];
  frag.control.fir = ctl & 0x80;
  frag.control.fin = ctl & 0x40;
  frag.control.con = ctl & 0x20;
  frag.control.uns = ctl & 0x10;
  frag.control.seq = ctl & 0x0F;
  auto fn = to_function_code(raw[at++]);
  if (!fn)
    throw DecodeError(DecodeStatus::UnknownFunctionCode,
                      "unknown function octet 0x" + to_hex(ByteView(&raw[at - 1], 1)));
  frag.function = *fn;
  if (is_response(frag.function)) {
    need(2);
    frag.iin = get_u16(raw, at);
    at += 2;
  }
  while (at < raw.size()) {
    need(3);
    auto kind = to_group_kind(raw[at]);
    if (!kind) throw DecodeError(DecodeStatus::Malformed, "unknown point-group kind");
    std::uint16_t count = get_u16(raw, at + 1);
    at += 3;
    PointGroup group;
    group.kind = *kind;
    group.points.reserve(count);
    std::int32_t prev = -1;
    for (std::uint16_t i = 0; i < count; ++i) {
      need(2);
      Point pt;
      pt.index = get_u16(raw, at);
      at += 2;
      if (pt.index <= prev)
        throw DecodeError(DecodeStatus::Malformed, "point indices not strictly increasing");
      prev = pt.index;
      switch (group.kind) {
        case GroupKind::BinaryInput: {
          need(1);
          std::uint8_t v = raw[at++];
          if (v > 1) throw DecodeError(DecodeStatus::Malformed, "binary input octet not 0/1");
          pt.value = (v == 1);
          break;
        }
        case GroupKind::AnalogInput:
          need(8);
          pt.value = get_f64(raw, at);
          at += 8;
          break;
        case GroupKind::BinaryOutputCommand: {
          need(1);
          auto cc = to_control_code(raw[at++]);
          if (!cc) throw DecodeError(DecodeStatus::Malformed, "unknown control code octet");
          pt.value = *cc;
          break;
        }
        case GroupKind::AnalogOutputCommand:
          need(8);
          pt.value = get_f64(raw, at);
          at += 8;
          break;
      }
      group.points.push_back(pt);
    }
    frag.objects.push_back(std::move(group));
  }
  return frag;
}

// Convenience: full encode/decode between an application fragment and a link
// frame with the single-segment transport octet in between.
inline Bytes encode_message(const LinkHeader& h, std::uint8_t transport_seq, const AppFragment& frag) {
  return encode_frame(h, wrap_transport(transport_seq, encode_app(frag)));
}

struct Message {
  LinkHeader link;
  std::uint8_t transport_seq = 0;
  AppFragment app;
};

inline Message decode_message(ByteView raw) {
  Frame f = decode_frame(raw);
  ByteView app = unwrap_transport(f.payload);
  Message m;
  m.link = f.header;
  m.transport_seq = f.payload[0] & 0x3F;
  m.app = decode_app(app);
  return m;
}

}  // namespace scadasim::dnp3
