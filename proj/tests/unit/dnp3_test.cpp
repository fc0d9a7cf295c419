#include <catch2/catch_amalgamated.hpp>

#include "scadasim/dnp3.hpp"
#include "scadasim/rng.hpp"

#include "../oracles.hpp"

using namespace scadasim;
using namespace scadasim::dnp3;

namespace {

Bytes random_bytes(Rng& rng, std::size_t n) {
  Bytes b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng.below(256));
  return b;
}

AppFragment random_fragment(Rng& rng) {
  AppFragment frag;
  frag.control.seq = static_cast<std::uint8_t>(rng.below(16));
  frag.control.con = rng.bernoulli(0.2);
  static const FunctionCode fns[] = {FunctionCode::Confirm,       FunctionCode::Read,
                                     FunctionCode::Read2,         FunctionCode::Select,
                                     FunctionCode::Operate,       FunctionCode::DirectOperate,
                                     FunctionCode::SolicitedResponse,
                                     FunctionCode::UnsolicitedResponse};
  frag.function = fns[rng.below(8)];
  frag.control.uns = frag.function == FunctionCode::UnsolicitedResponse;
  if (is_response(frag.function)) frag.iin = static_cast<std::uint16_t>(rng.below(0x10000));
  int ngroups = static_cast<int>(rng.below(3));
  for (int g = 0; g < ngroups; ++g) {
    PointGroup group;
    group.kind = static_cast<GroupKind>(1 + rng.below(4));
    int npts = 1 + static_cast<int>(rng.below(4));
    std::uint16_t index = static_cast<std::uint16_t>(rng.below(10));
    for (int p = 0; p < npts; ++p) {
      Point pt;
      pt.index = index;
      index = static_cast<std::uint16_t>(index + 1 + rng.below(5));
      switch (group.kind) {
        case GroupKind::BinaryInput: pt.value = rng.bernoulli(0.5); break;
        case GroupKind::AnalogInput: pt.value = rng.uniform_between(-5000.0, 5000.0); break;
        case GroupKind::BinaryOutputCommand:
          pt.value = rng.bernoulli(0.5) ? ControlCode::Trip : ControlCode::Close;
          break;
        case GroupKind::AnalogOutputCommand: pt.value = rng.uniform_between(0.0, 3000.0); break;
      }
      group.points.push_back(pt);
    }
    frag.objects.push_back(group);
  }
  return frag;
}

}  // namespace

TEST_CASE("crc matches the bit-serial oracle", "[dnp3][crc]") {
  // canonical read-request header
  Bytes hdr = {0x05, 0x64, 0x05, 0xC0, 0x01, 0x00, 0x00, 0x04};
  CHECK(crc(hdr) == oracles::crc_dnp_bitserial(hdr));
  CHECK(crc(hdr) == 0x21E9);  // value frozen from the oracle

  SECTION("empty input yields the final-complement constant") {
    CHECK(crc(Bytes{}) == oracles::crc_dnp_bitserial(Bytes{}));
    CHECK(crc(Bytes{}) == 0xFFFF);
  }
  SECTION("purity") {
    Bytes b = {1, 2, 3};
    CHECK(crc(b) == crc(b));
  }
  SECTION("randomized agreement") {
    Rng rng(0xC7C);
    for (int i = 0; i < 2000; ++i) {
      Bytes data = random_bytes(rng, rng.below(64));
      CHECK(crc(data) == oracles::crc_dnp_bitserial(data));
    }
  }
}

TEST_CASE("frame encoding arithmetic", "[dnp3][frame]") {
  LinkHeader h;
  h.destination = 10;
  h.source = 1;
  CHECK(encode_frame(h, Bytes{}).size() == 10);
  Rng rng(7);
  CHECK(encode_frame(h, random_bytes(rng, 5)).size() == 17);
  CHECK(encode_frame(h, random_bytes(rng, 32)).size() == 46);
  CHECK(encode_frame(h, random_bytes(rng, 292)).size() == encoded_frame_size(292));
  CHECK_THROWS_AS(encode_frame(h, random_bytes(rng, 293)), EncodeError);
}

TEST_CASE("frame header invariants", "[dnp3][frame]") {
  LinkHeader h;
  h.link_control = 0xC4;
  h.destination = 1024;
  h.source = 3;
  Rng rng(11);
  Bytes payload = random_bytes(rng, 40);
  Bytes raw = encode_frame(h, payload);
  CHECK(raw[0] == 0x05);
  CHECK(raw[1] == 0x64);
  CHECK(get_u16(raw, 8) == crc(ByteView(raw.data(), 8)));
  CHECK(raw.size() == 10 + 40 + 2 * 3);

  SECTION("decode round-trip") {
    Frame f = decode_frame(raw);
    CHECK(f.header.destination == 1024);
    CHECK(f.header.source == 3);
    CHECK(f.payload == payload);
  }
  SECTION("bad sync is rejected") {
    Bytes bad = raw;
    bad[0] = 0x06;
    try {
      decode_frame(bad);
      FAIL("expected BadSync");
    } catch (const DecodeError& e) {
      CHECK(e.status() == DecodeStatus::BadSync);
    }
  }
  SECTION("header corruption is rejected") {
    Bytes bad = raw;
    bad[4] ^= 0x01;
    try {
      decode_frame(bad);
      FAIL("expected BadHeaderCrc");
    } catch (const DecodeError& e) {
      CHECK(e.status() == DecodeStatus::BadHeaderCrc);
    }
  }
  SECTION("truncation is rejected") {
    Bytes bad(raw.begin(), raw.begin() + 6);
    CHECK_THROWS_AS(decode_frame(bad), DecodeError);
  }
}

TEST_CASE("frame round-trips over randomized headers and payloads", "[dnp3][frame][property]") {
  Rng rng(0xF00D);
  for (int i = 0; i < 1000; ++i) {
    LinkHeader h;
    h.link_control = static_cast<std::uint8_t>(rng.below(256));
    h.destination = static_cast<std::uint16_t>(rng.below(0x10000));
    h.source = static_cast<std::uint16_t>(rng.below(0x10000));
    Bytes payload = random_bytes(rng, rng.below(293));
    Bytes raw = encode_frame(h, payload);
    CHECK(raw.size() == encoded_frame_size(payload.size()));
    Frame f = decode_frame(raw);
    REQUIRE(f.payload == payload);
    REQUIRE(f.header.link_control == h.link_control);
    REQUIRE(f.header.destination == h.destination);
    REQUIRE(f.header.source == h.source);
  }
}

TEST_CASE("single payload bit flips are tamper-evident", "[dnp3][frame][property]") {
  Rng rng(0xBEEF);
  for (int i = 0; i < 200; ++i) {
    LinkHeader h;
    h.destination = 4;
    h.source = 2;
    Bytes payload = random_bytes(rng, 1 + rng.below(120));
    Bytes raw = encode_frame(h, payload);
    // pick a payload octet (skip header and CRC positions)
    std::size_t nblocks = (payload.size() + kBlockSize - 1) / kBlockSize;
    std::size_t block = rng.below(nblocks);
    std::size_t block_data = std::min(kBlockSize, payload.size() - block * kBlockSize);
    std::size_t pos = 10 + block * (kBlockSize + 2) + rng.below(block_data);
    Bytes bad = raw;
    bad[pos] ^= static_cast<std::uint8_t>(1u << rng.below(8));
    try {
      decode_frame(bad);
      FAIL("expected BadBlockCrc");
    } catch (const DecodeError& e) {
      REQUIRE(e.status() == DecodeStatus::BadBlockCrc);
      REQUIRE(e.block_index() == static_cast<int>(block));
    }
  }
}

TEST_CASE("rewriting payload with fresh CRCs decodes cleanly", "[dnp3][frame][property]") {
  // The man-in-the-middle capability: a full re-encode is indistinguishable
  // from a legitimate frame.
  Rng rng(0x5EED);
  for (int i = 0; i < 200; ++i) {
    LinkHeader h;
    h.destination = 4;
    h.source = 2;
    Bytes payload = random_bytes(rng, 1 + rng.below(120));
    Bytes tampered = payload;
    tampered[rng.below(tampered.size())] ^= 0xFF;
    Bytes raw = encode_frame(h, tampered);
    Frame f = decode_frame(raw);
    REQUIRE(f.payload == tampered);
  }
}

TEST_CASE("function codes map bidirectionally", "[dnp3][app]") {
  CHECK(static_cast<std::uint8_t>(FunctionCode::DirectOperate) == 0x05);
  CHECK(static_cast<std::uint8_t>(FunctionCode::SolicitedResponse) == 0x81);
  CHECK(static_cast<std::uint8_t>(FunctionCode::Confirm) == 0x00);
  CHECK(static_cast<std::uint8_t>(FunctionCode::Read) == 0x01);
  const std::uint8_t known[] = {0x00, 0x01, 0x02, 0x03, 0x04, 0x05, 0x81, 0x82};
  for (int code = 0; code < 256; ++code) {
    bool expected = std::find(std::begin(known), std::end(known), code) != std::end(known);
    auto fn = to_function_code(static_cast<std::uint8_t>(code));
    CHECK(fn.has_value() == expected);
    if (fn) CHECK(static_cast<int>(*fn) == code);
  }
}

TEST_CASE("control codes are distinct and bijective", "[dnp3][app]") {
  CHECK(static_cast<std::uint8_t>(ControlCode::Trip) != static_cast<std::uint8_t>(ControlCode::Close));
  for (auto c : {ControlCode::Trip, ControlCode::Close, ControlCode::LatchOn, ControlCode::LatchOff})
    CHECK(to_control_code(static_cast<std::uint8_t>(c)) == c);
  CHECK_FALSE(to_control_code(0x00).has_value());
}

TEST_CASE("application fragments encode and decode", "[dnp3][app]") {
  SECTION("direct operate request puts 0x05 in the function octet") {
    AppFragment frag;
    frag.function = FunctionCode::DirectOperate;
    frag.objects.push_back({GroupKind::BinaryOutputCommand, {{5, ControlCode::Trip}}});
    Bytes raw = encode_app(frag);
    CHECK(raw[1] == 0x05);
    AppFragment back = decode_app(raw);
    CHECK(back.function == FunctionCode::DirectOperate);
    REQUIRE(back.objects.size() == 1);
    CHECK(back.objects[0].points[0].index == 5);
    CHECK(std::get<ControlCode>(back.objects[0].points[0].value) == ControlCode::Trip);
  }
  SECTION("responses carry iin, requests do not") {
    AppFragment resp;
    resp.function = FunctionCode::SolicitedResponse;
    resp.iin = 0;
    Bytes raw = encode_app(resp);
    CHECK(raw[1] == 0x81);
    CHECK(raw.size() == 4);
    CHECK(decode_app(raw).iin == std::uint16_t{0});

    AppFragment req;
    req.function = FunctionCode::Read;
    CHECK(encode_app(req).size() == 2);
    CHECK_FALSE(decode_app(encode_app(req)).iin.has_value());

    AppFragment bad;
    bad.function = FunctionCode::Read;
    bad.iin = 0;
    CHECK_THROWS_AS(encode_app(bad), EncodeError);
  }
  SECTION("unknown function octet is rejected") {
    Bytes raw = {0xC0, 0x17};
    try {
      decode_app(raw);
      FAIL("expected UnknownFunctionCode");
    } catch (const DecodeError& e) {
      CHECK(e.status() == DecodeStatus::UnknownFunctionCode);
    }
  }
  SECTION("non-increasing indices are rejected on encode") {
    AppFragment frag;
    frag.function = FunctionCode::Read;
    frag.objects.push_back({GroupKind::BinaryInput, {{3, true}, {3, false}}});
    CHECK_THROWS_AS(encode_app(frag), EncodeError);
  }
}

TEST_CASE("app fragments round-trip over randomized inputs", "[dnp3][app][property]") {
  Rng rng(0xAB);
  for (int i = 0; i < 1000; ++i) {
    AppFragment frag = random_fragment(rng);
    AppFragment back = decode_app(encode_app(frag));
    REQUIRE(back.function == frag.function);
    REQUIRE(back.control.seq == frag.control.seq);
    REQUIRE(back.iin == frag.iin);
    REQUIRE(back.objects.size() == frag.objects.size());
    for (std::size_t g = 0; g < frag.objects.size(); ++g) {
      REQUIRE(back.objects[g].kind == frag.objects[g].kind);
      REQUIRE(back.objects[g].points.size() == frag.objects[g].points.size());
      for (std::size_t p = 0; p < frag.objects[g].points.size(); ++p) {
        REQUIRE(back.objects[g].points[p].index == frag.objects[g].points[p].index);
        REQUIRE(back.objects[g].points[p].value == frag.objects[g].points[p].value);
      }
    }
  }
}

TEST_CASE("full message encode/decode with transport octet", "[dnp3]") {
  LinkHeader h;
  h.destination = 1024;
  h.source = 1;
  AppFragment frag;
  frag.function = FunctionCode::Read;
  frag.control.seq = 9;
  Bytes raw = encode_message(h, 3, frag);
  Message m = decode_message(raw);
  CHECK(m.link.destination == 1024);
  CHECK(m.transport_seq == 3);
  CHECK(m.app.function == FunctionCode::Read);
  CHECK(m.app.control.seq == 9);
}
