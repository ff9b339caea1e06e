#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"
#include "tiltxter/wire.hpp"

using namespace tiltxter;
using namespace tiltxter::wire;

namespace {

WireMessage random_message(std::mt19937_64& rng) {
    auto byte = [&] { return static_cast<std::uint8_t>(rng()); };
    switch (rng() % 4) {
        case 0: {
            SensorPair m{static_cast<std::uint32_t>(rng()), rng(), static_cast<std::uint8_t>(rng() % 31), {}, {}};
            for (auto& v : m.left) v = byte();
            for (auto& v : m.right) v = byte();
            return m;
        }
        case 1: {
            Command m;
            m.seq = static_cast<std::uint32_t>(rng());
            m.t_us = rng();
            m.target_tilt_deg = static_cast<std::int16_t>(static_cast<int>(rng() % 181) - 90);
            m.gripper_pos = static_cast<std::uint8_t>(rng() % 31);
            m.mode = static_cast<FeedbackMode>(rng() % 3);
            m.grasp = rng() & 1;
            return m;
        }
        case 2: {
            Electrode m{static_cast<std::uint32_t>(rng()), rng(), {}, {}, kNoPrediction};
            for (auto& v : m.left) v = byte();
            for (auto& v : m.right) v = byte();
            if (rng() & 1) m.predicted = static_cast<std::uint8_t>(rng() % 9);
            return m;
        }
        default: return Heartbeat{static_cast<std::uint32_t>(rng()), rng()};
    }
}

std::vector<std::uint8_t> frame_with(std::uint32_t length, std::uint8_t tag, std::size_t payload_bytes) {
    std::vector<std::uint8_t> f{static_cast<std::uint8_t>(length), static_cast<std::uint8_t>(length >> 8),
                                static_cast<std::uint8_t>(length >> 16), static_cast<std::uint8_t>(length >> 24), tag};
    f.resize(5 + payload_bytes, 0);
    return f;
}

}  // namespace

TEST(Wire, PayloadSizes) {
    EXPECT_EQ(payload_size(Tag::SensorPair), 213u);
    EXPECT_EQ(payload_size(Tag::Command), 16u);
    EXPECT_EQ(payload_size(Tag::Electrode), 53u);
    EXPECT_EQ(payload_size(Tag::Heartbeat), 12u);
}

TEST(Wire, HeartbeatBytes) {
    const auto bytes = encode_msg(Heartbeat{0, 0});
    const std::vector<std::uint8_t> expected{0x0D, 0, 0, 0, 0x04, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    EXPECT_EQ(bytes, expected);
}

TEST(Wire, LittleEndianFields) {
    const auto bytes = encode_msg(Heartbeat{0x01020304, 0x1122334455667788ull});
    const std::vector<std::uint8_t> expected{0x0D, 0,    0,    0,    0x04, 0x04, 0x03, 0x02, 0x01,
                                             0x88, 0x77, 0x66, 0x55, 0x44, 0x33, 0x22, 0x11};
    EXPECT_EQ(bytes, expected);
}

TEST(Wire, CommandGraspBit) {
    Command c;
    c.target_tilt_deg = -45;
    c.mode = FeedbackMode::CnnPattern;
    c.grasp = true;
    const auto bytes = encode_msg(c);
    ASSERT_EQ(bytes.size(), 5u + 16u);
    EXPECT_EQ(bytes[4 + 1 + 4 + 8], 0xD3);  // -45 as little-endian i16
    EXPECT_EQ(bytes[4 + 1 + 4 + 8 + 1], 0xFF);
    EXPECT_EQ(bytes.back(), 0x82);
    c.grasp = false;
    EXPECT_EQ(encode_msg(c).back(), 0x02);
}

TEST(Wire, RandomRoundTrips) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 10000; ++i) {
        const auto m = random_message(rng);
        const auto bytes = encode_msg(m);
        EXPECT_EQ(bytes.size(), kHeaderSize + payload_size(tag_of(m)));
        ASSERT_EQ(decode_msg(bytes), m);
        EXPECT_EQ(from_json(nlohmann::json::parse(to_json_line(m))), m);
    }
}

TEST(Wire, MalformedFramesAreRejected) {
    // Unknown tags.
    for (std::uint8_t tag : {0, 5, 255}) EXPECT_THROW(decode_msg(frame_with(13, tag, 12)), ProtocolError);
    // Length not matching the tag.
    EXPECT_THROW(decode_msg(frame_with(14, 4, 13)), ProtocolError);
    EXPECT_THROW(decode_msg(frame_with(12, 4, 11)), ProtocolError);
    // Truncated header and payload.
    EXPECT_THROW(decode_msg(std::vector<std::uint8_t>{0x0D, 0, 0}), ProtocolError);
    EXPECT_THROW(decode_msg(frame_with(13, 4, 5)), ProtocolError);
    // Trailing bytes.
    EXPECT_THROW(decode_msg(frame_with(13, 4, 13)), ProtocolError);
    // Out-of-range fields.
    auto sp = encode_msg(SensorPair{});
    sp[5 + 12] = 31;
    EXPECT_THROW(decode_msg(sp), ProtocolError);
    auto cmd = encode_msg(Command{});
    cmd.back() = 3;
    EXPECT_THROW(decode_msg(cmd), ProtocolError);
    cmd.back() = 0x83;
    EXPECT_THROW(decode_msg(cmd), ProtocolError);
    auto el = encode_msg(Electrode{});
    el.back() = 9;
    EXPECT_THROW(decode_msg(el), ProtocolError);
    el.back() = 254;
    EXPECT_THROW(decode_msg(el), ProtocolError);
}

TEST(Wire, RandomGarbageNeverCrashes) {
    std::mt19937_64 rng(2);
    int accepted = 0;
    for (int i = 0; i < 10000; ++i) {
        std::vector<std::uint8_t> bytes(rng() % 240);
        for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
        try {
            decode_msg(bytes);
            ++accepted;
        } catch (const ProtocolError&) {
        }
    }
    EXPECT_EQ(accepted, 0);
}

TEST(Wire, BitFlipsDecodeOrThrowCleanly) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 2000; ++i) {
        auto bytes = encode_msg(random_message(rng));
        bytes[rng() % bytes.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
        try {
            const auto m = decode_msg(bytes);
            EXPECT_EQ(encode_msg(m), bytes);
        } catch (const ProtocolError&) {
        }
    }
}

TEST(FrameDecoder, ChunkedStream) {
    std::mt19937_64 rng(4);
    std::vector<WireMessage> sent;
    std::vector<std::uint8_t> stream;
    for (int i = 0; i < 500; ++i) {
        sent.push_back(random_message(rng));
        encode_msg_into(sent.back(), stream);
    }
    FrameDecoder dec;
    std::vector<WireMessage> got;
    std::size_t at = 0;
    while (at < stream.size()) {
        const std::size_t n = std::min<std::size_t>(1 + rng() % 97, stream.size() - at);
        dec.feed(std::span(stream).subspan(at, n));
        at += n;
        while (auto m = dec.next()) got.push_back(*m);
    }
    EXPECT_EQ(got, sent);
    EXPECT_EQ(dec.buffered(), 0u);
}

TEST(FrameDecoder, RawFrames) {
    std::vector<std::uint8_t> stream;
    encode_msg_into(Heartbeat{1, 2}, stream);
    encode_msg_into(Command{}, stream);
    FrameDecoder dec;
    dec.feed(std::span(stream).first(10));
    EXPECT_FALSE(dec.next_frame());
    dec.feed(std::span(stream).subspan(10));
    const auto a = dec.next_frame();
    ASSERT_TRUE(a);
    EXPECT_EQ(*a, encode_msg(Heartbeat{1, 2}));
    const auto b = dec.next_frame();
    ASSERT_TRUE(b);
    EXPECT_EQ(decode_msg(*b), WireMessage{Command{}});
    EXPECT_FALSE(dec.next_frame());
}

TEST(FrameDecoder, BadHeaderReportsStreamOffset) {
    std::vector<std::uint8_t> stream;
    encode_msg_into(Heartbeat{}, stream);
    const auto bad = frame_with(13, 9, 12);
    stream.insert(stream.end(), bad.begin(), bad.end());
    FrameDecoder dec;
    dec.feed(stream);
    EXPECT_TRUE(dec.next());
    try {
        dec.next();
        FAIL() << "expected a protocol error";
    } catch (const ProtocolError& e) {
        EXPECT_EQ(e.offset(), 17u + 4u);
    }
}

TEST(FrameDecoder, OversizedLengthIsRejectedEarly) {
    FrameDecoder dec;
    dec.feed(frame_with(5000, 1, 0));
    EXPECT_THROW(dec.next(), ProtocolError);
    FrameDecoder zero;
    zero.feed(frame_with(0, 1, 0));
    EXPECT_THROW(zero.next(), ProtocolError);
}

TEST(SeqGuard, PerTypeMonotonic) {
    SeqGuard g;
    g.check(Heartbeat{5, 0});
    g.check(Command{});  // other types count separately
    g.check(Heartbeat{6, 0});
    EXPECT_THROW(g.check(Heartbeat{6, 0}), ProtocolError);
    EXPECT_THROW(g.check(Heartbeat{2, 0}), ProtocolError);
    EXPECT_THROW(g.check(Command{}), ProtocolError);
    g.check(Heartbeat{7, 0});
}

TEST(SeqCounter, PerType) {
    SeqCounter c;
    EXPECT_EQ(c.next(Tag::Heartbeat), 0u);
    EXPECT_EQ(c.next(Tag::Heartbeat), 1u);
    EXPECT_EQ(c.next(Tag::Command), 0u);
}

TEST(Wire, SensorPairFromBiFrame) {
    std::mt19937_64 rng(5);
    const auto f = testutil::random_biframe(rng);
    const auto m = make_sensor_pair(f, 3, 4);
    EXPECT_EQ(m.gripper_pos, f.gripper_pos);
    const auto back = to_biframe(m);
    for (std::size_t i = 0; i < 100; ++i) {
        EXPECT_LE(std::fabs(back.right.forces.cells[i] - f.right.forces.cells[i]), 9.0 / 255.0 / 2 + 1e-12);
        EXPECT_LE(std::fabs(back.left.forces.cells[i] - f.left.forces.cells[i]), 9.0 / 255.0 / 2 + 1e-12);
    }
    EXPECT_EQ(make_sensor_pair(back, 3, 4), m);
}

TEST(Json, CommandShape) {
    Command c;
    c.seq = 7;
    c.target_tilt_deg = 30;
    c.gripper_pos = 18;
    c.mode = FeedbackMode::Downsized;
    c.grasp = true;
    const auto j = to_json(c);
    EXPECT_EQ(j.at("type"), "Command");
    EXPECT_EQ(j.at("mode"), 1);
    EXPECT_EQ(j.at("grasp"), true);
    EXPECT_EQ(j.at("target_tilt_deg"), 30);
    EXPECT_EQ(to_json_line(c).find('\n'), std::string::npos);
}

TEST(Json, ConsoleCommandDefaultsAndClamping) {
    const auto m = from_json(nlohmann::json::parse(R"({"type":"Command","target_tilt_deg":135,"gripper_pos":40})"));
    const auto& c = std::get<Command>(m);
    EXPECT_EQ(c.target_tilt_deg, 90);
    EXPECT_EQ(c.gripper_pos, 30);
    EXPECT_EQ(c.mode, FeedbackMode::None);
    EXPECT_FALSE(c.grasp);
}

TEST(Json, MalformedMessagesAreRejected) {
    for (const char* text : {R"({})", R"({"type":"Nope"})", R"({"type":"Command"})",
                             R"({"type":"Command","target_tilt_deg":"x","gripper_pos":1})",
                             R"({"type":"Command","target_tilt_deg":0,"gripper_pos":1,"mode":7})",
                             R"({"type":"Electrode","left":[1,2],"right":[]})", R"([1,2,3])"}) {
        EXPECT_THROW(from_json(nlohmann::json::parse(text)), ProtocolError) << text;
    }
}
