#include "tiltxter/wire.hpp"

#include <algorithm>

namespace tiltxter::wire {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

template <std::size_t N>
void put(ByteWriter& w, const std::array<std::uint8_t, N>& a) {
    w.bytes(a);
}

template <std::size_t N>
void get(ByteReader& r, std::array<std::uint8_t, N>& a) {
    r.bytes(std::span<std::uint8_t>(a));
}

WireMessage decode_payload(Tag tag, ByteReader& r) {
    switch (tag) {
        case Tag::SensorPair: {
            SensorPair m;
            m.seq = r.u32();
            m.t_us = r.u64();
            const auto at = r.position();
            m.gripper_pos = r.u8();
            if (m.gripper_pos > kMaxGripperPos) throw ProtocolError("gripper_pos out of range", at);
            get(r, m.left);
            get(r, m.right);
            return m;
        }
        case Tag::Command: {
            Command m;
            m.seq = r.u32();
            m.t_us = r.u64();
            m.target_tilt_deg = r.i16();
            m.gripper_pos = r.u8();
            const auto at = r.position();
            const auto mode = r.u8();
            const auto base = static_cast<std::uint8_t>(mode & ~kGraspFlag);
            if (base > 2) throw ProtocolError("feedback mode out of range: " + std::to_string(base), at);
            m.mode = static_cast<FeedbackMode>(base);
            m.grasp = (mode & kGraspFlag) != 0;
            return m;
        }
        case Tag::Electrode: {
            Electrode m;
            m.seq = r.u32();
            m.t_us = r.u64();
            get(r, m.left);
            get(r, m.right);
            const auto at = r.position();
            m.predicted = r.u8();
            if (m.predicted >= TiltClass::kCount && m.predicted != kNoPrediction)
                throw ProtocolError("predicted class out of range", at);
            return m;
        }
        case Tag::Heartbeat: {
            Heartbeat m;
            m.seq = r.u32();
            m.t_us = r.u64();
            return m;
        }
    }
    throw ProtocolError("unknown message tag", r.position());
}

bool known_tag(std::uint8_t t) { return t >= 1 && t <= 4; }

}  // namespace

Tag tag_of(const WireMessage& m) {
    return std::visit(overloaded{
                          [](const SensorPair&) { return Tag::SensorPair; },
                          [](const Command&) { return Tag::Command; },
                          [](const Electrode&) { return Tag::Electrode; },
                          [](const Heartbeat&) { return Tag::Heartbeat; },
                      },
                      m);
}

std::uint32_t seq_of(const WireMessage& m) {
    return std::visit([](const auto& x) { return x.seq; }, m);
}

std::size_t payload_size(Tag tag) {
    switch (tag) {
        case Tag::SensorPair: return SensorPair::kPayload;
        case Tag::Command: return Command::kPayload;
        case Tag::Electrode: return Electrode::kPayload;
        case Tag::Heartbeat: return Heartbeat::kPayload;
    }
    return 0;
}

void encode_msg_into(const WireMessage& m, std::vector<std::uint8_t>& out) {
    const Tag tag = tag_of(m);
    ByteWriter w(out);
    w.u32(static_cast<std::uint32_t>(1 + payload_size(tag)));
    w.u8(static_cast<std::uint8_t>(tag));
    std::visit(overloaded{
                   [&](const SensorPair& x) {
                       w.u32(x.seq);
                       w.u64(x.t_us);
                       w.u8(x.gripper_pos);
                       put(w, x.left);
                       put(w, x.right);
                   },
                   [&](const Command& x) {
                       w.u32(x.seq);
                       w.u64(x.t_us);
                       w.i16(x.target_tilt_deg);
                       w.u8(x.gripper_pos);
                       w.u8(static_cast<std::uint8_t>(static_cast<std::uint8_t>(x.mode) | (x.grasp ? kGraspFlag : 0)));
                   },
                   [&](const Electrode& x) {
                       w.u32(x.seq);
                       w.u64(x.t_us);
                       put(w, x.left);
                       put(w, x.right);
                       w.u8(x.predicted);
                   },
                   [&](const Heartbeat& x) {
                       w.u32(x.seq);
                       w.u64(x.t_us);
                   },
               },
               m);
}

std::vector<std::uint8_t> encode_msg(const WireMessage& m) {
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderSize + SensorPair::kPayload);
    encode_msg_into(m, out);
    return out;
}

WireMessage decode_msg(std::span<const std::uint8_t> frame) {
    ByteReader hdr(frame);
    std::uint32_t length = 0;
    std::uint8_t tag = 0;
    try {
        length = hdr.u32();
        tag = hdr.u8();
    } catch (const FormatError& e) {
        throw ProtocolError("truncated frame header", e.offset());
    }
    if (!known_tag(tag)) throw ProtocolError("unknown message tag " + std::to_string(tag), 4);
    const std::size_t expected = 1 + payload_size(static_cast<Tag>(tag));
    if (length != expected)
        throw ProtocolError("length field " + std::to_string(length) + " does not match tag (expected " +
                                std::to_string(expected) + ")",
                            0);
    if (frame.size() < 4 + std::size_t{length})
        throw ProtocolError("truncated payload: frame has " + std::to_string(frame.size()) + " of " +
                                std::to_string(4 + length) + " bytes",
                            frame.size());
    if (frame.size() > 4 + std::size_t{length})
        throw ProtocolError("trailing bytes after frame", 4 + std::size_t{length});
    ByteReader body(frame.subspan(kHeaderSize), kHeaderSize);
    return decode_payload(static_cast<Tag>(tag), body);
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
    if (pos_ > 0 && pos_ == buf_.size()) {
        buf_.clear();
        pos_ = 0;
    } else if (pos_ > 4096) {
        buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
        pos_ = 0;
    }
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<std::size_t> FrameDecoder::peek_frame() {
    const std::size_t avail = buf_.size() - pos_;
    if (avail < kHeaderSize) return std::nullopt;
    const std::uint8_t* p = buf_.data() + pos_;
    const std::uint32_t length = std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
                                 std::uint32_t{p[3]} << 24;
    if (length == 0 || length > kMaxFrameLength)
        throw ProtocolError("frame length " + std::to_string(length) + " out of bounds", consumed_);
    if (!known_tag(p[4])) throw ProtocolError("unknown message tag " + std::to_string(p[4]), consumed_ + 4);
    if (length != 1 + payload_size(static_cast<Tag>(p[4])))
        throw ProtocolError("length field " + std::to_string(length) + " does not match tag", consumed_);
    if (avail < 4 + std::size_t{length}) return std::nullopt;
    return 4 + std::size_t{length};
}

std::optional<WireMessage> FrameDecoder::next() {
    const auto frame_len = peek_frame();
    if (!frame_len) return std::nullopt;
    WireMessage m;
    try {
        m = decode_msg(std::span(buf_.data() + pos_, *frame_len));
    } catch (const ProtocolError& e) {
        throw ProtocolError(std::string("stream: ") + e.what(), consumed_ + e.offset());
    }
    pos_ += *frame_len;
    consumed_ += *frame_len;
    return m;
}

std::optional<std::vector<std::uint8_t>> FrameDecoder::next_frame() {
    const auto frame_len = peek_frame();
    if (!frame_len) return std::nullopt;
    const auto begin = buf_.begin() + static_cast<std::ptrdiff_t>(pos_);
    std::vector<std::uint8_t> frame(begin, begin + static_cast<std::ptrdiff_t>(*frame_len));
    pos_ += *frame_len;
    consumed_ += *frame_len;
    return frame;
}

void SeqGuard::check(const WireMessage& m) {
    const Tag tag = tag_of(m);
    const auto seq = seq_of(m);
    auto it = last_.find(tag);
    if (it != last_.end() && seq <= it->second)
        throw ProtocolError("sequence regression: " + std::to_string(seq) + " after " + std::to_string(it->second),
                            0);
    last_[tag] = seq;
}

std::array<std::uint8_t, 100> quantize_grid(const ForceGrid& g) {
    std::array<std::uint8_t, 100> q{};
    for (std::size_t i = 0; i < 100; ++i) q[i] = quantize_force(g.cells[i]);
    return q;
}

ForceGrid dequantize_grid(const std::array<std::uint8_t, 100>& q) {
    ForceGrid g;
    for (std::size_t i = 0; i < 100; ++i) g.cells[i] = dequantize_force(q[i]);
    return g;
}

SensorPair make_sensor_pair(const BiFrame& frame, std::uint32_t seq, std::uint64_t t_us) {
    SensorPair m;
    m.seq = seq;
    m.t_us = t_us;
    m.gripper_pos = static_cast<std::uint8_t>(frame.gripper_pos);
    m.left = quantize_grid(frame.left.forces);
    m.right = quantize_grid(frame.right.forces);
    return m;
}

BiFrame to_biframe(const SensorPair& m) {
    BiFrame f;
    f.left = SensorFrame{Finger::Left, dequantize_grid(m.left)};
    f.right = SensorFrame{Finger::Right, dequantize_grid(m.right)};
    f.gripper_pos = m.gripper_pos;
    return f;
}

nlohmann::json to_json(const WireMessage& m) {
    using nlohmann::json;
    return std::visit(overloaded{
                          [](const SensorPair& x) {
                              return json{{"type", "SensorPair"}, {"seq", x.seq},   {"t_us", x.t_us},
                                          {"gripper_pos", x.gripper_pos}, {"left", x.left}, {"right", x.right}};
                          },
                          [](const Command& x) {
                              return json{{"type", "Command"},
                                          {"seq", x.seq},
                                          {"t_us", x.t_us},
                                          {"target_tilt_deg", x.target_tilt_deg},
                                          {"gripper_pos", x.gripper_pos},
                                          {"mode", static_cast<int>(x.mode)},
                                          {"grasp", x.grasp}};
                          },
                          [](const Electrode& x) {
                              return json{{"type", "Electrode"}, {"seq", x.seq},     {"t_us", x.t_us},
                                          {"left", x.left},      {"right", x.right}, {"predicted", x.predicted}};
                          },
                          [](const Heartbeat& x) {
                              return json{{"type", "Heartbeat"}, {"seq", x.seq}, {"t_us", x.t_us}};
                          },
                      },
                      m);
}

WireMessage from_json(const nlohmann::json& j) {
    try {
        const auto type = j.at("type").get<std::string>();
        const auto seq = j.value("seq", std::uint32_t{0});
        const auto t_us = j.value("t_us", std::uint64_t{0});
        if (type == "SensorPair") {
            SensorPair m{seq, t_us, j.at("gripper_pos").get<std::uint8_t>(), {}, {}};
            m.left = j.at("left").get<std::array<std::uint8_t, 100>>();
            m.right = j.at("right").get<std::array<std::uint8_t, 100>>();
            return m;
        }
        if (type == "Command") {
            Command m;
            m.seq = seq;
            m.t_us = t_us;
            const int target = j.at("target_tilt_deg").get<int>();
            m.target_tilt_deg = static_cast<std::int16_t>(std::clamp(target, -90, 90));
            m.gripper_pos = static_cast<std::uint8_t>(std::clamp(j.at("gripper_pos").get<int>(), 0, kMaxGripperPos));
            m.mode = feedback_mode_from_u8(static_cast<std::uint8_t>(j.value("mode", 0)));
            m.grasp = j.value("grasp", false);
            return m;
        }
        if (type == "Electrode") {
            Electrode m{seq, t_us, {}, {}, j.value("predicted", kNoPrediction)};
            m.left = j.at("left").get<std::array<std::uint8_t, 20>>();
            m.right = j.at("right").get<std::array<std::uint8_t, 20>>();
            return m;
        }
        if (type == "Heartbeat") return Heartbeat{seq, t_us};
        throw ProtocolError("unknown JSON message type: " + type, 0);
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed JSON message: ") + e.what(), 0);
    } catch (const DomainError& e) {
        throw ProtocolError(std::string("malformed JSON message: ") + e.what(), 0);
    }
}

std::string to_json_line(const WireMessage& m) { return to_json(m).dump(); }

}  // namespace tiltxter::wire
