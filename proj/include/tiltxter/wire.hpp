#pragma once

// Node-to-node wire protocol. Frame layout (little-endian):
//
//   u32 length   // bytes that follow: 1 (tag) + payload
//   u8  tag      // 1 SensorPair, 2 Command, 3 Electrode, 4 Heartbeat
//   payload      // fields in declaration order
//
// The mirror endpoint carries the same messages as one-line JSON objects.

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tiltxter/bytes.hpp"
#include "tiltxter/core.hpp"

namespace tiltxter::wire {

class ProtocolError : public FormatError {
public:
    using FormatError::FormatError;
};

enum class Tag : std::uint8_t { SensorPair = 1, Command = 2, Electrode = 3, Heartbeat = 4 };

inline constexpr std::uint8_t kNoPrediction = 255;
inline constexpr std::uint8_t kGraspFlag = 0x80;  // high bit of Command.mode
inline constexpr std::size_t kHeaderSize = 5;
inline constexpr std::size_t kMaxFrameLength = 4096;

struct SensorPair {
    std::uint32_t seq = 0;
    std::uint64_t t_us = 0;
    std::uint8_t gripper_pos = 0;
    std::array<std::uint8_t, 100> left{};
    std::array<std::uint8_t, 100> right{};

    static constexpr std::size_t kPayload = 4 + 8 + 1 + 100 + 100;
    friend bool operator==(const SensorPair&, const SensorPair&) = default;
};

struct Command {
    std::uint32_t seq = 0;
    std::uint64_t t_us = 0;
    std::int16_t target_tilt_deg = 0;  // TCP orientation target
    std::uint8_t gripper_pos = 0;
    FeedbackMode mode = FeedbackMode::None;
    bool grasp = false;  // encoded as bit 7 of the mode byte

    static constexpr std::size_t kPayload = 4 + 8 + 2 + 1 + 1;
    friend bool operator==(const Command&, const Command&) = default;
};

struct Electrode {
    std::uint32_t seq = 0;
    std::uint64_t t_us = 0;
    std::array<std::uint8_t, 20> left{};
    std::array<std::uint8_t, 20> right{};
    std::uint8_t predicted = kNoPrediction;  // tilt class index, 255 = none

    static constexpr std::size_t kPayload = 4 + 8 + 20 + 20 + 1;
    friend bool operator==(const Electrode&, const Electrode&) = default;
};

struct Heartbeat {
    std::uint32_t seq = 0;
    std::uint64_t t_us = 0;

    static constexpr std::size_t kPayload = 4 + 8;
    friend bool operator==(const Heartbeat&, const Heartbeat&) = default;
};

using WireMessage = std::variant<SensorPair, Command, Electrode, Heartbeat>;

Tag tag_of(const WireMessage& m);
std::uint32_t seq_of(const WireMessage& m);
std::size_t payload_size(Tag tag);

std::vector<std::uint8_t> encode_msg(const WireMessage& m);
void encode_msg_into(const WireMessage& m, std::vector<std::uint8_t>& out);
/// Decodes exactly one frame; the span must hold nothing else.
WireMessage decode_msg(std::span<const std::uint8_t> frame);

/// Incremental frame splitter for a byte stream.
class FrameDecoder {
public:
    void feed(std::span<const std::uint8_t> bytes);
    /// Next complete message, if any. Throws ProtocolError on a bad header
    /// or payload; the offset is relative to the start of the stream.
    std::optional<WireMessage> next();
    /// Next complete frame as raw bytes, with only the header checked (tag
    /// known, length matching the tag). For consumers that decode later.
    std::optional<std::vector<std::uint8_t>> next_frame();
    std::size_t buffered() const { return buf_.size() - pos_; }

private:
    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
    std::size_t consumed_ = 0;

    std::optional<std::size_t> peek_frame();
};

/// Rejects a sequence number that does not increase within one message type
/// from one sender.
class SeqGuard {
public:
    void check(const WireMessage& m);

private:
    std::map<Tag, std::uint32_t> last_;
};

/// Sender-side counter per message type.
class SeqCounter {
public:
    std::uint32_t next(Tag tag) { return counters_[tag]++; }

private:
    std::map<Tag, std::uint32_t> counters_;
};

// Quantized grids <-> wire arrays.
std::array<std::uint8_t, 100> quantize_grid(const ForceGrid& g);
ForceGrid dequantize_grid(const std::array<std::uint8_t, 100>& q);
SensorPair make_sensor_pair(const BiFrame& frame, std::uint32_t seq, std::uint64_t t_us);
BiFrame to_biframe(const SensorPair& m);

nlohmann::json to_json(const WireMessage& m);
/// Parses any message type from its JSON form; throws ProtocolError.
WireMessage from_json(const nlohmann::json& j);
std::string to_json_line(const WireMessage& m);

}  // namespace tiltxter::wire
