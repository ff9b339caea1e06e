#pragma once

// Little-endian byte writer/reader shared by the dataset, checkpoint and
// wire formats.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tiltxter {

/// Malformed or truncated binary input. `offset` is the byte position where
/// decoding failed.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

class ByteWriter {
public:
    explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { put_le(v); }
    void u32(std::uint32_t v) { put_le(v); }
    void u64(std::uint64_t v) { put_le(v); }
    void i16(std::int16_t v) { put_le(static_cast<std::uint16_t>(v)); }
    void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
    void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
    void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }

    std::size_t size() const { return out_.size(); }

private:
    template <typename U>
    void put_le(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    std::vector<std::uint8_t>& out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> in, std::size_t base_offset = 0)
        : in_(in), base_(base_offset) {}

    std::uint8_t u8() { return get_le<std::uint8_t>(); }
    std::uint16_t u16() { return get_le<std::uint16_t>(); }
    std::uint32_t u32() { return get_le<std::uint32_t>(); }
    std::uint64_t u64() { return get_le<std::uint64_t>(); }
    std::int16_t i16() { return static_cast<std::int16_t>(get_le<std::uint16_t>()); }
    double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }

    template <std::size_t N>
    void bytes(std::uint8_t (&dst)[N]) {
        need(N);
        std::memcpy(dst, in_.data() + pos_, N);
        pos_ += N;
    }
    void bytes(std::span<std::uint8_t> dst) {
        need(dst.size());
        std::memcpy(dst.data(), in_.data() + pos_, dst.size());
        pos_ += dst.size();
    }

    std::size_t position() const { return base_ + pos_; }
    std::size_t remaining() const { return in_.size() - pos_; }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n)
            throw FormatError("truncated input: need " + std::to_string(n) + " more byte(s), have " +
                                  std::to_string(in_.size() - pos_),
                              position());
    }

    template <typename U>
    U get_le() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(in_[pos_ + i]) << (8 * i));
        pos_ += sizeof(U);
        return v;
    }

    std::span<const std::uint8_t> in_;
    std::size_t base_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> data);

}  // namespace tiltxter
