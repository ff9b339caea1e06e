#include "tiltxter/checkpoint.hpp"

#include <zlib.h>

#include "tiltxter/bytes.hpp"

namespace tiltxter::nn {

namespace {

enum : std::uint8_t { kTagConv = 1, kTagBatchNorm = 2, kTagRelu = 3, kTagFlatten = 4, kTagLinear = 5 };

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    uLong c = ::crc32(0L, Z_NULL, 0);
    c = ::crc32(c, bytes.data(), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(c);
}

std::vector<std::uint8_t> encode_checkpoint(const Model& model) {
    const auto& spec = model.spec();
    std::vector<std::uint8_t> out;
    ByteWriter w(out);
    w.raw("TXMD");
    w.u16(kCheckpointVersion);
    w.u32(spec.in_channels);
    w.u32(spec.in_height);
    w.u32(spec.in_width);
    w.u16(static_cast<std::uint16_t>(spec.layers.size()));
    for (const auto& l : spec.layers) {
        if (auto* c = std::get_if<ConvSpec>(&l)) {
            w.u8(kTagConv);
            for (auto v : {c->in, c->out, c->kernel, c->stride, c->pad}) w.u32(v);
        } else if (auto* b = std::get_if<BatchNormSpec>(&l)) {
            w.u8(kTagBatchNorm);
            w.u32(b->channels);
        } else if (std::holds_alternative<ReluSpec>(l)) {
            w.u8(kTagRelu);
        } else if (std::holds_alternative<FlattenSpec>(l)) {
            w.u8(kTagFlatten);
        } else if (auto* f = std::get_if<LinearSpec>(&l)) {
            w.u8(kTagLinear);
            w.u32(f->in);
            w.u32(f->out);
        }
    }
    const auto state = model.flat_state();
    w.u64(state.size());
    for (double v : state) w.f64(v);
    w.u32(crc32(out));
    return out;
}

Model decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 10) throw FormatError("checkpoint too short", bytes.size());
    const auto body = bytes.first(bytes.size() - 4);
    ByteReader tail(bytes.last(4), bytes.size() - 4);
    if (tail.u32() != crc32(body)) throw FormatError("checkpoint checksum mismatch", bytes.size() - 4);

    ByteReader r(body);
    std::uint8_t magic[4];
    r.bytes(magic);
    if (std::string_view(reinterpret_cast<const char*>(magic), 4) != "TXMD")
        throw FormatError("bad checkpoint magic", 0);
    if (const auto v = r.u16(); v != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(v), 4);

    ModelSpec spec;
    spec.in_channels = r.u32();
    spec.in_height = r.u32();
    spec.in_width = r.u32();
    const auto n_layers = r.u16();
    for (std::uint16_t i = 0; i < n_layers; ++i) {
        const auto at = r.position();
        switch (r.u8()) {
            case kTagConv: {
                ConvSpec c;
                c.in = r.u32();
                c.out = r.u32();
                c.kernel = r.u32();
                c.stride = r.u32();
                c.pad = r.u32();
                spec.layers.emplace_back(c);
                break;
            }
            case kTagBatchNorm: spec.layers.emplace_back(BatchNormSpec{r.u32()}); break;
            case kTagRelu: spec.layers.emplace_back(ReluSpec{}); break;
            case kTagFlatten: spec.layers.emplace_back(FlattenSpec{}); break;
            case kTagLinear: {
                LinearSpec f;
                f.in = r.u32();
                f.out = r.u32();
                spec.layers.emplace_back(f);
                break;
            }
            default: throw FormatError("unknown layer tag", at);
        }
    }
    try {
        spec.validate();
    } catch (const ContractViolation& e) {
        throw FormatError(std::string("inconsistent model spec: ") + e.what(), r.position());
    }

    Model model(spec, 0);
    const auto count_at = r.position();
    const auto count = r.u64();
    if (count != model.flat_state_size())
        throw FormatError("checkpoint holds " + std::to_string(count) + " values, spec needs " +
                              std::to_string(model.flat_state_size()),
                          count_at);
    std::vector<double> state(count);
    for (auto& v : state) v = r.f64();
    if (!r.done()) throw FormatError("trailing bytes in checkpoint", r.position());
    model.load_flat_state(state);
    return model;
}

void save_checkpoint(const std::string& path, const Model& model) { write_file(path, encode_checkpoint(model)); }

Model load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

}  // namespace tiltxter::nn
