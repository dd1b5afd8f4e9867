#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "amber/error.hpp"
#include "amber/prototypes.hpp"
#include "amber/sdsm.hpp"

namespace amber {

// Checkpoint layout (all integers and doubles little-endian):
//   "AMV1" | u32 d | u32 patch_len | u32 n | u32 K | u32 pooling
//   model parameters as f64, in declaration order
//   prototype bank: K seen bytes, then K*n prototype f64
namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::vector<std::uint8_t>& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFF));
}

class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& bytes, std::string what)
        : bytes_(bytes), what_(std::move(what)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
        return v;
    }

    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }

    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }

    bool exhausted() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) {
        if (pos_ + n > bytes_.size())
            throw FormatError(what_ + ": truncated at byte " + std::to_string(pos_));
    }

    const std::vector<std::uint8_t>& bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline std::vector<std::uint8_t> serialize_checkpoint(const SdsmModel& model,
                                                      const PrototypeBank& bank) {
    std::vector<std::uint8_t> out;
    const auto& cfg = model.config;
    out.insert(out.end(), {'A', 'M', 'V', '1'});
    detail::put_u32(out, static_cast<std::uint32_t>(cfg.input_dim));
    detail::put_u32(out, static_cast<std::uint32_t>(cfg.patch_len));
    detail::put_u32(out, static_cast<std::uint32_t>(cfg.hidden_dim));
    detail::put_u32(out, static_cast<std::uint32_t>(cfg.num_classes));
    detail::put_u32(out, static_cast<std::uint32_t>(cfg.pooling));
    for (const Parameter* p : model.parameters())
        for (double v : p->tensor.values()) detail::put_f64(out, v);
    for (std::size_t k = 0; k < bank.num_classes(); ++k)
        out.push_back(bank.is_seen(k) ? 1 : 0);
    for (std::size_t k = 0; k < bank.num_classes(); ++k)
        for (double v : bank.prototype(k)) detail::put_f64(out, v);
    return out;
}

inline void save_checkpoint(const std::string& path, const SdsmModel& model,
                            const PrototypeBank& bank) {
    const auto bytes = serialize_checkpoint(model, bank);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("checkpoint: cannot open " + path + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("checkpoint: write failed for " + path);
}

// bank_alpha/bank_tau are not stored in the file; they come from config.
inline std::pair<SdsmModel, PrototypeBank> deserialize_checkpoint(
    const std::vector<std::uint8_t>& bytes, double bank_alpha = 0.9, double bank_tau = 0.1) {
    detail::ByteReader r(bytes, "checkpoint");
    if (bytes.size() < 4 || bytes[0] != 'A' || bytes[1] != 'M' || bytes[2] != 'V' ||
        bytes[3] != '1')
        throw FormatError("checkpoint: bad magic, expected AMV1");
    (void)r.u32(); // skip magic, already checked

    SdsmConfig cfg;
    cfg.input_dim = r.u32();
    cfg.patch_len = r.u32();
    cfg.hidden_dim = r.u32();
    cfg.num_classes = r.u32();
    const std::uint32_t pooling = r.u32();
    if (pooling > 1) throw FormatError("checkpoint: unknown pooling code " +
                                       std::to_string(pooling));
    cfg.pooling = static_cast<Pooling>(pooling);
    cfg.validate();

    Rng dummy(0);
    SdsmModel model(cfg, dummy);
    for (Parameter* p : model.parameters())
        for (double& v : p->tensor.values()) v = r.f64();

    PrototypeBank bank(cfg.num_classes, cfg.hidden_dim, bank_alpha, bank_tau);
    std::vector<std::uint8_t> seen(cfg.num_classes);
    for (auto& s : seen) s = r.u8();
    for (std::size_t k = 0; k < cfg.num_classes; ++k) {
        for (double& v : bank.prototype_mut(k)) v = r.f64();
        if (seen[k]) bank.mark_seen(k);
    }
    if (!r.exhausted()) throw FormatError("checkpoint: trailing bytes");
    return {std::move(model), std::move(bank)};
}

inline std::pair<SdsmModel, PrototypeBank> load_checkpoint(const std::string& path,
                                                           double bank_alpha = 0.9,
                                                           double bank_tau = 0.1) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("checkpoint: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes, bank_alpha, bank_tau);
}

} // namespace amber
