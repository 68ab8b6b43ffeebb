#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace witsim {

using Bytes = std::vector<std::uint8_t>;

/// 256-bit digest. Ordered lexicographically, which equals the numeric order
/// of the big-endian integer it encodes.
struct Digest {
    std::array<std::uint8_t, 32> bytes{};

    static Digest from_hex(std::string_view hex);
    std::string hex() const;
    bool is_zero() const;

    auto operator<=>(const Digest&) const = default;
    bool operator==(const Digest&) const = default;
};

/// SHA-256 over an arbitrary byte string. This is the only hash function used
/// anywhere in the artifact.
Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view text);

/// Canonical serialization: fixed-width big-endian integers, raw digests,
/// length-prefixed variable fields, all in declared field order.
class Writer {
public:
    Writer& u8(std::uint8_t v);
    Writer& u32(std::uint32_t v);
    Writer& u64(std::uint64_t v);
    Writer& i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }
    Writer& digest(const Digest& d);
    Writer& bytes(std::span<const std::uint8_t> data);
    Writer& str(std::string_view s);
    Writer& tag(std::string_view domain) { return str(domain); }

    const Bytes& data() const { return buf_; }
    std::size_t size() const { return buf_.size(); }
    Digest hash() const { return sha256(buf_); }

private:
    Bytes buf_;
};

/// Nonced claim hash: binds a claim to the witness key and the latest block.
Digest nonced_claim_hash(std::span<const std::uint8_t> canonical_value, const Digest& witness_pk,
                         const Digest& prev_block_hash);

}  // namespace witsim

template <>
struct std::hash<witsim::Digest> {
    std::size_t operator()(const witsim::Digest& d) const noexcept {
        std::size_t h = 0;
        for (int i = 0; i < 8; ++i) h = (h << 8) | d.bytes[i];
        return h;
    }
};
