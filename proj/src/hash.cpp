#include "witsim/hash.hpp"

#include <openssl/evp.h>

#include <memory>
#include <stdexcept>

namespace witsim {

namespace {

int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

// One-shot EVP_Digest fetches the algorithm and allocates a context per call,
// which dominates the lottery; both are reused here.
const EVP_MD* sha256_md() {
    static const std::unique_ptr<EVP_MD, decltype(&EVP_MD_free)> md(EVP_MD_fetch(nullptr, "SHA256", nullptr),
                                                                    &EVP_MD_free);
    return md.get();
}

EVP_MD_CTX* digest_ctx() {
    thread_local const std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    return ctx.get();
}

}  // namespace

Digest Digest::from_hex(std::string_view hex) {
    if (hex.size() != 64) throw std::invalid_argument("digest hex must be 64 characters");
    Digest d;
    for (std::size_t i = 0; i < 32; ++i) {
        int hi = hex_nibble(hex[2 * i]);
        int lo = hex_nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("invalid hex digit in digest");
        d.bytes[i] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
    return d;
}

std::string Digest::hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(64, '0');
    for (std::size_t i = 0; i < 32; ++i) {
        out[2 * i] = kDigits[bytes[i] >> 4];
        out[2 * i + 1] = kDigits[bytes[i] & 0xf];
    }
    return out;
}

bool Digest::is_zero() const {
    for (auto b : bytes)
        if (b != 0) return false;
    return true;
}

Digest sha256(std::span<const std::uint8_t> data) {
    Digest d;
    unsigned int len = 0;
    auto* ctx = digest_ctx();
    if (!ctx || EVP_DigestInit_ex2(ctx, sha256_md(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 || EVP_DigestFinal_ex(ctx, d.bytes.data(), &len) != 1 ||
        len != 32)
        throw std::runtime_error("sha256 failed");
    return d;
}

Digest sha256(std::string_view text) {
    return sha256(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Writer& Writer::u8(std::uint8_t v) {
    buf_.push_back(v);
    return *this;
}

Writer& Writer::u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> shift));
    return *this;
}

Writer& Writer::u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> shift));
    return *this;
}

Writer& Writer::digest(const Digest& d) {
    buf_.insert(buf_.end(), d.bytes.begin(), d.bytes.end());
    return *this;
}

Writer& Writer::bytes(std::span<const std::uint8_t> data) {
    u32(static_cast<std::uint32_t>(data.size()));
    buf_.insert(buf_.end(), data.begin(), data.end());
    return *this;
}

Writer& Writer::str(std::string_view s) {
    return bytes(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

Digest nonced_claim_hash(std::span<const std::uint8_t> canonical_value, const Digest& witness_pk,
                         const Digest& prev_block_hash) {
    Writer w;
    w.bytes(canonical_value).digest(witness_pk).digest(prev_block_hash);
    return w.hash();
}

}  // namespace witsim
