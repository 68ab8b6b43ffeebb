#pragma once

#include "witsim/hash.hpp"

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace witsim {

/// Epoch / checkpoint ordinal. Checkpoint t opens epoch t and closes epoch t-1.
using EpochIndex = std::uint64_t;

/// A participant is identified by its 256-bit public key.
using ParticipantId = Digest;

/// Token quantity in nanoWit (1 Wit = 10^9 nanoWit). Arithmetic is exact.
class TokenAmount {
public:
    static constexpr std::uint64_t kNanoPerWit = 1'000'000'000ULL;

    constexpr TokenAmount() = default;
    constexpr explicit TokenAmount(std::uint64_t nano) : nano_(nano) {}

    static constexpr TokenAmount from_wit(std::uint64_t wit) { return TokenAmount(wit * kNanoPerWit); }
    /// Accepts "12", "12.5" (Wit) or "12n" (nanoWit).
    static TokenAmount parse(std::string_view text);

    constexpr std::uint64_t nano() const { return nano_; }
    std::string to_string() const { return std::to_string(nano_); }
    /// Human form, e.g. "12.5 Wit".
    std::string to_wit_string() const;

    constexpr TokenAmount operator+(TokenAmount o) const {
        if (nano_ > UINT64_MAX - o.nano_) throw std::overflow_error("TokenAmount overflow");
        return TokenAmount(nano_ + o.nano_);
    }
    constexpr TokenAmount operator-(TokenAmount o) const {
        if (o.nano_ > nano_) throw std::underflow_error("TokenAmount underflow");
        return TokenAmount(nano_ - o.nano_);
    }
    constexpr TokenAmount& operator+=(TokenAmount o) { return *this = *this + o; }
    constexpr TokenAmount& operator-=(TokenAmount o) { return *this = *this - o; }

    auto operator<=>(const TokenAmount&) const = default;

private:
    std::uint64_t nano_ = 0;
};

/// Exact non-negative rational with 64-bit terms, kept in lowest terms.
class Ratio {
public:
    constexpr Ratio() = default;
    Ratio(std::int64_t num, std::int64_t den);

    /// Accepts "3/5", "0.25", "1".
    static Ratio parse(std::string_view text);

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }
    double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }
    std::string to_string() const;

    bool is_zero() const { return num_ == 0; }

    friend bool operator==(const Ratio& a, const Ratio& b) { return a.num_ == b.num_ && a.den_ == b.den_; }
    friend std::strong_ordering operator<=>(const Ratio& a, const Ratio& b) {
        __int128 lhs = static_cast<__int128>(a.num_) * b.den_;
        __int128 rhs = static_cast<__int128>(b.num_) * a.den_;
        return lhs <=> rhs;
    }

private:
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

}  // namespace witsim
