#include "witsim/types.hpp"

#include <charconv>
#include <numeric>

namespace witsim {

namespace {

std::uint64_t parse_u64(std::string_view text, const char* what) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw std::invalid_argument(std::string("invalid ") + what + ": '" + std::string(text) + "'");
    return v;
}

}  // namespace

TokenAmount TokenAmount::parse(std::string_view text) {
    if (!text.empty() && text.back() == 'n') return TokenAmount(parse_u64(text.substr(0, text.size() - 1), "nanoWit amount"));
    auto dot = text.find('.');
    std::uint64_t whole = parse_u64(text.substr(0, dot), "Wit amount");
    std::uint64_t frac = 0;
    if (dot != std::string_view::npos) {
        auto digits = text.substr(dot + 1);
        if (digits.size() > 9) throw std::invalid_argument("Wit amount has more than 9 decimals");
        frac = parse_u64(digits, "Wit amount");
        for (std::size_t i = digits.size(); i < 9; ++i) frac *= 10;
    }
    if (whole > UINT64_MAX / kNanoPerWit) throw std::overflow_error("Wit amount too large");
    return TokenAmount(whole * kNanoPerWit) + TokenAmount(frac);
}

std::string TokenAmount::to_wit_string() const {
    std::string out = std::to_string(nano_ / kNanoPerWit);
    auto frac = nano_ % kNanoPerWit;
    if (frac != 0) {
        std::string f = std::to_string(frac);
        f.insert(0, 9 - f.size(), '0');
        while (f.back() == '0') f.pop_back();
        out += "." + f;
    }
    return out + " Wit";
}

Ratio::Ratio(std::int64_t num, std::int64_t den) {
    if (den <= 0) throw std::invalid_argument("ratio denominator must be positive");
    if (num < 0) throw std::invalid_argument("ratio must be non-negative");
    auto g = std::gcd(num, den);
    num_ = g ? num / g : 0;
    den_ = g ? den / g : 1;
}

Ratio Ratio::parse(std::string_view text) {
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        return Ratio(static_cast<std::int64_t>(parse_u64(text.substr(0, slash), "ratio")),
                     static_cast<std::int64_t>(parse_u64(text.substr(slash + 1), "ratio")));
    }
    auto dot = text.find('.');
    auto whole = parse_u64(text.substr(0, dot), "ratio");
    if (dot == std::string_view::npos) return Ratio(static_cast<std::int64_t>(whole), 1);
    auto digits = text.substr(dot + 1);
    if (digits.empty() || digits.size() > 15) throw std::invalid_argument("ratio has too many decimals");
    std::int64_t den = 1;
    for (std::size_t i = 0; i < digits.size(); ++i) den *= 10;
    auto frac = parse_u64(digits, "ratio");
    return Ratio(static_cast<std::int64_t>(whole) * den + static_cast<std::int64_t>(frac), den);
}

std::string Ratio::to_string() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
}

}  // namespace witsim
