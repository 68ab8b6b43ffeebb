#include "witsim/rad.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>

namespace witsim::rad {

namespace {

[[noreturn]] void illegal(const RadRequest& req, const LifecycleEvent& ev, const std::string& why) {
    throw RadError(ErrorKind::IllegalTransition, std::string(to_string(ev.kind)) + " in state " +
                                                     to_string(req.state) + ": " + why);
}

/// Exact decimal: mantissa * 10^-scale.
struct Decimal {
    __int128 mantissa = 0;
    std::uint32_t scale = 0;

    static Decimal parse(std::string_view s) {
        Decimal d;
        bool negative = false;
        std::size_t i = 0;
        if (i < s.size() && (s[i] == '-' || s[i] == '+')) negative = s[i++] == '-';
        bool digits = false;
        bool dot = false;
        for (; i < s.size(); ++i) {
            char c = s[i];
            if (c == '.' && !dot) {
                dot = true;
                continue;
            }
            if (!std::isdigit(static_cast<unsigned char>(c))) throw std::invalid_argument("not a decimal number");
            digits = true;
            if (d.mantissa > static_cast<__int128>(1) << 100) throw std::invalid_argument("decimal too long");
            d.mantissa = d.mantissa * 10 + (c - '0');
            if (dot) ++d.scale;
        }
        if (!digits) throw std::invalid_argument("not a decimal number");
        if (negative) d.mantissa = -d.mantissa;
        return d;
    }

    Decimal rescaled(std::uint32_t s) const {
        Decimal d = *this;
        while (d.scale < s) {
            d.mantissa *= 10;
            ++d.scale;
        }
        return d;
    }

    /// Half away from zero.
    Decimal rounded(std::uint32_t digits) const {
        if (scale <= digits) return rescaled(digits);
        __int128 div = 1;
        for (auto k = digits; k < scale; ++k) div *= 10;
        __int128 mag = mantissa < 0 ? -mantissa : mantissa;
        __int128 q = mag / div;
        if ((mag % div) * 2 >= div) ++q;
        return {mantissa < 0 ? -q : q, digits};
    }

    std::string to_string() const {
        __int128 mag = mantissa < 0 ? -mantissa : mantissa;
        std::string digits;
        do {
            digits.push_back(static_cast<char>('0' + static_cast<int>(mag % 10)));
            mag /= 10;
        } while (mag > 0);
        while (digits.size() <= scale) digits.push_back('0');
        std::reverse(digits.begin(), digits.end());
        if (scale > 0) digits.insert(digits.size() - scale, ".");
        return (mantissa < 0 ? "-" : "") + digits;
    }

    friend bool operator<(const Decimal& a, const Decimal& b) {
        auto s = std::max(a.scale, b.scale);
        return a.rescaled(s).mantissa < b.rescaled(s).mantissa;
    }
};

Decimal midpoint(const Decimal& a, const Decimal& b) {
    auto s = std::max(a.scale, b.scale);
    __int128 sum = a.rescaled(s).mantissa + b.rescaled(s).mantissa;
    if (sum % 2 == 0) return {sum / 2, s};
    return {sum * 5, s + 1};
}

Bytes tagged(char tag, std::string_view text) {
    Bytes out;
    out.reserve(text.size() + 1);
    out.push_back(static_cast<std::uint8_t>(tag));
    out.insert(out.end(), text.begin(), text.end());
    return out;
}

}  // namespace

const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::ReplicationTooLow: return "ReplicationTooLow";
        case ErrorKind::ReplicationTooHigh: return "ReplicationTooHigh";
        case ErrorKind::InsufficientFee: return "InsufficientFee";
        case ErrorKind::NoPaths: return "NoPaths";
        case ErrorKind::MalformedRequest: return "MalformedRequest";
        case ErrorKind::IllegalTransition: return "IllegalTransition";
    }
    return "?";
}

RadError::RadError(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

Normalization Normalization::parse(std::string_view text) {
    if (text == "identity") return identity();
    if (text == "to_lowercase") return to_lowercase();
    if (text.starts_with("select_field:") && text.size() > 13) return select_field(std::string(text.substr(13)));
    if (text.starts_with("round_decimal:")) {
        auto digits = text.substr(14);
        std::uint32_t k = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
        if (ec == std::errc() && ptr == digits.data() + digits.size() && !digits.empty() && k <= 18)
            return round_decimal(k);
    }
    throw std::invalid_argument("unknown normalization '" + std::string(text) + "'");
}

std::string Normalization::to_string() const {
    switch (kind) {
        case Kind::Identity: return "identity";
        case Kind::ToLowercase: return "to_lowercase";
        case Kind::SelectField: return "select_field:" + field;
        case Kind::RoundDecimal: return "round_decimal:" + std::to_string(digits);
    }
    return "?";
}

const char* to_string(Aggregation a) {
    switch (a) {
        case Aggregation::First: return "first";
        case Aggregation::MedianNumeric: return "median_numeric";
        case Aggregation::Mode: return "mode";
        case Aggregation::ConcatSorted: return "concat_sorted";
    }
    return "?";
}

Aggregation parse_aggregation(std::string_view text) {
    for (auto a : {Aggregation::First, Aggregation::MedianNumeric, Aggregation::Mode, Aggregation::ConcatSorted})
        if (text == to_string(a)) return a;
    throw std::invalid_argument("unknown aggregation '" + std::string(text) + "'");
}

const char* to_string(LifecycleState s) {
    switch (s) {
        case LifecycleState::Draft: return "draft";
        case LifecycleState::Posted: return "posted";
        case LifecycleState::Assignable: return "assignable";
        case LifecycleState::Assigned: return "assigned";
        case LifecycleState::Committing: return "committing";
        case LifecycleState::Revealing: return "revealing";
        case LifecycleState::Resolved: return "resolved";
        case LifecycleState::Delivered: return "delivered";
    }
    return "?";
}

const char* to_string(LifecycleEvent::Kind k) {
    using K = LifecycleEvent::Kind;
    switch (k) {
        case K::Posted: return "posted";
        case K::LockExpired: return "lock_expired";
        case K::Assigned: return "assigned";
        case K::Committed: return "committed";
        case K::AllCommitted: return "all_committed";
        case K::Revealed: return "revealed";
        case K::Resolved: return "resolved";
        case K::Delivered: return "delivered";
        case K::Relaunched: return "relaunched";
        case K::ReplacedByFee: return "replaced_by_fee";
    }
    return "?";
}

Bytes RadRequest::descriptor() const {
    Writer w;
    w.tag("witsim/rad").digest(client).u64(nonce).u32(static_cast<std::uint32_t>(paths.size()));
    for (const auto& p : paths) {
        w.str(p.source_key)
            .u8(static_cast<std::uint8_t>(p.normalization.kind))
            .str(p.normalization.field)
            .u32(p.normalization.digits)
            .u64(p.declared_complexity);
    }
    w.u8(static_cast<std::uint8_t>(aggregation)).u32(replication);
    w.u8(time_lock ? 1 : 0).u64(time_lock.value_or(0));
    w.u8(deliver ? 1 : 0);
    if (deliver) w.str(deliver->target).u64(deliver->complexity);
    return w.data();
}

EpochIndex RadRequest::reference_epoch() const { return std::max(posted_epoch.value_or(0), time_lock.value_or(0)); }

void validate_request(const RadRequest& req, TokenAmount attached_value, const economics::FeeParams& fees,
                      std::uint32_t replication_cap) {
    if (req.paths.empty()) throw RadError(ErrorKind::NoPaths, "request has no retrieval paths");
    for (const auto& p : req.paths)
        if (p.declared_complexity == 0 || p.source_key.empty())
            throw RadError(ErrorKind::MalformedRequest, "paths need a source key and complexity >= 1");
    if (req.deliver && req.deliver->complexity == 0)
        throw RadError(ErrorKind::MalformedRequest, "delivery complexity must be >= 1");
    if (req.replication < 2)
        throw RadError(ErrorKind::ReplicationTooLow, "replication " + std::to_string(req.replication) + " < 2");
    if (req.replication > replication_cap)
        throw RadError(ErrorKind::ReplicationTooHigh, "replication " + std::to_string(req.replication) + " > cap " +
                                                          std::to_string(replication_cap));
    const auto needed =
        req.witness_fee + req.bridge_fee + economics::min_miner_fee(req.descriptor().size(), fees);
    if (attached_value < needed)
        throw RadError(ErrorKind::InsufficientFee,
                       "attached " + attached_value.to_wit_string() + ", need " + needed.to_wit_string());
}

void SourceOracle::set(const std::string& key, EpochIndex from, std::string value) {
    table_[key][from] = std::move(value);
}

std::optional<std::string> SourceOracle::value_at(const std::string& key, EpochIndex epoch) const {
    auto it = table_.find(key);
    if (it == table_.end()) return std::nullopt;
    auto v = it->second.upper_bound(epoch);
    if (v == it->second.begin()) return std::nullopt;
    return std::prev(v)->second;
}

Bytes value_bytes(std::string_view value) { return tagged('V', value); }
Bytes error_bytes(std::string_view error) { return tagged('E', error); }

Claim Claim::make(const Digest& request_id, const ParticipantId& witness, Bytes canonical_value) {
    auto digest = sha256(canonical_value);
    return {request_id, witness, std::move(canonical_value), digest};
}

std::string normalize(const Normalization& n, const std::string& raw) {
    switch (n.kind) {
        case Normalization::Kind::Identity: return raw;
        case Normalization::Kind::ToLowercase: {
            std::string out = raw;
            std::transform(out.begin(), out.end(), out.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            return out;
        }
        case Normalization::Kind::SelectField: {
            auto doc = nlohmann::json::parse(raw, nullptr, false);
            if (doc.is_discarded() || !doc.is_object() || !doc.contains(n.field))
                throw std::invalid_argument("field '" + n.field + "' not found");
            const auto& v = doc.at(n.field);
            return v.is_string() ? v.get<std::string>() : v.dump();
        }
        case Normalization::Kind::RoundDecimal: return Decimal::parse(raw).rounded(n.digits).to_string();
    }
    throw std::invalid_argument("unknown normalization");
}

std::string aggregate(Aggregation a, std::vector<std::string> values) {
    if (values.empty()) throw std::invalid_argument("nothing to aggregate");
    switch (a) {
        case Aggregation::First: return values.front();
        case Aggregation::MedianNumeric: {
            std::vector<Decimal> nums;
            for (const auto& v : values) nums.push_back(Decimal::parse(v));
            std::stable_sort(nums.begin(), nums.end());
            const auto n = nums.size();
            if (n % 2 == 1) return nums[n / 2].to_string();
            return midpoint(nums[n / 2 - 1], nums[n / 2]).to_string();
        }
        case Aggregation::Mode: {
            std::map<std::string, std::size_t> counts;
            for (const auto& v : values) ++counts[v];
            auto best = counts.begin();  // map order breaks ties toward the smallest string
            for (auto it = counts.begin(); it != counts.end(); ++it)
                if (it->second > best->second) best = it;
            return best->first;
        }
        case Aggregation::ConcatSorted: {
            std::sort(values.begin(), values.end());
            std::string out;
            for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + values[i];
            return out;
        }
    }
    throw std::invalid_argument("unknown aggregation");
}

RetrievalOutcome retrieve_value(const RadRequest& req, const SourceOracle& source, EpochIndex epoch) {
    std::vector<std::string> results;
    for (const auto& path : req.paths) {
        auto raw = source.value_at(path.source_key, epoch);
        if (!raw) return {kSourceUnavailable, true};
        try {
            results.push_back(normalize(path.normalization, *raw));
        } catch (const std::invalid_argument&) {
            return {"NormalizationFailed", true};
        }
    }
    try {
        return {aggregate(req.aggregation, std::move(results)), false};
    } catch (const std::invalid_argument&) {
        return {"AggregationFailed", true};
    }
}

Claim execute_retrieval(const RadRequest& req, const ParticipantId& witness, const SourceOracle& source,
                        EpochIndex epoch, const WitnessView& view) {
    Bytes value = view.substitute ? value_bytes(*view.substitute) : retrieve_value(req, source, epoch).bytes();
    return Claim::make(req.id(), witness, std::move(value));
}

Bytes true_value(const RadRequest& req, const SourceOracle& source, EpochIndex epoch) {
    return retrieve_value(req, source, epoch).bytes();
}

Digest commitment_digest(const Claim& claim, const ParticipantId& witness_pk, const Digest& prev_block_hash) {
    return nonced_claim_hash(claim.canonical_value, witness_pk, prev_block_hash);
}

bool verify_reveal(const Commitment& commit, const Reveal& reveal) {
    if (commit.request_id != reveal.request_id || commit.witness != reveal.witness) return false;
    return nonced_claim_hash(reveal.canonical_value, commit.witness, reveal.prev_block_hash) == commit.digest;
}

RadRequest lifecycle_step(RadRequest req, const LifecycleEvent& ev) {
    using K = LifecycleEvent::Kind;
    using S = LifecycleState;

    if (ev.kind == K::Relaunched) {
        if (!req.undecidable) illegal(req, ev, "request is not undecidable");
        req.undecidable = false;
        return req;
    }
    if (req.undecidable && ev.kind != K::Posted) illegal(req, ev, "undecidable requests only accept relaunch");

    switch (ev.kind) {
        case K::Posted:
            if (req.state != S::Draft) illegal(req, ev, "already posted");
            req.posted_epoch = ev.epoch;
            req.state = req.time_lock && *req.time_lock > ev.epoch ? S::Posted : S::Assignable;
            return req;
        case K::LockExpired:
            if (req.state != S::Posted) illegal(req, ev, "no pending time lock");
            if (!req.time_lock || ev.epoch < *req.time_lock) illegal(req, ev, "time lock still active");
            req.state = S::Assignable;
            return req;
        case K::Assigned:
            if (req.state != S::Assignable && req.state != S::Assigned && req.state != S::Committing)
                illegal(req, ev, "not open for assignment");
            if (req.state == S::Assignable) req.state = S::Assigned;
            return req;
        case K::Committed:
            if (req.state != S::Assigned && req.state != S::Committing) illegal(req, ev, "not collecting commitments");
            if (!ev.witness) illegal(req, ev, "missing witness");
            if (!req.committed.insert(*ev.witness).second) illegal(req, ev, "witness already committed");
            req.state = S::Committing;
            return req;
        case K::AllCommitted:
            if (req.state != S::Committing) illegal(req, ev, "not collecting commitments");
            if (req.committed.size() < req.replication) illegal(req, ev, "fewer commitments than replication");
            req.all_committed_epoch = ev.epoch;
            req.state = S::Revealing;
            return req;
        case K::Revealed:
            if (req.state != S::Revealing) illegal(req, ev, "not collecting reveals");
            if (!ev.witness || !req.committed.contains(*ev.witness)) illegal(req, ev, "witness has no commitment");
            if (ev.epoch <= *req.all_committed_epoch) illegal(req, ev, "reveal in the commitment epoch");
            if (!req.revealed.insert(*ev.witness).second) illegal(req, ev, "witness already revealed");
            return req;
        case K::Resolved:
            if (req.state != S::Revealing) illegal(req, ev, "not collecting reveals");
            if (req.revealed.size() < req.replication && !ev.timeout) illegal(req, ev, "too few reveals");
            req.state = S::Resolved;
            return req;
        case K::Delivered:
            if (req.state != S::Resolved) illegal(req, ev, "not resolved");
            req.state = S::Delivered;
            return req;
        case K::ReplacedByFee:
            if (req.state == S::Draft || req.state == S::Revealing || req.state == S::Resolved ||
                req.state == S::Delivered)
                illegal(req, ev, "fees are fixed once reveals start");
            if (ev.paths != req.paths) illegal(req, ev, "retrieval paths changed");
            if (ev.new_witness_fee <= req.witness_fee) illegal(req, ev, "replacement must raise the reward");
            req.witness_fee = ev.new_witness_fee;
            return req;
        case K::Relaunched: break;
    }
    illegal(req, ev, "unknown event");
}

}  // namespace witsim::rad
