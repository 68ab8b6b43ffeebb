#pragma once

#include "witsim/economics.hpp"
#include "witsim/eligibility.hpp"
#include "witsim/hash.hpp"
#include "witsim/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace witsim::rad {

enum class ErrorKind {
    ReplicationTooLow,
    ReplicationTooHigh,
    InsufficientFee,
    NoPaths,
    MalformedRequest,
    IllegalTransition,
};

const char* to_string(ErrorKind k);

class RadError : public std::runtime_error {
public:
    RadError(ErrorKind kind, const std::string& what);
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct Normalization {
    enum class Kind : std::uint8_t { Identity = 0, ToLowercase = 1, SelectField = 2, RoundDecimal = 3 };
    Kind kind = Kind::Identity;
    std::string field;         // SelectField
    std::uint32_t digits = 0;  // RoundDecimal

    static Normalization identity() { return {}; }
    static Normalization to_lowercase() { return {Kind::ToLowercase, {}, 0}; }
    static Normalization select_field(std::string f) { return {Kind::SelectField, std::move(f), 0}; }
    static Normalization round_decimal(std::uint32_t k) { return {Kind::RoundDecimal, {}, k}; }
    /// "identity", "to_lowercase", "select_field:<name>", "round_decimal:<k>".
    static Normalization parse(std::string_view text);
    std::string to_string() const;

    bool operator==(const Normalization&) const = default;
};

struct RetrievalPath {
    std::string source_key;
    Normalization normalization;
    std::uint64_t declared_complexity = 1;
    bool operator==(const RetrievalPath&) const = default;
};

enum class Aggregation : std::uint8_t { First = 0, MedianNumeric = 1, Mode = 2, ConcatSorted = 3 };

const char* to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view text);

enum class LifecycleState : std::uint8_t { Draft, Posted, Assignable, Assigned, Committing, Revealing, Resolved, Delivered };

const char* to_string(LifecycleState s);

struct DeliveryStub {
    std::string target;
    std::uint64_t complexity = 1;
    bool operator==(const DeliveryStub&) const = default;
};

struct RadRequest {
    // Immutable request description; hashed into the id.
    ParticipantId client;
    std::uint64_t nonce = 0;
    std::vector<RetrievalPath> paths;
    Aggregation aggregation = Aggregation::First;
    std::uint32_t replication = 2;
    std::optional<EpochIndex> time_lock;
    std::optional<DeliveryStub> deliver;

    // Mutable terms.
    TokenAmount witness_fee;
    TokenAmount bridge_fee;
    bool undecidable = false;

    // Lifecycle bookkeeping.
    LifecycleState state = LifecycleState::Draft;
    std::optional<EpochIndex> posted_epoch;
    std::set<ParticipantId> committed;
    std::optional<EpochIndex> all_committed_epoch;
    std::set<ParticipantId> revealed;

    /// Canonical serialization of the immutable fields.
    Bytes descriptor() const;
    Digest id() const { return sha256(descriptor()); }
    /// Epoch whose source values witnesses observe.
    EpochIndex reference_epoch() const;

    bool operator==(const RadRequest&) const = default;
};

/// ok, or throws RadError (NoPaths, ReplicationTooLow, ReplicationTooHigh,
/// InsufficientFee, MalformedRequest).
void validate_request(const RadRequest& req, TokenAmount attached_value, const economics::FeeParams& fees,
                      std::uint32_t replication_cap);

/// Stand-in for the web: per source key, values that take effect from a given
/// epoch on.
class SourceOracle {
public:
    void set(const std::string& key, EpochIndex from, std::string value);
    /// Latest value whose start epoch is <= epoch.
    std::optional<std::string> value_at(const std::string& key, EpochIndex epoch) const;
    const std::map<std::string, std::map<EpochIndex, std::string>>& table() const { return table_; }

    bool operator==(const SourceOracle&) const = default;

private:
    std::map<std::string, std::map<EpochIndex, std::string>> table_;
};

/// Claim bytes are tagged: 'V' + value, or 'E' + error name.
Bytes value_bytes(std::string_view value);
Bytes error_bytes(std::string_view error);
inline const std::string kSourceUnavailable = "SourceUnavailable";

struct Claim {
    Digest request_id;
    ParticipantId witness;
    Bytes canonical_value;
    Digest value_digest;

    static Claim make(const Digest& request_id, const ParticipantId& witness, Bytes canonical_value);
    bool operator==(const Claim&) const = default;
};

/// How a witness reports what it retrieved.
struct WitnessView {
    /// nullopt: report the honest result; otherwise report this value.
    std::optional<std::string> substitute;
    static WitnessView honest() { return {}; }
    static WitnessView lying(std::string value) { return {std::move(value)}; }
};

struct RetrievalOutcome {
    std::string text;  // aggregated value, or an error name
    bool is_error = false;
    Bytes bytes() const { return is_error ? error_bytes(text) : value_bytes(text); }
};

/// Pure retrieval pipeline: fetch, normalize each path, aggregate.
RetrievalOutcome retrieve_value(const RadRequest& req, const SourceOracle& source, EpochIndex epoch);

Claim execute_retrieval(const RadRequest& req, const ParticipantId& witness, const SourceOracle& source,
                        EpochIndex epoch, const WitnessView& view);

/// Value the network should converge on: the honest claim bytes.
Bytes true_value(const RadRequest& req, const SourceOracle& source, EpochIndex epoch);

std::string normalize(const Normalization& n, const std::string& raw);  // throws std::invalid_argument
std::string aggregate(Aggregation a, std::vector<std::string> values);  // throws std::invalid_argument

struct Commitment {
    Digest request_id;
    ParticipantId witness;
    Digest digest;
    EpochIndex epoch = 0;
    eligibility::EligibilityProof assignment_proof;
    bool operator==(const Commitment&) const = default;
};

struct Reveal {
    Digest request_id;
    ParticipantId witness;
    Bytes canonical_value;
    /// Opening: the block hash the commitment was bound to.
    Digest prev_block_hash;
    bool operator==(const Reveal&) const = default;
};

Digest commitment_digest(const Claim& claim, const ParticipantId& witness_pk, const Digest& prev_block_hash);

bool verify_reveal(const Commitment& commit, const Reveal& reveal);

struct LifecycleEvent {
    enum class Kind {
        Posted,
        LockExpired,
        Assigned,
        Committed,
        AllCommitted,
        Revealed,
        Resolved,
        Delivered,
        Relaunched,
        ReplacedByFee,
    };
    Kind kind = Kind::Posted;
    EpochIndex epoch = 0;
    std::optional<ParticipantId> witness;  // Committed, Revealed
    bool timeout = false;                   // Resolved
    std::vector<RetrievalPath> paths;       // ReplacedByFee
    TokenAmount new_witness_fee;            // ReplacedByFee

    static LifecycleEvent of(Kind k, EpochIndex e) {
        LifecycleEvent ev;
        ev.kind = k;
        ev.epoch = e;
        return ev;
    }
    static LifecycleEvent posted(EpochIndex e) { return of(Kind::Posted, e); }
    static LifecycleEvent lock_expired(EpochIndex e) { return of(Kind::LockExpired, e); }
    static LifecycleEvent assigned(EpochIndex e) { return of(Kind::Assigned, e); }
    static LifecycleEvent committed(EpochIndex e, ParticipantId w) {
        auto ev = of(Kind::Committed, e);
        ev.witness = w;
        return ev;
    }
    static LifecycleEvent all_committed(EpochIndex e) { return of(Kind::AllCommitted, e); }
    static LifecycleEvent revealed(EpochIndex e, ParticipantId w) {
        auto ev = of(Kind::Revealed, e);
        ev.witness = w;
        return ev;
    }
    static LifecycleEvent resolved(EpochIndex e, bool timed_out = false) {
        auto ev = of(Kind::Resolved, e);
        ev.timeout = timed_out;
        return ev;
    }
    static LifecycleEvent delivered(EpochIndex e) { return of(Kind::Delivered, e); }
    static LifecycleEvent relaunched(EpochIndex e) { return of(Kind::Relaunched, e); }
    static LifecycleEvent replaced_by_fee(EpochIndex e, std::vector<RetrievalPath> paths, TokenAmount fee) {
        auto ev = of(Kind::ReplacedByFee, e);
        ev.paths = std::move(paths);
        ev.new_witness_fee = fee;
        return ev;
    }
};

const char* to_string(LifecycleEvent::Kind k);

/// Applies one legal transition or throws RadError(IllegalTransition).
RadRequest lifecycle_step(RadRequest req, const LifecycleEvent& event);

/// Epochs a committed witness has to reveal before it counts as a straggler.
inline constexpr EpochIndex kRevealTimeout = 2;

}  // namespace witsim::rad
