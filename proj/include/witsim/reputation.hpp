#pragma once

#include "witsim/types.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace witsim::reputation {

/// Reputation is held on a fixed 10^-12 grid, so every score is an exact
/// rational k / 10^12 and every transfer is exact integer arithmetic.
inline constexpr std::int64_t kUnitsPerPoint = 1'000'000'000'000;

class Score {
public:
    constexpr Score() = default;
    static constexpr Score from_units(std::int64_t units) { return Score(units); }
    static constexpr Score neutral() { return Score(kUnitsPerPoint); }
    static Score from_points(const Ratio& points);
    /// Decimal points, e.g. "1000", "0.25".
    static Score parse(std::string_view text);

    constexpr std::int64_t units() const { return units_; }
    double to_double() const { return static_cast<double>(units_) / static_cast<double>(kUnitsPerPoint); }
    long double to_long_double() const {
        return static_cast<long double>(units_) / static_cast<long double>(kUnitsPerPoint);
    }
    /// Exact decimal rendering with trailing zeros trimmed.
    std::string to_string() const;

    constexpr bool is_neutral() const { return units_ == kUnitsPerPoint; }
    constexpr bool above_neutral() const { return units_ > kUnitsPerPoint; }

    auto operator<=>(const Score&) const = default;

private:
    constexpr explicit Score(std::int64_t units) : units_(units) {}
    std::int64_t units_ = kUnitsPerPoint;
};

/// Decay rate in [0, 1].
class DecayRate {
public:
    DecayRate() : value_(99, 100) {}
    explicit DecayRate(Ratio value);
    const Ratio& value() const { return value_; }

private:
    Ratio value_;
};

struct LedgerParams {
    DecayRate decay;
    /// Scores in (1, 1 + delta] are assimilated to 1.
    Score assimilation_delta = Score::from_units(kUnitsPerPoint / 1'000'000);
};

/// Result of truth-by-consensus for one epoch, as consumed by the ledger.
struct EpochVerdict {
    std::set<ParticipantId> honest;
    /// Deviation in [0, 1] per dishonest participant.
    std::map<ParticipantId, Ratio> dishonest;
    /// Honest witnesses and bridges who fulfilled this epoch's tasks.
    std::set<ParticipantId> task_fulfillers;

    /// Union of two verdicts; a participant dishonest in either is dishonest,
    /// keeping the larger deviation.
    void merge(const EpochVerdict& other);
    bool operator==(const EpochVerdict&) const = default;
};

class ReputationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Conserved reputation scores. Only non-neutral scores are stored. The sum of
/// all scores plus the carried redistribution pool equals total() at every
/// epoch boundary.
class ReputationLedger {
public:
    ReputationLedger() = default;
    /// Every participant starts at the neutral score 1.
    explicit ReputationLedger(std::vector<ParticipantId> participants, LedgerParams params = {});
    /// Custom initial scores; unlisted participants are neutral. The conserved
    /// total is the resulting sum.
    static ReputationLedger with_scores(std::vector<ParticipantId> participants,
                                        const std::map<ParticipantId, Score>& initial, LedgerParams params = {});

    Score score(const ParticipantId& p) const;
    bool contains(const ParticipantId& p) const;
    const std::vector<ParticipantId>& participants() const { return participants_; }
    std::size_t population() const { return participants_.size(); }
    const std::map<ParticipantId, Score>& stored() const { return scores_; }
    const LedgerParams& params() const { return params_; }

    std::int64_t total_units() const { return total_units_; }
    std::int64_t pool_units() const { return pool_units_; }
    /// Sum of all scores plus the pool; equals total_units() when conserved.
    std::int64_t balance_units() const;

    void set_score(const ParticipantId& p, Score s);
    void add_to_pool(std::int64_t units) { pool_units_ += units; }
    void take_pool(std::int64_t units);

    /// Restores raw state; used by snapshots.
    static ReputationLedger restore(std::vector<ParticipantId> participants, std::map<ParticipantId, Score> scores,
                                    std::int64_t total_units, std::int64_t pool_units, LedgerParams params);

    bool operator==(const ReputationLedger&) const;

private:
    std::vector<ParticipantId> participants_;  // sorted
    std::map<ParticipantId, Score> scores_;
    std::int64_t total_units_ = 0;
    std::int64_t pool_units_ = 0;
    LedgerParams params_;
};

/// score * decay^(log10 score) for scores above neutral; other scores are
/// returned unchanged. Never pushes a score below neutral.
Score apply_demurrage(Score score, const DecayRate& decay);

struct EpochUpdate {
    ReputationLedger ledger;
    /// The pool was non-empty but nobody fulfilled a task; it was carried over.
    bool empty_fulfiller_set = false;
    std::int64_t penalties_units = 0;
    std::int64_t demurrage_units = 0;
    std::int64_t distributed_units = 0;
};

/// Penalize dishonest participants, apply demurrage, split the pool among
/// fulfillers and assimilate near-neutral scores.
EpochUpdate epoch_update(ReputationLedger ledger, const EpochVerdict& verdict, const Ratio& penalty_rate);

/// Set every score in (1, 1 + delta] to 1 and move the surplus to the pool.
ReputationLedger assimilate(ReputationLedger ledger);

/// Participants with score above 1. Falls back to all neutral participants
/// when nobody is above 1.
std::vector<std::pair<ParticipantId, Score>> engaged_set(const ReputationLedger& ledger);

/// Demurrage table for idle participants (the verify-table command).
struct DemurrageRow {
    Score initial;
    std::vector<std::pair<std::uint64_t, Score>> by_epoch;
};
std::vector<DemurrageRow> demurrage_table(std::span<const std::uint64_t> initial_points,
                                          std::span<const std::uint64_t> epochs, const DecayRate& decay);

}  // namespace witsim::reputation
