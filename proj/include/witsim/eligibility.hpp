#pragma once

#include "witsim/reputation.hpp"
#include "witsim/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

namespace witsim::eligibility {

/// Lottery flavour. Distinct flags give independent draws for the same
/// participant and epoch.
enum class TaskKind : std::uint8_t { Mine = 0, RetrieveAttest = 1, Deliver = 2 };

const char* to_string(TaskKind k);

/// Simulation key pair: public_key = sha256(secret).
struct ParticipantKey {
    Digest secret;
    ParticipantId public_key;

    static ParticipantKey from_secret(const Digest& secret);
    static ParticipantKey derive(std::uint64_t seed, std::uint64_t index);

    /// Deterministic signature stand-in: sha256(secret || message).
    Digest sign(std::span<const std::uint8_t> message) const;
};

/// Influence is an exact fraction of the engaged set's reputation.
using Influence = Ratio;

struct RandomBeacon {
    Digest value;
    bool operator==(const RandomBeacon&) const = default;
};

struct EligibilityProof {
    ParticipantId participant;
    EpochIndex epoch = 0;
    TaskKind kind = TaskKind::Mine;
    Digest signature;
    /// Threshold multiplier the proof was drawn under (backup index for
    /// mining, required count for tasks).
    Ratio multiplier{1, 1};
    /// Binds every public field to the beacon the proof was drawn from.
    Digest seal;

    std::uint64_t tier() const { return multiplier.den() == 1 ? static_cast<std::uint64_t>(multiplier.num()) : 0; }
    bool operator==(const EligibilityProof&) const = default;
};

/// Per-epoch influence lookup over a reputation ledger.
class InfluenceTable {
public:
    explicit InfluenceTable(const reputation::ReputationLedger& rep);

    Influence of(const ParticipantId& p) const;
    /// Members of the engaged set (or the neutral fallback), sorted by id.
    const std::vector<ParticipantId>& engaged() const { return engaged_; }
    bool is_engaged(const ParticipantId& p) const;

private:
    std::vector<ParticipantId> engaged_;
    std::map<ParticipantId, std::int64_t> units_;
    std::int64_t total_units_ = 0;
};

/// r_p / sum of engaged reputation; zero outside the engaged set.
Influence influence(const reputation::ReputationLedger& rep, const ParticipantId& p);

using CheckpointIndex = std::map<EpochIndex, std::set<Digest>>;

class NoHistory : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Beacon for epoch t: hash of the sorted block digests of the latest
/// non-empty checkpoint below t, with t appended.
RandomBeacon epoch_randomness(const CheckpointIndex& by_checkpoint, EpochIndex t);

/// Draw for (participant, epoch, beacon, flag): the keyed-hash signature.
Digest lottery_draw(const ParticipantKey& key, EpochIndex t, const RandomBeacon& beacon, TaskKind kind);

/// draw / 2^256 <= multiplier * inf, evaluated exactly.
bool passes_threshold(const Digest& draw, const Ratio& multiplier, const Influence& inf);

std::optional<EligibilityProof> check_eligibility(const ParticipantKey& key, EpochIndex t,
                                                  const RandomBeacon& beacon, TaskKind kind,
                                                  const Ratio& multiplier, const Influence& inf);

/// Recomputes the seal and the threshold comparison from public data.
bool verify_proof(const EligibilityProof& proof, const RandomBeacon& beacon,
                  const reputation::ReputationLedger& rep, const Ratio& multiplier);
bool verify_proof(const EligibilityProof& proof, const RandomBeacon& beacon, const InfluenceTable& table,
                  const Ratio& multiplier);

struct MiningOutcome {
    /// Backup index that produced the winners; 0 when every tier was empty.
    std::uint64_t tier = 0;
    std::vector<EligibilityProof> winners;
    /// Participants eligible at tier 1, whether or not tier 1 was used.
    std::size_t primary_count = 0;
};

/// Tries backup indices 1..backup_cap and keeps the lowest tier with at least
/// one eligible participant.
MiningOutcome mining_lottery(std::span<const ParticipantKey> keys, EpochIndex t, const RandomBeacon& beacon,
                             const InfluenceTable& table, std::uint64_t backup_cap);

/// Beacon specialised to one request so that distinct requests in one epoch
/// draw independently.
RandomBeacon task_beacon(const RandomBeacon& beacon, const Digest& request_id);

struct Assignment {
    std::vector<EligibilityProof> assigned;
    std::uint64_t deficit = 0;
};

/// One round of the task-assignment lottery. `required` is the replication
/// factor in the first round and the outstanding vacancy count in refill
/// rounds; `exclude` holds witnesses already assigned to the request.
Assignment assign_task(const Digest& request_id, std::uint64_t required, EpochIndex t, const RandomBeacon& beacon,
                       const InfluenceTable& table, std::span<const ParticipantKey> keys,
                       const std::set<ParticipantId>& exclude, TaskKind kind = TaskKind::RetrieveAttest);

}  // namespace witsim::eligibility
