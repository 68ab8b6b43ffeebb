#pragma once

#include "witsim/consensus.hpp"
#include "witsim/eligibility.hpp"
#include "witsim/ledger.hpp"
#include "witsim/rad.hpp"
#include "witsim/reputation.hpp"
#include "witsim/scenario.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace witsim::simnet {

struct MetricsFrame {
    EpochIndex epoch = 0;
    /// Participants eligible at tier 1 of the mining lottery.
    std::uint64_t miners = 0;
    std::uint64_t blocks = 0;
    std::uint64_t resolved = 0;
    std::uint64_t correct = 0;
    /// Block rewards minted so far.
    TokenAmount supply;
    std::int64_t pool_units = 0;
    /// Sum of all scores plus the pool, checked against the conserved total.
    std::int64_t balance_units = 0;
    std::vector<reputation::Score> tracked;

    bool operator==(const MetricsFrame&) const = default;
};

struct VerdictLogEntry {
    EpochIndex epoch = 0;
    Digest request_id;
    std::optional<Digest> winning;  // nullopt: contested
    std::uint64_t supporters = 0;
    std::uint64_t deviators = 0;
    bool operator==(const VerdictLogEntry&) const = default;
};

struct DeliveryLogEntry {
    EpochIndex epoch = 0;
    Digest request_id;
    ParticipantId bridge;
    std::string target;
    bool operator==(const DeliveryLogEntry&) const = default;
};

/// Progress of one scheduled request instance through the network.
struct RequestRun {
    enum class Phase : std::uint8_t { Scheduled, Rejected, Posting, Active, Pledged, Resolved, Done };

    std::size_t spec = 0;
    std::uint64_t instance = 0;
    EpochIndex post_epoch = 0;
    std::optional<EpochIndex> relaunch_epoch;
    rad::RadRequest req;
    Digest id;
    ledger::OutPoint funding;
    TokenAmount attached;
    Phase phase = Phase::Scheduled;
    std::optional<Digest> post_tx;
    std::optional<Digest> pledge_tx;

    /// Everyone drawn for the task, including witnesses that ignored it.
    std::set<ParticipantId> assigned;
    std::map<ParticipantId, rad::Commitment> commitments;
    /// Claims held back until the reveal, with the block hash each one binds.
    std::map<ParticipantId, Bytes> held_claims;
    std::map<ParticipantId, Digest> bound_block;
    std::map<ParticipantId, rad::Reveal> reveals;

    std::optional<Bytes> winning;
    bool correct = false;
    std::set<ParticipantId> bridges_tried;

    bool operator==(const RequestRun&) const = default;
};

struct SimState {
    EpochIndex next_epoch = 1;
    ledger::EpochDag dag;
    reputation::ReputationLedger rep;
    std::vector<RequestRun> requests;
    /// Submitted transaction ids not yet canonical, with the epoch they arrived.
    std::map<Digest, EpochIndex> mempool;
    std::vector<ledger::TallyRecord> pending_tallies;
    reputation::EpochVerdict accumulated;
    std::vector<MetricsFrame> frames;
    std::vector<VerdictLogEntry> verdicts;
    std::vector<DeliveryLogEntry> deliveries;
    std::uint64_t rejected_requests = 0;

    bool operator==(const SimState&) const = default;
};

/// A module error raised inside the epoch loop, tagged with where it happened.
class SimError : public std::runtime_error {
public:
    SimError(EpochIndex epoch, const std::string& operation, const std::string& what);
    EpochIndex epoch() const { return epoch_; }
    const std::string& operation() const { return operation_; }

private:
    EpochIndex epoch_;
    std::string operation_;
};

class SnapshotError : public std::runtime_error {
public:
    enum class Kind { CorruptSnapshot, VersionMismatch };
    SnapshotError(Kind kind, const std::string& what);
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

inline constexpr const char* kSnapshotVersion = "witsim-snapshot/1";

/// Mempool entries older than this many epochs are dropped.
inline constexpr EpochIndex kMempoolExpiry = 16;

/// The ledger-value audit walks the whole UTXO set, so it runs on this period
/// and on the final epoch rather than every epoch.
inline constexpr EpochIndex kSupplyAuditPeriod = 64;

class Simulation {
public:
    /// Fresh run from the genesis block.
    explicit Simulation(Scenario scenario);
    Simulation(Scenario scenario, SimState state);

    const Scenario& scenario() const { return scenario_; }
    const SimState& state() const { return state_; }
    const std::vector<eligibility::ParticipantKey>& keys() const { return keys_; }
    const Strategy& strategy_of(std::size_t index) const { return strategies_.at(index); }
    const Strategy& strategy_of(const ParticipantId& p) const { return strategies_.at(index_.at(p)); }
    std::size_t index_of(const ParticipantId& p) const { return index_.at(p); }

    bool finished() const { return state_.next_epoch > scenario_.epochs; }
    /// Changes the run length; epochs already run are unaffected.
    void set_epochs(std::uint64_t epochs) { scenario_.epochs = epochs; }
    /// Runs epoch state().next_epoch. Throws SimError.
    const MetricsFrame& step();
    /// Runs every remaining epoch up to and including `last` (capped at the
    /// scenario length).
    void run_until(EpochIndex last);
    void run() { run_until(scenario_.epochs); }

    /// Fraction of resolved requests whose winning value was the true value;
    /// 1 when nothing resolved.
    double accuracy() const;
    double mean_miners() const;

    nlohmann::json snapshot() const;
    static Simulation restore(const nlohmann::json& snapshot);

    /// metrics.csv, summary.json, reputation.csv, verdicts.csv,
    /// deliveries.csv, ledger.json, snapshot.json.
    void write_outputs(const std::filesystem::path& dir) const;

private:
    void setup_participants();
    void epoch_blocks(EpochIndex t, const eligibility::RandomBeacon& beacon, MetricsFrame& frame);
    void epoch_posts(EpochIndex t);
    void epoch_assignments(EpochIndex t, const eligibility::RandomBeacon& beacon);
    void epoch_reveals(EpochIndex t);
    void epoch_resolution(EpochIndex t, MetricsFrame& frame);
    void epoch_deliveries(EpochIndex t, const eligibility::RandomBeacon& beacon);
    void submit(const ledger::Transaction& tx, EpochIndex t);
    void prune(EpochIndex t);
    Digest bound_block_hash(EpochIndex t) const;
    Bytes witness_claim(const RequestRun& run, const ParticipantId& witness) const;
    const eligibility::ParticipantKey& key_of(const ParticipantId& p) const { return keys_.at(index_.at(p)); }

    Scenario scenario_;
    std::vector<eligibility::ParticipantKey> keys_;  // by participant index
    std::vector<Strategy> strategies_;               // by participant index
    std::map<ParticipantId, std::size_t> index_;
    SimState state_;
};

/// Participant strategies for a scenario: largest-remainder counts per mix
/// entry, placed over a seeded shuffle of the participant indices.
std::vector<Strategy> assign_strategies(const Scenario& s);

/// Scheduled request instances in post order, with their funding amounts.
std::vector<RequestRun> schedule_requests(const Scenario& s, const std::vector<eligibility::ParticipantKey>& keys);

/// One funding coinbase output per request instance.
std::vector<ledger::GenesisFunding> genesis_funding(const std::vector<RequestRun>& runs);

/// Reads and parses a snapshot file. Unreadable or truncated files raise
/// SnapshotError(CorruptSnapshot).
nlohmann::json read_snapshot(const std::filesystem::path& path);
void write_snapshot(const std::filesystem::path& path, const nlohmann::json& snapshot);

nlohmann::json encode(const SimState& state);
SimState decode_state(const nlohmann::json& j);

}  // namespace witsim::simnet
