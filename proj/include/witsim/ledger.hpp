#pragma once

#include "witsim/economics.hpp"
#include "witsim/eligibility.hpp"
#include "witsim/hash.hpp"
#include "witsim/reputation.hpp"
#include "witsim/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace witsim::ledger {

enum class ErrorKind {
    UnknownInput,
    LockViolation,
    MalformedPayload,
    BadProof,
    UnknownParent,
    OversizeBlock,
    StaleBlock,
    TierSuperseded,
    UnknownTransaction,
    InvalidTransaction,
    InvalidBlock,
    InvalidSequence,
    CorruptSnapshot,
};

const char* to_string(ErrorKind k);

class LedgerError : public std::runtime_error {
public:
    LedgerError(ErrorKind kind, const std::string& what);
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct OutPoint {
    Digest tx;
    std::uint32_t index = 0;
    auto operator<=>(const OutPoint&) const = default;
};

// Output conditions.

struct PayTo {
    ParticipantId owner;
    auto operator<=>(const PayTo&) const = default;
};

/// Spendable by `owner` from checkpoint `until` on.
struct TimeLock {
    ParticipantId owner;
    EpochIndex until = 0;
    auto operator<=>(const TimeLock&) const = default;
};

/// A witness's share of a request's escrow, pledged behind a nonced claim
/// hash. Redeemed by the witness with a matching reveal of the winning value,
/// or settled by the network once the request has a tally and `deadline` has
/// passed.
struct CommitLock {
    Digest request_id;
    ParticipantId witness;
    Digest commitment;
    EpochIndex deadline = 0;
    auto operator<=>(const CommitLock&) const = default;
};

/// Request escrow. With replication >= 2 it is consumed by a commit-pledge
/// carrying at least that many commitments. With replication 0 it is the
/// delivery escrow, released by a settlement once the request has a tally.
struct RequestLock {
    Digest request_id;
    std::uint32_t replication = 0;
    auto operator<=>(const RequestLock&) const = default;
};

using Lock = std::variant<PayTo, TimeLock, CommitLock, RequestLock>;

struct TransactionOutput {
    Ratio share;
    Lock lock;
    bool operator==(const TransactionOutput&) const = default;
};

/// Unlock data. `signature` is the keyed-hash stand-in over the signing hash.
struct TransactionInput {
    OutPoint source;
    ParticipantId signer;
    Digest signature;
    bool operator==(const TransactionInput&) const = default;
};

enum class TxKind : std::uint8_t { ValueTransfer = 0, RadRequest = 1, CommitPledge = 2, RevealRedeem = 3, Coinbase = 4 };

const char* to_string(TxKind k);

struct ValueTransfer {
    /// Set on settlement transactions that release a tallied request's locks.
    std::optional<Digest> settles_request;
    bool operator==(const ValueTransfer&) const = default;
};

struct RadRequestPost {
    Digest request_id;  // sha256(descriptor)
    Bytes descriptor;
    bool operator==(const RadRequestPost&) const = default;
};

struct PledgeEntry {
    ParticipantId witness;
    Digest commitment;
    bool operator==(const PledgeEntry&) const = default;
};

struct CommitPledge {
    Digest request_id;
    std::vector<PledgeEntry> entries;
    bool operator==(const CommitPledge&) const = default;
};

struct RevealRedeem {
    Digest request_id;
    ParticipantId witness;
    Bytes canonical_value;
    Digest prev_block_hash;
    bool operator==(const RevealRedeem&) const = default;
};

/// Minting entry. Never valid inside a block; the ledger creates these itself.
struct Coinbase {
    TokenAmount minted;
    bool operator==(const Coinbase&) const = default;
};

using Payload = std::variant<ValueTransfer, RadRequestPost, CommitPledge, RevealRedeem, Coinbase>;

struct Transaction {
    std::vector<TransactionInput> inputs;
    std::vector<TransactionOutput> outputs;
    Payload payload;

    TxKind kind() const { return static_cast<TxKind>(payload.index()); }
    Bytes serialize() const;
    /// Hash of the serialization without signatures; what inputs sign.
    Digest signing_hash() const;
    Digest id() const;
    std::uint64_t size() const { return serialize().size(); }

    bool operator==(const Transaction&) const = default;
};

/// Tally carried by a block: the winning value digest of a resolved request,
/// or nullopt when the request ended contested.
struct TallyRecord {
    Digest request_id;
    std::optional<Digest> winning;
    bool operator==(const TallyRecord&) const = default;
};

struct Block {
    EpochIndex checkpoint = 0;
    std::vector<Digest> parents;
    std::vector<Digest> tx_pointers;
    eligibility::EligibilityProof leadership_proof;
    ParticipantId miner;
    TokenAmount reward;
    std::vector<TallyRecord> tallies;

    Bytes serialize() const;
    Digest digest() const;
    std::uint64_t size() const { return serialize().size(); }

    bool operator==(const Block&) const = default;
};

struct UtxoEntry {
    Lock lock;
    TokenAmount value;
    bool operator==(const UtxoEntry&) const = default;
};

/// Algebraic ledger state: what transactions read and write.
struct LedgerState {
    /// Latest closed checkpoint.
    EpochIndex checkpoint = 0;
    std::map<OutPoint, UtxoEntry> utxo;
    /// Request id -> winning digest (nullopt when contested).
    std::map<Digest, std::optional<Digest>> tallies;
    TokenAmount genesis;  // value created at checkpoint 0
    TokenAmount issued;   // block rewards minted since
    TokenAmount fees_in_flight;

    TokenAmount supply() const { return genesis + issued; }
    TokenAmount utxo_total() const;
    std::map<ParticipantId, TokenAmount> balances() const;

    bool operator==(const LedgerState&) const = default;
};

struct DagParams {
    /// Blocks more than this many checkpoints behind the tip are stale.
    std::uint64_t acceptance_horizon = 2;
    economics::IssuanceParams issuance;
    bool operator==(const DagParams&) const = default;
};

/// Block DAG plus the canonical ledger state it has produced so far.
struct EpochDag {
    std::map<Digest, Block> blocks;
    eligibility::CheckpointIndex by_checkpoint;
    /// Tx id -> lowest checkpoint holding a pointer to it.
    std::map<Digest, EpochIndex> canonical_pointer;
    /// Every transaction the node has seen, keyed by id.
    std::map<Digest, Transaction> transactions;
    EpochIndex tip = 0;
    /// Checkpoints up to this one have been closed into `state`.
    EpochIndex finalized = 0;
    LedgerState state;
    DagParams params;

    bool operator==(const EpochDag&) const = default;
};

/// floor(source_value / concurrent_spenders * share).
TokenAmount resolve_output_value(TokenAmount source_value, std::uint64_t concurrent_spenders, const Ratio& share);

/// Checks `tx` against `state` as of checkpoint `now`. Throws LedgerError.
void validate_transaction(const LedgerState& state, const Transaction& tx, EpochIndex now);

/// Applies a single transaction at checkpoint state.checkpoint + 1. Fees go to
/// fees_in_flight.
LedgerState apply_transaction(LedgerState state, const Transaction& tx);

/// Applies every transaction of one checkpoint against the same pre-state.
/// Outputs spent by n of them resolve to floor(v / n) per spender; the lost
/// remainder joins the fees. Order of `txs` does not matter.
LedgerState apply_checkpoint(LedgerState state, std::span<const Transaction> txs, EpochIndex checkpoint);

/// Single transaction equivalent to applying `txs` in order over `state`.
/// Supports value transfers only.
Transaction compose(std::span<const Transaction> txs, const LedgerState& state);

/// Multiset view of the UTXO set that ignores output ids.
std::multiset<std::pair<std::string, std::uint64_t>> utxo_multiset(const LedgerState& state);

struct GenesisFunding {
    ParticipantId owner;
    TokenAmount value;
};

/// DAG with the genesis block at checkpoint 0 and one coinbase output per
/// funding entry.
EpochDag genesis(std::span<const GenesisFunding> funding, DagParams params = {});

/// Registers a transaction so blocks may point to it.
EpochDag submit_transaction(EpochDag dag, const Transaction& tx);

/// Validates and inserts a block. A block with a lower backup tier evicts any
/// higher-tier blocks at its checkpoint; a higher-tier block is rejected when
/// a lower one exists.
EpochDag accept_block(EpochDag dag, const Block& block, const reputation::ReputationLedger& rep);

/// Ledger state with the tallies of every accepted block up to and including
/// `checkpoint` registered. Used to validate candidate transactions.
LedgerState pending_state(const EpochDag& dag, EpochIndex checkpoint);

/// Applies checkpoint t's canonical transactions, then mints floor(R / k) per
/// block and shares the fees equally (remainder to the lowest block digest).
/// The reward remainder is burned.
EpochDag close_checkpoint(EpochDag dag, EpochIndex t);

/// Outpoint of the coinbase output created for a block.
OutPoint coinbase_outpoint(const Digest& block_digest);

}  // namespace witsim::ledger
