#include "witsim/ledger.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>

namespace witsim::ledger {

namespace {

using u128 = unsigned __int128;

[[noreturn]] void fail(ErrorKind kind, const std::string& what) { throw LedgerError(kind, what); }

void write_lock(Writer& w, const Lock& lock) {
    w.u8(static_cast<std::uint8_t>(lock.index()));
    std::visit(
        [&](const auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, PayTo>) {
                w.digest(l.owner);
            } else if constexpr (std::is_same_v<T, TimeLock>) {
                w.digest(l.owner).u64(l.until);
            } else if constexpr (std::is_same_v<T, CommitLock>) {
                w.digest(l.request_id).digest(l.witness).digest(l.commitment).u64(l.deadline);
            } else {
                w.digest(l.request_id).u32(l.replication);
            }
        },
        lock);
}

void write_payload(Writer& w, const Payload& payload) {
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, ValueTransfer>) {
                w.u8(p.settles_request ? 1 : 0);
                if (p.settles_request) w.digest(*p.settles_request);
            } else if constexpr (std::is_same_v<T, RadRequestPost>) {
                w.digest(p.request_id).bytes(p.descriptor);
            } else if constexpr (std::is_same_v<T, CommitPledge>) {
                w.digest(p.request_id).u32(static_cast<std::uint32_t>(p.entries.size()));
                for (const auto& e : p.entries) w.digest(e.witness).digest(e.commitment);
            } else if constexpr (std::is_same_v<T, RevealRedeem>) {
                w.digest(p.request_id).digest(p.witness).bytes(p.canonical_value).digest(p.prev_block_hash);
            } else {
                w.u64(p.minted.nano());
            }
        },
        payload);
}

Writer write_transaction(const Transaction& tx, bool with_signatures) {
    Writer w;
    w.u8(static_cast<std::uint8_t>(tx.kind()));
    w.u32(static_cast<std::uint32_t>(tx.inputs.size()));
    for (const auto& in : tx.inputs) {
        w.digest(in.source.tx).u32(in.source.index).digest(in.signer);
        if (with_signatures) w.digest(in.signature);
    }
    w.u32(static_cast<std::uint32_t>(tx.outputs.size()));
    for (const auto& out : tx.outputs) {
        w.i64(out.share.num()).i64(out.share.den());
        write_lock(w, out.lock);
    }
    write_payload(w, tx.payload);
    return w;
}

bool has_tally(const LedgerState& s, const Digest& request_id) { return s.tallies.contains(request_id); }

const Digest* settled_request(const Transaction& tx) {
    if (const auto* vt = std::get_if<ValueTransfer>(&tx.payload); vt && vt->settles_request)
        return &*vt->settles_request;
    return nullptr;
}

bool signed_by(const TransactionInput& in, const ParticipantId& owner) {
    return in.signer == owner && !in.signature.is_zero();
}

void check_lock(const LedgerState& state, const Transaction& tx, const TransactionInput& in, const Lock& lock,
                EpochIndex now) {
    const Digest* settles = settled_request(tx);
    bool ok = std::visit(
        [&](const auto& l) -> bool {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, PayTo>) {
                return signed_by(in, l.owner);
            } else if constexpr (std::is_same_v<T, TimeLock>) {
                return signed_by(in, l.owner) && now >= l.until;
            } else if constexpr (std::is_same_v<T, CommitLock>) {
                if (const auto* rr = std::get_if<RevealRedeem>(&tx.payload)) {
                    if (rr->request_id != l.request_id || rr->witness != l.witness || !signed_by(in, l.witness))
                        return false;
                    if (nonced_claim_hash(rr->canonical_value, l.witness, rr->prev_block_hash) != l.commitment)
                        return false;
                    auto it = state.tallies.find(l.request_id);
                    return it != state.tallies.end() && it->second && *it->second == sha256(rr->canonical_value);
                }
                return settles && *settles == l.request_id && has_tally(state, l.request_id) && now >= l.deadline;
            } else {
                if (const auto* cp = std::get_if<CommitPledge>(&tx.payload))
                    return cp->request_id == l.request_id && l.replication >= 2 &&
                           cp->entries.size() >= l.replication;
                return settles && *settles == l.request_id && has_tally(state, l.request_id);
            }
        },
        lock);
    if (!ok)
        fail(ErrorKind::LockViolation, "input " + in.source.tx.hex() + ":" + std::to_string(in.source.index) +
                                           " cannot be unlocked by this " + to_string(tx.kind()) + " transaction");
}

void check_payload(const LedgerState& state, const Transaction& tx) {
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, RadRequestPost>) {
                if (sha256(p.descriptor) != p.request_id)
                    fail(ErrorKind::MalformedPayload, "request id does not match its descriptor");
                if (has_tally(state, p.request_id)) fail(ErrorKind::MalformedPayload, "request already tallied");
                bool escrow = false;
                for (const auto& out : tx.outputs)
                    if (const auto* rl = std::get_if<RequestLock>(&out.lock)) {
                        if (rl->request_id != p.request_id)
                            fail(ErrorKind::MalformedPayload, "escrow locked to a different request");
                        escrow |= rl->replication >= 2;
                    }
                if (!escrow) fail(ErrorKind::MalformedPayload, "request post carries no witness escrow");
            } else if constexpr (std::is_same_v<T, CommitPledge>) {
                if (p.entries.empty()) fail(ErrorKind::MalformedPayload, "commit-pledge without commitments");
                std::set<ParticipantId> seen;
                for (const auto& e : p.entries)
                    if (!seen.insert(e.witness).second)
                        fail(ErrorKind::MalformedPayload, "duplicate commitment by " + e.witness.hex());
                for (const auto& out : tx.outputs)
                    if (const auto* cl = std::get_if<CommitLock>(&out.lock)) {
                        bool listed = std::any_of(p.entries.begin(), p.entries.end(), [&](const PledgeEntry& e) {
                            return e.witness == cl->witness && e.commitment == cl->commitment;
                        });
                        if (cl->request_id != p.request_id || !listed)
                            fail(ErrorKind::MalformedPayload, "commit lock does not match a pledged commitment");
                    }
            } else if constexpr (std::is_same_v<T, Coinbase>) {
                fail(ErrorKind::MalformedPayload, "coinbase entries are created by the ledger only");
            }
        },
        tx.payload);
}

struct Resolved {
    Digest id;
    TokenAmount input_total;
    std::vector<TokenAmount> output_values;
    TokenAmount fee;
};

Resolved resolve(const LedgerState& state, const Transaction& tx, const std::map<OutPoint, std::uint64_t>& spenders) {
    Resolved r{tx.id(), {}, {}, {}};
    for (const auto& in : tx.inputs) {
        const auto& entry = state.utxo.at(in.source);
        r.input_total += resolve_output_value(entry.value, spenders.at(in.source), Ratio(1, 1));
    }
    TokenAmount out_total;
    for (const auto& out : tx.outputs) {
        r.output_values.push_back(resolve_output_value(r.input_total, 1, out.share));
        out_total += r.output_values.back();
    }
    r.fee = r.input_total - out_total;
    return r;
}

LedgerState apply_validated(LedgerState state, std::span<const Transaction> txs) {
    std::map<OutPoint, std::uint64_t> spenders;
    for (const auto& tx : txs)
        for (const auto& in : tx.inputs) ++spenders[in.source];

    std::vector<Resolved> resolved;
    resolved.reserve(txs.size());
    for (const auto& tx : txs) resolved.push_back(resolve(state, tx, spenders));

    // Value lost to the v / n floor of split outputs.
    for (const auto& [op, n] : spenders) {
        auto v = state.utxo.at(op).value.nano();
        state.fees_in_flight += TokenAmount(v - (v / n) * n);
        state.utxo.erase(op);
    }
    for (std::size_t i = 0; i < txs.size(); ++i) {
        const auto& r = resolved[i];
        state.fees_in_flight += r.fee;
        for (std::size_t k = 0; k < txs[i].outputs.size(); ++k) {
            if (r.output_values[k] == TokenAmount()) continue;  // no dust entries
            state.utxo.emplace(OutPoint{r.id, static_cast<std::uint32_t>(k)},
                               UtxoEntry{txs[i].outputs[k].lock, r.output_values[k]});
        }
    }
    return state;
}

Digest genesis_marker() { return sha256(std::string_view("witsim/genesis")); }

}  // namespace

const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::UnknownInput: return "UnknownInput";
        case ErrorKind::LockViolation: return "LockViolation";
        case ErrorKind::MalformedPayload: return "MalformedPayload";
        case ErrorKind::BadProof: return "BadProof";
        case ErrorKind::UnknownParent: return "UnknownParent";
        case ErrorKind::OversizeBlock: return "OversizeBlock";
        case ErrorKind::StaleBlock: return "StaleBlock";
        case ErrorKind::TierSuperseded: return "TierSuperseded";
        case ErrorKind::UnknownTransaction: return "UnknownTransaction";
        case ErrorKind::InvalidTransaction: return "InvalidTransaction";
        case ErrorKind::InvalidBlock: return "InvalidBlock";
        case ErrorKind::InvalidSequence: return "InvalidSequence";
        case ErrorKind::CorruptSnapshot: return "CorruptSnapshot";
    }
    return "?";
}

LedgerError::LedgerError(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

const char* to_string(TxKind k) {
    switch (k) {
        case TxKind::ValueTransfer: return "value-transfer";
        case TxKind::RadRequest: return "rad-request";
        case TxKind::CommitPledge: return "commit-pledge";
        case TxKind::RevealRedeem: return "reveal-redeem";
        case TxKind::Coinbase: return "coinbase";
    }
    return "?";
}

Bytes Transaction::serialize() const { return write_transaction(*this, true).data(); }
Digest Transaction::signing_hash() const { return write_transaction(*this, false).hash(); }
Digest Transaction::id() const { return write_transaction(*this, true).hash(); }

Bytes Block::serialize() const {
    Writer w;
    w.u64(checkpoint).u32(static_cast<std::uint32_t>(parents.size()));
    for (const auto& p : parents) w.digest(p);
    w.u32(static_cast<std::uint32_t>(tx_pointers.size()));
    for (const auto& t : tx_pointers) w.digest(t);
    const auto& pr = leadership_proof;
    w.digest(pr.participant)
        .u64(pr.epoch)
        .u8(static_cast<std::uint8_t>(pr.kind))
        .digest(pr.signature)
        .i64(pr.multiplier.num())
        .i64(pr.multiplier.den())
        .digest(pr.seal);
    w.digest(miner).u64(reward.nano());
    w.u32(static_cast<std::uint32_t>(tallies.size()));
    for (const auto& t : tallies) {
        w.digest(t.request_id).u8(t.winning ? 1 : 0);
        if (t.winning) w.digest(*t.winning);
    }
    return w.data();
}

Digest Block::digest() const { return sha256(serialize()); }

TokenAmount LedgerState::utxo_total() const {
    TokenAmount sum;
    for (const auto& [op, e] : utxo) sum += e.value;
    return sum;
}

std::map<ParticipantId, TokenAmount> LedgerState::balances() const {
    std::map<ParticipantId, TokenAmount> out;
    for (const auto& [op, e] : utxo) {
        if (const auto* p = std::get_if<PayTo>(&e.lock)) out[p->owner] += e.value;
        if (const auto* t = std::get_if<TimeLock>(&e.lock)) out[t->owner] += e.value;
    }
    return out;
}

TokenAmount resolve_output_value(TokenAmount source_value, std::uint64_t concurrent_spenders, const Ratio& share) {
    if (concurrent_spenders == 0) throw std::invalid_argument("at least one spender is required");
    if (share.is_zero() || share > Ratio(1, 1)) throw std::invalid_argument("share must lie in (0, 1]");
    const std::uint64_t per_spender = source_value.nano() / concurrent_spenders;
    const u128 scaled = static_cast<u128>(per_spender) * static_cast<std::uint64_t>(share.num());
    return TokenAmount(static_cast<std::uint64_t>(scaled / static_cast<std::uint64_t>(share.den())));
}

void validate_transaction(const LedgerState& state, const Transaction& tx, EpochIndex now) {
    if (tx.inputs.empty()) fail(ErrorKind::MalformedPayload, "transaction has no inputs");
    std::set<OutPoint> seen;
    for (const auto& in : tx.inputs)
        if (!seen.insert(in.source).second) fail(ErrorKind::MalformedPayload, "input listed twice");

    boost::multiprecision::cpp_rational shares = 0;
    for (const auto& out : tx.outputs) {
        if (out.share.is_zero() || out.share > Ratio(1, 1))
            fail(ErrorKind::MalformedPayload, "output share outside (0, 1]");
        shares += boost::multiprecision::cpp_rational(out.share.num(), out.share.den());
    }
    if (shares > 1) fail(ErrorKind::MalformedPayload, "output shares sum above 1");

    check_payload(state, tx);
    for (const auto& in : tx.inputs) {
        auto it = state.utxo.find(in.source);
        if (it == state.utxo.end())
            fail(ErrorKind::UnknownInput, "no unspent output " + in.source.tx.hex() + ":" +
                                              std::to_string(in.source.index));
        check_lock(state, tx, in, it->second.lock, now);
    }
}

LedgerState apply_transaction(LedgerState state, const Transaction& tx) {
    validate_transaction(state, tx, state.checkpoint + 1);
    return apply_validated(std::move(state), std::span(&tx, 1));
}

LedgerState apply_checkpoint(LedgerState state, std::span<const Transaction> txs, EpochIndex checkpoint) {
    std::map<Digest, const Transaction*> unique;
    for (const auto& tx : txs) {
        validate_transaction(state, tx, checkpoint);
        unique.emplace(tx.id(), &tx);
    }
    std::vector<Transaction> ordered;
    ordered.reserve(unique.size());
    for (const auto& [id, tx] : unique) ordered.push_back(*tx);
    state = apply_validated(std::move(state), ordered);
    state.checkpoint = checkpoint;
    return state;
}

Transaction compose(std::span<const Transaction> txs, const LedgerState& state) {
    if (txs.empty()) fail(ErrorKind::InvalidSequence, "nothing to compose");
    LedgerState s = state;
    for (std::size_t i = 0; i < txs.size(); ++i) {
        const auto* vt = std::get_if<ValueTransfer>(&txs[i].payload);
        if (!vt || vt->settles_request)
            fail(ErrorKind::InvalidSequence, "only plain value transfers compose (position " + std::to_string(i) + ")");
        try {
            s = apply_transaction(std::move(s), txs[i]);
        } catch (const LedgerError& e) {
            fail(ErrorKind::InvalidSequence, "position " + std::to_string(i) + ": " + e.what());
        }
    }

    Transaction g{{}, {}, ValueTransfer{}};
    TokenAmount total;
    for (const auto& tx : txs)
        for (const auto& in : tx.inputs)
            if (auto it = state.utxo.find(in.source); it != state.utxo.end()) {
                g.inputs.push_back(in);
                total += it->second.value;
            }
    for (const auto& tx : txs) {
        const auto id = tx.id();
        for (std::uint32_t k = 0; k < tx.outputs.size(); ++k) {
            auto it = s.utxo.find(OutPoint{id, k});
            if (it == s.utxo.end()) continue;
            g.outputs.push_back({Ratio(static_cast<std::int64_t>(it->second.value.nano()),
                                       static_cast<std::int64_t>(total.nano())),
                                 it->second.lock});
        }
    }
    return g;
}

std::multiset<std::pair<std::string, std::uint64_t>> utxo_multiset(const LedgerState& state) {
    std::multiset<std::pair<std::string, std::uint64_t>> out;
    for (const auto& [op, e] : state.utxo) {
        Writer w;
        write_lock(w, e.lock);
        out.emplace(sha256(w.data()).hex(), e.value.nano());
    }
    return out;
}

EpochDag genesis(std::span<const GenesisFunding> funding, DagParams params) {
    EpochDag dag;
    dag.params = params;
    Block block;
    block.checkpoint = 0;
    block.miner = genesis_marker();

    TokenAmount total;
    for (const auto& f : funding) total += f.value;
    if (total > TokenAmount()) {
        Transaction tx{{}, {}, Coinbase{total}};
        for (const auto& f : funding)
            if (f.value > TokenAmount())
                tx.outputs.push_back({Ratio(static_cast<std::int64_t>(f.value.nano()),
                                            static_cast<std::int64_t>(total.nano())),
                                      PayTo{f.owner}});
        const auto id = tx.id();
        for (std::uint32_t k = 0; k < tx.outputs.size(); ++k) {
            auto value = resolve_output_value(total, 1, tx.outputs[k].share);
            dag.state.utxo.emplace(OutPoint{id, k}, UtxoEntry{tx.outputs[k].lock, value});
            dag.state.genesis += value;
        }
        dag.transactions.emplace(id, tx);
        dag.canonical_pointer.emplace(id, 0);
        block.tx_pointers.push_back(id);
    }
    const auto digest = block.digest();
    dag.blocks.emplace(digest, block);
    dag.by_checkpoint[0].insert(digest);
    return dag;
}

EpochDag submit_transaction(EpochDag dag, const Transaction& tx) {
    dag.transactions.emplace(tx.id(), tx);
    return dag;
}

LedgerState pending_state(const EpochDag& dag, EpochIndex checkpoint) {
    LedgerState s = dag.state;
    for (auto it = dag.by_checkpoint.upper_bound(dag.finalized); it != dag.by_checkpoint.end() && it->first <= checkpoint;
         ++it)
        for (const auto& d : it->second)
            for (const auto& t : dag.blocks.at(d).tallies) s.tallies.emplace(t.request_id, t.winning);
    return s;
}

EpochDag accept_block(EpochDag dag, const Block& block, const reputation::ReputationLedger& rep) {
    const auto t = block.checkpoint;
    if (t <= dag.finalized) fail(ErrorKind::StaleBlock, "checkpoint " + std::to_string(t) + " is already closed");
    if (t + dag.params.acceptance_horizon < dag.tip)
        fail(ErrorKind::StaleBlock, "checkpoint " + std::to_string(t) + " is behind the acceptance horizon");
    if (block.size() > economics::kMaxBlockBytes) fail(ErrorKind::OversizeBlock, std::to_string(block.size()) + " bytes");

    const auto digest = block.digest();
    if (dag.blocks.contains(digest)) fail(ErrorKind::InvalidBlock, "duplicate block " + digest.hex());
    if (block.parents.empty()) fail(ErrorKind::InvalidBlock, "block has no parents");
    for (const auto& p : block.parents) {
        auto it = dag.blocks.find(p);
        if (it == dag.blocks.end()) fail(ErrorKind::UnknownParent, p.hex());
        if (it->second.checkpoint >= t) fail(ErrorKind::InvalidBlock, "parent is not older than the block");
    }
    if (block.reward != economics::block_reward(t, dag.params.issuance))
        fail(ErrorKind::InvalidBlock, "declared reward does not match the issuance schedule");

    const auto& proof = block.leadership_proof;
    const auto tier = proof.tier();
    if (proof.participant != block.miner || proof.epoch != t || proof.kind != eligibility::TaskKind::Mine || tier == 0)
        fail(ErrorKind::BadProof, "proof does not describe this block");
    try {
        const auto beacon = eligibility::epoch_randomness(dag.by_checkpoint, t);
        if (!eligibility::verify_proof(proof, beacon, rep, Ratio(static_cast<std::int64_t>(tier), 1)))
            fail(ErrorKind::BadProof, "leadership proof rejected");
    } catch (const eligibility::NoHistory& e) {
        fail(ErrorKind::BadProof, e.what());
    }

    // Backup tiers: only the lowest tier present at a checkpoint survives.
    std::vector<Digest> evicted;
    if (auto it = dag.by_checkpoint.find(t); it != dag.by_checkpoint.end()) {
        for (const auto& d : it->second) {
            auto other = dag.blocks.at(d).leadership_proof.tier();
            if (other < tier) fail(ErrorKind::TierSuperseded, "a tier-" + std::to_string(other) + " block exists");
            if (other > tier) evicted.push_back(d);
        }
    }
    for (const auto& d : evicted) {
        dag.blocks.erase(d);
        dag.by_checkpoint[t].erase(d);
    }
    if (!evicted.empty()) {
        std::erase_if(dag.canonical_pointer, [&](const auto& kv) { return kv.second == t; });
        for (const auto& d : dag.by_checkpoint[t])
            for (const auto& id : dag.blocks.at(d).tx_pointers) dag.canonical_pointer.emplace(id, t);
    }

    // Register pending tallies on the owned state rather than copying it; the
    // overlay is removed again before the block is stored.
    std::vector<Digest> overlay;
    auto register_tally = [&](const Digest& id, const std::optional<Digest>& winning) {
        if (dag.state.tallies.emplace(id, winning).second) overlay.push_back(id);
    };
    for (auto it = dag.by_checkpoint.upper_bound(dag.finalized); it != dag.by_checkpoint.end() && it->first <= t; ++it)
        for (const auto& d : it->second)
            for (const auto& tr : dag.blocks.at(d).tallies) register_tally(tr.request_id, tr.winning);
    std::set<Digest> tallied;
    for (const auto& tr : block.tallies) {
        if (!tallied.insert(tr.request_id).second) fail(ErrorKind::InvalidBlock, "request tallied twice");
        auto it = dag.state.tallies.find(tr.request_id);
        if (it != dag.state.tallies.end() && it->second != tr.winning)
            fail(ErrorKind::InvalidBlock, "conflicting tally for request " + tr.request_id.hex());
        register_tally(tr.request_id, tr.winning);
    }

    std::set<Digest> pointed;
    for (const auto& id : block.tx_pointers) {
        if (!pointed.insert(id).second) fail(ErrorKind::InvalidBlock, "transaction pointed twice");
        auto tx = dag.transactions.find(id);
        if (tx == dag.transactions.end()) fail(ErrorKind::UnknownTransaction, id.hex());
        if (auto c = dag.canonical_pointer.find(id); c != dag.canonical_pointer.end() && c->second < t) continue;
        try {
            validate_transaction(dag.state, tx->second, t);
        } catch (const LedgerError& e) {
            fail(ErrorKind::InvalidTransaction, id.hex() + ": " + e.what());
        }
    }
    for (const auto& id : overlay) dag.state.tallies.erase(id);

    for (const auto& id : block.tx_pointers) {
        auto [it, inserted] = dag.canonical_pointer.emplace(id, t);
        if (!inserted && it->second > t) it->second = t;
    }
    dag.blocks.emplace(digest, block);
    dag.by_checkpoint[t].insert(digest);
    dag.tip = std::max(dag.tip, t);
    return dag;
}

OutPoint coinbase_outpoint(const Digest& block_digest) { return {block_digest, 0}; }

EpochDag close_checkpoint(EpochDag dag, EpochIndex t) {
    if (t != dag.finalized + 1)
        fail(ErrorKind::InvalidBlock, "checkpoint " + std::to_string(t) + " closed out of order");

    std::vector<Digest> block_ids;
    if (auto it = dag.by_checkpoint.find(t); it != dag.by_checkpoint.end())
        block_ids.assign(it->second.begin(), it->second.end());

    for (const auto& d : block_ids)
        for (const auto& tr : dag.blocks.at(d).tallies) dag.state.tallies.emplace(tr.request_id, tr.winning);

    std::vector<Transaction> txs;
    for (const auto& [id, cp] : dag.canonical_pointer)
        if (cp == t) txs.push_back(dag.transactions.at(id));
    dag.state = apply_checkpoint(std::move(dag.state), txs, t);

    if (!block_ids.empty()) {
        const std::uint64_t k = block_ids.size();
        const auto reward = economics::block_reward(t, dag.params.issuance).nano();
        const auto fees = dag.state.fees_in_flight.nano();
        for (std::size_t i = 0; i < block_ids.size(); ++i) {
            std::uint64_t value = reward / k + fees / k + (i == 0 ? fees % k : 0);
            if (value == 0) continue;
            dag.state.utxo.emplace(coinbase_outpoint(block_ids[i]),
                                   UtxoEntry{PayTo{dag.blocks.at(block_ids[i]).miner}, TokenAmount(value)});
        }
        dag.state.issued += TokenAmount(reward / k * k);
        dag.state.fees_in_flight = TokenAmount();
    }
    dag.finalized = t;
    return dag;
}

}  // namespace witsim::ledger
