#include "witsim/snapshot_json.hpp"

#include <charconv>

namespace witsim::json {

using namespace ledger;

namespace {

[[noreturn]] void corrupt(const std::string& what) { throw LedgerError(ErrorKind::CorruptSnapshot, what); }

json encode_lock(const Lock& lock) {
    return std::visit(
        [](const auto& l) -> json {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, PayTo>) {
                return {{"type", "pay_to"}, {"owner", encode(l.owner)}};
            } else if constexpr (std::is_same_v<T, TimeLock>) {
                return {{"type", "time_lock"}, {"owner", encode(l.owner)}, {"until", encode_u64(l.until)}};
            } else if constexpr (std::is_same_v<T, CommitLock>) {
                return {{"type", "commit_lock"},
                        {"request_id", encode(l.request_id)},
                        {"witness", encode(l.witness)},
                        {"commitment", encode(l.commitment)},
                        {"deadline", encode_u64(l.deadline)}};
            } else {
                return {{"type", "request_lock"},
                        {"request_id", encode(l.request_id)},
                        {"replication", encode_u64(l.replication)}};
            }
        },
        lock);
}

Lock decode_lock(const json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "pay_to") return PayTo{decode_digest(j.at("owner"))};
    if (type == "time_lock") return TimeLock{decode_digest(j.at("owner")), decode_u64(j.at("until"))};
    if (type == "commit_lock")
        return CommitLock{decode_digest(j.at("request_id")), decode_digest(j.at("witness")),
                          decode_digest(j.at("commitment")), decode_u64(j.at("deadline"))};
    if (type == "request_lock")
        return RequestLock{decode_digest(j.at("request_id")), static_cast<std::uint32_t>(decode_u64(j.at("replication")))};
    corrupt("unknown lock type " + type);
}

json encode_payload(const Payload& payload) {
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, ValueTransfer>) {
                json j = {{"type", "value_transfer"}};
                j["settles_request"] = p.settles_request ? encode(*p.settles_request) : json(nullptr);
                return j;
            } else if constexpr (std::is_same_v<T, RadRequestPost>) {
                return {{"type", "rad_request"}, {"request_id", encode(p.request_id)}, {"descriptor", encode(p.descriptor)}};
            } else if constexpr (std::is_same_v<T, CommitPledge>) {
                json entries = json::array();
                for (const auto& e : p.entries)
                    entries.push_back({{"witness", encode(e.witness)}, {"commitment", encode(e.commitment)}});
                return {{"type", "commit_pledge"}, {"request_id", encode(p.request_id)}, {"entries", entries}};
            } else if constexpr (std::is_same_v<T, RevealRedeem>) {
                return {{"type", "reveal_redeem"},
                        {"request_id", encode(p.request_id)},
                        {"witness", encode(p.witness)},
                        {"canonical_value", encode(p.canonical_value)},
                        {"prev_block_hash", encode(p.prev_block_hash)}};
            } else {
                return {{"type", "coinbase"}, {"minted", encode_u64(p.minted.nano())}};
            }
        },
        payload);
}

Payload decode_payload(const json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "value_transfer") {
        ValueTransfer vt;
        if (!j.at("settles_request").is_null()) vt.settles_request = decode_digest(j.at("settles_request"));
        return vt;
    }
    if (type == "rad_request") return RadRequestPost{decode_digest(j.at("request_id")), decode_bytes(j.at("descriptor"))};
    if (type == "commit_pledge") {
        CommitPledge cp{decode_digest(j.at("request_id")), {}};
        for (const auto& e : j.at("entries"))
            cp.entries.push_back({decode_digest(e.at("witness")), decode_digest(e.at("commitment"))});
        return cp;
    }
    if (type == "reveal_redeem")
        return RevealRedeem{decode_digest(j.at("request_id")), decode_digest(j.at("witness")),
                            decode_bytes(j.at("canonical_value")), decode_digest(j.at("prev_block_hash"))};
    if (type == "coinbase") return Coinbase{TokenAmount(decode_u64(j.at("minted")))};
    corrupt("unknown payload type " + type);
}

json encode_outpoint(const OutPoint& op) { return {{"tx", encode(op.tx)}, {"index", encode_u64(op.index)}}; }
OutPoint decode_outpoint(const json& j) {
    return {decode_digest(j.at("tx")), static_cast<std::uint32_t>(decode_u64(j.at("index")))};
}

json encode_state(const LedgerState& s) {
    json tallies = json::array();
    for (const auto& [id, w] : s.tallies)
        tallies.push_back({{"request_id", encode(id)}, {"winning", w ? encode(*w) : json(nullptr)}});
    return {{"checkpoint", encode_u64(s.checkpoint)},
            {"genesis", encode_u64(s.genesis.nano())},
            {"issued", encode_u64(s.issued.nano())},
            {"fees_in_flight", encode_u64(s.fees_in_flight.nano())},
            {"tallies", tallies}};
}

}  // namespace

json encode(const Digest& d) { return d.hex(); }

Digest decode_digest(const json& j) {
    try {
        return Digest::from_hex(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
        corrupt(e.what());
    }
}

json encode_u64(std::uint64_t v) { return std::to_string(v); }

std::uint64_t decode_u64(const json& j) {
    const auto& s = j.get_ref<const std::string&>();
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) corrupt("bad integer '" + s + "'");
    return v;
}

json encode(const Ratio& r) { return r.to_string(); }

Ratio decode_ratio(const json& j) {
    try {
        return Ratio::parse(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
        corrupt(e.what());
    }
}

json encode(const Bytes& b) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(b.size() * 2);
    for (auto c : b) {
        out.push_back(kDigits[c >> 4]);
        out.push_back(kDigits[c & 0xf]);
    }
    return out;
}

Bytes decode_bytes(const json& j) {
    const auto& s = j.get_ref<const std::string&>();
    if (s.size() % 2 != 0) corrupt("odd-length hex string");
    Bytes out(s.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto [ptr, ec] = std::from_chars(s.data() + 2 * i, s.data() + 2 * i + 2, out[i], 16);
        if (ec != std::errc() || ptr != s.data() + 2 * i + 2) corrupt("bad hex byte");
    }
    return out;
}

json encode(const Transaction& tx) {
    json inputs = json::array();
    for (const auto& in : tx.inputs)
        inputs.push_back(
            {{"source", encode_outpoint(in.source)}, {"signer", encode(in.signer)}, {"signature", encode(in.signature)}});
    json outputs = json::array();
    for (const auto& out : tx.outputs) outputs.push_back({{"share", encode(out.share)}, {"lock", encode_lock(out.lock)}});
    return {{"inputs", inputs}, {"outputs", outputs}, {"payload", encode_payload(tx.payload)}};
}

Transaction decode_transaction(const json& j) {
    Transaction tx{{}, {}, decode_payload(j.at("payload"))};
    for (const auto& in : j.at("inputs"))
        tx.inputs.push_back({decode_outpoint(in.at("source")), decode_digest(in.at("signer")),
                             decode_digest(in.at("signature"))});
    for (const auto& out : j.at("outputs"))
        tx.outputs.push_back({decode_ratio(out.at("share")), decode_lock(out.at("lock"))});
    return tx;
}

json encode(const eligibility::EligibilityProof& p) {
    return {{"participant", encode(p.participant)},
            {"epoch", encode_u64(p.epoch)},
            {"kind", encode_u64(static_cast<std::uint64_t>(p.kind))},
            {"signature", encode(p.signature)},
            {"multiplier", encode(p.multiplier)},
            {"seal", encode(p.seal)}};
}

eligibility::EligibilityProof decode_proof(const json& j) {
    auto kind = decode_u64(j.at("kind"));
    if (kind > 2) corrupt("unknown task kind");
    return {decode_digest(j.at("participant")),
            decode_u64(j.at("epoch")),
            static_cast<eligibility::TaskKind>(kind),
            decode_digest(j.at("signature")),
            decode_ratio(j.at("multiplier")),
            decode_digest(j.at("seal"))};
}

json encode(const Block& b) {
    json parents = json::array();
    for (const auto& p : b.parents) parents.push_back(encode(p));
    json pointers = json::array();
    for (const auto& p : b.tx_pointers) pointers.push_back(encode(p));
    json tallies = json::array();
    for (const auto& t : b.tallies)
        tallies.push_back({{"request_id", encode(t.request_id)}, {"winning", t.winning ? encode(*t.winning) : json(nullptr)}});
    return {{"checkpoint", encode_u64(b.checkpoint)},
            {"parents", parents},
            {"tx_pointers", pointers},
            {"leadership_proof", encode(b.leadership_proof)},
            {"miner", encode(b.miner)},
            {"reward", encode_u64(b.reward.nano())},
            {"tallies", tallies}};
}

Block decode_block(const json& j) {
    Block b;
    b.checkpoint = decode_u64(j.at("checkpoint"));
    for (const auto& p : j.at("parents")) b.parents.push_back(decode_digest(p));
    for (const auto& p : j.at("tx_pointers")) b.tx_pointers.push_back(decode_digest(p));
    b.leadership_proof = decode_proof(j.at("leadership_proof"));
    b.miner = decode_digest(j.at("miner"));
    b.reward = TokenAmount(decode_u64(j.at("reward")));
    for (const auto& t : j.at("tallies")) {
        TallyRecord tr{decode_digest(t.at("request_id")), std::nullopt};
        if (!t.at("winning").is_null()) tr.winning = decode_digest(t.at("winning"));
        b.tallies.push_back(tr);
    }
    return b;
}

json encode(const EpochDag& dag) {
    json blocks = json::array();
    for (const auto& [d, b] : dag.blocks) blocks.push_back(encode(b));
    json txs = json::array();
    for (const auto& [id, tx] : dag.transactions) txs.push_back(encode(tx));
    json pointers = json::object();
    for (const auto& [id, cp] : dag.canonical_pointer) pointers[id.hex()] = encode_u64(cp);
    json utxo = json::array();
    for (const auto& [op, e] : dag.state.utxo)
        utxo.push_back({{"outpoint", encode_outpoint(op)}, {"lock", encode_lock(e.lock)}, {"value", encode_u64(e.value.nano())}});
    return {{"checkpoint", encode_u64(dag.finalized)},
            {"tip", encode_u64(dag.tip)},
            {"blocks", blocks},
            {"transactions", txs},
            {"canonical_pointer", pointers},
            {"utxo", utxo},
            {"supply", encode_u64(dag.state.supply().nano())},
            {"state", encode_state(dag.state)},
            {"params",
             {{"acceptance_horizon", encode_u64(dag.params.acceptance_horizon)},
              {"initial_reward", encode_u64(dag.params.issuance.initial_reward.nano())},
              {"halving_period", encode_u64(dag.params.issuance.halving_period)},
              {"genesis_allocation", encode_u64(dag.params.issuance.genesis_allocation.nano())}}}};
}

EpochDag decode_dag(const json& j) {
    try {
        EpochDag dag;
        const auto& params = j.at("params");
        dag.params.acceptance_horizon = decode_u64(params.at("acceptance_horizon"));
        dag.params.issuance.initial_reward = TokenAmount(decode_u64(params.at("initial_reward")));
        dag.params.issuance.halving_period = decode_u64(params.at("halving_period"));
        dag.params.issuance.genesis_allocation = TokenAmount(decode_u64(params.at("genesis_allocation")));
        dag.finalized = decode_u64(j.at("checkpoint"));
        dag.tip = decode_u64(j.at("tip"));
        for (const auto& jb : j.at("blocks")) {
            auto b = decode_block(jb);
            auto d = b.digest();
            dag.by_checkpoint[b.checkpoint].insert(d);
            dag.blocks.emplace(d, std::move(b));
        }
        for (const auto& jt : j.at("transactions")) {
            auto tx = decode_transaction(jt);
            dag.transactions.emplace(tx.id(), std::move(tx));
        }
        for (const auto& [k, v] : j.at("canonical_pointer").items())
            dag.canonical_pointer.emplace(Digest::from_hex(k), decode_u64(v));
        for (const auto& ju : j.at("utxo"))
            dag.state.utxo.emplace(decode_outpoint(ju.at("outpoint")),
                                   UtxoEntry{decode_lock(ju.at("lock")), TokenAmount(decode_u64(ju.at("value")))});
        const auto& s = j.at("state");
        dag.state.checkpoint = decode_u64(s.at("checkpoint"));
        dag.state.genesis = TokenAmount(decode_u64(s.at("genesis")));
        dag.state.issued = TokenAmount(decode_u64(s.at("issued")));
        dag.state.fees_in_flight = TokenAmount(decode_u64(s.at("fees_in_flight")));
        for (const auto& t : s.at("tallies")) {
            std::optional<Digest> w;
            if (!t.at("winning").is_null()) w = decode_digest(t.at("winning"));
            dag.state.tallies.emplace(decode_digest(t.at("request_id")), w);
        }
        if (dag.state.supply() != TokenAmount(decode_u64(j.at("supply")))) corrupt("supply does not match the state");
        return dag;
    } catch (const nlohmann::json::exception& e) {
        corrupt(e.what());
    } catch (const std::invalid_argument& e) {
        corrupt(e.what());
    }
}

json encode(const reputation::ReputationLedger& rep) {
    json participants = json::array();
    for (const auto& p : rep.participants()) participants.push_back(encode(p));
    json scores = json::object();
    for (const auto& [p, s] : rep.stored()) scores[p.hex()] = std::to_string(s.units());
    return {{"participants", participants},
            {"scores_units", scores},
            {"total_units", std::to_string(rep.total_units())},
            {"pool_units", std::to_string(rep.pool_units())},
            {"decay", encode(rep.params().decay.value())},
            {"assimilation_delta_units", std::to_string(rep.params().assimilation_delta.units())}};
}

reputation::ReputationLedger decode_reputation(const json& j) {
    try {
        std::vector<ParticipantId> participants;
        for (const auto& p : j.at("participants")) participants.push_back(decode_digest(p));
        std::map<ParticipantId, reputation::Score> scores;
        for (const auto& [k, v] : j.at("scores_units").items())
            scores.emplace(Digest::from_hex(k),
                           reputation::Score::from_units(static_cast<std::int64_t>(decode_u64(v))));
        reputation::LedgerParams params{reputation::DecayRate(decode_ratio(j.at("decay"))),
                                        reputation::Score::from_units(
                                            static_cast<std::int64_t>(decode_u64(j.at("assimilation_delta_units"))))};
        return reputation::ReputationLedger::restore(std::move(participants), std::move(scores),
                                                     static_cast<std::int64_t>(decode_u64(j.at("total_units"))),
                                                     static_cast<std::int64_t>(decode_u64(j.at("pool_units"))), params);
    } catch (const nlohmann::json::exception& e) {
        corrupt(e.what());
    } catch (const std::invalid_argument& e) {
        corrupt(e.what());
    }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace witsim::json
