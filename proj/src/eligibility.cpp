#include "witsim/eligibility.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>

namespace witsim::eligibility {

namespace {

using boost::multiprecision::uint512_t;

uint512_t to_uint(const Digest& d) {
    uint512_t v = 0;
    for (auto b : d.bytes) v = (v << 8) | b;
    return v;
}

Digest seal_for(const ParticipantId& pk, EpochIndex t, const RandomBeacon& beacon, TaskKind kind,
                const Digest& signature, const Ratio& multiplier) {
    Writer w;
    w.tag("witsim/proof")
        .digest(pk)
        .u64(t)
        .digest(beacon.value)
        .u8(static_cast<std::uint8_t>(kind))
        .digest(signature)
        .i64(multiplier.num())
        .i64(multiplier.den());
    return w.hash();
}

}  // namespace

const char* to_string(TaskKind k) {
    switch (k) {
        case TaskKind::Mine: return "MINE";
        case TaskKind::RetrieveAttest: return "RETRIEVE_ATTEST";
        case TaskKind::Deliver: return "DELIVER";
    }
    return "?";
}

ParticipantKey ParticipantKey::from_secret(const Digest& secret) {
    return {secret, sha256(std::span<const std::uint8_t>(secret.bytes))};
}

ParticipantKey ParticipantKey::derive(std::uint64_t seed, std::uint64_t index) {
    Writer w;
    w.tag("witsim/key").u64(seed).u64(index);
    return from_secret(w.hash());
}

Digest ParticipantKey::sign(std::span<const std::uint8_t> message) const {
    Writer w;
    w.tag("witsim/sign").digest(secret).bytes(message);
    return w.hash();
}

InfluenceTable::InfluenceTable(const reputation::ReputationLedger& rep) {
    for (const auto& [p, s] : reputation::engaged_set(rep)) {
        engaged_.push_back(p);
        units_.emplace(p, s.units());
        total_units_ += s.units();
    }
}

Influence InfluenceTable::of(const ParticipantId& p) const {
    auto it = units_.find(p);
    if (it == units_.end() || total_units_ == 0) return Influence(0, 1);
    return Influence(it->second, total_units_);
}

bool InfluenceTable::is_engaged(const ParticipantId& p) const { return units_.contains(p); }

Influence influence(const reputation::ReputationLedger& rep, const ParticipantId& p) {
    return InfluenceTable(rep).of(p);
}

RandomBeacon epoch_randomness(const CheckpointIndex& by_checkpoint, EpochIndex t) {
    if (t == 0) throw NoHistory("epoch 0 has no randomness");
    auto it = by_checkpoint.lower_bound(t);
    while (it != by_checkpoint.begin()) {
        --it;
        if (it->second.empty()) continue;
        Writer w;
        for (const auto& d : it->second) w.digest(d);  // std::set keeps them sorted
        w.u64(t);
        return {w.hash()};
    }
    throw NoHistory("no block before epoch " + std::to_string(t));
}

Digest lottery_draw(const ParticipantKey& key, EpochIndex t, const RandomBeacon& beacon, TaskKind kind) {
    Writer msg;
    msg.u64(t).digest(beacon.value).u8(static_cast<std::uint8_t>(kind));
    return key.sign(msg.data());
}

bool passes_threshold(const Digest& draw, const Ratio& multiplier, const Influence& inf) {
    uint512_t lhs = to_uint(draw) * static_cast<std::uint64_t>(multiplier.den()) * static_cast<std::uint64_t>(inf.den());
    uint512_t rhs = (uint512_t(static_cast<std::uint64_t>(multiplier.num())) * static_cast<std::uint64_t>(inf.num())) << 256;
    return lhs <= rhs;
}

std::optional<EligibilityProof> check_eligibility(const ParticipantKey& key, EpochIndex t,
                                                  const RandomBeacon& beacon, TaskKind kind,
                                                  const Ratio& multiplier, const Influence& inf) {
    auto sig = lottery_draw(key, t, beacon, kind);
    if (!passes_threshold(sig, multiplier, inf)) return std::nullopt;
    EligibilityProof proof{key.public_key, t, kind, sig, multiplier, {}};
    proof.seal = seal_for(key.public_key, t, beacon, kind, sig, multiplier);
    return proof;
}

bool verify_proof(const EligibilityProof& proof, const RandomBeacon& beacon, const InfluenceTable& table,
                  const Ratio& multiplier) {
    if (!(proof.multiplier == multiplier)) return false;
    if (proof.seal != seal_for(proof.participant, proof.epoch, beacon, proof.kind, proof.signature, proof.multiplier))
        return false;
    return passes_threshold(proof.signature, multiplier, table.of(proof.participant));
}

bool verify_proof(const EligibilityProof& proof, const RandomBeacon& beacon,
                  const reputation::ReputationLedger& rep, const Ratio& multiplier) {
    return verify_proof(proof, beacon, InfluenceTable(rep), multiplier);
}

MiningOutcome mining_lottery(std::span<const ParticipantKey> keys, EpochIndex t, const RandomBeacon& beacon,
                             const InfluenceTable& table, std::uint64_t backup_cap) {
    MiningOutcome out;
    std::vector<std::pair<const ParticipantKey*, Digest>> draws;
    for (const auto& k : keys) {
        if (!table.is_engaged(k.public_key)) continue;
        draws.emplace_back(&k, lottery_draw(k, t, beacon, TaskKind::Mine));
    }
    for (std::uint64_t tier = 1; tier <= backup_cap; ++tier) {
        Ratio m(static_cast<std::int64_t>(tier), 1);
        std::vector<EligibilityProof> winners;
        for (const auto& [key, sig] : draws) {
            auto inf = table.of(key->public_key);
            if (!passes_threshold(sig, m, inf)) continue;
            EligibilityProof proof{key->public_key, t, TaskKind::Mine, sig, m, {}};
            proof.seal = seal_for(key->public_key, t, beacon, TaskKind::Mine, sig, m);
            winners.push_back(proof);
        }
        if (tier == 1) out.primary_count = winners.size();
        if (!winners.empty()) {
            std::sort(winners.begin(), winners.end(),
                      [](const auto& a, const auto& b) { return a.participant < b.participant; });
            out.tier = tier;
            out.winners = std::move(winners);
            return out;
        }
    }
    return out;
}

RandomBeacon task_beacon(const RandomBeacon& beacon, const Digest& request_id) {
    Writer w;
    w.tag("witsim/task").digest(beacon.value).digest(request_id);
    return {w.hash()};
}

Assignment assign_task(const Digest& request_id, std::uint64_t required, EpochIndex t, const RandomBeacon& beacon,
                       const InfluenceTable& table, std::span<const ParticipantKey> keys,
                       const std::set<ParticipantId>& exclude, TaskKind kind) {
    Assignment out;
    if (required == 0) return out;
    const auto draw_beacon = task_beacon(beacon, request_id);
    const Ratio multiplier(static_cast<std::int64_t>(required), 1);

    std::vector<const ParticipantKey*> engaged;
    std::vector<const ParticipantKey*> others;
    for (const auto& k : keys) {
        if (exclude.contains(k.public_key)) continue;
        (table.is_engaged(k.public_key) ? engaged : others).push_back(&k);
    }

    if (!engaged.empty()) {
        for (const auto* k : engaged)
            if (auto proof = check_eligibility(*k, t, draw_beacon, kind, multiplier, table.of(k->public_key)))
                out.assigned.push_back(*proof);
    } else if (!exclude.empty()) {
        // Every engaged participant already holds this task: open the vacancy
        // to the remaining participants with uniform influence.
        const Influence uniform(1, static_cast<std::int64_t>(std::max<std::size_t>(others.size(), 1)));
        for (const auto* k : others)
            if (auto proof = check_eligibility(*k, t, draw_beacon, kind, multiplier, uniform))
                out.assigned.push_back(*proof);
    }
    std::sort(out.assigned.begin(), out.assigned.end(),
              [](const auto& a, const auto& b) { return a.participant < b.participant; });
    out.deficit = out.assigned.size() >= required ? 0 : required - out.assigned.size();
    return out;
}

}  // namespace witsim::eligibility
