#pragma once

// Shared fixtures and random generators for the test suites.

#include "witsim/eligibility.hpp"
#include "witsim/ledger.hpp"
#include "witsim/reputation.hpp"

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <map>
#include <random>
#include <vector>

namespace witsim::testing {

inline std::vector<eligibility::ParticipantKey> make_keys(std::size_t n, std::uint64_t seed = 1) {
    std::vector<eligibility::ParticipantKey> keys;
    keys.reserve(n);
    for (std::size_t i = 0; i < n; ++i) keys.push_back(eligibility::ParticipantKey::derive(seed, i));
    return keys;
}

inline std::vector<ParticipantId> ids_of(const std::vector<eligibility::ParticipantKey>& keys) {
    std::vector<ParticipantId> ids;
    for (const auto& k : keys) ids.push_back(k.public_key);
    return ids;
}

inline Digest random_digest(std::mt19937_64& rng) {
    Digest d;
    for (auto& b : d.bytes) b = static_cast<std::uint8_t>(rng());
    return d;
}

/// Fills in a non-zero stand-in signature on every input.
inline ledger::Transaction signed_tx(ledger::Transaction tx, const std::vector<eligibility::ParticipantKey>& keys) {
    for (auto& in : tx.inputs) in.signature = Digest{};
    const auto h = tx.signing_hash();
    for (auto& in : tx.inputs) {
        auto it = std::find_if(keys.begin(), keys.end(), [&](const auto& k) { return k.public_key == in.signer; });
        in.signature = it != keys.end() ? it->sign(h.bytes) : sha256(std::string_view("unsigned"));
    }
    return tx;
}

/// A ledger state holding `utxos` PayTo outputs with random owners and values.
struct ToyLedger {
    std::vector<eligibility::ParticipantKey> keys;
    ledger::LedgerState state;
};

inline ToyLedger toy_ledger(std::mt19937_64& rng, std::size_t utxos, std::size_t owners = 4) {
    ToyLedger out{make_keys(owners, rng()), {}};
    std::vector<ledger::GenesisFunding> funding;
    std::uniform_int_distribution<std::uint64_t> wit(1, 1000);
    for (std::size_t i = 0; i < utxos; ++i)
        funding.push_back({out.keys[rng() % owners].public_key, TokenAmount::from_wit(wit(rng))});
    out.state = ledger::genesis(funding).state;
    return out;
}

/// Random value transfer over `inputs`: up to three PayTo outputs whose shares
/// sum to at most one.
inline ledger::Transaction random_transfer(std::mt19937_64& rng, const ToyLedger& toy,
                                           const std::vector<ledger::OutPoint>& inputs) {
    ledger::Transaction tx{{}, {}, ledger::ValueTransfer{}};
    for (const auto& op : inputs) {
        const auto& owner = std::get<ledger::PayTo>(toy.state.utxo.at(op).lock).owner;
        tx.inputs.push_back({op, owner, {}});
    }
    const std::int64_t den = 100;
    std::int64_t left = den;
    const auto n_out = 1 + rng() % 3;
    for (std::size_t k = 0; k < n_out && left > 0; ++k) {
        const auto share = 1 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(left));
        left -= share;
        tx.outputs.push_back({Ratio(share, den), ledger::PayTo{toy.keys[rng() % toy.keys.size()].public_key}});
    }
    return signed_tx(std::move(tx), toy.keys);
}

/// Picks `n` distinct unspent outpoints.
inline std::vector<ledger::OutPoint> pick_outpoints(std::mt19937_64& rng, const ledger::LedgerState& state,
                                                    std::size_t n) {
    std::vector<ledger::OutPoint> all;
    for (const auto& [op, e] : state.utxo) all.push_back(op);
    std::vector<ledger::OutPoint> out;
    std::sample(all.begin(), all.end(), std::back_inserter(out), std::min(n, all.size()), rng);
    return out;
}

inline reputation::ReputationLedger ledger_with(const std::vector<ParticipantId>& ids,
                                                const std::map<ParticipantId, reputation::Score>& scores,
                                                reputation::LedgerParams params = {}) {
    return reputation::ReputationLedger::with_scores(ids, scores, params);
}

}  // namespace witsim::testing
