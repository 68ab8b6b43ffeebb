#pragma once

// JSON encoding of ledger and reputation state. Objects use sorted keys and
// every integer is written as a decimal string, so a given state always
// produces the same bytes.

#include "witsim/ledger.hpp"
#include "witsim/reputation.hpp"

#include <json.hpp>

namespace witsim::json {

using nlohmann::json;

json encode(const Digest& d);
Digest decode_digest(const json& j);
json encode_u64(std::uint64_t v);
std::uint64_t decode_u64(const json& j);
json encode(const Ratio& r);
Ratio decode_ratio(const json& j);
json encode(const Bytes& b);
Bytes decode_bytes(const json& j);

json encode(const ledger::Transaction& tx);
ledger::Transaction decode_transaction(const json& j);
json encode(const ledger::Block& b);
ledger::Block decode_block(const json& j);
json encode(const eligibility::EligibilityProof& p);
eligibility::EligibilityProof decode_proof(const json& j);

/// {blocks, canonical_pointer, checkpoint, params, state, supply, tip, transactions, utxo}.
json encode(const ledger::EpochDag& dag);
ledger::EpochDag decode_dag(const json& j);

json encode(const reputation::ReputationLedger& rep);
reputation::ReputationLedger decode_reputation(const json& j);

/// Stable text form: sorted keys, two-space indent, trailing newline.
std::string dump(const json& j);

}  // namespace witsim::json
