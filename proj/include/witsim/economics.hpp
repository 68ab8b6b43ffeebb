#pragma once

#include "witsim/hash.hpp"
#include "witsim/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace witsim::economics {

/// Maximum serialized block size in bytes.
inline constexpr std::uint64_t kMaxBlockBytes = 1'048'576;

struct IssuanceParams {
    TokenAmount initial_reward = TokenAmount::from_wit(500);
    std::uint64_t halving_period = 1'750'000;
    /// Tokens allocated before issuance starts. Only affects total_supply().
    TokenAmount genesis_allocation = TokenAmount::from_wit(750'000'000);
    bool operator==(const IssuanceParams&) const = default;
};

struct FeeParams {
    /// Witness fee per (complexity unit x witness).
    TokenAmount witness_fee_rate = TokenAmount::from_wit(1);
    /// Minimum miner fee per serialized byte.
    TokenAmount min_miner_fee_rate = TokenAmount(1);
};

/// Block reward at a given height: initial_reward halved once per period,
/// floored in nanoWit.
TokenAmount block_reward(std::uint64_t height, const IssuanceParams& p = {});

/// Sum of block_reward(h) for every h < height. Exact.
TokenAmount cumulative_supply(std::uint64_t height, const IssuanceParams& p = {});

/// Limit of cumulative_supply as height grows without bound (reached once the
/// reward underflows to zero).
TokenAmount issuance_limit(const IssuanceParams& p = {});

/// genesis_allocation + cumulative_supply(height).
TokenAmount total_supply(std::uint64_t height, const IssuanceParams& p = {});

/// rate * replication * sum(costs). Requires replication >= 2.
TokenAmount witness_fee(std::uint32_t replication, std::span<const std::uint64_t> path_costs,
                        const FeeParams& rate = {});

/// Same criterion as witness fees, for a single delivering bridge.
TokenAmount bridge_fee(std::uint64_t delivery_cost, const FeeParams& rate = {});

/// Minimum miner fee for a transaction of the given serialized size.
TokenAmount min_miner_fee(std::uint64_t size_bytes, const FeeParams& rate = {});

struct MempoolEntry {
    Digest id;
    TokenAmount fee;
    std::uint64_t size = 0;
};

/// Greedy block template: descending fee-per-byte, ties by ascending id,
/// skipping entries that no longer fit. Zero-fee entries are kept while space
/// remains.
std::vector<MempoolEntry> select_transactions(std::vector<MempoolEntry> mempool,
                                              std::uint64_t limit = kMaxBlockBytes);

struct RewardSplit {
    TokenAmount per_witness;
    TokenAmount remainder;  // goes to the block miner
};

RewardSplit split_witness_reward(TokenAmount fee, std::uint64_t committers);

}  // namespace witsim::economics
