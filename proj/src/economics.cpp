#include "witsim/economics.hpp"

#include <algorithm>
#include <stdexcept>

namespace witsim::economics {

namespace {

using u128 = unsigned __int128;

TokenAmount checked(u128 v) {
    if (v > UINT64_MAX) throw std::overflow_error("token amount overflow");
    return TokenAmount(static_cast<std::uint64_t>(v));
}

std::uint64_t reward_at_era(std::uint64_t era, const IssuanceParams& p) {
    return era >= 64 ? 0 : p.initial_reward.nano() >> era;
}

}  // namespace

TokenAmount block_reward(std::uint64_t height, const IssuanceParams& p) {
    if (p.halving_period == 0) throw std::invalid_argument("halving period must be positive");
    return TokenAmount(reward_at_era(height / p.halving_period, p));
}

TokenAmount cumulative_supply(std::uint64_t height, const IssuanceParams& p) {
    if (p.halving_period == 0) throw std::invalid_argument("halving period must be positive");
    const std::uint64_t full_eras = height / p.halving_period;
    u128 total = 0;
    for (std::uint64_t era = 0; era < full_eras; ++era) {
        auto r = reward_at_era(era, p);
        if (r == 0) break;
        total += static_cast<u128>(r) * p.halving_period;
    }
    total += static_cast<u128>(reward_at_era(full_eras, p)) * (height % p.halving_period);
    return checked(total);
}

TokenAmount issuance_limit(const IssuanceParams& p) {
    u128 total = 0;
    for (std::uint64_t era = 0; reward_at_era(era, p) != 0; ++era)
        total += static_cast<u128>(reward_at_era(era, p)) * p.halving_period;
    return checked(total);
}

TokenAmount total_supply(std::uint64_t height, const IssuanceParams& p) {
    return p.genesis_allocation + cumulative_supply(height, p);
}

TokenAmount witness_fee(std::uint32_t replication, std::span<const std::uint64_t> path_costs, const FeeParams& rate) {
    if (replication < 2) throw std::invalid_argument("replication factor must be at least 2");
    u128 work = 0;
    for (auto c : path_costs) work += c;
    return checked(static_cast<u128>(rate.witness_fee_rate.nano()) * replication * work);
}

TokenAmount bridge_fee(std::uint64_t delivery_cost, const FeeParams& rate) {
    return checked(static_cast<u128>(rate.witness_fee_rate.nano()) * delivery_cost);
}

TokenAmount min_miner_fee(std::uint64_t size_bytes, const FeeParams& rate) {
    return checked(static_cast<u128>(rate.min_miner_fee_rate.nano()) * size_bytes);
}

std::vector<MempoolEntry> select_transactions(std::vector<MempoolEntry> mempool, std::uint64_t limit) {
    if (limit > kMaxBlockBytes) throw std::invalid_argument("block size limit exceeds 1 MiB");
    std::sort(mempool.begin(), mempool.end(), [](const MempoolEntry& a, const MempoolEntry& b) {
        // a.fee / a.size > b.fee / b.size, compared exactly
        u128 lhs = static_cast<u128>(a.fee.nano()) * std::max<std::uint64_t>(b.size, 1);
        u128 rhs = static_cast<u128>(b.fee.nano()) * std::max<std::uint64_t>(a.size, 1);
        if (lhs != rhs) return lhs > rhs;
        return a.id < b.id;
    });
    std::vector<MempoolEntry> chosen;
    std::uint64_t used = 0;
    for (auto& e : mempool) {
        if (e.size > limit - used) continue;
        used += e.size;
        chosen.push_back(e);
    }
    return chosen;
}

RewardSplit split_witness_reward(TokenAmount fee, std::uint64_t committers) {
    if (committers == 0) throw std::invalid_argument("at least one committer is required");
    auto each = fee.nano() / committers;
    return {TokenAmount(each), TokenAmount(fee.nano() - each * committers)};
}

}  // namespace witsim::economics
