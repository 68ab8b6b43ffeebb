#include "witsim/ledger.hpp"

#include "support.hpp"

#include <doctest.h>

#include <random>

using namespace witsim;
using namespace witsim::ledger;
using eligibility::ParticipantKey;
using testing::signed_tx;

namespace {

// Two neutral participants: each holds influence 1/2, so a tier-2 proof
// (threshold 2 * 1/2 = 1) always exists.
struct TwoMiners {
    std::vector<ParticipantKey> keys = testing::make_keys(2, 42);
    reputation::ReputationLedger rep{testing::ids_of(keys)};
    EpochDag dag;
    Digest genesis_block;
    OutPoint funded;

    TwoMiners() {
        std::vector<GenesisFunding> funding{{keys[0].public_key, TokenAmount::from_wit(100)},
                                            {keys[1].public_key, TokenAmount::from_wit(50)}};
        dag = genesis(funding);
        genesis_block = *dag.by_checkpoint.at(0).begin();
        funded = dag.state.utxo.begin()->first;
    }

    std::optional<Block> block(EpochIndex t, std::size_t miner, std::uint64_t tier, std::vector<Digest> parents,
                               std::vector<Digest> pointers = {}) const {
        const auto beacon = eligibility::epoch_randomness(dag.by_checkpoint, t);
        const Ratio m(static_cast<std::int64_t>(tier), 1);
        auto proof = eligibility::check_eligibility(keys[miner], t, beacon, eligibility::TaskKind::Mine, m,
                                                    eligibility::influence(rep, keys[miner].public_key));
        if (!proof) return std::nullopt;
        Block b;
        b.checkpoint = t;
        b.parents = std::move(parents);
        b.tx_pointers = std::move(pointers);
        b.leadership_proof = *proof;
        b.miner = keys[miner].public_key;
        b.reward = economics::block_reward(t);
        return b;
    }

    Transaction spend(const OutPoint& op, std::vector<TransactionOutput> outputs) const {
        const auto& owner = std::get<PayTo>(dag.state.utxo.at(op).lock).owner;
        Transaction tx{{{op, owner, {}}}, std::move(outputs), ValueTransfer{}};
        return signed_tx(std::move(tx), keys);
    }
};

TokenAmount inputs_value(const LedgerState& s, const Transaction& tx) {
    TokenAmount v;
    for (const auto& in : tx.inputs) v += s.utxo.at(in.source).value;
    return v;
}

TokenAmount outputs_value(const LedgerState& s, const Transaction& tx) {
    TokenAmount v;
    const auto id = tx.id();
    for (std::uint32_t k = 0; k < tx.outputs.size(); ++k)
        if (auto it = s.utxo.find(OutPoint{id, k}); it != s.utxo.end()) v += it->second.value;
    return v;
}

}  // namespace

TEST_CASE("resolve_output_value examples") {
    CHECK(resolve_output_value(TokenAmount::from_wit(100), 2, Ratio(1, 1)) == TokenAmount::from_wit(50));
    CHECK(resolve_output_value(TokenAmount::from_wit(100), 1, Ratio(1, 1)) == TokenAmount::from_wit(100));
    CHECK(resolve_output_value(TokenAmount::from_wit(90), 3, Ratio(1, 2)) == TokenAmount::from_wit(15));
    CHECK(resolve_output_value(TokenAmount(10), 3, Ratio(1, 1)) == TokenAmount(3));
}

TEST_CASE("apply_transaction: percentage outputs and miner fee") {
    TwoMiners net;
    const auto key = net.keys[0].public_key;
    OutPoint hundred;
    for (const auto& [op, e] : net.dag.state.utxo)
        if (e.value == TokenAmount::from_wit(100)) hundred = op;
    const auto tx = net.spend(hundred, {{Ratio(3, 5), PayTo{key}}, {Ratio(3, 10), PayTo{key}}});
    const auto before = net.dag.state;
    const auto after = apply_transaction(before, tx);
    CHECK(after.utxo.at(OutPoint{tx.id(), 0}).value == TokenAmount::from_wit(60));
    CHECK(after.utxo.at(OutPoint{tx.id(), 1}).value == TokenAmount::from_wit(30));
    CHECK(after.fees_in_flight == TokenAmount::from_wit(10));
    CHECK_FALSE(after.utxo.contains(hundred));

    // Purity and untouched outputs.
    CHECK(before == net.dag.state);
    for (const auto& [op, e] : before.utxo)
        if (!(op == hundred)) CHECK(after.utxo.at(op) == e);

    // A second spend of the same output.
    const auto again = net.spend(hundred, {{Ratio(1, 2), PayTo{key}}});
    try {
        apply_transaction(after, again);
        FAIL("double spend accepted");
    } catch (const LedgerError& e) {
        CHECK(e.kind() == ErrorKind::UnknownInput);
    }
}

TEST_CASE("apply_transaction rejects bad locks and payloads") {
    TwoMiners net;
    const auto& s = net.dag.state;
    auto tx = net.spend(net.funded, {{Ratio(1, 2), PayTo{net.keys[1].public_key}}});

    auto wrong_signer = tx;
    wrong_signer.inputs[0].signer = sha256(std::string_view("thief"));
    CHECK_THROWS_AS(apply_transaction(s, wrong_signer), LedgerError);

    auto over = net.spend(net.funded, {{Ratio(3, 4), PayTo{net.keys[1].public_key}},
                                       {Ratio(1, 2), PayTo{net.keys[1].public_key}}});
    try {
        apply_transaction(s, over);
        FAIL("over-allocated outputs accepted");
    } catch (const LedgerError& e) {
        CHECK(e.kind() == ErrorKind::MalformedPayload);
    }

    Transaction no_inputs{{}, {{Ratio(1, 2), PayTo{net.keys[0].public_key}}}, ValueTransfer{}};
    CHECK_THROWS_AS(apply_transaction(s, no_inputs), LedgerError);
}

TEST_CASE("same-checkpoint spends split the source value") {
    TwoMiners net;
    const auto a = net.spend(net.funded, {{Ratio(1, 1), PayTo{net.keys[0].public_key}}});
    const auto b = net.spend(net.funded, {{Ratio(1, 1), PayTo{net.keys[1].public_key}}});
    const auto v = net.dag.state.utxo.at(net.funded).value;
    const std::vector<Transaction> both{a, b};
    const auto s = apply_checkpoint(net.dag.state, both, 1);
    CHECK(s.utxo.at(OutPoint{a.id(), 0}).value.nano() == v.nano() / 2);
    CHECK(s.utxo.at(OutPoint{b.id(), 0}).value.nano() == v.nano() / 2);
    CHECK(s.utxo_total() + s.fees_in_flight == net.dag.state.utxo_total());
}

TEST_CASE("accept_block: shared pointers, re-pointing and empty blocks") {
    TwoMiners net;
    const auto tx = net.spend(net.funded, {{Ratio(1, 2), PayTo{net.keys[1].public_key}}});
    net.dag = submit_transaction(net.dag, tx);

    auto b0 = net.block(7, 0, 2, {net.genesis_block}, {tx.id()});
    auto b1 = net.block(7, 1, 2, {net.genesis_block}, {tx.id()});
    REQUIRE(b0);
    REQUIRE(b1);
    net.dag = accept_block(net.dag, *b0, net.rep);
    net.dag = accept_block(net.dag, *b1, net.rep);
    CHECK(net.dag.by_checkpoint.at(7).size() == 2);
    CHECK(net.dag.canonical_pointer.at(tx.id()) == 7);

    auto later = net.block(8, 0, 2, {b0->digest(), b1->digest()}, {tx.id()});
    REQUIRE(later);
    net.dag = accept_block(net.dag, *later, net.rep);
    CHECK(net.dag.canonical_pointer.at(tx.id()) == 7);

    auto empty = net.block(9, 1, 2, {later->digest()});
    REQUIRE(empty);
    net.dag = accept_block(net.dag, *empty, net.rep);
    CHECK(net.dag.blocks.contains(empty->digest()));

    // Acyclicity: every parent sits at a strictly lower checkpoint.
    for (const auto& [d, b] : net.dag.blocks)
        for (const auto& p : b.parents) CHECK(net.dag.blocks.at(p).checkpoint < b.checkpoint);
}

TEST_CASE("accept_block error paths") {
    TwoMiners net;
    auto good = net.block(3, 0, 2, {net.genesis_block});
    REQUIRE(good);

    auto orphan = *good;
    orphan.parents = {sha256(std::string_view("missing"))};
    try {
        accept_block(net.dag, orphan, net.rep);
        FAIL("unknown parent accepted");
    } catch (const LedgerError& e) {
        CHECK(e.kind() == ErrorKind::UnknownParent);
    }

    auto forged = *good;
    forged.leadership_proof.signature.bytes[0] ^= 1;
    try {
        accept_block(net.dag, forged, net.rep);
        FAIL("forged proof accepted");
    } catch (const LedgerError& e) {
        CHECK(e.kind() == ErrorKind::BadProof);
    }

    auto greedy = *good;
    greedy.reward = greedy.reward + TokenAmount(1);
    CHECK_THROWS_AS(accept_block(net.dag, greedy, net.rep), LedgerError);

    auto huge = *good;
    huge.tx_pointers.assign(40'000, Digest{});
    try {
        accept_block(net.dag, huge, net.rep);
        FAIL("oversize block accepted");
    } catch (const LedgerError& e) {
        CHECK(e.kind() == ErrorKind::OversizeBlock);
    }

    net.dag = accept_block(net.dag, *good, net.rep);
    auto tip = net.block(10, 0, 2, {good->digest()});
    REQUIRE(tip);
    auto dag = accept_block(net.dag, *tip, net.rep);
    auto stale = net.block(4, 1, 2, {net.genesis_block});
    REQUIRE(stale);
    try {
        accept_block(dag, *stale, net.rep);
        FAIL("stale block accepted");
    } catch (const LedgerError& e) {
        CHECK(e.kind() == ErrorKind::StaleBlock);
    }
}

TEST_CASE("a lower backup tier supersedes a higher one") {
    TwoMiners net;
    // Find a checkpoint where miner 0 is eligible at tier 1.
    EpochIndex t = 1;
    std::optional<Block> primary;
    for (; !primary; ++t) primary = net.block(t, 0, 1, {net.genesis_block});
    const auto cp = primary->checkpoint;
    auto backup = net.block(cp, 1, 2, {net.genesis_block});
    REQUIRE(backup);

    auto dag = accept_block(net.dag, *backup, net.rep);
    dag = accept_block(dag, *primary, net.rep);
    CHECK(dag.by_checkpoint.at(cp).size() == 1);
    CHECK(dag.blocks.contains(primary->digest()));
    CHECK_FALSE(dag.blocks.contains(backup->digest()));

    try {
        accept_block(dag, *backup, net.rep);
        FAIL("higher tier accepted next to a lower one");
    } catch (const LedgerError& e) {
        CHECK(e.kind() == ErrorKind::TierSuperseded);
    }
}

TEST_CASE("close_checkpoint mints rewards and keeps supply consistent") {
    TwoMiners net;
    const auto tx = net.spend(net.funded, {{Ratio(1, 2), PayTo{net.keys[1].public_key}}});
    net.dag = submit_transaction(net.dag, tx);
    auto b = net.block(1, 0, 2, {net.genesis_block}, {tx.id()});
    REQUIRE(b);
    net.dag = accept_block(net.dag, *b, net.rep);
    net.dag = close_checkpoint(net.dag, 1);
    const auto& s = net.dag.state;
    CHECK(s.issued == economics::block_reward(1));
    CHECK(s.supply() == s.utxo_total() + s.fees_in_flight);
    CHECK(s.utxo.contains(OutPoint{tx.id(), 0}));
    CHECK(s.utxo.contains(coinbase_outpoint(b->digest())));
    CHECK_THROWS_AS(close_checkpoint(net.dag, 3), LedgerError);
}

TEST_CASE("pointer uniqueness across random block sequences") {
    std::mt19937_64 rng(77);
    for (int run = 0; run < 10; ++run) {
        TwoMiners net;
        std::vector<Digest> txs;
        for (const auto& [op, e] : net.dag.state.utxo) {
            const auto tx = net.spend(op, {{Ratio(1, 2), PayTo{net.keys[rng() % 2].public_key}}});
            net.dag = submit_transaction(net.dag, tx);
            txs.push_back(tx.id());
        }
        std::map<Digest, EpochIndex> first_seen;
        std::vector<Digest> parents{net.genesis_block};
        for (EpochIndex t = 1; t <= 6; ++t) {
            std::vector<Digest> made;
            for (std::size_t m = 0; m < 2; ++m) {
                if (rng() % 2) continue;
                std::vector<Digest> ptrs;
                for (const auto& id : txs)
                    if (rng() % 2) ptrs.push_back(id);
                auto b = net.block(t, m, 2, parents, ptrs);
                REQUIRE(b);
                net.dag = accept_block(net.dag, *b, net.rep);
                made.push_back(b->digest());
                for (const auto& id : ptrs) first_seen.emplace(id, t);
            }
            if (!made.empty()) parents = made;
        }
        CHECK(net.dag.canonical_pointer.size() == first_seen.size() + 1);  // + the genesis coinbase
        for (const auto& [id, t] : first_seen) CHECK(net.dag.canonical_pointer.at(id) == t);
    }
}

TEST_CASE("commutativity of independent transactions") {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 300; ++trial) {
        auto toy = testing::toy_ledger(rng, 2 + rng() % 7);
        auto picked = testing::pick_outpoints(rng, toy.state, toy.state.utxo.size());
        const auto cut = 1 + rng() % (picked.size() - 1);
        const std::vector<OutPoint> left(picked.begin(), picked.begin() + static_cast<std::ptrdiff_t>(cut));
        const std::vector<OutPoint> right(picked.begin() + static_cast<std::ptrdiff_t>(cut), picked.end());
        const auto f = testing::random_transfer(rng, toy, left);
        const auto g = testing::random_transfer(rng, toy, right);
        const auto fg = apply_transaction(apply_transaction(toy.state, f), g);
        const auto gf = apply_transaction(apply_transaction(toy.state, g), f);
        CHECK(fg == gf);
    }
}

TEST_CASE("dependence: a spend of an unborn output fails until its parent applies") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        auto toy = testing::toy_ledger(rng, 3);
        const auto f = testing::random_transfer(rng, toy, testing::pick_outpoints(rng, toy.state, 1));
        const auto s1 = apply_transaction(toy.state, f);
        const OutPoint child{f.id(), 0};
        if (!s1.utxo.contains(child)) continue;
        testing::ToyLedger after{toy.keys, s1};
        const auto g = testing::random_transfer(rng, after, {child});
        try {
            apply_transaction(toy.state, g);
            FAIL("dependent transaction applied early");
        } catch (const LedgerError& e) {
            CHECK(e.kind() == ErrorKind::UnknownInput);
        }
        CHECK_NOTHROW(apply_transaction(s1, g));
    }
}

TEST_CASE("value conservation per transaction") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        auto toy = testing::toy_ledger(rng, 1 + rng() % 8);
        const auto tx = testing::random_transfer(rng, toy, testing::pick_outpoints(rng, toy.state, 1 + rng() % 3));
        const auto after = apply_transaction(toy.state, tx);
        const auto fee = after.fees_in_flight - toy.state.fees_in_flight;
        CHECK(outputs_value(after, tx) + fee == inputs_value(toy.state, tx));
    }
}

TEST_CASE("compose examples") {
    std::mt19937_64 rng(3);
    auto toy = testing::toy_ledger(rng, 3);
    const auto ops = testing::pick_outpoints(rng, toy.state, 3);

    const auto f = testing::random_transfer(rng, toy, {ops[0]});
    const std::vector<Transaction> single{f};
    const auto g1 = compose(single, toy.state);
    CHECK(utxo_multiset(apply_transaction(toy.state, g1)) == utxo_multiset(apply_transaction(toy.state, f)));

    const auto h = testing::random_transfer(rng, toy, {ops[1]});
    const std::vector<Transaction> pair{f, h};
    const auto g2 = compose(pair, toy.state);
    const auto direct = apply_transaction(apply_transaction(toy.state, f), h);
    const auto via = apply_transaction(toy.state, g2);
    CHECK(utxo_multiset(via) == utxo_multiset(direct));
    CHECK(via.fees_in_flight == direct.fees_in_flight);

    // Chain: the second transaction spends the first one's output.
    const auto s1 = apply_transaction(toy.state, f);
    testing::ToyLedger mid{toy.keys, s1};
    const auto chained = testing::random_transfer(rng, mid, {OutPoint{f.id(), 0}});
    const std::vector<Transaction> chain{f, chained};
    const auto g3 = compose(chain, toy.state);
    REQUIRE(g3.inputs.size() == 1);
    CHECK(g3.inputs[0].source == ops[0]);
    CHECK(g3.outputs.size() == chained.outputs.size() + f.outputs.size() - 1);
    const auto chain_state = apply_transaction(s1, chained);
    CHECK(utxo_multiset(apply_transaction(toy.state, g3)) == utxo_multiset(chain_state));

    // An invalid position is reported.
    const std::vector<Transaction> broken{chained, f};
    try {
        compose(broken, toy.state);
        FAIL("invalid sequence composed");
    } catch (const LedgerError& e) {
        CHECK(e.kind() == ErrorKind::InvalidSequence);
    }
}
