#include "witsim/eligibility.hpp"

#include "support.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace witsim;
using namespace witsim::eligibility;
using reputation::Score;

namespace {

constexpr std::int64_t U = reputation::kUnitsPerPoint;

RandomBeacon beacon_for(std::uint64_t i) {
    Writer w;
    w.tag("test/beacon").u64(i);
    return {w.hash()};
}

// Top 53 bits of a draw as a uniform double in [0, 1).
double unit_value(const Digest& d) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | d.bytes[i];
    return static_cast<double>(v >> 11) / 9007199254740992.0;
}

}  // namespace

TEST_CASE("influence examples") {
    const auto ids = testing::ids_of(testing::make_keys(3));
    auto rep = testing::ledger_with(ids, {{ids[0], Score::from_units(4 * U)}, {ids[1], Score::from_units(6 * U)}});
    CHECK(influence(rep, ids[0]) == Ratio(2, 5));
    CHECK(influence(rep, ids[1]) == Ratio(3, 5));
    CHECK(influence(rep, ids[2]) == Ratio(0, 1));

    auto solo = testing::ledger_with(ids, {{ids[2], Score::from_units(7 * U)}});
    CHECK(influence(solo, ids[2]) == Ratio(1, 1));

    // Genesis fallback: all neutral participants share influence evenly.
    CHECK(influence(reputation::ReputationLedger(ids), ids[1]) == Ratio(1, 3));
}

TEST_CASE("influences over the engaged set sum to one") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const auto ids = testing::ids_of(testing::make_keys(10, rng()));
        std::map<ParticipantId, Score> init;
        for (const auto& p : ids)
            if (rng() % 2) init[p] = Score::from_units(U + 1 + static_cast<std::int64_t>(rng() % (20 * U)));
        auto rep = testing::ledger_with(ids, init);
        InfluenceTable table(rep);
        boost::multiprecision::cpp_rational sum = 0;
        for (const auto& p : table.engaged()) {
            const auto inf = table.of(p);
            sum += boost::multiprecision::cpp_rational(inf.num(), inf.den());
        }
        CHECK(sum == 1);
    }
}

TEST_CASE("epoch randomness examples") {
    std::mt19937_64 rng(4);
    const auto a = testing::random_digest(rng), b = testing::random_digest(rng);

    CheckpointIndex single{{6, {a}}};
    Writer w;
    w.digest(a).u64(7);
    CHECK(epoch_randomness(single, 7).value == w.hash());

    CheckpointIndex ab{{6, {a, b}}}, ba{{6, {b, a}}};
    CHECK(epoch_randomness(ab, 7) == epoch_randomness(ba, 7));

    CheckpointIndex gap{{5, {a}}, {6, {}}};
    const auto at7 = epoch_randomness(gap, 7);
    CHECK(at7 == epoch_randomness(CheckpointIndex{{5, {a}}}, 7));
    CHECK_FALSE(at7 == epoch_randomness(gap, 6));

    CHECK_THROWS_AS(epoch_randomness(single, 0), NoHistory);
    CHECK_THROWS_AS(epoch_randomness(CheckpointIndex{}, 3), NoHistory);
    CHECK_THROWS_AS(epoch_randomness(single, 6), NoHistory);
}

TEST_CASE("eligibility threshold examples") {
    const auto keys = testing::make_keys(50);
    for (std::uint64_t t = 1; t <= 50; ++t)
        for (const auto& k : keys) {
            CHECK(check_eligibility(k, t, beacon_for(t), TaskKind::Mine, Ratio(1, 1), Ratio(1, 1)));
            CHECK_FALSE(check_eligibility(k, t, beacon_for(t), TaskKind::Mine, Ratio(1, 1), Ratio(0, 1)));
        }
    Digest zero;
    CHECK(passes_threshold(zero, Ratio(1, 1), Ratio(0, 1)));
    Digest max;
    max.bytes.fill(0xff);
    CHECK_FALSE(passes_threshold(max, Ratio(1, 1), Ratio(1, 2)));
    CHECK(passes_threshold(max, Ratio(2, 1), Ratio(1, 2)));
}

TEST_CASE("tier monotonicity") {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 5000; ++i) {
        const auto draw = testing::random_digest(rng);
        const Ratio inf(static_cast<std::int64_t>(1 + rng() % 100), 1000);
        for (std::int64_t m = 1; m < 8; ++m)
            if (passes_threshold(draw, Ratio(m, 1), inf)) CHECK(passes_threshold(draw, Ratio(m + 1, 1), inf));
    }
}

TEST_CASE("proof verification round-trips and binds its fields") {
    const auto keys = testing::make_keys(4);
    const auto ids = testing::ids_of(keys);
    reputation::ReputationLedger rep(ids);
    const auto beacon = beacon_for(1);
    std::optional<EligibilityProof> proof;
    for (std::uint64_t t = 1; !proof; ++t)
        proof = check_eligibility(keys[0], t, beacon, TaskKind::Mine, Ratio(1, 1), influence(rep, ids[0]));
    CHECK(verify_proof(*proof, beacon, rep, Ratio(1, 1)));

    auto tampered = *proof;
    tampered.epoch += 1;
    CHECK_FALSE(verify_proof(tampered, beacon, rep, Ratio(1, 1)));
    CHECK_FALSE(verify_proof(*proof, beacon_for(2), rep, Ratio(1, 1)));
    CHECK_FALSE(verify_proof(*proof, beacon, rep, Ratio(2, 1)));
}

TEST_CASE("mean miners per epoch under uniform influence") {
    const auto keys = testing::make_keys(100, 77);
    reputation::ReputationLedger rep(testing::ids_of(keys));
    InfluenceTable table(rep);
    std::uint64_t total = 0, empty = 0;
    const std::uint64_t epochs = 10'000;
    for (std::uint64_t t = 1; t <= epochs; ++t) {
        const auto out = mining_lottery(keys, t, beacon_for(t), table, 8);
        total += out.primary_count;
        if (out.winners.empty()) ++empty;
        if (out.tier > 1) CHECK(out.winners.size() >= 1);
    }
    const double mean = static_cast<double>(total) / epochs;
    CHECK(mean >= 0.9);
    CHECK(mean <= 1.1);
    CHECK(empty <= epochs / 1000);
}

TEST_CASE("mining frequency tracks influence within 15%") {
    const auto keys = testing::make_keys(4, 5);
    const auto ids = testing::ids_of(keys);
    auto rep = testing::ledger_with(ids, {{ids[0], Score::from_units(2 * U)},
                                          {ids[1], Score::from_units(4 * U)},
                                          {ids[2], Score::from_units(6 * U)},
                                          {ids[3], Score::from_units(8 * U)}});
    InfluenceTable table(rep);
    const std::uint64_t epochs = 20'000;
    std::vector<std::uint64_t> wins(4);
    for (std::uint64_t t = 1; t <= epochs; ++t)
        for (std::size_t i = 0; i < 4; ++i)
            if (check_eligibility(keys[i], t, beacon_for(t), TaskKind::Mine, Ratio(1, 1), table.of(ids[i]))) ++wins[i];
    for (std::size_t i = 0; i < 4; ++i) {
        const double expected = table.of(ids[i]).to_double();
        const double observed = static_cast<double>(wins[i]) / epochs;
        CHECK(observed == doctest::Approx(expected).epsilon(0.15));
    }
}

TEST_CASE("mining and task draws are uncorrelated") {
    const auto keys = testing::make_keys(100, 31);
    std::vector<double> x, y;
    for (std::uint64_t t = 1; t <= 100; ++t)
        for (const auto& k : keys) {
            x.push_back(unit_value(lottery_draw(k, t, beacon_for(t), TaskKind::Mine)));
            y.push_back(unit_value(lottery_draw(k, t, beacon_for(t), TaskKind::RetrieveAttest)));
        }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    CHECK(std::abs(sxy / std::sqrt(sxx * syy)) < 0.05);
}

TEST_CASE("beacon determinism over identical dag prefixes") {
    std::mt19937_64 rng(2);
    CheckpointIndex a, b;
    for (EpochIndex t = 0; t < 20; ++t) {
        const auto d = testing::random_digest(rng);
        a[t].insert(d);
        b[t].insert(d);
    }
    for (EpochIndex t = 1; t <= 20; ++t) CHECK(epoch_randomness(a, t) == epoch_randomness(b, t));
}

TEST_CASE("task assignment draws about R witnesses and refills vacancies") {
    const auto keys = testing::make_keys(100, 9);
    reputation::ReputationLedger rep(testing::ids_of(keys));
    InfluenceTable table(rep);
    std::mt19937_64 rng(6);
    const std::uint64_t R = 5;
    std::uint64_t total = 0;
    const int trials = 2000;
    for (int i = 0; i < trials; ++i) {
        const auto id = testing::random_digest(rng);
        total += assign_task(id, R, 1, beacon_for(1), table, keys, {}).assigned.size();
    }
    CHECK(static_cast<double>(total) / trials == doctest::Approx(static_cast<double>(R)).epsilon(0.10));

    // Refill: rounds continue with multiplier = deficit until R are held.
    for (int i = 0; i < 200; ++i) {
        const auto id = testing::random_digest(rng);
        std::set<ParticipantId> held;
        std::uint64_t required = R;
        for (EpochIndex t = 1; required > 0 && t < 200; ++t) {
            const auto a = assign_task(id, required, t, beacon_for(t), table, keys, held);
            for (const auto& p : a.assigned) {
                CHECK_FALSE(held.contains(p.participant));
                held.insert(p.participant);
            }
            required = held.size() >= R ? 0 : R - held.size();
        }
        CHECK(held.size() >= R);
    }
}

TEST_CASE("assign_task deficit arithmetic") {
    const auto keys = testing::make_keys(10, 3);
    reputation::ReputationLedger rep(testing::ids_of(keys));
    InfluenceTable table(rep);
    std::mt19937_64 rng(1);
    bool saw_partial = false, saw_full = false;
    for (int i = 0; i < 500; ++i) {
        const auto a = assign_task(testing::random_digest(rng), 5, 1, beacon_for(1), table, keys, {});
        if (a.assigned.size() >= 5) {
            CHECK(a.deficit == 0);
            saw_full = true;
        } else {
            CHECK(a.deficit == 5 - a.assigned.size());
            saw_partial = true;
        }
    }
    CHECK(saw_partial);
    CHECK(saw_full);
    CHECK(assign_task(Digest{}, 0, 1, beacon_for(1), table, keys, {}).assigned.empty());
}
