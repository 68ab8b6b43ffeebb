#include "witsim/published_table.hpp"
#include "witsim/reputation.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

using namespace witsim;
using namespace witsim::reputation;

namespace {

constexpr std::int64_t U = kUnitsPerPoint;

Score points(std::int64_t p) { return Score::from_units(p * U); }

// Idle trajectory in plain long double, without the 10^-12 grid.
long double idle_after(long double s, int epochs, long double d) {
    for (int i = 0; i < epochs; ++i)
        if (s > 1) s = std::max<long double>(1, s * std::pow(d, std::log10(s)));
    return s;
}

}  // namespace

TEST_CASE("demurrage examples") {
    const DecayRate d;
    CHECK(apply_demurrage(points(1000), d).to_double() == doctest::Approx(970.29).epsilon(0.01 / 970.29));
    CHECK(apply_demurrage(points(100), d).to_double() == doctest::Approx(98.01).epsilon(0.01 / 98.01));
    CHECK(apply_demurrage(Score::neutral(), d) == Score::neutral());
    CHECK(apply_demurrage(Score::from_units(U / 2), d) == Score::from_units(U / 2));
    CHECK(apply_demurrage(points(1000), DecayRate(Ratio(1, 1))) == points(1000));
    CHECK(apply_demurrage(points(50), DecayRate(Ratio(0, 1))) == Score::neutral());
}

TEST_CASE("demurrage is monotone and progressive") {
    std::mt19937_64 rng(23);
    const DecayRate d;
    for (int i = 0; i < 2000; ++i) {
        const auto b = Score::from_units(U + 1 + static_cast<std::int64_t>(rng() % (1000 * U)));
        const auto a = Score::from_units(b.units() + 1 + static_cast<std::int64_t>(rng() % (1000 * U)));
        const auto da = apply_demurrage(a, d), db = apply_demurrage(b, d);
        CHECK(da < a);
        CHECK(db <= b);
        const long double rel_a = static_cast<long double>(a.units() - da.units()) / a.units();
        const long double rel_b = static_cast<long double>(b.units() - db.units()) / b.units();
        CHECK(rel_a >= rel_b - 1e-12L);
    }
}

TEST_CASE("ledger construction conserves the initial total") {
    const auto ids = testing::ids_of(testing::make_keys(5));
    ReputationLedger neutral(ids);
    CHECK(neutral.total_units() == 5 * U);
    CHECK(neutral.balance_units() == neutral.total_units());
    CHECK(neutral.stored().empty());

    auto custom = testing::ledger_with(ids, {{ids[0], points(10)}});
    CHECK(custom.total_units() == 14 * U);
    CHECK(custom.score(ids[1]) == Score::neutral());
}

TEST_CASE("epoch update: quiet epochs change nothing") {
    const auto ids = testing::ids_of(testing::make_keys(4));
    ReputationLedger rep(ids);
    EpochVerdict v;
    v.honest = {ids.begin(), ids.end()};
    v.task_fulfillers = v.honest;
    auto out = epoch_update(rep, v, Ratio(1, 5));
    CHECK(out.ledger == rep);
    CHECK_FALSE(out.empty_fulfiller_set);
}

TEST_CASE("epoch update: demurrage-only pool is split evenly") {
    const auto ids = testing::ids_of(testing::make_keys(4));
    auto rep = testing::ledger_with(ids, {{ids[0], points(100)}});
    EpochVerdict v;
    v.honest = {ids[1], ids[2]};
    v.task_fulfillers = {ids[1], ids[2]};
    auto out = epoch_update(rep, v, Ratio(1, 5));
    const auto lost = points(100).units() - out.ledger.score(ids[0]).units();
    CHECK(out.demurrage_units == lost);
    CHECK(out.ledger.score(ids[1]) == out.ledger.score(ids[2]));
    CHECK(out.ledger.score(ids[1]).units() - U == lost / 2);
    CHECK(out.ledger.balance_units() == out.ledger.total_units());
}

TEST_CASE("epoch update: one liar and two honest fulfillers") {
    const auto ids = testing::ids_of(testing::make_keys(3));
    const auto& liar = ids[0];
    auto rep = testing::ledger_with(ids, {{liar, points(10)}});
    EpochVerdict v;
    v.dishonest[liar] = Ratio(1, 1);
    v.honest = {ids[1], ids[2]};
    v.task_fulfillers = {ids[1], ids[2]};
    auto out = epoch_update(rep, v, Ratio(1, 5));

    // Independent summation: 2 points penalty, then demurrage on the rest.
    const long double after_penalty = 10.0L - 0.2L * 10.0L;
    const long double after_demurrage = after_penalty * std::pow(0.99L, std::log10(after_penalty));
    const long double pool = 2.0L + (after_penalty - after_demurrage);
    CHECK(out.penalties_units == 2 * U);
    CHECK(static_cast<double>(out.ledger.score(liar).to_long_double()) ==
          doctest::Approx(static_cast<double>(after_demurrage)).epsilon(1e-11));
    for (int k = 1; k <= 2; ++k)
        CHECK(static_cast<double>(out.ledger.score(ids[k]).to_long_double()) ==
              doctest::Approx(static_cast<double>(1.0L + pool / 2)).epsilon(1e-11));
    CHECK(out.ledger.score(ids[1]).to_double() > 2.0);
    CHECK(out.ledger.balance_units() == out.ledger.total_units());
}

TEST_CASE("epoch update: pool carries over when nobody fulfilled a task") {
    const auto ids = testing::ids_of(testing::make_keys(3));
    auto rep = testing::ledger_with(ids, {{ids[0], points(10)}});
    auto out = epoch_update(rep, EpochVerdict{}, Ratio(1, 5));
    CHECK(out.empty_fulfiller_set);
    CHECK(out.ledger.pool_units() > 0);
    CHECK(out.ledger.balance_units() == out.ledger.total_units());
}

TEST_CASE("epoch update rejects malformed verdicts") {
    const auto ids = testing::ids_of(testing::make_keys(3));
    ReputationLedger rep(ids);
    EpochVerdict both;
    both.honest = {ids[0]};
    both.dishonest[ids[0]] = Ratio(1, 2);
    CHECK_THROWS_AS(epoch_update(rep, both, Ratio(1, 5)), ReputationError);
    EpochVerdict stranger;
    stranger.honest = {sha256(std::string_view("nobody"))};
    CHECK_THROWS_AS(epoch_update(rep, stranger, Ratio(1, 5)), ReputationError);
}

TEST_CASE("assimilation examples and idempotence") {
    const auto ids = testing::ids_of(testing::make_keys(3));
    const auto delta = LedgerParams{}.assimilation_delta.units();
    auto rep = testing::ledger_with(ids, {{ids[0], Score::from_units(U + delta / 2)},
                                          {ids[1], Score::from_units(U + 2 * delta)}});
    auto once = assimilate(rep);
    CHECK(once.score(ids[0]) == Score::neutral());
    CHECK(once.pool_units() == delta / 2);
    CHECK(once.score(ids[1]) == Score::from_units(U + 2 * delta));
    CHECK(once.score(ids[2]) == Score::neutral());
    CHECK(assimilate(once) == once);
    CHECK(once.balance_units() == once.total_units());
}

TEST_CASE("engaged set examples") {
    const auto ids = testing::ids_of(testing::make_keys(3));
    auto rep = testing::ledger_with(ids, {{ids[0], points(3)}, {ids[2], Score::from_units(U / 2)}});
    auto e = engaged_set(rep);
    REQUIRE(e.size() == 1);
    CHECK(e[0].first == ids[0]);

    auto fallback = engaged_set(ReputationLedger(ids));
    CHECK(fallback.size() == 3);
    CHECK(engaged_set(ReputationLedger()).empty());
}

TEST_CASE("conservation over random epoch sequences") {
    std::mt19937_64 rng(101);
    for (int run = 0; run < 20; ++run) {
        const auto ids = testing::ids_of(testing::make_keys(12, rng()));
        std::map<ParticipantId, Score> init;
        for (const auto& p : ids)
            if (rng() % 3 == 0) init[p] = Score::from_units(static_cast<std::int64_t>(rng() % (50 * U)) + 1);
        auto rep = testing::ledger_with(ids, init, LedgerParams{DecayRate(Ratio(static_cast<std::int64_t>(90 + rng() % 11), 100)), {}});
        const auto total = rep.total_units();
        for (int epoch = 0; epoch < 60; ++epoch) {
            EpochVerdict v;
            for (const auto& p : ids) switch (rng() % 4) {
                    case 0: v.dishonest[p] = Ratio(static_cast<std::int64_t>(rng() % 11), 10); break;
                    case 1: v.honest.insert(p); v.task_fulfillers.insert(p); break;
                    case 2: v.honest.insert(p); break;
                    default: break;
                }
            rep = epoch_update(rep, v, Ratio(static_cast<std::int64_t>(rng() % 6), 10)).ledger;
            REQUIRE(rep.balance_units() == total);
            REQUIRE(rep.total_units() == total);
            if (rng() % 5 == 0) rep = assimilate(rep);
            REQUIRE(rep.balance_units() == total);
        }
    }
}

TEST_CASE("demurrage table agrees with an independent long-double iteration") {
    const DecayRate d;
    const auto rows = demurrage_table(reference::kDemurrageScores, reference::kDemurrageEpochs, d);
    REQUIRE(rows.size() == reference::kDemurrageScores.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < reference::kDemurrageEpochs.size(); ++c) {
            const auto expected = idle_after(static_cast<long double>(reference::kDemurrageScores[r]),
                                             static_cast<int>(reference::kDemurrageEpochs[c]), 0.99L);
            CHECK(static_cast<double>(rows[r].by_epoch[c].second.to_long_double()) ==
                  doctest::Approx(static_cast<double>(expected)).epsilon(1e-9));
        }
}

TEST_CASE("published demurrage table comparison") {
    const auto cmp = reference::compare_demurrage_table();
    CHECK(cmp.cells.size() == 5 * 22);

    const auto& exempt = cmp.cells[reference::kExemptRow * 22 + reference::kExemptColumn];
    CHECK(exempt.exempt);
    CHECK(static_cast<double>(exempt.computed) == doctest::Approx(9605.96).epsilon(1e-5));
    CHECK(exempt.published == 9605.26);

    // The published row for score 1000 at epoch 25 reads 480.99; the decay
    // formula gives 488.91. It is the only non-exempt cell beyond 0.5%.
    CHECK(cmp.outside == 1);
    const auto& odd = cmp.cells[3 * 22 + 2];
    CHECK_FALSE(odd.within_tolerance);
    CHECK(static_cast<double>(odd.computed) == doctest::Approx(488.906).epsilon(1e-5));

    for (std::size_t r = 1; r < 5; ++r) {
        // Published divisors are whole-number ratios of the printed finals.
        const auto printed = std::stod(reference::two_decimals(cmp.rows[r].by_epoch.back().second.to_long_double()));
        CHECK(std::lround(static_cast<double>(reference::kDemurrageScores[r]) / printed) ==
              static_cast<long>(reference::kFinalDivisors[r]));
    }
}
