#include "witsim/rad.hpp"

#include "support.hpp"

#include <doctest.h>

#include <random>

using namespace witsim;
using namespace witsim::rad;
using K = LifecycleEvent::Kind;

namespace {

RadRequest basic_request(std::uint32_t replication = 6) {
    RadRequest r;
    r.client = sha256(std::string_view("client"));
    r.paths = {{"price", Normalization::identity(), 1}};
    r.replication = replication;
    r.witness_fee = economics::witness_fee(std::max<std::uint32_t>(replication, 2), std::vector<std::uint64_t>{1});
    return r;
}

Commitment commit_for(const Claim& c, const Digest& prev) {
    return {c.request_id, c.witness, commitment_digest(c, c.witness, prev), 1, {}};
}

}  // namespace

TEST_CASE("validate_request examples") {
    const economics::FeeParams fees;
    auto ok = basic_request(6);
    CHECK_NOTHROW(validate_request(ok, TokenAmount::from_wit(100), fees, 100));

    auto check_kind = [&](const RadRequest& r, TokenAmount attached, ErrorKind kind) {
        try {
            validate_request(r, attached, fees, 100);
            FAIL("accepted an invalid request");
        } catch (const RadError& e) {
            CHECK(e.kind() == kind);
        }
    };
    check_kind(basic_request(1), TokenAmount::from_wit(100), ErrorKind::ReplicationTooLow);
    check_kind(basic_request(1'000'000), TokenAmount::from_wit(100), ErrorKind::ReplicationTooHigh);
    check_kind(ok, TokenAmount::from_wit(6), ErrorKind::InsufficientFee);
    auto no_paths = ok;
    no_paths.paths.clear();
    check_kind(no_paths, TokenAmount::from_wit(100), ErrorKind::NoPaths);
}

TEST_CASE("normalization and aggregation") {
    CHECK(normalize(Normalization::to_lowercase(), "ABc") == "abc");
    CHECK(normalize(Normalization::select_field("price"), R"({"price": "42.5", "x": 1})") == "42.5");
    CHECK(normalize(Normalization::round_decimal(1), "41.96") == "42.0");
    CHECK_THROWS_AS(normalize(Normalization::select_field("missing"), "{}"), std::invalid_argument);
    CHECK(Normalization::parse("select_field:price") == Normalization::select_field("price"));
    CHECK(Normalization::parse("round_decimal:3") == Normalization::round_decimal(3));

    CHECK(aggregate(Aggregation::First, {"a", "b"}) == "a");
    CHECK(aggregate(Aggregation::MedianNumeric, {"42.1", "41.9", "42.0"}) == "42.0");
    CHECK(aggregate(Aggregation::Mode, {"x", "y", "y"}) == "y");
    CHECK(aggregate(Aggregation::ConcatSorted, {"b", "a"}).find('a') < aggregate(Aggregation::ConcatSorted, {"b", "a"}).find('b'));
    CHECK_THROWS_AS(aggregate(Aggregation::MedianNumeric, {"x"}), std::invalid_argument);
}

TEST_CASE("median aggregation against a sorted-list oracle") {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<long> ints;
        const auto n = 1 + 2 * (rng() % 5);  // odd lengths have an exact middle element
        for (std::size_t i = 0; i < n; ++i) ints.push_back(static_cast<long>(rng() % 10'000));
        std::vector<std::string> values;
        for (auto v : ints) values.push_back(std::to_string(v / 100) + "." + (v % 100 < 10 ? "0" : "") + std::to_string(v % 100));
        auto sorted = ints;
        std::sort(sorted.begin(), sorted.end());
        const auto mid = sorted[n / 2];
        const auto expected = std::to_string(mid / 100) + "." + (mid % 100 < 10 ? "0" : "") + std::to_string(mid % 100);
        CHECK(aggregate(Aggregation::MedianNumeric, values) == expected);
    }
}

TEST_CASE("execute_retrieval examples") {
    SourceOracle src;
    src.set("price", 0, "42");
    src.set("a", 0, "41.9");
    src.set("b", 0, "42.0");
    src.set("c", 0, "42.1");
    src.set("price", 10, "43");

    auto req = basic_request();
    const auto w = sha256(std::string_view("witness"));
    auto claim = execute_retrieval(req, w, src, 1, WitnessView::honest());
    CHECK(claim.canonical_value == value_bytes("42"));
    CHECK(claim.value_digest == sha256(claim.canonical_value));
    CHECK(execute_retrieval(req, w, src, 10, WitnessView::honest()).canonical_value == value_bytes("43"));

    auto multi = req;
    multi.aggregation = Aggregation::MedianNumeric;
    multi.paths = {{"a", {}, 1}, {"b", {}, 1}, {"c", {}, 1}};
    CHECK(execute_retrieval(multi, w, src, 1, WitnessView::honest()).canonical_value == value_bytes("42.0"));

    auto lie = execute_retrieval(req, w, src, 1, WitnessView::lying("41"));
    CHECK(lie.value_digest != claim.value_digest);

    auto missing = req;
    missing.paths = {{"nowhere", {}, 1}};
    CHECK(execute_retrieval(missing, w, src, 1, WitnessView::honest()).canonical_value == error_bytes(kSourceUnavailable));
    CHECK(true_value(req, src, 1) == value_bytes("42"));
}

TEST_CASE("commitment digest examples and golden vector") {
    const auto pk = sha256(std::string_view("w1"));
    const Digest prev;
    const auto claim = Claim::make(Digest{}, pk, value_bytes("42"));
    const auto d = commitment_digest(claim, pk, prev);
    CHECK(d == commitment_digest(claim, pk, prev));
    CHECK(d.hex() == "dac79976cb1c4fca8958f0ff3130f9667254bfcbe363caed903dc6e7e93b41c4");

    const auto other = sha256(std::string_view("w2"));
    CHECK(commitment_digest(Claim::make(Digest{}, other, value_bytes("42")), other, prev) != d);
}

TEST_CASE("verify_reveal examples") {
    const auto pk = sha256(std::string_view("w1"));
    const auto prev = sha256(std::string_view("block"));
    const auto claim = Claim::make(sha256(std::string_view("req")), pk, value_bytes("42"));
    const auto commit = commit_for(claim, prev);
    Reveal reveal{claim.request_id, pk, claim.canonical_value, prev};
    CHECK(verify_reveal(commit, reveal));

    auto flipped = reveal;
    flipped.canonical_value[1] ^= 1;
    CHECK_FALSE(verify_reveal(commit, flipped));

    // Replay under another witness's commitment to the same value.
    const auto pk2 = sha256(std::string_view("w2"));
    const auto commit2 = commit_for(Claim::make(claim.request_id, pk2, claim.canonical_value), prev);
    CHECK_FALSE(verify_reveal(commit2, reveal));
}

TEST_CASE("commit-reveal binding under single-bit perturbations") {
    std::mt19937_64 rng(2718);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto pk = testing::random_digest(rng);
        const auto prev = testing::random_digest(rng);
        Bytes value(1 + rng() % 24);
        for (auto& b : value) b = static_cast<std::uint8_t>(rng());
        const auto claim = Claim::make(Digest{}, pk, value);
        const auto commit = commit_for(claim, prev);
        Reveal reveal{Digest{}, pk, value, prev};
        REQUIRE(verify_reveal(commit, reveal));

        auto r = reveal;
        auto c = commit;
        const auto bit = static_cast<std::uint8_t>(1u << (rng() % 8));
        switch (rng() % 4) {
            case 0: r.canonical_value[rng() % r.canonical_value.size()] ^= bit; break;
            case 1: r.prev_block_hash.bytes[rng() % 32] ^= bit; break;
            case 2: c.digest.bytes[rng() % 32] ^= bit; break;
            default:
                // Same opening under a neighbouring key, checked against the
                // original digest.
                c.witness.bytes[rng() % 32] ^= bit;
                r.witness = c.witness;
                break;
        }
        CHECK_FALSE(verify_reveal(c, r));
    }
}

TEST_CASE("lifecycle examples") {
    auto undecidable = basic_request(2);
    undecidable.undecidable = true;
    undecidable = lifecycle_step(undecidable, LifecycleEvent::posted(1));
    try {
        lifecycle_step(undecidable, LifecycleEvent::assigned(2));
        FAIL("undecidable request assigned");
    } catch (const RadError& e) {
        CHECK(e.kind() == ErrorKind::IllegalTransition);
    }
    auto relaunched = lifecycle_step(undecidable, LifecycleEvent::relaunched(3));
    CHECK_FALSE(relaunched.undecidable);
    CHECK_NOTHROW(lifecycle_step(relaunched, LifecycleEvent::assigned(3)));

    auto locked = basic_request(2);
    locked.time_lock = 100;
    locked = lifecycle_step(locked, LifecycleEvent::posted(1));
    CHECK(locked.state == LifecycleState::Posted);
    CHECK_THROWS_AS(lifecycle_step(locked, LifecycleEvent::lock_expired(99)), RadError);
    CHECK(lifecycle_step(locked, LifecycleEvent::lock_expired(100)).state == LifecycleState::Assignable);

    auto posted = lifecycle_step(basic_request(2), LifecycleEvent::posted(1));
    auto altered = posted.paths;
    altered[0].source_key = "elsewhere";
    CHECK_THROWS_AS(lifecycle_step(posted, LifecycleEvent::replaced_by_fee(2, altered, TokenAmount::from_wit(99))),
                    RadError);
    auto bumped = lifecycle_step(posted, LifecycleEvent::replaced_by_fee(2, posted.paths, TokenAmount::from_wit(99)));
    CHECK(bumped.witness_fee == TokenAmount::from_wit(99));
    CHECK(bumped.state == posted.state);
}

TEST_CASE("lifecycle full run and reveal timing") {
    const auto w1 = sha256(std::string_view("a")), w2 = sha256(std::string_view("b"));
    auto r = lifecycle_step(basic_request(2), LifecycleEvent::posted(1));
    r = lifecycle_step(r, LifecycleEvent::assigned(2));
    r = lifecycle_step(r, LifecycleEvent::committed(2, w1));
    CHECK_THROWS_AS(lifecycle_step(r, LifecycleEvent::committed(2, w1)), RadError);
    CHECK_THROWS_AS(lifecycle_step(r, LifecycleEvent::all_committed(2)), RadError);
    r = lifecycle_step(r, LifecycleEvent::committed(2, w2));
    r = lifecycle_step(r, LifecycleEvent::all_committed(2));
    CHECK_THROWS_AS(lifecycle_step(r, LifecycleEvent::revealed(2, w1)), RadError);
    r = lifecycle_step(r, LifecycleEvent::revealed(3, w1));
    CHECK_THROWS_AS(lifecycle_step(r, LifecycleEvent::resolved(3)), RadError);
    CHECK(lifecycle_step(r, LifecycleEvent::resolved(4, true)).state == LifecycleState::Resolved);
    r = lifecycle_step(r, LifecycleEvent::revealed(3, w2));
    r = lifecycle_step(r, LifecycleEvent::resolved(3));
    r = lifecycle_step(r, LifecycleEvent::delivered(4));
    CHECK(r.state == LifecycleState::Delivered);
}

TEST_CASE("lifecycle safety over random event traces") {
    std::mt19937_64 rng(55);
    std::vector<ParticipantId> ws;
    for (int i = 0; i < 5; ++i) ws.push_back(testing::random_digest(rng));
    int resolved = 0;
    for (int trace = 0; trace < 3000; ++trace) {
        auto r = basic_request(static_cast<std::uint32_t>(2 + rng() % 3));
        r.undecidable = rng() % 5 == 0;
        if (rng() % 3 == 0) r.time_lock = rng() % 4;
        bool timed_out = false;
        for (EpochIndex t = 0; t < 40; ++t) {
            LifecycleEvent ev;
            const auto kind = static_cast<K>(rng() % 10);
            ev.kind = kind;
            ev.epoch = t;
            if (kind == K::Committed || kind == K::Revealed) ev.witness = ws[rng() % ws.size()];
            if (kind == K::Resolved) ev.timeout = rng() % 4 == 0;
            if (kind == K::ReplacedByFee) {
                ev.paths = r.paths;
                ev.new_witness_fee = r.witness_fee + TokenAmount(1);
            }
            try {
                r = lifecycle_step(r, ev);
            } catch (const RadError& e) {
                CHECK(e.kind() == ErrorKind::IllegalTransition);
                continue;
            }
            if (kind == K::Resolved) {
                timed_out = ev.timeout;
                ++resolved;
                CHECK((r.revealed.size() >= r.replication || timed_out));
                CHECK(r.committed.size() >= r.replication);
                CHECK_FALSE(r.undecidable);
            }
            for (const auto& w : r.revealed) CHECK(r.committed.contains(w));
        }
    }
    CHECK(resolved > 0);
}
