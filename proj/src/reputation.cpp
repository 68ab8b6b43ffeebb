#include "witsim/reputation.hpp"

#include <algorithm>
#include <cmath>

namespace witsim::reputation {

Score Score::from_points(const Ratio& points) {
    __int128 units = static_cast<__int128>(points.num()) * kUnitsPerPoint / points.den();
    if (units > INT64_MAX) throw std::overflow_error("reputation score too large");
    return Score(static_cast<std::int64_t>(units));
}

Score Score::parse(std::string_view text) { return from_points(Ratio::parse(text)); }

std::string Score::to_string() const {
    std::string out = std::to_string(units_ / kUnitsPerPoint);
    auto frac = units_ % kUnitsPerPoint;
    if (frac != 0) {
        std::string f = std::to_string(frac);
        f.insert(0, 12 - f.size(), '0');
        while (f.back() == '0') f.pop_back();
        out += "." + f;
    }
    return out;
}

DecayRate::DecayRate(Ratio value) : value_(value) {
    if (value_ > Ratio(1, 1)) throw std::invalid_argument("decay rate must lie in [0, 1]");
}

void EpochVerdict::merge(const EpochVerdict& other) {
    for (const auto& [p, dev] : other.dishonest) {
        auto [it, inserted] = dishonest.emplace(p, dev);
        if (!inserted && it->second < dev) it->second = dev;
    }
    for (const auto& p : other.honest) honest.insert(p);
    for (const auto& p : other.task_fulfillers) task_fulfillers.insert(p);
    for (const auto& [p, dev] : dishonest) {
        honest.erase(p);
        task_fulfillers.erase(p);
    }
}

ReputationLedger::ReputationLedger(std::vector<ParticipantId> participants, LedgerParams params)
    : participants_(std::move(participants)), params_(params) {
    std::sort(participants_.begin(), participants_.end());
    if (std::adjacent_find(participants_.begin(), participants_.end()) != participants_.end())
        throw ReputationError("duplicate participant in reputation ledger");
    __int128 total = static_cast<__int128>(participants_.size()) * kUnitsPerPoint;
    if (total > INT64_MAX) throw ReputationError("population too large for the reputation grid");
    total_units_ = static_cast<std::int64_t>(total);
}

ReputationLedger ReputationLedger::with_scores(std::vector<ParticipantId> participants,
                                               const std::map<ParticipantId, Score>& initial, LedgerParams params) {
    ReputationLedger l(std::move(participants), params);
    __int128 total = l.total_units_;
    for (const auto& [p, s] : initial) {
        if (!l.contains(p)) throw ReputationError("initial score for unknown participant " + p.hex());
        if (s.units() <= 0) throw ReputationError("reputation scores must be positive");
        total += static_cast<__int128>(s.units()) - kUnitsPerPoint;
        l.set_score(p, s);
    }
    if (total > INT64_MAX) throw ReputationError("reputation total overflows the grid");
    l.total_units_ = static_cast<std::int64_t>(total);
    return l;
}

ReputationLedger ReputationLedger::restore(std::vector<ParticipantId> participants,
                                           std::map<ParticipantId, Score> scores, std::int64_t total_units,
                                           std::int64_t pool_units, LedgerParams params) {
    ReputationLedger l(std::move(participants), params);
    l.scores_ = std::move(scores);
    l.total_units_ = total_units;
    l.pool_units_ = pool_units;
    return l;
}

Score ReputationLedger::score(const ParticipantId& p) const {
    auto it = scores_.find(p);
    return it == scores_.end() ? Score::neutral() : it->second;
}

bool ReputationLedger::contains(const ParticipantId& p) const {
    return std::binary_search(participants_.begin(), participants_.end(), p);
}

std::int64_t ReputationLedger::balance_units() const {
    __int128 sum = pool_units_;
    sum += static_cast<__int128>(participants_.size() - scores_.size()) * kUnitsPerPoint;
    for (const auto& [p, s] : scores_) sum += s.units();
    return static_cast<std::int64_t>(sum);
}

void ReputationLedger::set_score(const ParticipantId& p, Score s) {
    if (s.units() <= 0) throw ReputationError("reputation scores must stay positive");
    if (s.is_neutral())
        scores_.erase(p);
    else
        scores_[p] = s;
}

void ReputationLedger::take_pool(std::int64_t units) {
    if (units > pool_units_) throw ReputationError("redistribution pool overdrawn");
    pool_units_ -= units;
}

bool ReputationLedger::operator==(const ReputationLedger& o) const {
    return participants_ == o.participants_ && scores_ == o.scores_ && total_units_ == o.total_units_ &&
           pool_units_ == o.pool_units_ && params_.decay.value() == o.params_.decay.value() &&
           params_.assimilation_delta == o.params_.assimilation_delta;
}

Score apply_demurrage(Score score, const DecayRate& decay) {
    if (!score.above_neutral()) return score;
    const auto& d = decay.value();
    if (d == Ratio(1, 1)) return score;
    long double points = score.to_long_double();
    long double rate = static_cast<long double>(d.num()) / static_cast<long double>(d.den());
    long double decayed = points * std::pow(rate, std::log10(points));
    long double units = std::floor(decayed * static_cast<long double>(kUnitsPerPoint));
    auto snapped = std::clamp<long double>(units, static_cast<long double>(kUnitsPerPoint),
                                           static_cast<long double>(score.units()));
    return Score::from_units(static_cast<std::int64_t>(snapped));
}

ReputationLedger assimilate(ReputationLedger ledger) {
    const auto ceiling = kUnitsPerPoint + ledger.params().assimilation_delta.units();
    std::vector<std::pair<ParticipantId, Score>> near_neutral;
    for (const auto& [p, s] : ledger.stored())
        if (s.above_neutral() && s.units() <= ceiling) near_neutral.emplace_back(p, s);
    for (const auto& [p, s] : near_neutral) {
        ledger.add_to_pool(s.units() - kUnitsPerPoint);
        ledger.set_score(p, Score::neutral());
    }
    return ledger;
}

EpochUpdate epoch_update(ReputationLedger ledger, const EpochVerdict& verdict, const Ratio& penalty_rate) {
    for (const auto& p : verdict.honest) {
        if (!ledger.contains(p)) throw ReputationError("verdict names unknown participant " + p.hex());
        if (verdict.dishonest.contains(p)) throw ReputationError("participant both honest and dishonest");
    }
    for (const auto& [p, dev] : verdict.dishonest) {
        if (!ledger.contains(p)) throw ReputationError("verdict names unknown participant " + p.hex());
        if (dev > Ratio(1, 1)) throw ReputationError("deviation must lie in [0, 1]");
    }
    for (const auto& p : verdict.task_fulfillers)
        if (!ledger.contains(p)) throw ReputationError("verdict names unknown participant " + p.hex());
    if (penalty_rate > Ratio(1, 1)) throw ReputationError("penalty rate must lie in [0, 1]");

    EpochUpdate out;

    // Penalties, floored on the grid.
    for (const auto& [p, dev] : verdict.dishonest) {
        auto s = ledger.score(p);
        __int128 num = static_cast<__int128>(s.units()) * penalty_rate.num() * dev.num();
        __int128 den = static_cast<__int128>(penalty_rate.den()) * dev.den();
        auto loss = static_cast<std::int64_t>(num / den);
        loss = std::min(loss, s.units() - 1);
        if (loss <= 0) continue;
        ledger.set_score(p, Score::from_units(s.units() - loss));
        ledger.add_to_pool(loss);
        out.penalties_units += loss;
    }

    // Demurrage on every score above neutral.
    std::vector<std::pair<ParticipantId, Score>> engaged(ledger.stored().begin(), ledger.stored().end());
    for (const auto& [p, s] : engaged) {
        if (!s.above_neutral()) continue;
        auto decayed = apply_demurrage(s, ledger.params().decay);
        auto loss = s.units() - decayed.units();
        if (loss == 0) continue;
        ledger.set_score(p, decayed);
        ledger.add_to_pool(loss);
        out.demurrage_units += loss;
    }

    // Even split; the remainder stays in the pool.
    if (ledger.pool_units() > 0) {
        if (verdict.task_fulfillers.empty()) {
            out.empty_fulfiller_set = true;
        } else {
            auto n = static_cast<std::int64_t>(verdict.task_fulfillers.size());
            auto share = ledger.pool_units() / n;
            if (share > 0) {
                for (const auto& p : verdict.task_fulfillers)
                    ledger.set_score(p, Score::from_units(ledger.score(p).units() + share));
                ledger.take_pool(share * n);
                out.distributed_units = share * n;
            }
        }
    }

    out.ledger = assimilate(std::move(ledger));
    return out;
}

std::vector<std::pair<ParticipantId, Score>> engaged_set(const ReputationLedger& ledger) {
    std::vector<std::pair<ParticipantId, Score>> out;
    for (const auto& [p, s] : ledger.stored())
        if (s.above_neutral()) out.emplace_back(p, s);
    if (!out.empty()) return out;
    for (const auto& p : ledger.participants())
        if (ledger.score(p).is_neutral()) out.emplace_back(p, Score::neutral());
    return out;
}

std::vector<DemurrageRow> demurrage_table(std::span<const std::uint64_t> initial_points,
                                          std::span<const std::uint64_t> epochs, const DecayRate& decay) {
    std::vector<DemurrageRow> rows;
    const std::uint64_t last = epochs.empty() ? 0 : *std::max_element(epochs.begin(), epochs.end());
    for (auto points : initial_points) {
        DemurrageRow row{Score::from_points(Ratio(static_cast<std::int64_t>(points), 1)), {}};
        auto s = row.initial;
        for (std::uint64_t e = 0; e <= last; ++e) {
            if (e > 0) s = apply_demurrage(s, decay);
            if (std::find(epochs.begin(), epochs.end(), e) != epochs.end()) row.by_epoch.emplace_back(e, s);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace witsim::reputation
