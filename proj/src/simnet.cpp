#include "witsim/simnet.hpp"

#include "witsim/snapshot_json.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

namespace witsim::simnet {

namespace J = witsim::json;
namespace L = witsim::ledger;
namespace E = witsim::eligibility;
namespace R = witsim::reputation;
using nlohmann::json;

namespace {

using Phase = RequestRun::Phase;

void sign_inputs(L::Transaction& tx, const std::vector<const E::ParticipantKey*>& signers) {
    for (std::size_t i = 0; i < tx.inputs.size(); ++i) {
        tx.inputs[i].signer = signers[i]->public_key;
        tx.inputs[i].signature = Digest{};
    }
    const auto h = tx.signing_hash();
    for (std::size_t i = 0; i < tx.inputs.size(); ++i) tx.inputs[i].signature = signers[i]->sign(h.bytes);
}

Ratio share_of(TokenAmount part, TokenAmount whole) {
    return Ratio(static_cast<std::int64_t>(part.nano()), static_cast<std::int64_t>(whole.nano()));
}

TokenAmount witness_escrow(const RequestRun& run) {
    if (run.req.witness_fee == TokenAmount()) return {};
    return L::resolve_output_value(run.attached, 1, share_of(run.req.witness_fee, run.attached));
}

TokenAmount bridge_escrow(const RequestRun& run) {
    if (run.req.bridge_fee == TokenAmount()) return {};
    return L::resolve_output_value(run.attached, 1, share_of(run.req.bridge_fee, run.attached));
}

/// Value of each commit lock a pledge with k entries creates.
TokenAmount commit_value(const RequestRun& run) {
    if (run.commitments.empty()) return {};
    return L::resolve_output_value(witness_escrow(run), 1, Ratio(1, static_cast<std::int64_t>(run.commitments.size())));
}

TokenAmount tx_fee(const L::LedgerState& state, const L::Transaction& tx) {
    TokenAmount in;
    for (const auto& i : tx.inputs) in += state.utxo.at(i.source).value;
    TokenAmount out;
    for (const auto& o : tx.outputs) out += L::resolve_output_value(in, 1, o.share);
    return in - out;
}

}  // namespace

SimError::SimError(EpochIndex epoch, const std::string& operation, const std::string& what)
    : std::runtime_error("epoch " + std::to_string(epoch) + ": " + operation + ": " + what),
      epoch_(epoch),
      operation_(operation) {}

SnapshotError::SnapshotError(Kind kind, const std::string& what)
    : std::runtime_error(std::string(kind == Kind::CorruptSnapshot ? "CorruptSnapshot" : "VersionMismatch") + ": " +
                         what),
      kind_(kind) {}

std::vector<Strategy> assign_strategies(const Scenario& s) {
    const auto n = static_cast<__int128>(s.population);
    std::vector<std::uint64_t> counts;
    std::vector<__int128> rem_num, rem_den;
    std::uint64_t placed = 0;
    for (const auto& [strategy, f] : s.behavior_mix) {
        const __int128 scaled = static_cast<__int128>(f.num()) * n;
        counts.push_back(static_cast<std::uint64_t>(scaled / f.den()));
        rem_num.push_back(scaled % f.den());
        rem_den.push_back(f.den());
        placed += counts.back();
    }
    std::vector<std::size_t> order(counts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return rem_num[a] * rem_den[b] > rem_num[b] * rem_den[a];
    });
    for (std::size_t k = 0; placed < s.population && k < order.size(); ++k, ++placed) ++counts[order[k]];

    // Fisher-Yates over a fixed generator so the placement is portable.
    std::vector<std::size_t> slots(s.population);
    for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
    std::mt19937_64 rng(s.seed);
    for (std::size_t i = slots.size(); i > 1; --i) std::swap(slots[i - 1], slots[rng() % i]);

    std::vector<Strategy> out(s.population);
    std::size_t next = 0;
    for (std::size_t m = 0; m < counts.size(); ++m)
        for (std::uint64_t c = 0; c < counts[m]; ++c) out[slots[next++]] = s.behavior_mix[m].first;
    return out;
}

std::vector<RequestRun> schedule_requests(const Scenario& s, const std::vector<E::ParticipantKey>& keys) {
    std::vector<RequestRun> runs;
    for (std::size_t i = 0; i < s.requests.size(); ++i) {
        const auto& spec = s.requests[i];
        for (std::uint64_t k = 0; k < spec.repeat_count; ++k) {
            const EpochIndex shift = k * spec.repeat_every;
            RequestRun run;
            run.spec = i;
            run.instance = runs.size();
            run.post_epoch = spec.post_epoch + shift;
            if (spec.relaunch_epoch) run.relaunch_epoch = *spec.relaunch_epoch + shift;

            auto& req = run.req;
            req.client = keys.at(spec.client).public_key;
            req.nonce = run.instance;
            req.paths = spec.paths;
            req.aggregation = spec.aggregation;
            req.replication = spec.replication;
            if (spec.time_lock) req.time_lock = *spec.time_lock + shift;
            req.deliver = spec.deliver;
            req.undecidable = spec.undecidable;
            if (spec.witness_fee) {
                req.witness_fee = *spec.witness_fee;
            } else if (spec.replication >= 2) {
                std::vector<std::uint64_t> costs;
                for (const auto& p : spec.paths) costs.push_back(p.declared_complexity);
                req.witness_fee = economics::witness_fee(spec.replication, costs, s.fees);
            }
            if (spec.bridge_fee)
                req.bridge_fee = *spec.bridge_fee;
            else if (spec.deliver)
                req.bridge_fee = economics::bridge_fee(spec.deliver->complexity, s.fees);

            run.id = req.id();
            // Headroom over the descriptor for the post transaction's own fields.
            run.attached = req.witness_fee + req.bridge_fee +
                           economics::min_miner_fee(req.descriptor().size() + 1024, s.fees);
            if (run.attached == TokenAmount()) run.attached = TokenAmount(1);
            runs.push_back(std::move(run));
        }
    }
    return runs;
}

std::vector<L::GenesisFunding> genesis_funding(const std::vector<RequestRun>& runs) {
    std::vector<L::GenesisFunding> out;
    for (const auto& r : runs) out.push_back({r.req.client, r.attached});
    return out;
}

Simulation::Simulation(Scenario scenario) : scenario_(std::move(scenario)) {
    validate(scenario_);
    setup_participants();
    state_.requests = schedule_requests(scenario_, keys_);
    state_.dag = L::genesis(genesis_funding(state_.requests),
                            L::DagParams{scenario_.acceptance_horizon, scenario_.issuance});
    const auto& genesis_block = state_.dag.blocks.begin()->second;
    if (!genesis_block.tx_pointers.empty()) {
        const auto coinbase = genesis_block.tx_pointers.front();
        std::uint32_t index = 0;
        for (auto& run : state_.requests) run.funding = L::OutPoint{coinbase, index++};
    }

    std::vector<ParticipantId> ids;
    std::map<ParticipantId, R::Score> initial;
    for (const auto& k : keys_) {
        ids.push_back(k.public_key);
        if (!scenario_.initial_score.is_neutral()) initial[k.public_key] = scenario_.initial_score;
    }
    for (const auto& [idx, score] : scenario_.initial_reputation) initial[keys_.at(idx).public_key] = score;
    R::LedgerParams params;
    params.decay = scenario_.decay;
    state_.rep = R::ReputationLedger::with_scores(std::move(ids), initial, params);
}

Simulation::Simulation(Scenario scenario, SimState state) : scenario_(std::move(scenario)), state_(std::move(state)) {
    validate(scenario_);
    setup_participants();
}

void Simulation::setup_participants() {
    keys_.clear();
    index_.clear();
    for (std::size_t i = 0; i < scenario_.population; ++i) {
        keys_.push_back(E::ParticipantKey::derive(scenario_.seed, i));
        index_.emplace(keys_.back().public_key, i);
    }
    strategies_ = assign_strategies(scenario_);
}

void Simulation::submit(const L::Transaction& tx, EpochIndex t) {
    state_.dag = L::submit_transaction(std::move(state_.dag), tx);
    state_.mempool.emplace(tx.id(), t);
}

Digest Simulation::bound_block_hash(EpochIndex t) const {
    const auto& idx = state_.dag.by_checkpoint;
    for (auto it = idx.upper_bound(t); it != idx.begin();) {
        --it;
        if (!it->second.empty()) return *it->second.begin();
    }
    return {};
}

Bytes Simulation::witness_claim(const RequestRun& run, const ParticipantId& witness) const {
    const auto& s = strategy_of(witness);
    switch (s.kind) {
        case Strategy::Kind::Liar: return rad::value_bytes("lie:" + witness.hex().substr(0, 8));
        case Strategy::Kind::Colluder: return rad::value_bytes("cartel:" + s.cartel);
        default:
            return rad::execute_retrieval(run.req, witness, scenario_.sources, run.req.reference_epoch(),
                                          rad::WitnessView::honest())
                .canonical_value;
    }
}

void Simulation::epoch_blocks(EpochIndex t, const E::RandomBeacon& beacon, MetricsFrame& frame) {
    const E::InfluenceTable table(state_.rep);
    const auto outcome = E::mining_lottery(keys_, t, beacon, table, scenario_.backup_cap);
    frame.miners = outcome.primary_count;

    if (!outcome.winners.empty()) {
        std::vector<Digest> parents;
        const auto& idx = state_.dag.by_checkpoint;
        for (auto it = idx.lower_bound(t); it != idx.begin();) {
            --it;
            if (!it->second.empty()) {
                parents.assign(it->second.begin(), it->second.end());
                break;
            }
        }

        // Candidates are checked against the closed state plus every tally
        // this epoch's blocks will carry, overlaid in place.
        auto& closed = state_.dag.state;
        std::vector<Digest> overlay;
        for (const auto& tr : state_.pending_tallies)
            if (closed.tallies.emplace(tr.request_id, tr.winning).second) overlay.push_back(tr.request_id);
        std::vector<economics::MempoolEntry> candidates;
        for (const auto& [id, arrived] : state_.mempool) {
            const auto& tx = state_.dag.transactions.at(id);
            try {
                L::validate_transaction(closed, tx, t);
            } catch (const L::LedgerError&) {
                continue;  // not spendable yet; retried next epoch
            }
            candidates.push_back({id, tx_fee(closed, tx), tx.size()});
        }
        for (const auto& id : overlay) closed.tallies.erase(id);
        std::vector<Digest> pointers;
        for (const auto& e : economics::select_transactions(std::move(candidates))) pointers.push_back(e.id);

        for (const auto& proof : outcome.winners) {
            L::Block b;
            b.checkpoint = t;
            b.parents = parents;
            b.tx_pointers = pointers;
            b.leadership_proof = proof;
            b.miner = proof.participant;
            b.reward = economics::block_reward(t, scenario_.issuance);
            b.tallies = state_.pending_tallies;
            state_.dag = L::accept_block(std::move(state_.dag), b, state_.rep);
        }
        if (auto it = state_.dag.by_checkpoint.find(t); it != state_.dag.by_checkpoint.end())
            frame.blocks = it->second.size();
    }
    state_.dag = L::close_checkpoint(std::move(state_.dag), t);
    prune(t);
}

void Simulation::prune(EpochIndex t) {
    const auto& dag = state_.dag;
    std::erase_if(state_.mempool, [&](const auto& kv) {
        return dag.canonical_pointer.contains(kv.first) || kv.second + kMempoolExpiry < t;
    });
    std::erase_if(state_.pending_tallies,
                  [&](const L::TallyRecord& tr) { return dag.state.tallies.contains(tr.request_id); });
    for (auto& run : state_.requests)
        if (run.phase == Phase::Posting && run.post_tx && dag.canonical_pointer.contains(*run.post_tx))
            run.phase = Phase::Active;
}

void Simulation::epoch_posts(EpochIndex t) {
    for (auto& run : state_.requests) {
        if (run.phase == Phase::Posting || run.phase == Phase::Active) {
            if (run.req.state == rad::LifecycleState::Posted && run.req.time_lock && *run.req.time_lock <= t &&
                !run.req.undecidable)
                run.req = rad::lifecycle_step(std::move(run.req), rad::LifecycleEvent::lock_expired(t));
        }
        if (run.relaunch_epoch == t && run.req.undecidable && run.phase != Phase::Scheduled &&
            run.phase != Phase::Rejected)
            run.req = rad::lifecycle_step(std::move(run.req), rad::LifecycleEvent::relaunched(t));
        if (run.phase != Phase::Scheduled || run.post_epoch != t) continue;

        try {
            rad::validate_request(run.req, run.attached, scenario_.fees, scenario_.replication_cap);
        } catch (const rad::RadError&) {
            run.phase = Phase::Rejected;
            ++state_.rejected_requests;
            continue;
        }
        run.req = rad::lifecycle_step(std::move(run.req), rad::LifecycleEvent::posted(t));
        if (run.relaunch_epoch == t && run.req.undecidable)
            run.req = rad::lifecycle_step(std::move(run.req), rad::LifecycleEvent::relaunched(t));

        L::Transaction tx;
        tx.inputs.push_back({run.funding, {}, {}});
        tx.outputs.push_back({share_of(run.req.witness_fee, run.attached), L::RequestLock{run.id, run.req.replication}});
        if (run.req.bridge_fee > TokenAmount())
            tx.outputs.push_back({share_of(run.req.bridge_fee, run.attached), L::RequestLock{run.id, 0}});
        tx.payload = L::RadRequestPost{run.id, run.req.descriptor()};
        sign_inputs(tx, {&key_of(run.req.client)});
        submit(tx, t);
        run.post_tx = tx.id();
        run.phase = Phase::Posting;
    }
}

void Simulation::epoch_assignments(EpochIndex t, const E::RandomBeacon& beacon) {
    const E::InfluenceTable table(state_.rep);
    for (auto& run : state_.requests) {
        using S = rad::LifecycleState;
        if (run.phase != Phase::Active || run.req.undecidable) continue;
        if (run.req.state != S::Assignable && run.req.state != S::Assigned && run.req.state != S::Committing) continue;
        const std::uint64_t have = run.commitments.size();
        if (have >= run.req.replication) continue;

        const auto a = E::assign_task(run.id, run.req.replication - have, t, beacon, table, keys_, run.assigned);
        if (a.assigned.empty()) continue;
        run.req = rad::lifecycle_step(std::move(run.req), rad::LifecycleEvent::assigned(t));
        const auto prev = bound_block_hash(t);
        for (const auto& proof : a.assigned) {
            const auto& w = proof.participant;
            run.assigned.insert(w);
            if (strategy_of(w).kind == Strategy::Kind::Lazy) continue;
            auto claim = witness_claim(run, w);
            run.commitments[w] = rad::Commitment{run.id, w, nonced_claim_hash(claim, w, prev), t, proof};
            run.held_claims[w] = std::move(claim);
            run.bound_block[w] = prev;
            run.req = rad::lifecycle_step(std::move(run.req), rad::LifecycleEvent::committed(t, w));
        }
        if (run.commitments.size() < run.req.replication) continue;

        run.req = rad::lifecycle_step(std::move(run.req), rad::LifecycleEvent::all_committed(t));
        run.phase = Phase::Pledged;
        if (witness_escrow(run) == TokenAmount() || !run.post_tx) continue;
        L::CommitPledge pledge{run.id, {}};
        L::Transaction tx;
        tx.inputs.push_back({L::OutPoint{*run.post_tx, 0}, {}, {}});
        const Ratio each(1, static_cast<std::int64_t>(run.commitments.size()));
        for (const auto& [w, c] : run.commitments) {
            pledge.entries.push_back({w, c.digest});
            tx.outputs.push_back({each, L::CommitLock{run.id, w, c.digest, t + 1}});
        }
        tx.payload = std::move(pledge);
        sign_inputs(tx, {&key_of(run.req.client)});
        submit(tx, t);
        run.pledge_tx = tx.id();
    }
}

void Simulation::epoch_reveals(EpochIndex t) {
    for (auto& run : state_.requests) {
        if (run.phase != Phase::Pledged || !run.req.all_committed_epoch || t <= *run.req.all_committed_epoch) continue;
        for (const auto& [w, c] : run.commitments) {
            if (strategy_of(w).kind == Strategy::Kind::NoReveal || run.reveals.contains(w)) continue;
            rad::Reveal r{run.id, w, run.held_claims.at(w), run.bound_block.at(w)};
            if (!rad::verify_reveal(c, r)) throw std::logic_error("reveal by " + w.hex() + " does not open its commitment");
            run.reveals.emplace(w, std::move(r));
            run.req = rad::lifecycle_step(std::move(run.req), rad::LifecycleEvent::revealed(t, w));
        }
    }
}

void Simulation::epoch_resolution(EpochIndex t, MetricsFrame& frame) {
    std::vector<RequestRun*> ready;
    for (auto& run : state_.requests) {
        if (run.phase != Phase::Pledged || !run.req.all_committed_epoch) continue;
        const auto a = *run.req.all_committed_epoch;
        if (t <= a) continue;
        if (run.reveals.size() == run.commitments.size() || t >= a + rad::kRevealTimeout) ready.push_back(&run);
    }
    if (ready.empty()) return;

    std::vector<rad::Claim> claims;
    std::vector<consensus::Straggler> stragglers;
    for (const auto* run : ready) {
        if (run->reveals.size() >= 2)
            for (const auto& [w, r] : run->reveals) claims.push_back(rad::Claim::make(run->id, w, r.canonical_value));
        for (const auto& [w, c] : run->commitments)
            if (!run->reveals.contains(w)) stragglers.push_back({run->id, w});
    }
    const auto res = consensus::resolve_epoch(claims, state_.rep, stragglers);
    state_.accumulated.merge(res.epoch_verdict);

    for (auto* run : ready) {
        const bool timed_out = run->reveals.size() < run->commitments.size();
        const auto verdict = res.verdicts.find(run->id);
        if (run->reveals.size() >= 2 && verdict != res.verdicts.end()) run->winning = verdict->second.winning;
        run->req = rad::lifecycle_step(std::move(run->req), rad::LifecycleEvent::resolved(t, timed_out));
        run->correct =
            run->winning && *run->winning == rad::true_value(run->req, scenario_.sources, run->req.reference_epoch());
        ++frame.resolved;
        if (run->correct) ++frame.correct;

        std::optional<Digest> tally;
        if (run->winning) tally = sha256(*run->winning);
        state_.pending_tallies.push_back({run->id, tally});

        std::set<ParticipantId> supporters;
        if (run->winning)
            for (const auto& [w, r] : run->reveals)
                if (r.canonical_value == *run->winning) supporters.insert(w);
        state_.verdicts.push_back({t, run->id, tally, supporters.size(), run->commitments.size() - supporters.size()});

        // Release the pledged escrow: supporters redeem, everyone else's share
        // is forfeited to them, or refunded to the client when contested.
        if (run->pledge_tx && commit_value(*run) > TokenAmount()) {
            std::vector<L::OutPoint> forfeited;
            std::uint32_t index = 0;
            for (const auto& [w, c] : run->commitments) {
                const L::OutPoint op{*run->pledge_tx, index++};
                if (!supporters.contains(w)) {
                    forfeited.push_back(op);
                    continue;
                }
                const auto& r = run->reveals.at(w);
                L::Transaction tx;
                tx.inputs.push_back({op, {}, {}});
                tx.outputs.push_back({Ratio(1, 1), L::PayTo{w}});
                tx.payload = L::RevealRedeem{run->id, w, r.canonical_value, r.prev_block_hash};
                sign_inputs(tx, {&key_of(w)});
                submit(tx, t);
            }
            if (!forfeited.empty()) {
                L::Transaction tx;
                std::vector<const E::ParticipantKey*> signers;
                for (const auto& op : forfeited) {
                    tx.inputs.push_back({op, {}, {}});
                    signers.push_back(&key_of(run->req.client));
                }
                if (supporters.empty()) {
                    tx.outputs.push_back({Ratio(1, 1), L::PayTo{run->req.client}});
                } else {
                    const Ratio each(1, static_cast<std::int64_t>(supporters.size()));
                    for (const auto& s : supporters) tx.outputs.push_back({each, L::PayTo{s}});
                }
                tx.payload = L::ValueTransfer{run->id};
                sign_inputs(tx, signers);
                submit(tx, t);
            }
        }

        if (run->req.deliver && run->winning) {
            run->phase = Phase::Resolved;
            continue;
        }
        if (run->req.deliver && run->post_tx && bridge_escrow(*run) > TokenAmount()) {
            L::Transaction tx;
            tx.inputs.push_back({L::OutPoint{*run->post_tx, 1}, {}, {}});
            tx.outputs.push_back({Ratio(1, 1), L::PayTo{run->req.client}});
            tx.payload = L::ValueTransfer{run->id};
            sign_inputs(tx, {&key_of(run->req.client)});
            submit(tx, t);
        }
        run->phase = Phase::Done;
    }
}

void Simulation::epoch_deliveries(EpochIndex t, const E::RandomBeacon& beacon) {
    const E::InfluenceTable table(state_.rep);
    for (auto& run : state_.requests) {
        if (run.phase != Phase::Resolved) continue;
        const auto a =
            E::assign_task(run.id, 1, t, beacon, table, keys_, run.bridges_tried, E::TaskKind::Deliver);
        for (const auto& proof : a.assigned) {
            const auto& b = proof.participant;
            run.bridges_tried.insert(b);
            if (strategy_of(b).kind == Strategy::Kind::Lazy) continue;
            state_.deliveries.push_back({t, run.id, b, run.req.deliver->target});
            if (run.post_tx && bridge_escrow(run) > TokenAmount()) {
                L::Transaction tx;
                tx.inputs.push_back({L::OutPoint{*run.post_tx, 1}, {}, {}});
                tx.outputs.push_back({Ratio(1, 1), L::PayTo{b}});
                tx.payload = L::ValueTransfer{run.id};
                sign_inputs(tx, {&key_of(b)});
                submit(tx, t);
            }
            run.req = rad::lifecycle_step(std::move(run.req), rad::LifecycleEvent::delivered(t));
            state_.accumulated.task_fulfillers.insert(b);
            run.phase = Phase::Done;
            break;
        }
    }
}

const MetricsFrame& Simulation::step() {
    if (finished()) throw std::logic_error("simulation already finished");
    const EpochIndex t = state_.next_epoch;
    MetricsFrame frame;
    frame.epoch = t;

    auto guard = [&](const char* op, auto&& f) {
        try {
            f();
        } catch (const SimError&) {
            throw;
        } catch (const std::exception& e) {
            throw SimError(t, op, e.what());
        }
    };

    E::RandomBeacon beacon;
    guard("beacon", [&] { beacon = E::epoch_randomness(state_.dag.by_checkpoint, t); });
    guard("blocks", [&] { epoch_blocks(t, beacon, frame); });
    guard("post", [&] { epoch_posts(t); });
    guard("assignment", [&] { epoch_assignments(t, beacon); });
    guard("reveal", [&] { epoch_reveals(t); });
    guard("resolution", [&] { epoch_resolution(t, frame); });
    guard("delivery", [&] { epoch_deliveries(t, beacon); });
    guard("reputation", [&] {
        if (t % scenario_.recomputation_period != 0) return;
        auto update = R::epoch_update(std::move(state_.rep), state_.accumulated, scenario_.penalty_rate);
        state_.rep = std::move(update.ledger);
        state_.accumulated = {};
    });

    const auto& rep = state_.rep;
    if (rep.balance_units() != rep.total_units())
        throw SimError(t, "conservation",
                       "reputation balance " + std::to_string(rep.balance_units()) + " != " +
                           std::to_string(rep.total_units()));
    const auto& ls = state_.dag.state;
    const bool audit = t % kSupplyAuditPeriod == 0 || t == scenario_.epochs;
    if (audit && ls.supply() != ls.utxo_total() + ls.fees_in_flight)
        throw SimError(t, "supply", "ledger value " + (ls.utxo_total() + ls.fees_in_flight).to_string() +
                                        " != supply " + ls.supply().to_string());

    frame.supply = ls.issued;
    frame.pool_units = rep.pool_units();
    frame.balance_units = rep.balance_units();
    for (auto idx : scenario_.tracked) frame.tracked.push_back(rep.score(keys_.at(idx).public_key));
    state_.frames.push_back(std::move(frame));
    ++state_.next_epoch;
    return state_.frames.back();
}

void Simulation::run_until(EpochIndex last) {
    while (!finished() && state_.next_epoch <= last) step();
}

double Simulation::accuracy() const {
    std::uint64_t resolved = 0, correct = 0;
    for (const auto& f : state_.frames) {
        resolved += f.resolved;
        correct += f.correct;
    }
    return resolved == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(resolved);
}

double Simulation::mean_miners() const {
    if (state_.frames.empty()) return 0.0;
    std::uint64_t sum = 0;
    for (const auto& f : state_.frames) sum += f.miners;
    return static_cast<double>(sum) / static_cast<double>(state_.frames.size());
}

// ---- snapshots -------------------------------------------------------------

namespace {

json opt_u64(const std::optional<std::uint64_t>& v) { return v ? J::encode_u64(*v) : json(nullptr); }
std::optional<std::uint64_t> decode_opt_u64(const json& j) {
    if (j.is_null()) return std::nullopt;
    return J::decode_u64(j);
}
json opt_digest(const std::optional<Digest>& d) { return d ? J::encode(*d) : json(nullptr); }
std::optional<Digest> decode_opt_digest(const json& j) {
    if (j.is_null()) return std::nullopt;
    return J::decode_digest(j);
}

json encode_set(const std::set<ParticipantId>& s) {
    json a = json::array();
    for (const auto& p : s) a.push_back(J::encode(p));
    return a;
}
std::set<ParticipantId> decode_set(const json& j) {
    std::set<ParticipantId> s;
    for (const auto& x : j) s.insert(J::decode_digest(x));
    return s;
}

json encode_request(const rad::RadRequest& r) {
    json paths = json::array();
    for (const auto& p : r.paths)
        paths.push_back({{"source", p.source_key},
                         {"normalization", p.normalization.to_string()},
                         {"complexity", J::encode_u64(p.declared_complexity)}});
    json deliver = nullptr;
    if (r.deliver) deliver = {{"target", r.deliver->target}, {"complexity", J::encode_u64(r.deliver->complexity)}};
    return {{"client", J::encode(r.client)},
            {"nonce", J::encode_u64(r.nonce)},
            {"paths", paths},
            {"aggregation", rad::to_string(r.aggregation)},
            {"replication", J::encode_u64(r.replication)},
            {"time_lock", opt_u64(r.time_lock)},
            {"deliver", deliver},
            {"witness_fee", J::encode_u64(r.witness_fee.nano())},
            {"bridge_fee", J::encode_u64(r.bridge_fee.nano())},
            {"undecidable", r.undecidable},
            {"state", J::encode_u64(static_cast<std::uint64_t>(r.state))},
            {"posted_epoch", opt_u64(r.posted_epoch)},
            {"committed", encode_set(r.committed)},
            {"all_committed_epoch", opt_u64(r.all_committed_epoch)},
            {"revealed", encode_set(r.revealed)}};
}

rad::RadRequest decode_request(const json& j) {
    rad::RadRequest r;
    r.client = J::decode_digest(j.at("client"));
    r.nonce = J::decode_u64(j.at("nonce"));
    for (const auto& p : j.at("paths"))
        r.paths.push_back({p.at("source").get<std::string>(),
                           rad::Normalization::parse(p.at("normalization").get<std::string>()),
                           J::decode_u64(p.at("complexity"))});
    r.aggregation = rad::parse_aggregation(j.at("aggregation").get<std::string>());
    r.replication = static_cast<std::uint32_t>(J::decode_u64(j.at("replication")));
    r.time_lock = decode_opt_u64(j.at("time_lock"));
    if (const auto& d = j.at("deliver"); !d.is_null())
        r.deliver = rad::DeliveryStub{d.at("target").get<std::string>(), J::decode_u64(d.at("complexity"))};
    r.witness_fee = TokenAmount(J::decode_u64(j.at("witness_fee")));
    r.bridge_fee = TokenAmount(J::decode_u64(j.at("bridge_fee")));
    r.undecidable = j.at("undecidable").get<bool>();
    const auto state = J::decode_u64(j.at("state"));
    if (state > static_cast<std::uint64_t>(rad::LifecycleState::Delivered))
        throw std::invalid_argument("unknown lifecycle state");
    r.state = static_cast<rad::LifecycleState>(state);
    r.posted_epoch = decode_opt_u64(j.at("posted_epoch"));
    r.committed = decode_set(j.at("committed"));
    r.all_committed_epoch = decode_opt_u64(j.at("all_committed_epoch"));
    r.revealed = decode_set(j.at("revealed"));
    return r;
}

json encode_run(const RequestRun& r) {
    json commitments = json::object();
    for (const auto& [w, c] : r.commitments)
        commitments[w.hex()] = {{"digest", J::encode(c.digest)},
                                {"epoch", J::encode_u64(c.epoch)},
                                {"proof", J::encode(c.assignment_proof)}};
    json held = json::object();
    for (const auto& [w, b] : r.held_claims) held[w.hex()] = J::encode(b);
    json bound = json::object();
    for (const auto& [w, d] : r.bound_block) bound[w.hex()] = J::encode(d);
    json reveals = json::object();
    for (const auto& [w, rv] : r.reveals)
        reveals[w.hex()] = {{"value", J::encode(rv.canonical_value)}, {"prev", J::encode(rv.prev_block_hash)}};
    return {{"spec", J::encode_u64(r.spec)},
            {"instance", J::encode_u64(r.instance)},
            {"post_epoch", J::encode_u64(r.post_epoch)},
            {"relaunch_epoch", opt_u64(r.relaunch_epoch)},
            {"request", encode_request(r.req)},
            {"id", J::encode(r.id)},
            {"funding", {{"tx", J::encode(r.funding.tx)}, {"index", J::encode_u64(r.funding.index)}}},
            {"attached", J::encode_u64(r.attached.nano())},
            {"phase", J::encode_u64(static_cast<std::uint64_t>(r.phase))},
            {"post_tx", opt_digest(r.post_tx)},
            {"pledge_tx", opt_digest(r.pledge_tx)},
            {"assigned", encode_set(r.assigned)},
            {"commitments", commitments},
            {"held_claims", held},
            {"bound_block", bound},
            {"reveals", reveals},
            {"winning", r.winning ? J::encode(*r.winning) : json(nullptr)},
            {"correct", r.correct},
            {"bridges_tried", encode_set(r.bridges_tried)}};
}

RequestRun decode_run(const json& j) {
    RequestRun r;
    r.spec = J::decode_u64(j.at("spec"));
    r.instance = J::decode_u64(j.at("instance"));
    r.post_epoch = J::decode_u64(j.at("post_epoch"));
    r.relaunch_epoch = decode_opt_u64(j.at("relaunch_epoch"));
    r.req = decode_request(j.at("request"));
    r.id = J::decode_digest(j.at("id"));
    if (r.id != r.req.id()) throw std::invalid_argument("request id does not match its descriptor");
    r.funding = {J::decode_digest(j.at("funding").at("tx")),
                 static_cast<std::uint32_t>(J::decode_u64(j.at("funding").at("index")))};
    r.attached = TokenAmount(J::decode_u64(j.at("attached")));
    const auto phase = J::decode_u64(j.at("phase"));
    if (phase > static_cast<std::uint64_t>(Phase::Done)) throw std::invalid_argument("unknown request phase");
    r.phase = static_cast<Phase>(phase);
    r.post_tx = decode_opt_digest(j.at("post_tx"));
    r.pledge_tx = decode_opt_digest(j.at("pledge_tx"));
    r.assigned = decode_set(j.at("assigned"));
    for (const auto& [k, v] : j.at("commitments").items()) {
        const auto w = Digest::from_hex(k);
        r.commitments[w] = rad::Commitment{r.id, w, J::decode_digest(v.at("digest")), J::decode_u64(v.at("epoch")),
                                           J::decode_proof(v.at("proof"))};
    }
    for (const auto& [k, v] : j.at("held_claims").items()) r.held_claims[Digest::from_hex(k)] = J::decode_bytes(v);
    for (const auto& [k, v] : j.at("bound_block").items()) r.bound_block[Digest::from_hex(k)] = J::decode_digest(v);
    for (const auto& [k, v] : j.at("reveals").items()) {
        const auto w = Digest::from_hex(k);
        r.reveals[w] = rad::Reveal{r.id, w, J::decode_bytes(v.at("value")), J::decode_digest(v.at("prev"))};
    }
    if (const auto& w = j.at("winning"); !w.is_null()) r.winning = J::decode_bytes(w);
    r.correct = j.at("correct").get<bool>();
    r.bridges_tried = decode_set(j.at("bridges_tried"));
    return r;
}

json encode_verdict(const R::EpochVerdict& v) {
    json dishonest = json::object();
    for (const auto& [p, d] : v.dishonest) dishonest[p.hex()] = J::encode(d);
    return {{"honest", encode_set(v.honest)},
            {"dishonest", dishonest},
            {"task_fulfillers", encode_set(v.task_fulfillers)}};
}

R::EpochVerdict decode_verdict(const json& j) {
    R::EpochVerdict v;
    v.honest = decode_set(j.at("honest"));
    for (const auto& [k, d] : j.at("dishonest").items()) v.dishonest[Digest::from_hex(k)] = J::decode_ratio(d);
    v.task_fulfillers = decode_set(j.at("task_fulfillers"));
    return v;
}

json encode_frame(const MetricsFrame& f) {
    json tracked = json::array();
    for (const auto& s : f.tracked) tracked.push_back(std::to_string(s.units()));
    return {{"epoch", J::encode_u64(f.epoch)},
            {"miners", J::encode_u64(f.miners)},
            {"blocks", J::encode_u64(f.blocks)},
            {"resolved", J::encode_u64(f.resolved)},
            {"correct", J::encode_u64(f.correct)},
            {"supply", J::encode_u64(f.supply.nano())},
            {"pool_units", std::to_string(f.pool_units)},
            {"balance_units", std::to_string(f.balance_units)},
            {"tracked_units", tracked}};
}

std::int64_t decode_i64(const json& j) { return std::stoll(j.get<std::string>()); }

MetricsFrame decode_frame(const json& j) {
    MetricsFrame f;
    f.epoch = J::decode_u64(j.at("epoch"));
    f.miners = J::decode_u64(j.at("miners"));
    f.blocks = J::decode_u64(j.at("blocks"));
    f.resolved = J::decode_u64(j.at("resolved"));
    f.correct = J::decode_u64(j.at("correct"));
    f.supply = TokenAmount(J::decode_u64(j.at("supply")));
    f.pool_units = decode_i64(j.at("pool_units"));
    f.balance_units = decode_i64(j.at("balance_units"));
    for (const auto& s : j.at("tracked_units")) f.tracked.push_back(R::Score::from_units(decode_i64(s)));
    return f;
}

}  // namespace

json encode(const SimState& s) {
    json requests = json::array();
    for (const auto& r : s.requests) requests.push_back(encode_run(r));
    json mempool = json::array();
    for (const auto& [id, e] : s.mempool) mempool.push_back({{"id", J::encode(id)}, {"arrived", J::encode_u64(e)}});
    json tallies = json::array();
    for (const auto& t : s.pending_tallies)
        tallies.push_back({{"request_id", J::encode(t.request_id)}, {"winning", opt_digest(t.winning)}});
    json frames = json::array();
    for (const auto& f : s.frames) frames.push_back(encode_frame(f));
    json verdicts = json::array();
    for (const auto& v : s.verdicts)
        verdicts.push_back({{"epoch", J::encode_u64(v.epoch)},
                            {"request_id", J::encode(v.request_id)},
                            {"winning", opt_digest(v.winning)},
                            {"supporters", J::encode_u64(v.supporters)},
                            {"deviators", J::encode_u64(v.deviators)}});
    json deliveries = json::array();
    for (const auto& d : s.deliveries)
        deliveries.push_back({{"epoch", J::encode_u64(d.epoch)},
                              {"request_id", J::encode(d.request_id)},
                              {"bridge", J::encode(d.bridge)},
                              {"target", d.target}});
    return {{"next_epoch", J::encode_u64(s.next_epoch)},
            {"dag", J::encode(s.dag)},
            {"reputation", J::encode(s.rep)},
            {"requests", requests},
            {"mempool", mempool},
            {"pending_tallies", tallies},
            {"accumulated", encode_verdict(s.accumulated)},
            {"frames", frames},
            {"verdicts", verdicts},
            {"deliveries", deliveries},
            {"rejected_requests", J::encode_u64(s.rejected_requests)}};
}

SimState decode_state(const json& j) {
    SimState s;
    s.next_epoch = J::decode_u64(j.at("next_epoch"));
    s.dag = J::decode_dag(j.at("dag"));
    s.rep = J::decode_reputation(j.at("reputation"));
    for (const auto& r : j.at("requests")) s.requests.push_back(decode_run(r));
    for (const auto& m : j.at("mempool")) s.mempool.emplace(J::decode_digest(m.at("id")), J::decode_u64(m.at("arrived")));
    for (const auto& t : j.at("pending_tallies"))
        s.pending_tallies.push_back({J::decode_digest(t.at("request_id")), decode_opt_digest(t.at("winning"))});
    s.accumulated = decode_verdict(j.at("accumulated"));
    for (const auto& f : j.at("frames")) s.frames.push_back(decode_frame(f));
    for (const auto& v : j.at("verdicts"))
        s.verdicts.push_back({J::decode_u64(v.at("epoch")), J::decode_digest(v.at("request_id")),
                              decode_opt_digest(v.at("winning")), J::decode_u64(v.at("supporters")),
                              J::decode_u64(v.at("deviators"))});
    for (const auto& d : j.at("deliveries"))
        s.deliveries.push_back({J::decode_u64(d.at("epoch")), J::decode_digest(d.at("request_id")),
                                J::decode_digest(d.at("bridge")), d.at("target").get<std::string>()});
    s.rejected_requests = J::decode_u64(j.at("rejected_requests"));
    return s;
}

json Simulation::snapshot() const {
    json body = {{"scenario",
                  {{"toml", scenario_.source_text},
                   {"seed", J::encode_u64(scenario_.seed)},
                   {"epochs", J::encode_u64(scenario_.epochs)}}},
                 {"state", encode(state_)}};
    return {{"version", kSnapshotVersion}, {"digest", sha256(body.dump()).hex()}, {"body", std::move(body)}};
}

Simulation Simulation::restore(const json& snap) {
    using K = SnapshotError::Kind;
    if (!snap.is_object() || !snap.contains("version") || !snap.at("version").is_string())
        throw SnapshotError(K::CorruptSnapshot, "missing version field");
    if (snap.at("version").get<std::string>() != kSnapshotVersion)
        throw SnapshotError(K::VersionMismatch, "snapshot version '" + snap.at("version").get<std::string>() +
                                                    "', expected '" + kSnapshotVersion + "'");
    try {
        const auto& body = snap.at("body");
        if (sha256(body.dump()).hex() != snap.at("digest").get<std::string>())
            throw SnapshotError(K::CorruptSnapshot, "digest mismatch");
        const auto& sc = body.at("scenario");
        auto scenario = parse_scenario(sc.at("toml").get<std::string>(), "<snapshot>");
        scenario.seed = J::decode_u64(sc.at("seed"));
        scenario.epochs = J::decode_u64(sc.at("epochs"));
        return Simulation(std::move(scenario), decode_state(body.at("state")));
    } catch (const SnapshotError&) {
        throw;
    } catch (const std::exception& e) {
        throw SnapshotError(K::CorruptSnapshot, e.what());
    }
}

json read_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SnapshotError(SnapshotError::Kind::CorruptSnapshot, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return json::parse(buf.str());
    } catch (const json::exception& e) {
        throw SnapshotError(SnapshotError::Kind::CorruptSnapshot, e.what());
    }
}

void write_snapshot(const std::filesystem::path& path, const json& snapshot) {
    std::ofstream out(path, std::ios::binary);
    out << J::dump(snapshot);
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

// ---- outputs ---------------------------------------------------------------

void Simulation::write_outputs(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
        return out;
    };

    {
        auto out = open("metrics.csv");
        out << "epoch,miners,blocks,resolved,correct,supply_nanowit,pool_carry\n";
        for (const auto& f : state_.frames)
            out << f.epoch << ',' << f.miners << ',' << f.blocks << ',' << f.resolved << ',' << f.correct << ','
                << f.supply.nano() << ',' << R::Score::from_units(f.pool_units).to_string() << '\n';
    }
    {
        auto out = open("reputation.csv");
        out << "epoch";
        for (auto idx : scenario_.tracked) out << ",p" << idx;
        out << '\n';
        for (const auto& f : state_.frames) {
            out << f.epoch;
            for (const auto& s : f.tracked) out << ',' << s.to_string();
            out << '\n';
        }
    }
    {
        auto out = open("verdicts.csv");
        out << "epoch,request_id,winning_digest,supporters,deviators\n";
        for (const auto& v : state_.verdicts)
            out << v.epoch << ',' << v.request_id.hex() << ',' << (v.winning ? v.winning->hex() : "CONTESTED") << ','
                << v.supporters << ',' << v.deviators << '\n';
    }
    {
        auto out = open("deliveries.csv");
        out << "epoch,request_id,bridge,target\n";
        for (const auto& d : state_.deliveries)
            out << d.epoch << ',' << d.request_id.hex() << ',' << d.bridge.hex() << ',' << d.target << '\n';
    }
    {
        json finals = json::object();
        json strategies = json::object();
        for (std::size_t i = 0; i < keys_.size(); ++i) {
            finals[std::to_string(i)] = state_.rep.score(keys_[i].public_key).to_string();
            strategies[std::to_string(i)] = strategies_[i].to_string();
        }
        std::uint64_t resolved = 0, correct = 0;
        for (const auto& f : state_.frames) {
            resolved += f.resolved;
            correct += f.correct;
        }
        json summary = {{"accuracy", accuracy()},
                        {"mean_miners", mean_miners()},
                        {"final_reputations", finals},
                        {"strategies", strategies},
                        {"epochs", state_.frames.size()},
                        {"resolved", resolved},
                        {"correct", correct},
                        {"rejected_requests", state_.rejected_requests},
                        {"supply_nanowit", state_.dag.state.issued.to_string()}};
        auto out = open("summary.json");
        out << J::dump(summary);
    }
    {
        auto out = open("ledger.json");
        out << J::dump(J::encode(state_.dag));
    }
    write_snapshot(dir / "snapshot.json", snapshot());
}

}  // namespace witsim::simnet
