#include "witsim/consensus.hpp"

#include <algorithm>
#include <cmath>

namespace witsim::consensus {

namespace {

using Matrix = std::vector<std::vector<double>>;

std::vector<double> multiply(const Matrix& c, const std::vector<double>& v) {
    std::vector<double> out(c.size(), 0.0);
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) out[i] += c[i][j] * v[j];
    return out;
}

double norm(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

void fix_sign(std::vector<double>& v) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[arg]) + 1e-12) arg = i;
    if (v[arg] < 0)
        for (double& x : v) x = -x;
}

/// Normalized dominant eigenvector of a symmetric PSD matrix, or nullopt
/// when C v vanishes for the start vector.
std::optional<std::vector<double>> power_iteration(const Matrix& c, std::vector<double> v, double tol,
                                                   std::size_t max_iter) {
    double n = norm(v);
    for (double& x : v) x /= n;
    for (std::size_t it = 0; it < max_iter; ++it) {
        auto next = multiply(c, v);
        double len = norm(next);
        if (len < 1e-300) return std::nullopt;
        for (double& x : next) x /= len;
        double diff = 0;
        for (std::size_t i = 0; i < v.size(); ++i) diff = std::max(diff, std::abs(next[i] - v[i]));
        v = std::move(next);
        if (diff < tol) return v;
    }
    throw NoConvergence("power iteration did not converge in " + std::to_string(max_iter) + " steps");
}

}  // namespace

Winner modal_claim(std::span<const rad::Claim> claims, const reputation::ReputationLedger& rep) {
    if (claims.empty()) throw std::invalid_argument("modal_claim needs at least one claim");
    std::map<Bytes, __int128> mass;
    for (const auto& c : claims) {
        if (c.request_id != claims.front().request_id) throw std::invalid_argument("claims span several requests");
        mass[c.canonical_value] += rep.score(c.witness).units();
    }
    const Bytes* best = nullptr;
    __int128 best_mass = -1;
    bool tie = false;
    for (const auto& [value, m] : mass) {
        if (m > best_mass) {
            best = &value;
            best_mass = m;
            tie = false;
        } else if (m == best_mass) {
            tie = true;
        }
    }
    if (tie) return std::nullopt;
    return *best;
}

ClaimMatrix build_matrix(std::span<const rad::Claim> claims, const std::map<Digest, Winner>& winners,
                         const reputation::ReputationLedger& rep) {
    ClaimMatrix m;
    std::set<ParticipantId> rows;
    std::set<Digest> cols;
    for (const auto& c : claims) {
        rows.insert(c.witness);
        if (auto it = winners.find(c.request_id); it != winners.end() && it->second) cols.insert(c.request_id);
    }
    m.rows.assign(rows.begin(), rows.end());
    m.cols.assign(cols.begin(), cols.end());
    m.entries.assign(m.rows.size(), std::vector<std::optional<double>>(m.cols.size()));
    for (const auto& c : claims) {
        auto col = std::lower_bound(m.cols.begin(), m.cols.end(), c.request_id);
        if (col == m.cols.end() || *col != c.request_id) continue;
        auto row = std::lower_bound(m.rows.begin(), m.rows.end(), c.witness);
        m.entries[row - m.rows.begin()][col - m.cols.begin()] = c.canonical_value == *winners.at(c.request_id) ? 1.0 : 0.0;
    }
    long double total = 0;
    for (const auto& p : m.rows) total += static_cast<long double>(rep.score(p).units());
    for (const auto& p : m.rows)
        m.weights.push_back(total > 0 ? static_cast<double>(static_cast<long double>(rep.score(p).units()) / total)
                                      : 1.0 / static_cast<double>(m.rows.size()));
    return m;
}

std::vector<double> first_weighted_component(const ClaimMatrix& matrix, double tol, std::size_t max_iter) {
    const std::size_t n = matrix.rows.size();
    const std::size_t k = matrix.cols.size();
    std::vector<double> scores(n, 0.0);
    if (n == 0 || k == 0) return scores;

    // Impute absent entries, then centre on the weighted column means.
    Matrix x(n, std::vector<double>(k, 0.0));
    for (std::size_t j = 0; j < k; ++j) {
        double wsum = 0, vsum = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (matrix.entries[i][j]) {
                wsum += matrix.weights[i];
                vsum += matrix.weights[i] * *matrix.entries[i][j];
            }
        const double fill = wsum > 0 ? vsum / wsum : 0.0;
        for (std::size_t i = 0; i < n; ++i) x[i][j] = matrix.entries[i][j].value_or(fill);
        double mean = 0;
        for (std::size_t i = 0; i < n; ++i) mean += matrix.weights[i] * x[i][j];
        for (std::size_t i = 0; i < n; ++i) x[i][j] -= mean;
    }

    Matrix cov(k, std::vector<double>(k, 0.0));
    double largest = 0;
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) {
            double s = 0;
            for (std::size_t i = 0; i < n; ++i) s += matrix.weights[i] * x[i][a] * x[i][b];
            cov[a][b] = s;
            largest = std::max(largest, std::abs(s));
        }
    if (largest < 1e-15) return scores;

    // A start vector orthogonal to the dominant eigenvector converges to a
    // lesser one, so try all-ones and every basis vector and keep the largest
    // Rayleigh quotient.
    std::optional<std::vector<double>> v;
    double best = -1;
    bool stalled = false;
    for (std::size_t j = 0; j <= k; ++j) {
        std::vector<double> start(k, j == 0 ? 1.0 : 0.0);
        if (j > 0) start[j - 1] = 1.0;
        std::optional<std::vector<double>> cand;
        try {
            cand = power_iteration(cov, std::move(start), tol, max_iter);
        } catch (const NoConvergence&) {
            stalled = true;
            continue;
        }
        if (!cand) continue;
        const auto cv = multiply(cov, *cand);
        double q = 0;
        for (std::size_t a = 0; a < k; ++a) q += (*cand)[a] * cv[a];
        if (q > best * (1 + 1e-12) + 1e-300) {
            best = q;
            v = std::move(cand);
        }
    }
    if (!v && stalled) throw NoConvergence("power iteration did not converge from any start vector");
    if (!v) return scores;
    fix_sign(*v);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) scores[i] += x[i][j] * (*v)[j];
    return scores;
}

EpochResolution resolve_epoch(std::span<const rad::Claim> claims, const reputation::ReputationLedger& rep,
                              std::span<const Straggler> stragglers, const ResolutionParams& params) {
    EpochResolution out;

    std::map<Digest, std::vector<rad::Claim>> by_request;
    for (const auto& c : claims) by_request[c.request_id].push_back(c);
    std::map<Digest, Winner> winners;
    for (const auto& [id, group] : by_request) winners.emplace(id, modal_claim(group, rep));

    out.matrix = build_matrix(claims, winners, rep);
    try {
        out.scores = first_weighted_component(out.matrix, params.tol, params.max_iter);
    } catch (const NoConvergence&) {
        out.scores.assign(out.matrix.rows.size(), 0.0);
        out.pca_converged = false;
    }
    double max_score = 0;
    for (double s : out.scores) max_score = std::max(max_score, std::abs(s));

    // Per-witness disagreement over non-contested requests.
    std::map<ParticipantId, std::pair<std::size_t, std::size_t>> tally;  // (mismatches, decided)
    for (const auto& c : claims) {
        const auto& w = winners.at(c.request_id);
        if (!w) continue;
        auto& [miss, seen] = tally[c.witness];
        ++seen;
        if (c.canonical_value != *w) ++miss;
    }

    std::map<ParticipantId, Ratio> deviation;
    for (const auto& [p, counts] : tally) {
        const auto [miss, seen] = counts;
        if (miss == 0) {
            deviation.emplace(p, Ratio(0, 1));
            continue;
        }
        double coordination = 0;
        if (max_score > 0) {
            auto row = std::lower_bound(out.matrix.rows.begin(), out.matrix.rows.end(), p) - out.matrix.rows.begin();
            coordination = std::abs(out.scores[row]) / max_score;
        }
        double d = params.disagreement_weight * static_cast<double>(miss) / static_cast<double>(seen) +
                   params.coordination_weight * coordination;
        constexpr std::int64_t kScale = 1'000'000'000;
        auto units = std::clamp<std::int64_t>(std::llround(d * kScale), 1, kScale);
        deviation.emplace(p, Ratio(units, kScale));
    }
    for (const auto& s : stragglers) deviation[s.witness] = Ratio(1, 1);

    for (const auto& [id, group] : by_request) {
        Verdict v{winners.at(id), {}, {}};
        for (const auto& c : group) {
            if (!v.winning) continue;
            if (c.canonical_value == *v.winning)
                v.supporters.insert(c.witness);
            else
                v.deviators.emplace(c.witness, deviation.at(c.witness));
        }
        out.verdicts.emplace(id, std::move(v));
    }
    for (const auto& s : stragglers) {
        auto& v = out.verdicts[s.request_id];
        v.deviators[s.witness] = Ratio(1, 1);
    }

    for (const auto& [p, d] : deviation) {
        if (d.is_zero()) {
            out.epoch_verdict.honest.insert(p);
            out.epoch_verdict.task_fulfillers.insert(p);
        } else {
            out.epoch_verdict.dishonest.emplace(p, d);
        }
    }
    return out;
}

}  // namespace witsim::consensus
