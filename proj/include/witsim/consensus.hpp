#pragma once

#include "witsim/rad.hpp"
#include "witsim/reputation.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

namespace witsim::consensus {

/// Winning claim bytes, or nullopt for CONTESTED (exact weighted tie).
using Winner = std::optional<Bytes>;

/// Groups claims by exact bytes and returns the group with the largest total
/// reputation. Claims must be non-empty and share one request id.
Winner modal_claim(std::span<const rad::Claim> claims, const reputation::ReputationLedger& rep);

struct ClaimMatrix {
    std::vector<ParticipantId> rows;  // sorted
    std::vector<Digest> cols;         // sorted
    /// 1 = matches the column's modal claim, 0 = differs, nullopt = absent.
    std::vector<std::vector<std::optional<double>>> entries;
    /// Reputation weights, summing to 1.
    std::vector<double> weights;
};

/// Matrix over every witness with a claim and every non-contested request.
ClaimMatrix build_matrix(std::span<const rad::Claim> claims, const std::map<Digest, Winner>& winners,
                         const reputation::ReputationLedger& rep);

class NoConvergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Projection of each weighted-centred row onto the dominant eigenvector of the
/// weighted covariance matrix. Absent entries take the weighted column mean.
/// Zero covariance gives all-zero scores. The eigenvector sign is fixed so its
/// largest-magnitude component is positive.
std::vector<double> first_weighted_component(const ClaimMatrix& matrix, double tol = 1e-9, std::size_t max_iter = 1000);

struct Verdict {
    Winner winning;
    std::set<ParticipantId> supporters;
    std::map<ParticipantId, Ratio> deviators;
};

struct ResolutionParams {
    double tol = 1e-9;
    std::size_t max_iter = 1000;
    /// deviation = disagreement_weight * disagreement + coordination_weight * |score| / max|score|
    double disagreement_weight = 0.5;
    double coordination_weight = 0.5;
};

/// A witness that committed to a request but never revealed.
struct Straggler {
    Digest request_id;
    ParticipantId witness;
};

struct EpochResolution {
    std::map<Digest, Verdict> verdicts;
    reputation::EpochVerdict epoch_verdict;
    ClaimMatrix matrix;
    std::vector<double> scores;
    bool pca_converged = true;
};

/// Truth-by-consensus over one epoch's revealed claims. Witnesses that agree
/// with the winner on every request they revealed for get deviation 0. Anyone
/// else gets the blended deviation. Stragglers get deviation 1. Witnesses whose
/// requests all ended contested are left out of the verdict.
EpochResolution resolve_epoch(std::span<const rad::Claim> claims, const reputation::ReputationLedger& rep,
                              std::span<const Straggler> stragglers = {}, const ResolutionParams& params = {});

}  // namespace witsim::consensus
