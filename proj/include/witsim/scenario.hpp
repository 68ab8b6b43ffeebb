#pragma once

#include "witsim/economics.hpp"
#include "witsim/rad.hpp"
#include "witsim/reputation.hpp"
#include "witsim/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace witsim::simnet {

struct Strategy {
    enum class Kind : std::uint8_t { Honest, Lazy, Liar, Colluder, NoReveal };
    Kind kind = Kind::Honest;
    std::string cartel;  // Colluder only

    /// "honest", "lazy", "liar", "no_reveal", "colluder:<id>".
    static Strategy parse(std::string_view text);
    std::string to_string() const;
    auto operator<=>(const Strategy&) const = default;
};

struct RequestSpec {
    EpochIndex post_epoch = 1;
    std::vector<rad::RetrievalPath> paths;
    rad::Aggregation aggregation = rad::Aggregation::First;
    std::uint32_t replication = 2;
    std::optional<EpochIndex> time_lock;
    bool undecidable = false;
    std::optional<EpochIndex> relaunch_epoch;
    std::optional<rad::DeliveryStub> deliver;
    std::size_t client = 0;
    std::optional<TokenAmount> witness_fee;  // default: economics::witness_fee
    std::optional<TokenAmount> bridge_fee;   // default: economics::bridge_fee when delivering
    std::uint64_t repeat_every = 0;
    std::uint64_t repeat_count = 1;
};

struct Scenario {
    std::size_t population = 0;
    /// In file order.
    std::vector<std::pair<Strategy, Ratio>> behavior_mix;
    reputation::DecayRate decay;
    Ratio penalty_rate{1, 5};
    std::uint64_t epochs = 0;
    std::uint64_t seed = 0;
    std::vector<RequestSpec> requests;
    rad::SourceOracle sources;
    economics::IssuanceParams issuance;
    economics::FeeParams fees;
    std::uint64_t backup_cap = 8;
    std::uint32_t replication_cap = 100;
    std::uint64_t recomputation_period = 1;
    std::uint64_t acceptance_horizon = 2;
    /// Starting score of every participant not listed in initial_reputation.
    reputation::Score initial_score = reputation::Score::neutral();
    /// Participant index -> starting score.
    std::map<std::size_t, reputation::Score> initial_reputation;
    /// Participant indices exported in reputation.csv.
    std::vector<std::size_t> tracked;

    /// The TOML text this scenario was read from; snapshots embed it.
    std::string source_text;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& origin, std::size_t line, const std::string& field, const std::string& what);
    std::size_t line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Scenario parse_scenario(std::string_view text, const std::string& origin = "<scenario>");
Scenario load_scenario(const std::filesystem::path& path);

/// Checks fractions, caps and cross references. Throws ValidationError.
void validate(const Scenario& s);

}  // namespace witsim::simnet
