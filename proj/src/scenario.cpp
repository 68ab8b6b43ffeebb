#include "witsim/scenario.hpp"

#include <toml.hpp>

#include <boost/multiprecision/cpp_int.hpp>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace witsim::simnet {

namespace {

class Reader {
public:
    explicit Reader(std::string origin) : origin_(std::move(origin)) {}

    [[noreturn]] void fail(const toml::node& node, const std::string& field, const std::string& what) const {
        throw ParseError(origin_, node.source().begin.line, field, what);
    }

    /// Rejects keys outside `allowed`.
    void check_keys(const toml::table& t, const std::string& where, std::initializer_list<std::string_view> allowed) const {
        for (auto&& [k, v] : t) {
            bool known = false;
            for (auto a : allowed) known |= k.str() == a;
            if (!known) fail(v, where + std::string(k.str()), "unknown key");
        }
    }

    const toml::node* find(const toml::table& t, std::string_view key) const { return t.get(key); }

    std::uint64_t u64(const toml::node& n, const std::string& field) const {
        auto v = n.value<std::int64_t>();
        if (!n.is_integer() || !v || *v < 0) fail(n, field, "expected a non-negative integer");
        return static_cast<std::uint64_t>(*v);
    }

    std::string str(const toml::node& n, const std::string& field) const {
        if (!n.is_string()) fail(n, field, "expected a string");
        return *n.value<std::string>();
    }

    bool boolean(const toml::node& n, const std::string& field) const {
        if (!n.is_boolean()) fail(n, field, "expected a boolean");
        return *n.value<bool>();
    }

    /// "3/5", "0.25", 0.25 or 1.
    Ratio ratio(const toml::node& n, const std::string& field) const {
        std::string text;
        if (n.is_string()) {
            text = *n.value<std::string>();
        } else if (n.is_integer()) {
            text = std::to_string(*n.value<std::int64_t>());
        } else if (n.is_floating_point()) {
            char buf[64];
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, *n.value<double>());
            text.assign(buf, ptr);
        } else {
            fail(n, field, "expected a number or a fraction string");
        }
        try {
            return Ratio::parse(text);
        } catch (const std::exception& e) {
            fail(n, field, e.what());
        }
    }

    /// "12.5" (Wit), "12n" (nanoWit) or an integer number of Wit.
    TokenAmount amount(const toml::node& n, const std::string& field) const {
        try {
            if (n.is_integer()) return TokenAmount::from_wit(u64(n, field));
            return TokenAmount::parse(str(n, field));
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            fail(n, field, e.what());
        }
    }

    const toml::table& table(const toml::node& n, const std::string& field) const {
        if (!n.is_table()) fail(n, field, "expected a table");
        return *n.as_table();
    }

    const toml::array& array(const toml::node& n, const std::string& field) const {
        if (!n.is_array()) fail(n, field, "expected an array");
        return *n.as_array();
    }

    const std::string& origin() const { return origin_; }

private:
    std::string origin_;
};

rad::RetrievalPath read_path(const Reader& r, const toml::node& n, const std::string& field) {
    const auto& t = r.table(n, field);
    r.check_keys(t, field + ".", {"source", "normalization", "complexity"});
    rad::RetrievalPath p;
    const auto* src = r.find(t, "source");
    if (!src) r.fail(n, field + ".source", "missing");
    p.source_key = r.str(*src, field + ".source");
    if (const auto* norm = r.find(t, "normalization")) {
        try {
            p.normalization = rad::Normalization::parse(r.str(*norm, field + ".normalization"));
        } catch (const std::invalid_argument& e) {
            r.fail(*norm, field + ".normalization", e.what());
        }
    }
    if (const auto* c = r.find(t, "complexity")) p.declared_complexity = r.u64(*c, field + ".complexity");
    return p;
}

RequestSpec read_request(const Reader& r, const toml::node& n, const std::string& field) {
    const auto& t = r.table(n, field);
    r.check_keys(t, field + ".",
                 {"post_epoch", "paths", "aggregation", "replication", "time_lock", "undecidable", "relaunch_epoch",
                  "deliver", "client", "witness_fee", "bridge_fee", "repeat_every", "repeat_count"});
    RequestSpec q;
    if (const auto* v = r.find(t, "post_epoch")) q.post_epoch = r.u64(*v, field + ".post_epoch");
    if (const auto* v = r.find(t, "paths")) {
        const auto& arr = r.array(*v, field + ".paths");
        for (std::size_t i = 0; i < arr.size(); ++i)
            q.paths.push_back(read_path(r, arr[i], field + ".paths[" + std::to_string(i) + "]"));
    }
    if (const auto* v = r.find(t, "aggregation")) {
        try {
            q.aggregation = rad::parse_aggregation(r.str(*v, field + ".aggregation"));
        } catch (const std::invalid_argument& e) {
            r.fail(*v, field + ".aggregation", e.what());
        }
    }
    if (const auto* v = r.find(t, "replication"))
        q.replication = static_cast<std::uint32_t>(std::min<std::uint64_t>(r.u64(*v, field + ".replication"), UINT32_MAX));
    if (const auto* v = r.find(t, "time_lock")) q.time_lock = r.u64(*v, field + ".time_lock");
    if (const auto* v = r.find(t, "undecidable")) q.undecidable = r.boolean(*v, field + ".undecidable");
    if (const auto* v = r.find(t, "relaunch_epoch")) q.relaunch_epoch = r.u64(*v, field + ".relaunch_epoch");
    if (const auto* v = r.find(t, "deliver")) {
        const auto& d = r.table(*v, field + ".deliver");
        r.check_keys(d, field + ".deliver.", {"target", "complexity"});
        rad::DeliveryStub stub;
        if (const auto* x = r.find(d, "target")) stub.target = r.str(*x, field + ".deliver.target");
        if (const auto* x = r.find(d, "complexity")) stub.complexity = r.u64(*x, field + ".deliver.complexity");
        q.deliver = stub;
    }
    if (const auto* v = r.find(t, "client")) q.client = r.u64(*v, field + ".client");
    if (const auto* v = r.find(t, "witness_fee")) q.witness_fee = r.amount(*v, field + ".witness_fee");
    if (const auto* v = r.find(t, "bridge_fee")) q.bridge_fee = r.amount(*v, field + ".bridge_fee");
    if (const auto* v = r.find(t, "repeat_every")) q.repeat_every = r.u64(*v, field + ".repeat_every");
    if (const auto* v = r.find(t, "repeat_count")) q.repeat_count = r.u64(*v, field + ".repeat_count");
    return q;
}

}  // namespace

ParseError::ParseError(const std::string& origin, std::size_t line, const std::string& field, const std::string& what)
    : std::runtime_error(origin + ":" + std::to_string(line) + ": " + field + ": " + what), line_(line), field_(field) {}

Strategy Strategy::parse(std::string_view text) {
    if (text == "honest") return {Kind::Honest, {}};
    if (text == "lazy") return {Kind::Lazy, {}};
    if (text == "liar") return {Kind::Liar, {}};
    if (text == "no_reveal") return {Kind::NoReveal, {}};
    if (text.starts_with("colluder:") && text.size() > 9) return {Kind::Colluder, std::string(text.substr(9))};
    throw std::invalid_argument("unknown strategy '" + std::string(text) + "'");
}

std::string Strategy::to_string() const {
    switch (kind) {
        case Kind::Honest: return "honest";
        case Kind::Lazy: return "lazy";
        case Kind::Liar: return "liar";
        case Kind::NoReveal: return "no_reveal";
        case Kind::Colluder: return "colluder:" + cartel;
    }
    return "?";
}

Scenario parse_scenario(std::string_view text, const std::string& origin) {
    toml::table root;
    try {
        root = toml::parse(text, origin);
    } catch (const toml::parse_error& e) {
        throw ParseError(origin, e.source().begin.line, "<syntax>", std::string(e.description()));
    }
    Reader r(origin);
    r.check_keys(root, "",
                 {"population", "epochs", "seed", "decay", "penalty_rate", "backup_cap", "replication_cap",
                  "recomputation_period", "acceptance_horizon", "tracked", "initial_score", "behavior", "issuance", "fees",
                  "initial_reputation", "sources", "requests"});

    Scenario s;
    s.source_text = std::string(text);
    auto require = [&](std::string_view key) -> const toml::node& {
        const auto* n = r.find(root, key);
        if (!n) throw ParseError(origin, 1, std::string(key), "missing required key");
        return *n;
    };
    s.population = r.u64(require("population"), "population");
    s.epochs = r.u64(require("epochs"), "epochs");
    if (const auto* v = r.find(root, "seed")) s.seed = r.u64(*v, "seed");
    if (const auto* v = r.find(root, "decay")) {
        auto d = r.ratio(*v, "decay");
        if (d > Ratio(1, 1)) throw ValidationError("decay must lie in [0, 1]");
        s.decay = reputation::DecayRate(d);
    }
    if (const auto* v = r.find(root, "penalty_rate")) s.penalty_rate = r.ratio(*v, "penalty_rate");
    if (const auto* v = r.find(root, "backup_cap")) s.backup_cap = r.u64(*v, "backup_cap");
    if (const auto* v = r.find(root, "replication_cap"))
        s.replication_cap = static_cast<std::uint32_t>(std::min<std::uint64_t>(r.u64(*v, "replication_cap"), UINT32_MAX));
    if (const auto* v = r.find(root, "recomputation_period")) s.recomputation_period = r.u64(*v, "recomputation_period");
    if (const auto* v = r.find(root, "acceptance_horizon")) s.acceptance_horizon = r.u64(*v, "acceptance_horizon");
    if (const auto* v = r.find(root, "initial_score")) {
        auto points = r.ratio(*v, "initial_score");
        if (points.is_zero()) r.fail(*v, "initial_score", "scores must be positive");
        s.initial_score = reputation::Score::from_points(points);
    }
    if (const auto* v = r.find(root, "tracked"))
        for (const auto& item : r.array(*v, "tracked")) s.tracked.push_back(r.u64(item, "tracked"));

    const auto& behavior = r.table(require("behavior"), "behavior");
    for (auto&& [k, v] : behavior) {
        Strategy strategy;
        try {
            strategy = Strategy::parse(k.str());
        } catch (const std::invalid_argument& e) {
            r.fail(v, "behavior." + std::string(k.str()), e.what());
        }
        s.behavior_mix.emplace_back(strategy, r.ratio(v, "behavior." + std::string(k.str())));
    }

    if (const auto* v = r.find(root, "issuance")) {
        const auto& t = r.table(*v, "issuance");
        r.check_keys(t, "issuance.", {"initial_reward", "halving_period", "genesis_allocation"});
        if (const auto* x = r.find(t, "initial_reward")) s.issuance.initial_reward = r.amount(*x, "issuance.initial_reward");
        if (const auto* x = r.find(t, "halving_period")) s.issuance.halving_period = r.u64(*x, "issuance.halving_period");
        if (const auto* x = r.find(t, "genesis_allocation"))
            s.issuance.genesis_allocation = r.amount(*x, "issuance.genesis_allocation");
    }
    if (const auto* v = r.find(root, "fees")) {
        const auto& t = r.table(*v, "fees");
        r.check_keys(t, "fees.", {"witness_fee_rate", "min_miner_fee_rate"});
        if (const auto* x = r.find(t, "witness_fee_rate")) s.fees.witness_fee_rate = r.amount(*x, "fees.witness_fee_rate");
        if (const auto* x = r.find(t, "min_miner_fee_rate"))
            s.fees.min_miner_fee_rate = r.amount(*x, "fees.min_miner_fee_rate");
    }
    if (const auto* v = r.find(root, "initial_reputation")) {
        const auto& arr = r.array(*v, "initial_reputation");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string field = "initial_reputation[" + std::to_string(i) + "]";
            const auto& t = r.table(arr[i], field);
            r.check_keys(t, field + ".", {"participant", "score"});
            const auto* p = r.find(t, "participant");
            const auto* sc = r.find(t, "score");
            if (!p || !sc) r.fail(arr[i], field, "needs participant and score");
            auto points = r.ratio(*sc, field + ".score");
            if (points.is_zero()) r.fail(*sc, field + ".score", "scores must be positive");
            s.initial_reputation[r.u64(*p, field + ".participant")] = reputation::Score::from_points(points);
        }
    }
    if (const auto* v = r.find(root, "sources")) {
        const auto& arr = r.array(*v, "sources");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string field = "sources[" + std::to_string(i) + "]";
            const auto& t = r.table(arr[i], field);
            r.check_keys(t, field + ".", {"key", "value", "from"});
            const auto* key = r.find(t, "key");
            const auto* value = r.find(t, "value");
            if (!key || !value) r.fail(arr[i], field, "needs key and value");
            EpochIndex from = 0;
            if (const auto* f = r.find(t, "from")) from = r.u64(*f, field + ".from");
            s.sources.set(r.str(*key, field + ".key"), from, r.str(*value, field + ".value"));
        }
    }
    if (const auto* v = r.find(root, "requests")) {
        const auto& arr = r.array(*v, "requests");
        for (std::size_t i = 0; i < arr.size(); ++i)
            s.requests.push_back(read_request(r, arr[i], "requests[" + std::to_string(i) + "]"));
    }

    validate(s);
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), 0, "<file>", "cannot open scenario file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path.string());
}

void validate(const Scenario& s) {
    if (s.population < 2) throw ValidationError("population must be at least 2");
    if (s.behavior_mix.empty()) throw ValidationError("behavior mix is empty");
    boost::multiprecision::cpp_rational sum = 0;
    for (const auto& [strategy, fraction] : s.behavior_mix)
        sum += boost::multiprecision::cpp_rational(fraction.num(), fraction.den());
    if (sum != 1) throw ValidationError("behavior fractions sum to " + sum.str() + ", not 1");
    if (s.penalty_rate > Ratio(1, 1)) throw ValidationError("penalty_rate must lie in [0, 1]");
    if (s.backup_cap < 1) throw ValidationError("backup_cap must be at least 1");
    if (s.replication_cap < 2) throw ValidationError("replication_cap must be at least 2");
    if (s.recomputation_period < 1) throw ValidationError("recomputation_period must be at least 1");
    if (s.issuance.halving_period < 1) throw ValidationError("halving_period must be at least 1");
    if (s.issuance.initial_reward == TokenAmount()) throw ValidationError("initial_reward must be positive");
    for (auto idx : s.tracked)
        if (idx >= s.population) throw ValidationError("tracked participant " + std::to_string(idx) + " out of range");
    for (const auto& [idx, score] : s.initial_reputation)
        if (idx >= s.population)
            throw ValidationError("initial_reputation participant " + std::to_string(idx) + " out of range");
    for (std::size_t i = 0; i < s.requests.size(); ++i) {
        const auto& q = s.requests[i];
        const std::string where = "requests[" + std::to_string(i) + "]: ";
        if (q.paths.empty()) throw ValidationError(where + "no retrieval paths");
        if (q.post_epoch < 1) throw ValidationError(where + "post_epoch must be at least 1");
        if (q.client >= s.population) throw ValidationError(where + "client out of range");
        if (q.repeat_count < 1) throw ValidationError(where + "repeat_count must be at least 1");
        if (q.repeat_count > 1 && q.repeat_every < 1) throw ValidationError(where + "repeat_every must be at least 1");
        for (const auto& p : q.paths)
            if (p.declared_complexity < 1) throw ValidationError(where + "path complexity must be at least 1");
    }
}

}  // namespace witsim::simnet
