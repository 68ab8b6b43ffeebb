#include "witsim/economics.hpp"
#include "witsim/published_table.hpp"
#include "witsim/reputation.hpp"
#include "witsim/scenario.hpp"
#include "witsim/simnet.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

using namespace witsim;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

int verify_table(const std::string& decay_text) {
    using reference::two_decimals;
    const reputation::DecayRate decay(Ratio::parse(decay_text));
    const auto rows = reputation::demurrage_table(reference::kDemurrageScores, reference::kDemurrageEpochs, decay);

    std::cout << "epoch";
    for (auto s : reference::kDemurrageScores) std::cout << '\t' << s;
    std::cout << '\n';
    for (std::size_t c = 0; c < reference::kDemurrageEpochs.size(); ++c) {
        std::cout << reference::kDemurrageEpochs[c];
        for (const auto& row : rows) std::cout << '\t' << two_decimals(row.by_epoch[c].second.to_long_double());
        std::cout << '\n';
    }
    if (decay.value() != Ratio(99, 100)) return 0;

    const auto cmp = reference::compare_demurrage_table();
    std::cout << "\ncell\tcomputed\tpublished\tdeviation\tstatus\n";
    for (const auto& cell : cmp.cells) {
        if (cell.within_tolerance && !cell.exempt) continue;
        char line[160];
        std::snprintf(line, sizeof line, "(%llu,%llu)\t%.4Lf\t%.2f\t%+.4f%%\t%s\n",
                      static_cast<unsigned long long>(reference::kDemurrageScores[cell.row]),
                      static_cast<unsigned long long>(reference::kDemurrageEpochs[cell.column]), cell.computed,
                      cell.published, cell.deviation * 100, cell.exempt ? "flagged (exempt)" : "OUTSIDE");
        std::cout << line;
    }
    std::cout << "\nfinal divisors:";
    for (std::size_t r = 0; r < cmp.rows.size(); ++r) {
        const auto final_score = cmp.rows[r].by_epoch.back().second.to_long_double();
        std::cout << ' ' << static_cast<double>(reference::kDemurrageScores[r] / final_score);
    }
    char summary[128];
    std::snprintf(summary, sizeof summary, "\ncells outside %.1f%%: %zu (largest non-exempt deviation %.4f%%)\n",
                  reference::kDemurrageTolerance * 100, cmp.outside, cmp.worst * 100);
    std::cout << summary;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decentralized oracle network simulator"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir, snapshot_path;
    std::optional<std::uint64_t> seed, epochs;
    std::uint64_t at_epoch = 0, height = 0;
    std::string decay = "0.99";

    auto* run = app.add_subcommand("run", "Run a scenario and write metrics");
    run->add_option("--scenario", scenario_path, "Scenario TOML file")->required();
    run->add_option("--out", out_dir, "Output directory")->required();
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_option("--epochs", epochs, "Override the scenario length");

    auto* table = app.add_subcommand("verify-table", "Print the idle demurrage table and compare it");
    table->add_option("--decay", decay, "Decay rate, e.g. 0.99 or 99/100");

    auto* supply = app.add_subcommand("supply", "Cumulative issuance below a height, in nanoWit");
    supply->add_option("--height", height, "Block height")->required();

    auto* snap = app.add_subcommand("snapshot", "Run a scenario up to an epoch and save its state");
    snap->add_option("--scenario", scenario_path, "Scenario TOML file")->required();
    snap->add_option("--epoch", at_epoch, "Last epoch to run before saving")->required();
    snap->add_option("--out", snapshot_path, "Snapshot file")->required();
    snap->add_option("--seed", seed, "Override the scenario seed");
    snap->add_option("--epochs", epochs, "Override the scenario length");

    auto* resume = app.add_subcommand("resume", "Continue a saved run and write metrics");
    resume->add_option("--snapshot", snapshot_path, "Snapshot file")->required();
    resume->add_option("--out", out_dir, "Output directory")->required();
    resume->add_option("--epochs", epochs, "Override the scenario length");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    auto load = [&] {
        auto s = simnet::load_scenario(scenario_path);
        if (seed) s.seed = *seed;
        if (epochs) s.epochs = *epochs;
        simnet::validate(s);
        return s;
    };

    try {
        if (*run) {
            simnet::Simulation sim(load());
            sim.run();
            sim.write_outputs(out_dir);
            std::cout << "epochs " << sim.state().frames.size() << ", accuracy " << sim.accuracy() << ", mean miners "
                      << sim.mean_miners() << '\n';
        } else if (*table) {
            return verify_table(decay);
        } else if (*supply) {
            std::cout << economics::cumulative_supply(height).nano() << '\n';
        } else if (*snap) {
            simnet::Simulation sim(load());
            sim.run_until(at_epoch);
            simnet::write_snapshot(snapshot_path, sim.snapshot());
        } else if (*resume) {
            auto sim = simnet::Simulation::restore(simnet::read_snapshot(snapshot_path));
            if (epochs) sim.set_epochs(*epochs);
            sim.run();
            sim.write_outputs(out_dir);
        }
    } catch (const simnet::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const simnet::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const simnet::SnapshotError& e) {
        std::cerr << "snapshot error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const simnet::SimError& e) {
        std::cerr << "aborted: " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
