#include "witsim/published_table.hpp"

#include <cmath>
#include <cstdio>

namespace witsim::reference {

std::string two_decimals(long double v) {
    const auto cents = static_cast<long long>(std::floor(v * 100.0L + 1e-9L));
    char buf[64];
    std::snprintf(buf, sizeof buf, "%lld.%02lld", cents / 100, cents % 100);
    return buf;
}

TableComparison compare_demurrage_table() {
    TableComparison out;
    out.rows = reputation::demurrage_table(kDemurrageScores, kDemurrageEpochs, reputation::DecayRate(Ratio(99, 100)));
    for (std::size_t r = 0; r < out.rows.size(); ++r)
        for (std::size_t c = 0; c < kDemurrageEpochs.size(); ++c) {
            CellComparison cell;
            cell.row = r;
            cell.column = c;
            cell.computed = out.rows[r].by_epoch[c].second.to_long_double();
            cell.published = kDemurrageTable[r][c];
            cell.deviation = (std::stod(two_decimals(cell.computed)) - cell.published) / cell.published;
            cell.exempt = r == kExemptRow && c == kExemptColumn;
            cell.within_tolerance = std::abs(cell.deviation) <= kDemurrageTolerance;
            if (!cell.exempt) {
                if (!cell.within_tolerance) ++out.outside;
                out.worst = std::max(out.worst, std::abs(cell.deviation));
            }
            out.cells.push_back(cell);
        }
    return out;
}

}  // namespace witsim::reference
