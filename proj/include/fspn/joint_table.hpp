#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fspn {

/// Dense joint distribution over a discrete lattice, row-major with the last
/// variable varying fastest.
struct JointTable {
    std::vector<int> dims;
    std::vector<double> masses;

    static constexpr double kMaxCells = 1e6;

    std::size_t n_cells() const { return masses.size(); }
    std::size_t flat_index(std::span<const int> point) const;
    /// Inverse of flat_index.
    void unflatten(std::size_t flat, std::span<int> point) const;

    /// Empty when masses are nonnegative and sum to one within 1e-9.
    std::string check() const;
};

/// Product of cardinalities as a double; throws DataError above JointTable::kMaxCells.
std::size_t lattice_cells(std::span<const int> dims);

}  // namespace fspn
