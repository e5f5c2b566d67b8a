#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fspn/domain.hpp"

namespace fspn {

/// Row-major table of values, one column per variable. Discrete cells hold
/// integer codes stored as doubles.
struct DataMatrix {
    std::vector<VariableMeta> variables;
    std::vector<double> values;

    std::size_t n_rows() const { return variables.empty() ? 0 : values.size() / variables.size(); }
    std::size_t n_cols() const { return variables.size(); }

    double at(std::size_t r, std::size_t c) const { return values[r * n_cols() + c]; }
    double& at(std::size_t r, std::size_t c) { return values[r * n_cols() + c]; }
    std::span<const double> row(std::size_t r) const { return {values.data() + r * n_cols(), n_cols()}; }
    std::vector<double> column(std::size_t c) const;

    /// Copy holding only the given rows, in the given order.
    DataMatrix select_rows(std::span<const std::size_t> rows) const;

    void append_row(std::span<const double> row);
    bool operator==(const DataMatrix&) const = default;
};

enum class KindHint { automatic, discrete, continuous };

/// Per-column kind overrides keyed by header name. Columns not listed are
/// typed automatically: any non-numeric or all-integer column is discrete.
using SchemaHints = std::map<std::string, KindHint>;

/// Reads a comma-separated file with a header row. Discrete columns are coded
/// by sorted distinct value (numeric order when every value is numeric) and
/// keep the source values as labels; continuous domains are the observed
/// range widened by 1% on each side.
DataMatrix load_csv(const std::string& path, const SchemaHints& hints = {});

/// Reads a CSV against known variables (for example a model's), mapping labels
/// and checking domains. Columns are matched by header name.
DataMatrix load_csv_with_variables(const std::string& path, const std::vector<VariableMeta>& variables);

/// Writes a header row and one line per row; discrete cells use labels when present.
void save_csv(const DataMatrix& data, const std::string& path);

struct BenchmarkSplits {
    DataMatrix train;
    DataMatrix valid;
    DataMatrix test;
};

/// Loads `<dir>/<name>.ts.data`, `.valid.data` and `.test.data`: headerless
/// comma-separated 0/1 rows. Variables are named V0, V1, ...
BenchmarkSplits load_benchmark(const std::string& dir, const std::string& name);

/// Parses one headerless binary split file.
DataMatrix load_binary_rows(const std::string& path);

struct SyntheticSpec {
    std::size_t n_rows = 0;
    std::size_t n_vars = 0;
    std::vector<int> domain_sizes;
    /// Disjoint groups of variables that share a latent class. Ungrouped
    /// variables are drawn independently and uniformly.
    std::vector<std::vector<int>> groups;
    /// 0 copies the latent class deterministically, 1 resamples every value uniformly.
    double noise_level = 0.0;
    std::uint64_t seed = 0;

    /// Empty when valid.
    std::string check() const;
};

/// Latent-class generator. Within a group every variable j is, with
/// probability 1 - noise, perm_j[z mod d_j] for a shared class z uniform over
/// the largest domain in the group, and otherwise uniform over its domain.
DataMatrix generate_synthetic(const SyntheticSpec& spec);

/// The generator's exact distribution, for KL and conditional ground truth.
class SyntheticTruth {
public:
    explicit SyntheticTruth(SyntheticSpec spec);

    const SyntheticSpec& spec() const { return spec_; }
    /// Probability of one full assignment of codes.
    double probability(std::span<const int> assignment) const;

private:
    SyntheticSpec spec_;
    std::vector<std::vector<int>> perms_;
    std::vector<int> ungrouped_;
};

std::string format_synthetic_spec(const SyntheticSpec& spec);
SyntheticSpec parse_synthetic_spec(const std::string& text);

/// FNV-1a 64-bit hash, used to fingerprint inputs and outputs.
std::uint64_t fnv1a(std::span<const char> bytes);
std::uint64_t file_hash(const std::string& path);

}  // namespace fspn
