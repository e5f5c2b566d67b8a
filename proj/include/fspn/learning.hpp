#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fspn/data.hpp"
#include "fspn/learn_config.hpp"
#include "fspn/model.hpp"

namespace fspn {

/// Randomized dependence coefficient of two equally long series, in [0,1].
/// Median over cfg.rdc_seeds draws of the random sine features; a constant
/// series scores 0. Symmetric and deterministic given cfg.seed.
double rdc(std::span<const double> a, std::span<const double> b, const LearnConfig& cfg);

/// Pairwise RDC scores over `scope`, indexed by position in `scope`.
struct CorrelationMatrix {
    VarSet scope;
    Eigen::MatrixXd scores;

    double operator()(std::size_t i, std::size_t j) const { return scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); }
    std::size_t size() const { return scope.size(); }
};

/// Requires |scope| >= 2 (throws std::invalid_argument otherwise).
CorrelationMatrix correlation_matrix(const DataMatrix& data, const VarSet& scope, const LearnConfig& cfg);
CorrelationMatrix correlation_matrix(const DataMatrix& data, std::span<const std::size_t> rows, const VarSet& scope,
                                     const LearnConfig& cfg);

/// Variables in connected components (edges with score >= tau_high) that
/// contain at least one edge. Returned as model variable indices.
VarSet group_correlated(const CorrelationMatrix& corr, double tau_high);

/// Connected components under edges with score > tau_low, ordered by their
/// smallest variable. A single component means the scope does not decompose.
std::vector<VarSet> partition_independent(const CorrelationMatrix& corr, double tau_low);

struct RowClustering {
    std::vector<std::vector<std::size_t>> clusters;  // row indices, nonempty
    std::vector<double> weights;                     // |cluster| / |rows|
};

/// k-means with k-means++ seeding over all columns scaled to unit domain width.
RowClustering cluster_rows(const DataMatrix& data, int k, std::uint64_t seed);
RowClustering cluster_rows(const DataMatrix& data, std::span<const std::size_t> rows, const VarSet& scope, int k,
                           std::uint64_t seed);

struct ConditionalSplit {
    int variable = 0;
    double threshold = 0.0;  // left holds values <= threshold
    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    Event left_region;
    Event right_region;
};

/// Binary axis-aligned cut of `region` on one condition variable. Returns
/// nullopt when no cut leaves both halves nonempty.
std::optional<ConditionalSplit> split_conditional(const DataMatrix& data, std::span<const std::size_t> rows,
                                                  const VarSet& scope, const VarSet& condition, const Event& region,
                                                  const LearnConfig& cfg, std::uint64_t seed);

/// Smoothed histogram for discrete variables, Gaussian mixture (EM) for continuous ones.
LeafDistribution fit_uni_leaf(std::span<const double> values, const VariableMeta& meta, const LearnConfig& cfg,
                              std::uint64_t seed = 0);

/// Joint histogram (dense up to 10^6 cells, otherwise sparse with an escape
/// mass) for discrete scopes, multivariate Gaussian mixture otherwise.
LeafDistribution fit_multi_leaf(const DataMatrix& data, std::span<const std::size_t> rows, const VarSet& scope,
                                const LearnConfig& cfg, std::uint64_t seed = 0);
LeafDistribution fit_multi_leaf(const DataMatrix& data, const VarSet& scope, const LearnConfig& cfg,
                                std::uint64_t seed = 0);

/// Learns a model of all columns of `data`. Throws DataError on an empty
/// table or an invalid config. The resolved config is stored in the model.
FspnModel learn_fspn(const DataMatrix& data, const LearnConfig& cfg);

/// Seed for a node, mixed from the run seed and the node's path.
std::uint64_t derive_seed(std::uint64_t base, std::string_view path);

}  // namespace fspn
