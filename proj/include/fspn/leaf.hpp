#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "fspn/domain.hpp"

namespace fspn {

/// Univariate distribution over the codes 0..d-1 of a discrete variable.
struct Histogram {
    std::vector<double> masses;

    double mass(const Interval& iv) const;
    bool operator==(const Histogram&) const = default;
};

/// Univariate Gaussian mixture over a continuous variable.
///
/// Range masses treat a bound that reaches the variable's domain edge as
/// unbounded, so the whole domain always carries mass 1.
struct GaussianMixture {
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> sds;

    double mass(const Interval& iv, const VariableMeta& meta) const;
    double log_density(double x) const;
    bool operator==(const GaussianMixture&) const = default;
};

/// Joint histogram stored densely over the full lattice of its scope.
/// Box queries use a cumulative table and cost O(2^p).
class DenseJointHistogram {
public:
    DenseJointHistogram() = default;
    DenseJointHistogram(std::vector<int> dims, std::vector<double> masses);

    const std::vector<int>& dims() const { return dims_; }
    const std::vector<double>& masses() const { return masses_; }

    std::size_t flat_index(std::span<const int> coords) const;
    double point_mass(std::span<const int> coords) const;
    double box_mass(std::span<const int> lo, std::span<const int> hi) const;

    bool operator==(const DenseJointHistogram& o) const { return dims_ == o.dims_ && masses_ == o.masses_; }

private:
    std::vector<int> dims_;
    std::vector<double> masses_;
    std::vector<double> cumulative_;
};

/// Joint histogram over observed tuples. Every lattice cell not listed holds
/// `default_mass`, which is how smoothing or an escape mass is represented
/// when the lattice is too large to store.
struct SparseJointHistogram {
    std::vector<int> dims;
    std::vector<int> coords;  // entry-major, dims.size() per entry, sorted lexicographically
    std::vector<double> masses;
    double default_mass = 0.0;

    std::size_t n_entries() const { return masses.size(); }
    double lattice_size() const;
    double point_mass(std::span<const int> point) const;
    double box_mass(std::span<const int> lo, std::span<const int> hi) const;
    bool operator==(const SparseJointHistogram&) const = default;
};

/// Full-covariance multivariate Gaussian mixture.
///
/// Box masses integrate each component with a deterministic quadrature over
/// the separation-of-variables transform of the box; discrete coordinates are
/// widened by half a unit on each side.
class MvGaussianMixture {
public:
    MvGaussianMixture() = default;
    MvGaussianMixture(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
                      std::vector<Eigen::MatrixXd> covariances);

    std::size_t dim() const { return means_.empty() ? 0 : static_cast<std::size_t>(means_.front().size()); }
    std::size_t n_components() const { return weights_.size(); }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<Eigen::VectorXd>& means() const { return means_; }
    const std::vector<Eigen::MatrixXd>& covariances() const { return covariances_; }

    /// Box bounds may be infinite.
    double box_mass(std::span<const double> lo, std::span<const double> hi) const;
    double log_density(std::span<const double> x) const;

    bool operator==(const MvGaussianMixture& o) const;

private:
    std::vector<double> weights_;
    std::vector<Eigen::VectorXd> means_;
    std::vector<Eigen::MatrixXd> covariances_;
    std::vector<Eigen::MatrixXd> cholesky_;
    std::vector<double> log_norm_;
};

using LeafDistribution =
    std::variant<Histogram, GaussianMixture, DenseJointHistogram, SparseJointHistogram, MvGaussianMixture>;

/// True for the distribution types allowed in a uni-leaf.
bool is_univariate(const LeafDistribution& dist);

/// Mass of the canonical `event` restricted to `scope` (model variable indices).
double leaf_mass(const LeafDistribution& dist, std::span<const int> scope, const Event& event,
                 const std::vector<VariableMeta>& vars);

/// Log of the point mass (discrete) or density (continuous) of the row's values on `scope`.
/// `row` holds one value per model variable.
double leaf_log_density(const LeafDistribution& dist, std::span<const int> scope, std::span<const double> row,
                        const std::vector<VariableMeta>& vars);

/// Number of free scalar parameters stored by the distribution.
std::size_t leaf_param_count(const LeafDistribution& dist);

/// Empty when `dist` is a well-formed normalized distribution over `scope`.
std::string leaf_check(const LeafDistribution& dist, std::span<const int> scope, const std::vector<VariableMeta>& vars);

std::string leaf_type_name(const LeafDistribution& dist);

}  // namespace fspn
