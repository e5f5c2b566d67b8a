#include "fspn/leaf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

namespace fspn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kNormTol = 1e-9;

double std_normal_cdf(double x)
{
    if (x == kInf)
        return 1.0;
    if (x == -kInf)
        return 0.0;
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double std_normal_quantile(double p)
{
    static const boost::math::normal_distribution<double> normal;
    constexpr double eps = 1e-300;
    p = std::clamp(p, eps, 1.0 - 1e-16);
    return boost::math::quantile(normal, p);
}

double log_sum_exp(std::span<const double> xs)
{
    double mx = -kInf;
    for (double x : xs)
        mx = std::max(mx, x);
    if (mx == -kInf)
        return -kInf;
    double s = 0.0;
    for (double x : xs)
        s += std::exp(x - mx);
    return mx + std::log(s);
}

bool is_integral_in(double v, int card)
{
    return std::floor(v) == v && v >= 0.0 && v < static_cast<double>(card);
}

std::string check_masses(std::span<const double> masses, double extra = 0.0)
{
    double total = extra;
    for (double m : masses) {
        if (!std::isfinite(m) || m < 0.0)
            return "mass is negative or not finite";
        total += m;
    }
    if (std::abs(total - 1.0) > kNormTol)
        return "masses sum to " + std::to_string(total) + " != 1";
    return {};
}

// Probability that a Gaussian with lower Cholesky factor `chol` and zero mean
// falls in [lo, hi], by separation of variables over the unit cube.
double mvn_box_probability(const Eigen::MatrixXd& chol, const std::vector<double>& lo, const std::vector<double>& hi)
{
    const int p = static_cast<int>(chol.rows());
    if (p == 1)
        return std::max(0.0, std_normal_cdf(hi[0] / chol(0, 0)) - std_normal_cdf(lo[0] / chol(0, 0)));

    const int q = p - 1;
    std::vector<double> y(p, 0.0);
    auto integrand = [&](const std::vector<double>& w) {
        double f = 1.0;
        for (int i = 0; i < p; ++i) {
            double s = 0.0;
            for (int j = 0; j < i; ++j)
                s += chol(i, j) * y[j];
            const double d = std_normal_cdf((lo[i] - s) / chol(i, i));
            const double e = std_normal_cdf((hi[i] - s) / chol(i, i));
            const double width = e - d;
            if (width <= 0.0)
                return 0.0;
            f *= width;
            if (i < q)
                y[i] = std_normal_quantile(d + w[i] * width);
        }
        return f;
    };

    std::vector<double> w(q);
    double sum = 0.0;
    std::size_t count = 0;
    if (q <= 3) {
        static constexpr int per_dim[] = {0, 4096, 128, 32};
        const int n = per_dim[q];
        std::vector<int> idx(q, 0);
        while (true) {
            for (int j = 0; j < q; ++j)
                w[j] = (idx[j] + 0.5) / n;
            sum += integrand(w);
            ++count;
            int j = 0;
            while (j < q && ++idx[j] == n) {
                idx[j] = 0;
                ++j;
            }
            if (j == q)
                break;
        }
    } else {
        // Kronecker lattice with square roots of primes as generators.
        static constexpr double primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                                            59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};
        constexpr std::size_t n = 1u << 15;
        std::vector<double> alpha(q);
        for (int j = 0; j < q; ++j) {
            const double r = std::sqrt(primes[j % 32]) * (1 + j / 32);
            alpha[j] = r - std::floor(r);
        }
        for (std::size_t k = 1; k <= n; ++k) {
            for (int j = 0; j < q; ++j) {
                const double v = k * alpha[j];
                w[j] = v - std::floor(v);
            }
            sum += integrand(w);
            ++count;
        }
    }
    return std::clamp(sum / static_cast<double>(count), 0.0, 1.0);
}

}  // namespace

double Histogram::mass(const Interval& iv) const
{
    const int lo = std::max(0, static_cast<int>(iv.lo));
    const int hi = std::min(static_cast<int>(masses.size()) - 1, static_cast<int>(iv.hi));
    double s = 0.0;
    for (int v = lo; v <= hi; ++v)
        s += masses[v];
    return s;
}

double GaussianMixture::mass(const Interval& iv, const VariableMeta& meta) const
{
    const double a = iv.lo <= meta.domain_lo() ? -kInf : iv.lo;
    const double b = iv.hi >= meta.domain_hi() ? kInf : iv.hi;
    if (!(a < b))
        return 0.0;
    double s = 0.0;
    for (std::size_t c = 0; c < weights.size(); ++c)
        s += weights[c] * (std_normal_cdf((b - means[c]) / sds[c]) - std_normal_cdf((a - means[c]) / sds[c]));
    return s;
}

double GaussianMixture::log_density(double x) const
{
    std::vector<double> terms(weights.size());
    for (std::size_t c = 0; c < weights.size(); ++c) {
        const double z = (x - means[c]) / sds[c];
        terms[c] = std::log(weights[c]) - 0.5 * kLog2Pi - std::log(sds[c]) - 0.5 * z * z;
    }
    return log_sum_exp(terms);
}

DenseJointHistogram::DenseJointHistogram(std::vector<int> dims, std::vector<double> masses)
    : dims_(std::move(dims)), masses_(std::move(masses))
{
    std::size_t total = 1;
    for (int d : dims_) {
        if (d < 1)
            throw ModelError("joint histogram dimension must be >= 1");
        total *= static_cast<std::size_t>(d);
    }
    if (total != masses_.size())
        throw ModelError("joint histogram has " + std::to_string(masses_.size()) + " masses, lattice has " +
                         std::to_string(total));
    cumulative_ = masses_;
    std::size_t stride = 1;
    for (int axis = static_cast<int>(dims_.size()) - 1; axis >= 0; --axis) {
        const std::size_t d = static_cast<std::size_t>(dims_[axis]);
        for (std::size_t i = 0; i < cumulative_.size(); ++i)
            if ((i / stride) % d != 0)
                cumulative_[i] += cumulative_[i - stride];
        stride *= d;
    }
}

std::size_t DenseJointHistogram::flat_index(std::span<const int> coords) const
{
    std::size_t idx = 0;
    for (std::size_t a = 0; a < dims_.size(); ++a)
        idx = idx * static_cast<std::size_t>(dims_[a]) + static_cast<std::size_t>(coords[a]);
    return idx;
}

double DenseJointHistogram::point_mass(std::span<const int> coords) const
{
    for (std::size_t a = 0; a < dims_.size(); ++a)
        if (coords[a] < 0 || coords[a] >= dims_[a])
            return 0.0;
    return masses_[flat_index(coords)];
}

double DenseJointHistogram::box_mass(std::span<const int> lo, std::span<const int> hi) const
{
    const std::size_t p = dims_.size();
    std::vector<int> corner(p);
    double total = 0.0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << p); ++mask) {
        bool skip = false;
        int parity = 0;
        for (std::size_t a = 0; a < p; ++a) {
            if (mask & (std::size_t{1} << a)) {
                corner[a] = lo[a] - 1;
                ++parity;
                if (corner[a] < 0) {
                    skip = true;
                    break;
                }
            } else {
                corner[a] = hi[a];
            }
        }
        if (skip)
            continue;
        const double c = cumulative_[flat_index(corner)];
        total += (parity % 2 == 0) ? c : -c;
    }
    return std::max(0.0, total);
}

double SparseJointHistogram::lattice_size() const
{
    double l = 1.0;
    for (int d : dims)
        l *= d;
    return l;
}

double SparseJointHistogram::point_mass(std::span<const int> point) const
{
    const std::size_t p = dims.size();
    for (std::size_t a = 0; a < p; ++a)
        if (point[a] < 0 || point[a] >= dims[a])
            return 0.0;
    std::size_t lo = 0;
    std::size_t hi = n_entries();
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        const int* c = coords.data() + mid * p;
        if (std::lexicographical_compare(c, c + p, point.begin(), point.end()))
            lo = mid + 1;
        else
            hi = mid;
    }
    if (lo < n_entries() && std::equal(point.begin(), point.end(), coords.data() + lo * p))
        return masses[lo];
    return default_mass;
}

double SparseJointHistogram::box_mass(std::span<const int> lo, std::span<const int> hi) const
{
    const std::size_t p = dims.size();
    double volume = 1.0;
    for (std::size_t a = 0; a < p; ++a)
        volume *= static_cast<double>(hi[a] - lo[a] + 1);
    double inside_mass = 0.0;
    double inside_count = 0.0;
    for (std::size_t e = 0; e < n_entries(); ++e) {
        const int* c = coords.data() + e * p;
        bool in = true;
        for (std::size_t a = 0; a < p && in; ++a)
            in = c[a] >= lo[a] && c[a] <= hi[a];
        if (in) {
            inside_mass += masses[e];
            inside_count += 1.0;
        }
    }
    return inside_mass + default_mass * (volume - inside_count);
}

MvGaussianMixture::MvGaussianMixture(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
                                     std::vector<Eigen::MatrixXd> covariances)
    : weights_(std::move(weights)), means_(std::move(means)), covariances_(std::move(covariances))
{
    if (weights_.size() != means_.size() || weights_.size() != covariances_.size() || weights_.empty())
        throw ModelError("gaussian mixture component arrays disagree in length");
    const auto p = means_.front().size();
    for (std::size_t c = 0; c < weights_.size(); ++c) {
        if (means_[c].size() != p || covariances_[c].rows() != p || covariances_[c].cols() != p)
            throw ModelError("gaussian mixture component has inconsistent dimension");
        Eigen::LLT<Eigen::MatrixXd> llt(covariances_[c]);
        if (llt.info() != Eigen::Success)
            throw ModelError("gaussian mixture covariance is not positive definite");
        Eigen::MatrixXd l = llt.matrixL();
        double log_det = 0.0;
        for (Eigen::Index i = 0; i < p; ++i)
            log_det += 2.0 * std::log(l(i, i));
        cholesky_.push_back(std::move(l));
        log_norm_.push_back(-0.5 * (static_cast<double>(p) * kLog2Pi + log_det));
    }
}

double MvGaussianMixture::box_mass(std::span<const double> lo, std::span<const double> hi) const
{
    const std::size_t p = dim();
    std::vector<double> a(p), b(p);
    double total = 0.0;
    for (std::size_t c = 0; c < weights_.size(); ++c) {
        bool empty = false;
        for (std::size_t i = 0; i < p; ++i) {
            a[i] = lo[i] - means_[c](static_cast<Eigen::Index>(i));
            b[i] = hi[i] - means_[c](static_cast<Eigen::Index>(i));
            if (!(a[i] < b[i]))
                empty = true;
        }
        if (empty)
            continue;
        total += weights_[c] * mvn_box_probability(cholesky_[c], a, b);
    }
    return total;
}

double MvGaussianMixture::log_density(std::span<const double> x) const
{
    const auto p = static_cast<Eigen::Index>(dim());
    Eigen::VectorXd v(p);
    std::vector<double> terms(weights_.size());
    for (std::size_t c = 0; c < weights_.size(); ++c) {
        for (Eigen::Index i = 0; i < p; ++i)
            v(i) = x[static_cast<std::size_t>(i)] - means_[c](i);
        const Eigen::VectorXd z = cholesky_[c].triangularView<Eigen::Lower>().solve(v);
        terms[c] = std::log(weights_[c]) + log_norm_[c] - 0.5 * z.squaredNorm();
    }
    return log_sum_exp(terms);
}

bool MvGaussianMixture::operator==(const MvGaussianMixture& o) const
{
    if (weights_ != o.weights_ || means_.size() != o.means_.size())
        return false;
    for (std::size_t c = 0; c < means_.size(); ++c)
        if (means_[c] != o.means_[c] || covariances_[c] != o.covariances_[c])
            return false;
    return true;
}

bool is_univariate(const LeafDistribution& dist)
{
    return std::holds_alternative<Histogram>(dist) || std::holds_alternative<GaussianMixture>(dist);
}

double leaf_mass(const LeafDistribution& dist, std::span<const int> scope, const Event& event,
                 const std::vector<VariableMeta>& vars)
{
    if (const auto* h = std::get_if<Histogram>(&dist))
        return h->mass(event[scope[0]]);
    if (const auto* g = std::get_if<GaussianMixture>(&dist))
        return g->mass(event[scope[0]], vars[scope[0]]);

    const std::size_t p = scope.size();
    if (const auto* mv = std::get_if<MvGaussianMixture>(&dist)) {
        std::vector<double> lo(p), hi(p);
        for (std::size_t a = 0; a < p; ++a) {
            const auto& meta = vars[scope[a]];
            const auto& iv = event[scope[a]];
            if (meta.is_discrete()) {
                lo[a] = iv.lo <= meta.domain_lo() ? -kInf : iv.lo - 0.5;
                hi[a] = iv.hi >= meta.domain_hi() ? kInf : iv.hi + 0.5;
            } else {
                lo[a] = iv.lo <= meta.domain_lo() ? -kInf : iv.lo;
                hi[a] = iv.hi >= meta.domain_hi() ? kInf : iv.hi;
            }
        }
        return mv->box_mass(lo, hi);
    }

    std::vector<int> lo(p), hi(p);
    for (std::size_t a = 0; a < p; ++a) {
        lo[a] = static_cast<int>(event[scope[a]].lo);
        hi[a] = static_cast<int>(event[scope[a]].hi);
    }
    if (const auto* d = std::get_if<DenseJointHistogram>(&dist))
        return d->box_mass(lo, hi);
    return std::get<SparseJointHistogram>(dist).box_mass(lo, hi);
}

double leaf_log_density(const LeafDistribution& dist, std::span<const int> scope, std::span<const double> row,
                        const std::vector<VariableMeta>& vars)
{
    if (const auto* h = std::get_if<Histogram>(&dist)) {
        const double v = row[scope[0]];
        if (!is_integral_in(v, static_cast<int>(h->masses.size())))
            return -kInf;
        return std::log(h->masses[static_cast<std::size_t>(v)]);
    }
    if (const auto* g = std::get_if<GaussianMixture>(&dist))
        return g->log_density(row[scope[0]]);

    const std::size_t p = scope.size();
    if (const auto* mv = std::get_if<MvGaussianMixture>(&dist)) {
        std::vector<double> x(p);
        for (std::size_t a = 0; a < p; ++a)
            x[a] = row[scope[a]];
        return mv->log_density(x);
    }
    std::vector<int> point(p);
    for (std::size_t a = 0; a < p; ++a) {
        const double v = row[scope[a]];
        if (!is_integral_in(v, vars[scope[a]].cardinality))
            return -kInf;
        point[a] = static_cast<int>(v);
    }
    const double m = std::holds_alternative<DenseJointHistogram>(dist)
                         ? std::get<DenseJointHistogram>(dist).point_mass(point)
                         : std::get<SparseJointHistogram>(dist).point_mass(point);
    return std::log(m);
}

std::size_t leaf_param_count(const LeafDistribution& dist)
{
    return std::visit(
        [](const auto& d) -> std::size_t {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Histogram>) {
                return d.masses.empty() ? 0 : d.masses.size() - 1;
            } else if constexpr (std::is_same_v<T, GaussianMixture>) {
                return 3 * d.weights.size() - 1;
            } else if constexpr (std::is_same_v<T, DenseJointHistogram>) {
                return d.masses().size() - 1;
            } else if constexpr (std::is_same_v<T, SparseJointHistogram>) {
                return d.n_entries() * (d.dims.size() + 1);
            } else {
                const std::size_t p = d.dim();
                return d.n_components() * (1 + p + p * (p + 1) / 2) - 1;
            }
        },
        dist);
}

std::string leaf_check(const LeafDistribution& dist, std::span<const int> scope, const std::vector<VariableMeta>& vars)
{
    for (int v : scope)
        if (v < 0 || static_cast<std::size_t>(v) >= vars.size())
            return "leaf scope references unknown variable " + std::to_string(v);

    if (const auto* h = std::get_if<Histogram>(&dist)) {
        if (scope.size() != 1 || !vars[scope[0]].is_discrete())
            return "histogram leaf needs a single discrete variable";
        if (static_cast<int>(h->masses.size()) != vars[scope[0]].cardinality)
            return "histogram size != cardinality of '" + vars[scope[0]].name + "'";
        return check_masses(h->masses);
    }
    if (const auto* g = std::get_if<GaussianMixture>(&dist)) {
        if (scope.size() != 1 || vars[scope[0]].is_discrete())
            return "gaussian mixture leaf needs a single continuous variable";
        if (g->weights.empty() || g->means.size() != g->weights.size() || g->sds.size() != g->weights.size())
            return "gaussian mixture component arrays disagree in length";
        for (std::size_t c = 0; c < g->weights.size(); ++c)
            if (!(g->sds[c] > 0.0) || !std::isfinite(g->sds[c]) || !std::isfinite(g->means[c]) || !(g->weights[c] > 0.0))
                return "gaussian mixture has a non-positive weight or scale";
        return check_masses(g->weights);
    }

    auto check_dims = [&](const std::vector<int>& dims) -> std::string {
        if (dims.size() != scope.size())
            return "joint histogram rank != scope size";
        for (std::size_t a = 0; a < scope.size(); ++a) {
            if (!vars[scope[a]].is_discrete())
                return "joint histogram over continuous variable '" + vars[scope[a]].name + "'";
            if (dims[a] != vars[scope[a]].cardinality)
                return "joint histogram dimension != cardinality of '" + vars[scope[a]].name + "'";
        }
        return {};
    };
    if (const auto* d = std::get_if<DenseJointHistogram>(&dist)) {
        if (auto msg = check_dims(d->dims()); !msg.empty())
            return msg;
        return check_masses(d->masses());
    }
    if (const auto* s = std::get_if<SparseJointHistogram>(&dist)) {
        if (auto msg = check_dims(s->dims); !msg.empty())
            return msg;
        const std::size_t p = s->dims.size();
        if (s->coords.size() != s->n_entries() * p)
            return "sparse histogram coordinate array has wrong length";
        for (std::size_t e = 0; e < s->n_entries(); ++e) {
            const int* c = s->coords.data() + e * p;
            for (std::size_t a = 0; a < p; ++a)
                if (c[a] < 0 || c[a] >= s->dims[a])
                    return "sparse histogram coordinate out of range";
            if (e > 0 && !std::lexicographical_compare(c - p, c, c, c + p))
                return "sparse histogram entries not strictly sorted";
        }
        if (!(s->default_mass >= 0.0))
            return "sparse histogram default mass is negative";
        return check_masses(s->masses, s->default_mass * (s->lattice_size() - static_cast<double>(s->n_entries())));
    }
    const auto& mv = std::get<MvGaussianMixture>(dist);
    if (mv.dim() != scope.size())
        return "multivariate gaussian mixture dimension != scope size";
    for (double w : mv.weights())
        if (!(w > 0.0))
            return "multivariate gaussian mixture has a non-positive weight";
    return check_masses(mv.weights());
}

std::string leaf_type_name(const LeafDistribution& dist)
{
    static const char* names[] = {"histogram", "gaussian_mixture", "dense_joint_histogram", "sparse_joint_histogram",
                                  "mv_gaussian_mixture"};
    return names[dist.index()];
}

}  // namespace fspn
