#include "fspn/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

namespace fspn {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kDenseLatticeLimit = 1e6;

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double median(std::vector<double> xs)
{
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

std::vector<std::size_t> all_rows(const DataMatrix& data)
{
    std::vector<std::size_t> rows(data.n_rows());
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

// ---- RDC ----

// Empirical CDF with average ranks for ties, in (0, 1].
Eigen::VectorXd copula(const std::vector<double>& x)
{
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    Eigen::VectorXd u(static_cast<Eigen::Index>(n));
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]])
            ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t)
            u(static_cast<Eigen::Index>(order[t])) = rank / static_cast<double>(n);
        i = j + 1;
    }
    return u;
}

// Orthonormal basis of the centered random sine features of one column.
Eigen::MatrixXd feature_basis(const Eigen::VectorXd& u, bool constant, const Eigen::MatrixXd& w, double scale)
{
    const Eigen::Index n = u.size();
    if (constant || n < 2)
        return Eigen::MatrixXd(n, 0);
    const Eigen::Index k = w.cols();
    Eigen::MatrixXd f(n, k);
    const double s = scale / 2.0;  // two inputs: the copula value and a bias
    for (Eigen::Index j = 0; j < k; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            f(i, j) = std::sin(s * (u(i) * w(0, j) + w(1, j)));
    f.rowwise() -= f.colwise().mean();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(f);
    qr.setThreshold(1e-9);
    const Eigen::Index r = qr.rank();
    if (r == 0)
        return Eigen::MatrixXd(n, 0);
    return qr.householderQ() * Eigen::MatrixXd::Identity(n, r);
}

double top_canonical_correlation(const Eigen::MatrixXd& qa, const Eigen::MatrixXd& qb)
{
    if (qa.cols() == 0 || qb.cols() == 0)
        return 0.0;
    const Eigen::MatrixXd m = qa.transpose() * qb;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return std::clamp(svd.singularValues()(0), 0.0, 1.0);
}

Eigen::MatrixXd random_weights(std::uint64_t seed, int draw, int k)
{
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(draw) + 1)));
    std::normal_distribution<double> n01;
    Eigen::MatrixXd w(2, k);
    for (int j = 0; j < k; ++j) {
        w(0, j) = n01(rng);
        w(1, j) = n01(rng);
    }
    return w;
}

std::vector<std::size_t> subsample(std::span<const std::size_t> rows, int limit, std::uint64_t seed)
{
    std::vector<std::size_t> out(rows.begin(), rows.end());
    if (out.size() <= static_cast<std::size_t>(limit))
        return out;
    std::vector<std::size_t> picked;
    picked.reserve(static_cast<std::size_t>(limit));
    std::mt19937_64 rng(splitmix64(seed ^ 0x5ab5a3b1eULL));
    std::sample(out.begin(), out.end(), std::back_inserter(picked), limit, rng);
    return picked;
}

// Median-over-draws RDC between every variable of `a` and every variable of `b`.
Eigen::MatrixXd score_block(const DataMatrix& data, std::span<const std::size_t> rows, const VarSet& a,
                            const VarSet& b, const LearnConfig& cfg)
{
    const auto used = subsample(rows, cfg.rdc_max_rows, cfg.seed);
    VarSet vars = a;
    vars.insert(vars.end(), b.begin(), b.end());
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());

    std::map<int, std::pair<Eigen::VectorXd, bool>> copulas;
    for (int v : vars) {
        std::vector<double> col(used.size());
        for (std::size_t i = 0; i < used.size(); ++i)
            col[i] = data.at(used[i], static_cast<std::size_t>(v));
        const bool constant = std::all_of(col.begin(), col.end(), [&](double x) { return x == col[0]; });
        copulas[v] = {copula(col), constant};
    }

    std::vector<std::vector<double>> draws(a.size() * b.size());
    for (int t = 0; t < cfg.rdc_seeds; ++t) {
        const Eigen::MatrixXd w = random_weights(cfg.seed, t, cfg.rdc_features);
        std::map<int, Eigen::MatrixXd> basis;
        for (int v : vars)
            basis[v] = feature_basis(copulas[v].first, copulas[v].second, w, cfg.rdc_scale);
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < b.size(); ++j) {
                const double s = a[i] == b[j] ? (copulas[a[i]].second ? 0.0 : 1.0)
                                              : top_canonical_correlation(basis[a[i]], basis[b[j]]);
                draws[i * b.size() + j].push_back(s);
            }
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = median(draws[i * b.size() + j]);
    return out;
}

// ---- components ----

std::vector<VarSet> components(const CorrelationMatrix& corr, auto connected)
{
    const std::size_t m = corr.size();
    std::vector<std::size_t> parent(m);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x)
            x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            if (connected(std::max(corr(i, j), corr(j, i)))) {
                const auto a = find(i), b = find(j);
                parent[std::max(a, b)] = std::min(a, b);
            }
    std::map<int, VarSet> groups;  // keyed by smallest variable index
    std::map<std::size_t, int> key;
    for (std::size_t i = 0; i < m; ++i) {
        const auto root = find(i);
        if (!key.contains(root))
            key[root] = corr.scope[i];
        groups[key[root]].push_back(corr.scope[i]);
    }
    std::vector<VarSet> out;
    for (auto& [k, g] : groups) {
        std::sort(g.begin(), g.end());
        out.push_back(std::move(g));
    }
    std::sort(out.begin(), out.end(), [](const VarSet& x, const VarSet& y) { return x.front() < y.front(); });
    return out;
}

// ---- k-means ----

Eigen::MatrixXd scaled_points(const DataMatrix& data, std::span<const std::size_t> rows, const VarSet& scope)
{
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(scope.size()));
    for (std::size_t j = 0; j < scope.size(); ++j) {
        const auto& meta = data.variables[static_cast<std::size_t>(scope[j])];
        const double lo = meta.domain_lo();
        const double width = meta.domain_hi() - lo;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double v = data.at(rows[i], static_cast<std::size_t>(scope[j]));
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = width > 0 ? (v - lo) / width : 0.0;
        }
    }
    return x;
}

struct KMeansResult {
    std::vector<int> assignment;  // cluster per point, compacted to nonempty clusters
    Eigen::MatrixXd centers;      // one row per nonempty cluster
    int k = 0;
};

KMeansResult kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed)
{
    const Eigen::Index n = x.rows();
    std::mt19937_64 rng(splitmix64(seed));
    std::vector<Eigen::Index> chosen;
    chosen.push_back(std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng));
    Eigen::VectorXd d2 = (x.rowwise() - x.row(chosen[0])).rowwise().squaredNorm();
    while (static_cast<int>(chosen.size()) < k) {
        const double total = d2.sum();
        if (!(total > 0.0))
            break;  // every point coincides with a center
        double r = std::uniform_real_distribution<double>(0.0, total)(rng);
        Eigen::Index pick = n - 1;
        for (Eigen::Index i = 0; i < n; ++i) {
            r -= d2(i);
            if (r < 0.0 && d2(i) > 0.0) {
                pick = i;
                break;
            }
        }
        if (d2(pick) == 0.0)
            for (Eigen::Index i = n; i-- > 0;)
                if (d2(i) > 0.0) {
                    pick = i;
                    break;
                }
        chosen.push_back(pick);
        d2 = d2.cwiseMin((x.rowwise() - x.row(pick)).rowwise().squaredNorm());
    }
    const int kk = static_cast<int>(chosen.size());
    Eigen::MatrixXd centers(kk, x.cols());
    for (int c = 0; c < kk; ++c)
        centers.row(c) = x.row(chosen[static_cast<std::size_t>(c)]);

    std::vector<int> assign(static_cast<std::size_t>(n), 0);
    double prev = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 100; ++iter) {
        double inertia = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < kk; ++c) {
                const double d = (x.row(i) - centers.row(c)).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            assign[static_cast<std::size_t>(i)] = best;
            inertia += best_d;
        }
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(kk, x.cols());
        std::vector<int> counts(static_cast<std::size_t>(kk), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(assign[static_cast<std::size_t>(i)]) += x.row(i);
            ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
        }
        for (int c = 0; c < kk; ++c)
            if (counts[static_cast<std::size_t>(c)] > 0)
                centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
        if (inertia == 0.0 || std::abs(prev - inertia) <= 1e-6 * prev)
            break;
        prev = inertia;
    }

    // Drop empty clusters.
    std::vector<int> remap(static_cast<std::size_t>(kk), -1);
    KMeansResult out;
    for (int a : assign)
        remap[static_cast<std::size_t>(a)] = 0;
    std::vector<int> kept;
    for (int c = 0; c < kk; ++c)
        if (remap[static_cast<std::size_t>(c)] == 0) {
            remap[static_cast<std::size_t>(c)] = static_cast<int>(kept.size());
            kept.push_back(c);
        }
    out.k = static_cast<int>(kept.size());
    out.centers.resize(out.k, x.cols());
    for (int c = 0; c < out.k; ++c)
        out.centers.row(c) = centers.row(kept[static_cast<std::size_t>(c)]);
    out.assignment.resize(assign.size());
    for (std::size_t i = 0; i < assign.size(); ++i)
        out.assignment[i] = remap[static_cast<std::size_t>(assign[i])];
    return out;
}

// ---- splitting ----

struct Cut {
    std::vector<std::size_t> left, right;
};

Cut cut_rows(const DataMatrix& data, std::span<const std::size_t> rows, int var, double threshold)
{
    Cut c;
    for (auto r : rows)
        (data.at(r, static_cast<std::size_t>(var)) <= threshold ? c.left : c.right).push_back(r);
    return c;
}

ConditionalSplit make_split(const DataMatrix& data, const Event& region, int var, double threshold, Cut cut)
{
    const auto& meta = data.variables[static_cast<std::size_t>(var)];
    ConditionalSplit s;
    s.variable = var;
    s.threshold = threshold;
    s.left_region = region;
    s.right_region = region;
    const Interval& iv = region[static_cast<std::size_t>(var)];
    auto left = normalize(Interval{iv.lo, threshold, iv.lo_open, false}, meta);
    auto right = normalize(Interval{threshold, iv.hi, true, iv.hi_open}, meta);
    if (!left || !right)
        throw std::logic_error("split threshold outside the region");
    s.left_region[static_cast<std::size_t>(var)] = *left;
    s.right_region[static_cast<std::size_t>(var)] = *right;
    s.left_rows = std::move(cut.left);
    s.right_rows = std::move(cut.right);
    return s;
}

std::vector<double> distinct_values(const DataMatrix& data, std::span<const std::size_t> rows, int var)
{
    std::vector<double> v;
    v.reserve(rows.size());
    for (auto r : rows)
        v.push_back(data.at(r, static_cast<std::size_t>(var)));
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

double mean_cross(const DataMatrix& data, std::span<const std::size_t> rows, const VarSet& scope,
                  const VarSet& condition, const LearnConfig& cfg)
{
    if (rows.size() < 2)
        return 0.0;
    return score_block(data, rows, condition, scope, cfg).mean();
}

std::optional<ConditionalSplit> split_greedy(const DataMatrix& data, std::span<const std::size_t> rows,
                                             const VarSet& scope, const VarSet& condition, const Event& region,
                                             const LearnConfig& cfg, std::uint64_t seed)
{
    const Eigen::MatrixXd cross = score_block(data, rows, condition, scope, cfg);
    std::vector<std::size_t> order(condition.size());
    std::iota(order.begin(), order.end(), 0);
    // Highest total cross-correlation first; ties keep the lower variable index.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return cross.row(static_cast<Eigen::Index>(a)).sum() > cross.row(static_cast<Eigen::Index>(b)).sum();
    });

    std::mt19937_64 rng(splitmix64(seed ^ 0x9e11d5ULL));
    for (auto ci : order) {
        const int var = condition[ci];
        auto values = distinct_values(data, rows, var);
        if (values.size() < 2)
            continue;
        values.pop_back();  // cutting at the maximum leaves the right half empty
        std::vector<double> candidates;
        if (values.size() <= static_cast<std::size_t>(cfg.greedy_candidates)) {
            candidates = values;
        } else {
            std::sample(values.begin(), values.end(), std::back_inserter(candidates), cfg.greedy_candidates, rng);
            std::sort(candidates.begin(), candidates.end());
        }
        const double n = static_cast<double>(rows.size());
        double best = std::numeric_limits<double>::infinity();
        double best_v = candidates.front();
        for (double v : candidates) {
            const Cut c = cut_rows(data, rows, var, v);
            const double score = static_cast<double>(c.left.size()) / n * mean_cross(data, c.left, scope, condition, cfg) +
                                 static_cast<double>(c.right.size()) / n * mean_cross(data, c.right, scope, condition, cfg);
            if (score < best) {
                best = score;
                best_v = v;
            }
        }
        return make_split(data, region, var, best_v, cut_rows(data, rows, var, best_v));
    }
    return std::nullopt;
}

std::optional<ConditionalSplit> split_grid_kmeans(const DataMatrix& data, std::span<const std::size_t> rows,
                                                  const VarSet& scope, const VarSet& condition, const Event& region,
                                                  std::uint64_t seed)
{
    VarSet vars = condition;
    vars.insert(vars.end(), scope.begin(), scope.end());
    std::sort(vars.begin(), vars.end());
    const Eigen::MatrixXd x = scaled_points(data, rows, vars);
    const KMeansResult km = kmeans(x, 2, seed);
    if (km.k < 2)
        return std::nullopt;

    const Eigen::RowVectorXd c1 = km.centers.row(0), c2 = km.centers.row(1);
    double r1 = 0.0, r2 = 0.0;
    std::size_t n1 = 0, n2 = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (km.assignment[static_cast<std::size_t>(i)] == 0) {
            r1 += (x.row(i) - c1).squaredNorm();
            ++n1;
        } else {
            r2 += (x.row(i) - c2).squaredNorm();
            ++n2;
        }
    }
    r1 = std::sqrt(r1 / static_cast<double>(n1));
    r2 = std::sqrt(r2 / static_cast<double>(n2));
    const Eigen::RowVectorXd dir = (c2 - c1).normalized();
    const Eigen::RowVectorXd b = 0.5 * ((c1 + r1 * dir) + (c2 - r2 * dir));

    std::optional<ConditionalSplit> best;
    std::size_t best_wrong = std::numeric_limits<std::size_t>::max();
    for (int var : condition) {
        const auto j = static_cast<Eigen::Index>(std::find(vars.begin(), vars.end(), var) - vars.begin());
        const auto& meta = data.variables[static_cast<std::size_t>(var)];
        double threshold = meta.domain_lo() + b(j) * (meta.domain_hi() - meta.domain_lo());
        if (meta.is_discrete())
            threshold = std::floor(threshold);
        Cut c = cut_rows(data, rows, var, threshold);
        if (c.left.empty() || c.right.empty())
            continue;
        const bool first_left = c1(j) <= c2(j);
        std::size_t wrong = 0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const bool left = data.at(rows[static_cast<std::size_t>(i)], static_cast<std::size_t>(var)) <= threshold;
            const bool in_first = km.assignment[static_cast<std::size_t>(i)] == 0;
            wrong += (left != (in_first == first_left));
        }
        if (wrong < best_wrong) {
            best_wrong = wrong;
            best = make_split(data, region, var, threshold, std::move(c));
        }
    }
    return best;
}

// ---- leaf fitting ----

GaussianMixture fit_gmm_1d(std::span<const double> xs, const VariableMeta& meta, int components)
{
    const std::size_t n = xs.size();
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t distinct =
        static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
    sorted.assign(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());

    const double width = meta.domain_hi() - meta.domain_lo();
    const double var_floor = 1e-6 * width * width;
    const int k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(components), distinct));

    double mean_all = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
    double var_all = 0.0;
    for (double x : xs)
        var_all += (x - mean_all) * (x - mean_all);
    var_all = std::max(var_all / static_cast<double>(n), var_floor);

    std::vector<double> w(static_cast<std::size_t>(k), 1.0 / k), mu(static_cast<std::size_t>(k)),
        var(static_cast<std::size_t>(k), var_all);
    for (int c = 0; c < k; ++c) {
        const double q = (c + 0.5) / k;
        mu[static_cast<std::size_t>(c)] = sorted[std::min(n - 1, static_cast<std::size_t>(q * static_cast<double>(n)))];
    }

    std::vector<double> resp(n * static_cast<std::size_t>(k));
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 200 && k > 1; ++iter) {
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const auto cc = static_cast<std::size_t>(c);
                const double d = xs[i] - mu[cc];
                const double lp = std::log(w[cc]) - 0.5 * (kLog2Pi + std::log(var[cc]) + d * d / var[cc]);
                resp[i * k + cc] = lp;
                mx = std::max(mx, lp);
            }
            double s = 0.0;
            for (int c = 0; c < k; ++c)
                s += (resp[i * k + static_cast<std::size_t>(c)] = std::exp(resp[i * k + static_cast<std::size_t>(c)] - mx));
            for (int c = 0; c < k; ++c)
                resp[i * k + static_cast<std::size_t>(c)] /= s;
            ll += mx + std::log(s);
        }
        for (int c = 0; c < k; ++c) {
            const auto cc = static_cast<std::size_t>(c);
            double nk = 0.0, sx = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                nk += resp[i * k + cc];
                sx += resp[i * k + cc] * xs[i];
            }
            if (nk <= 1e-12) {
                w[cc] = 0.0;
                continue;
            }
            mu[cc] = sx / nk;
            double sv = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                sv += resp[i * k + cc] * (xs[i] - mu[cc]) * (xs[i] - mu[cc]);
            var[cc] = std::max(sv / nk, var_floor);
            w[cc] = nk / static_cast<double>(n);
        }
        if (std::abs(ll - prev_ll) <= 1e-10 * std::abs(ll))
            break;
        prev_ll = ll;
        // drop collapsed components before the next E-step
        for (int c = 0; c < k; ++c)
            if (w[static_cast<std::size_t>(c)] <= 0.0)
                w[static_cast<std::size_t>(c)] = 1e-300;
    }

    GaussianMixture g;
    double total = 0.0;
    for (int c = 0; c < k; ++c)
        if (w[static_cast<std::size_t>(c)] > 1e-12)
            total += w[static_cast<std::size_t>(c)];
    for (int c = 0; c < k; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        if (w[cc] > 1e-12) {
            g.weights.push_back(w[cc] / total);
            g.means.push_back(mu[cc]);
            g.sds.push_back(std::sqrt(var[cc]));
        }
    }
    return g;
}

MvGaussianMixture fit_mv_gmm(const DataMatrix& data, std::span<const std::size_t> rows, const VarSet& scope,
                             int components, std::uint64_t seed)
{
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(scope.size());
    Eigen::MatrixXd x(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < p; ++j)
            x(i, j) = data.at(rows[static_cast<std::size_t>(i)], static_cast<std::size_t>(scope[static_cast<std::size_t>(j)]));
    const Eigen::MatrixXd reg = 1e-6 * Eigen::MatrixXd::Identity(p, p);

    const KMeansResult km = kmeans(scaled_points(data, rows, scope), std::min<int>(components, static_cast<int>(n)), seed);
    const int k = km.k;
    Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
        resp(i, km.assignment[static_cast<std::size_t>(i)]) = 1.0;

    std::vector<double> w(static_cast<std::size_t>(k));
    std::vector<Eigen::VectorXd> mu(static_cast<std::size_t>(k));
    std::vector<Eigen::MatrixXd> cov(static_cast<std::size_t>(k));
    auto m_step = [&]() {
        for (int c = 0; c < k; ++c) {
            const auto cc = static_cast<std::size_t>(c);
            const double nk = resp.col(c).sum();
            w[cc] = nk / static_cast<double>(n);
            if (nk <= 1e-12) {
                mu[cc] = x.colwise().mean().transpose();
                cov[cc] = Eigen::MatrixXd::Identity(p, p);
                continue;
            }
            mu[cc] = (x.transpose() * resp.col(c)) / nk;
            const Eigen::MatrixXd centered = x.rowwise() - mu[cc].transpose();
            cov[cc] = (centered.transpose() * resp.col(c).asDiagonal() * centered) / nk + reg;
        }
    };
    m_step();

    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 100 && k > 1; ++iter) {
        Eigen::MatrixXd logp(n, k);
        for (int c = 0; c < k; ++c) {
            const auto cc = static_cast<std::size_t>(c);
            Eigen::LLT<Eigen::MatrixXd> llt(cov[cc]);
            const Eigen::MatrixXd l = llt.matrixL();
            const double logdet = 2.0 * l.diagonal().array().log().sum();
            const Eigen::MatrixXd centered = (x.rowwise() - mu[cc].transpose()).transpose();
            const Eigen::MatrixXd z = l.triangularView<Eigen::Lower>().solve(centered);
            const Eigen::VectorXd maha = z.colwise().squaredNorm().transpose();
            const double lw = w[cc] > 0.0 ? std::log(w[cc]) : -std::numeric_limits<double>::infinity();
            logp.col(c) = (lw - 0.5 * (static_cast<double>(p) * kLog2Pi + logdet)) - 0.5 * maha.array();
        }
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double mx = logp.row(i).maxCoeff();
            const Eigen::RowVectorXd e = (logp.row(i).array() - mx).exp();
            const double s = e.sum();
            resp.row(i) = e / s;
            ll += mx + std::log(s);
        }
        m_step();
        if (std::abs(ll - prev_ll) <= 1e-10 * std::abs(ll))
            break;
        prev_ll = ll;
    }

    std::vector<double> weights;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
    double total = 0.0;
    for (int c = 0; c < k; ++c)
        if (w[static_cast<std::size_t>(c)] > 1e-12)
            total += w[static_cast<std::size_t>(c)];
    for (int c = 0; c < k; ++c) {
        const auto cc = static_cast<std::size_t>(c);
        if (w[cc] > 1e-12) {
            weights.push_back(w[cc] / total);
            means.push_back(mu[cc]);
            covs.push_back(cov[cc]);
        }
    }
    return MvGaussianMixture(std::move(weights), std::move(means), std::move(covs));
}

LeafDistribution fit_joint_histogram(const DataMatrix& data, std::span<const std::size_t> rows, const VarSet& scope,
                                     double alpha)
{
    const std::size_t p = scope.size();
    std::vector<int> dims(p);
    double lattice = 1.0;
    for (std::size_t a = 0; a < p; ++a) {
        dims[a] = data.variables[static_cast<std::size_t>(scope[a])].cardinality;
        lattice *= dims[a];
    }
    const double n = static_cast<double>(rows.size());

    if (lattice <= kDenseLatticeLimit) {
        std::vector<double> counts(static_cast<std::size_t>(lattice), 0.0);
        for (auto r : rows) {
            std::size_t flat = 0;
            for (std::size_t a = 0; a < p; ++a)
                flat = flat * static_cast<std::size_t>(dims[a]) +
                       static_cast<std::size_t>(data.at(r, static_cast<std::size_t>(scope[a])));
            counts[flat] += 1.0;
        }
        const double denom = n + alpha * lattice;
        for (auto& c : counts)
            c = (c + alpha) / denom;
        return DenseJointHistogram(std::move(dims), std::move(counts));
    }

    std::map<std::vector<int>, double> tuples;
    std::vector<int> key(p);
    for (auto r : rows) {
        for (std::size_t a = 0; a < p; ++a)
            key[a] = static_cast<int>(data.at(r, static_cast<std::size_t>(scope[a])));
        tuples[key] += 1.0;
    }
    const double k = static_cast<double>(tuples.size());
    const double denom = n + alpha * (k + 1.0);  // one extra pseudo-entry for the unseen cells
    SparseJointHistogram s;
    s.dims = std::move(dims);
    for (const auto& [t, c] : tuples) {
        s.coords.insert(s.coords.end(), t.begin(), t.end());
        s.masses.push_back((c + alpha) / denom);
    }
    s.default_mass = alpha > 0.0 ? alpha / denom / (lattice - k) : 0.0;
    return s;
}

// ---- recursive learner ----

class Learner {
public:
    Learner(const DataMatrix& data, const LearnConfig& cfg) : data_(data), cfg_(cfg) {}

    Node learn(std::span<const std::size_t> rows, const VarSet& scope, int depth, const std::string& path)
    {
        if (scope.size() == 1)
            return uni_leaf(rows, scope[0], path);
        if (static_cast<int>(rows.size()) < cfg_.min_instances || depth >= cfg_.max_depth)
            return independent_leaves(rows, scope, path);

        const LearnConfig node_cfg = config_at(path);
        const CorrelationMatrix corr = correlation_matrix(data_, rows, scope, node_cfg);

        if (!std::isinf(cfg_.tau_high)) {
            VarSet h = group_correlated(corr, cfg_.tau_high);
            if (!h.empty()) {
                VarSet w;
                if (h.size() == scope.size()) {
                    // everything is correlated: condition on the least connected variable
                    std::size_t pick = 0;
                    double least = std::numeric_limits<double>::infinity();
                    for (std::size_t i = 0; i < corr.size(); ++i) {
                        const double total = corr.scores.row(static_cast<Eigen::Index>(i)).sum();
                        if (total < least) {
                            least = total;
                            pick = i;
                        }
                    }
                    w = {scope[pick]};
                    h.erase(std::find(h.begin(), h.end(), scope[pick]));
                } else {
                    std::set_difference(scope.begin(), scope.end(), h.begin(), h.end(), std::back_inserter(w));
                }
                FactorizeNode f;
                f.h_scope = h;
                f.w_scope = w;
                f.children.push_back(learn(rows, w, depth + 1, path + "/w"));
                f.children.push_back(learn_conditional(rows, h, w, full_event(data_.variables), depth + 1, path + "/h"));
                return Node{std::move(f)};
            }
        }

        const auto parts = partition_independent(corr, cfg_.tau_low);
        if (parts.size() > 1) {
            ProductNode prod;
            for (std::size_t i = 0; i < parts.size(); ++i) {
                prod.children.push_back(learn(rows, parts[i], depth + 1, path + "/p" + std::to_string(i)));
                prod.child_scopes.push_back(parts[i]);
            }
            return Node{std::move(prod)};
        }

        const RowClustering clusters = cluster_rows(data_, rows, scope, cfg_.sum_k, node_cfg.seed);
        if (clusters.clusters.size() < 2)
            return independent_leaves(rows, scope, path);
        SumNode sum;
        for (std::size_t i = 0; i < clusters.clusters.size(); ++i) {
            sum.children.push_back(learn(clusters.clusters[i], scope, depth + 1, path + "/s" + std::to_string(i)));
            sum.weights.push_back(clusters.weights[i]);
        }
        return Node{std::move(sum)};
    }

private:
    Node learn_conditional(std::span<const std::size_t> rows, const VarSet& scope, const VarSet& condition,
                           const Event& region, int depth, const std::string& path)
    {
        auto leaf = [&]() {
            return Node{MultiLeafNode{scope, region, fit_multi_leaf(data_, rows, scope, cfg_, derive_seed(cfg_.seed, path))}};
        };
        if (static_cast<int>(rows.size()) < 2 * cfg_.min_instances || depth >= cfg_.max_depth)
            return leaf();
        const LearnConfig node_cfg = config_at(path);
        if (score_block(data_, rows, scope, condition, node_cfg).maxCoeff() < cfg_.tau_low)
            return leaf();
        auto split = split_conditional(data_, rows, scope, condition, region, node_cfg, node_cfg.seed);
        if (!split)
            return leaf();
        SplitNode s;
        s.regions = {split->left_region, split->right_region};
        s.children.push_back(
            learn_conditional(split->left_rows, scope, condition, split->left_region, depth + 1, path + "/l"));
        s.children.push_back(
            learn_conditional(split->right_rows, scope, condition, split->right_region, depth + 1, path + "/r"));
        return Node{std::move(s)};
    }

    Node uni_leaf(std::span<const std::size_t> rows, int var, const std::string& path)
    {
        std::vector<double> values(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            values[i] = data_.at(rows[i], static_cast<std::size_t>(var));
        return Node{UniLeafNode{var, fit_uni_leaf(values, data_.variables[static_cast<std::size_t>(var)], cfg_,
                                                  derive_seed(cfg_.seed, path))}};
    }

    Node independent_leaves(std::span<const std::size_t> rows, const VarSet& scope, const std::string& path)
    {
        if (scope.size() == 1)
            return uni_leaf(rows, scope[0], path);
        ProductNode prod;
        for (int v : scope) {
            prod.children.push_back(uni_leaf(rows, v, path + "/u" + std::to_string(v)));
            prod.child_scopes.push_back({v});
        }
        return Node{std::move(prod)};
    }

    LearnConfig config_at(const std::string& path) const
    {
        LearnConfig c = cfg_;
        c.seed = derive_seed(cfg_.seed, path);
        return c;
    }

    const DataMatrix& data_;
    LearnConfig cfg_;
};

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::string_view path)
{
    return splitmix64(base ^ fnv1a(std::span<const char>(path.data(), path.size())));
}

double rdc(std::span<const double> a, std::span<const double> b, const LearnConfig& cfg)
{
    if (a.size() != b.size())
        throw std::invalid_argument("rdc needs series of equal length");
    if (a.size() < 2)
        throw std::invalid_argument("rdc needs at least two values");
    DataMatrix m;
    m.variables = {VariableMeta::continuous("a", 0, 1), VariableMeta::continuous("b", 0, 1)};
    m.values.resize(2 * a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        m.values[2 * i] = a[i];
        m.values[2 * i + 1] = b[i];
    }
    const auto rows = all_rows(m);
    return score_block(m, rows, {0}, {1}, cfg)(0, 0);
}

CorrelationMatrix correlation_matrix(const DataMatrix& data, const VarSet& scope, const LearnConfig& cfg)
{
    const auto rows = all_rows(data);
    return correlation_matrix(data, rows, scope, cfg);
}

CorrelationMatrix correlation_matrix(const DataMatrix& data, std::span<const std::size_t> rows, const VarSet& scope,
                                     const LearnConfig& cfg)
{
    if (scope.size() < 2)
        throw std::invalid_argument("correlation matrix needs at least two variables");
    CorrelationMatrix c;
    c.scope = scope;
    c.scores = score_block(data, rows, scope, scope, cfg);
    // symmetrize against round-off and pin the diagonal
    c.scores = 0.5 * (c.scores + c.scores.transpose()).eval();
    c.scores.diagonal().setOnes();
    return c;
}

VarSet group_correlated(const CorrelationMatrix& corr, double tau_high)
{
    VarSet h;
    for (const auto& comp : components(corr, [&](double s) { return s >= tau_high; }))
        if (comp.size() >= 2)
            h.insert(h.end(), comp.begin(), comp.end());
    std::sort(h.begin(), h.end());
    return h;
}

std::vector<VarSet> partition_independent(const CorrelationMatrix& corr, double tau_low)
{
    return components(corr, [&](double s) { return s > tau_low; });
}

RowClustering cluster_rows(const DataMatrix& data, int k, std::uint64_t seed)
{
    VarSet scope(data.n_cols());
    std::iota(scope.begin(), scope.end(), 0);
    const auto rows = all_rows(data);
    return cluster_rows(data, rows, scope, k, seed);
}

RowClustering cluster_rows(const DataMatrix& data, std::span<const std::size_t> rows, const VarSet& scope, int k,
                           std::uint64_t seed)
{
    if (rows.empty() || k < 1)
        throw std::invalid_argument("cluster_rows needs rows and k >= 1");
    const KMeansResult km = kmeans(scaled_points(data, rows, scope), k, seed);
    RowClustering out;
    out.clusters.resize(static_cast<std::size_t>(km.k));
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.clusters[static_cast<std::size_t>(km.assignment[i])].push_back(rows[i]);
    for (const auto& c : out.clusters)
        out.weights.push_back(static_cast<double>(c.size()) / static_cast<double>(rows.size()));
    return out;
}

std::optional<ConditionalSplit> split_conditional(const DataMatrix& data, std::span<const std::size_t> rows,
                                                  const VarSet& scope, const VarSet& condition, const Event& region,
                                                  const LearnConfig& cfg, std::uint64_t seed)
{
    if (condition.empty() || rows.size() < 2)
        return std::nullopt;
    if (cfg.split_method == SplitMethod::grid_kmeans)
        return split_grid_kmeans(data, rows, scope, condition, region, seed);
    return split_greedy(data, rows, scope, condition, region, cfg, seed);
}

LeafDistribution fit_uni_leaf(std::span<const double> values, const VariableMeta& meta, const LearnConfig& cfg,
                              std::uint64_t)
{
    if (values.empty())
        throw std::invalid_argument("cannot fit a leaf to no values");
    if (meta.is_discrete()) {
        std::vector<double> counts(static_cast<std::size_t>(meta.cardinality), 0.0);
        for (double v : values)
            counts[static_cast<std::size_t>(v)] += 1.0;
        const double denom = static_cast<double>(values.size()) + cfg.smoothing_alpha * meta.cardinality;
        for (auto& c : counts)
            c = (c + cfg.smoothing_alpha) / denom;
        return Histogram{std::move(counts)};
    }
    return fit_gmm_1d(values, meta, cfg.gmm_components);
}

LeafDistribution fit_multi_leaf(const DataMatrix& data, std::span<const std::size_t> rows, const VarSet& scope,
                                const LearnConfig& cfg, std::uint64_t seed)
{
    if (rows.empty() || scope.empty())
        throw std::invalid_argument("cannot fit a multi-leaf to no rows or no variables");
    const bool discrete = std::all_of(scope.begin(), scope.end(),
                                      [&](int v) { return data.variables[static_cast<std::size_t>(v)].is_discrete(); });
    if (discrete)
        return fit_joint_histogram(data, rows, scope, cfg.smoothing_alpha);
    return fit_mv_gmm(data, rows, scope, cfg.gmm_components, seed);
}

LeafDistribution fit_multi_leaf(const DataMatrix& data, const VarSet& scope, const LearnConfig& cfg, std::uint64_t seed)
{
    const auto rows = all_rows(data);
    return fit_multi_leaf(data, rows, scope, cfg, seed);
}

FspnModel learn_fspn(const DataMatrix& data, const LearnConfig& cfg)
{
    if (auto msg = cfg.check(); !msg.empty())
        throw DataError("invalid config: " + msg);
    if (data.n_rows() == 0 || data.n_cols() == 0)
        throw DataError("cannot learn from an empty table");
    for (const auto& v : data.variables)
        if (auto msg = v.check(); !msg.empty())
            throw DataError(msg);

    VarSet scope(data.n_cols());
    std::iota(scope.begin(), scope.end(), 0);
    const auto rows = all_rows(data);

    FspnModel model;
    model.variables = data.variables;
    model.root = Learner(data, cfg).learn(rows, scope, 0, "root");
    model.learn_config = cfg;
    return model;
}

}  // namespace fspn
