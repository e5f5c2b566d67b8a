#include "fspn/evalharness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fspn/inference.hpp"
#include "fspn/learning.hpp"

namespace fspn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> discrete_dims(const std::vector<VariableMeta>& vars)
{
    std::vector<int> dims;
    for (const auto& v : vars) {
        if (!v.is_discrete())
            throw DataError("variable '" + v.name + "' is continuous; a joint table needs discrete variables");
        dims.push_back(v.cardinality);
    }
    return dims;
}

double point_probability(const FspnModel& model, std::span<const int> x, std::vector<double>& row)
{
    for (std::size_t i = 0; i < x.size(); ++i)
        row[i] = x[i];
    return std::exp(point_log_density(model, row));
}

double kl_term(double p, double q)
{
    if (p <= 0.0)
        return 0.0;
    if (q <= 0.0)
        return kInf;
    return p * std::log(p / q);
}

}  // namespace

JointTable empirical_joint(const DataMatrix& data)
{
    if (data.n_rows() == 0)
        throw DataError("empirical joint of an empty table");
    JointTable t;
    t.dims = discrete_dims(data.variables);
    t.masses.assign(lattice_cells(t.dims), 0.0);
    std::vector<int> x(data.n_cols());
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
        for (std::size_t c = 0; c < data.n_cols(); ++c)
            x[c] = static_cast<int>(data.at(r, c));
        t.masses[t.flat_index(x)] += 1.0;
    }
    for (auto& m : t.masses)
        m /= static_cast<double>(data.n_rows());
    return t;
}

double brute_force_marginal(const JointTable& joint, const Event& event)
{
    if (event.size() != joint.dims.size())
        throw std::invalid_argument("event arity does not match the table");
    std::vector<std::vector<bool>> inside(joint.dims.size());
    for (std::size_t a = 0; a < joint.dims.size(); ++a)
        for (int v = 0; v < joint.dims[a]; ++v)
            inside[a].push_back(event[a].contains(v));
    std::vector<int> x(joint.dims.size());
    double total = 0.0;
    for (std::size_t flat = 0; flat < joint.masses.size(); ++flat) {
        joint.unflatten(flat, x);
        bool in = true;
        for (std::size_t a = 0; a < x.size() && in; ++a)
            in = inside[a][static_cast<std::size_t>(x[a])];
        if (in)
            total += joint.masses[flat];
    }
    return total;
}

JointTable materialize_joint(const FspnModel& model)
{
    JointTable t;
    t.dims = discrete_dims(model.variables);
    t.masses.resize(lattice_cells(t.dims));
    std::vector<int> x(t.dims.size());
    std::vector<double> row(t.dims.size());
    for (std::size_t flat = 0; flat < t.masses.size(); ++flat) {
        t.unflatten(flat, x);
        t.masses[flat] = point_probability(model, x, row);
    }
    return t;
}

JointTable synthetic_joint(const SyntheticTruth& truth)
{
    JointTable t;
    t.dims = truth.spec().domain_sizes;
    t.masses.resize(lattice_cells(t.dims));
    std::vector<int> x(t.dims.size());
    for (std::size_t flat = 0; flat < t.masses.size(); ++flat) {
        t.unflatten(flat, x);
        t.masses[flat] = truth.probability(x);
    }
    return t;
}

double kl_divergence(const JointTable& p, const JointTable& q)
{
    if (p.dims != q.dims)
        throw std::invalid_argument("tables have different lattices");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.masses.size(); ++i)
        kl += kl_term(p.masses[i], q.masses[i]);
    return std::max(kl, 0.0);
}

double kl_divergence(const JointTable& p, const FspnModel& q)
{
    if (discrete_dims(q.variables) != p.dims)
        throw std::invalid_argument("model variables do not match the table");
    std::vector<int> x(p.dims.size());
    std::vector<double> row(p.dims.size());
    double kl = 0.0;
    for (std::size_t flat = 0; flat < p.masses.size(); ++flat) {
        if (p.masses[flat] <= 0.0)
            continue;
        p.unflatten(flat, x);
        kl += kl_term(p.masses[flat], point_probability(q, x, row));
        if (std::isinf(kl))
            return kInf;
    }
    return std::max(kl, 0.0);
}

double mean_conditional_kl(const JointTable& p, const FspnModel& q, int n_queries, std::uint64_t seed)
{
    const std::size_t m = p.dims.size();
    if (m < 2)
        throw std::invalid_argument("conditional queries need at least two variables");
    if (discrete_dims(q.variables) != p.dims)
        throw std::invalid_argument("model variables do not match the table");
    std::mt19937_64 rng(seed);
    std::vector<double> cdf(p.masses.size());
    std::partial_sum(p.masses.begin(), p.masses.end(), cdf.begin());

    std::vector<int> x(m), y(m);
    std::vector<double> row(m);
    double total = 0.0;
    for (int t = 0; t < n_queries; ++t) {
        std::vector<bool> evidence(m, false);
        std::size_t count = 0;
        while (count == 0 || count == m) {
            count = 0;
            for (std::size_t a = 0; a < m; ++a)
                count += (evidence[a] = std::bernoulli_distribution(0.5)(rng));
        }
        const double u = std::uniform_real_distribution<double>(0.0, cdf.back())(rng);
        const auto pick = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        p.unflatten(std::min(pick, p.masses.size() - 1), x);

        std::vector<double> pc, qc;
        for (std::size_t flat = 0; flat < p.masses.size(); ++flat) {
            p.unflatten(flat, y);
            bool match = true;
            for (std::size_t a = 0; a < m && match; ++a)
                match = !evidence[a] || y[a] == x[a];
            if (!match)
                continue;
            pc.push_back(p.masses[flat]);
            qc.push_back(point_probability(q, y, row));
        }
        const double ps = std::accumulate(pc.begin(), pc.end(), 0.0);
        const double qs = std::accumulate(qc.begin(), qc.end(), 0.0);
        if (qs <= 0.0)
            return kInf;
        double kl = 0.0;
        for (std::size_t i = 0; i < pc.size(); ++i)
            kl += kl_term(pc[i] / ps, qc[i] / qs);
        total += std::max(kl, 0.0);
    }
    return total / n_queries;
}

double avg_rdc_score(const DataMatrix& data, const LearnConfig& cfg)
{
    if (data.n_cols() < 2)
        throw std::invalid_argument("average RDC needs at least two columns");
    VarSet all(data.n_cols());
    std::iota(all.begin(), all.end(), 0);
    const auto c = correlation_matrix(data, all, cfg);
    double s = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = i + 1; j < c.size(); ++j) {
            s += c(i, j);
            ++pairs;
        }
    return std::clamp(s / static_cast<double>(pairs), 0.0, 1.0);
}

Event random_event(const std::vector<VariableMeta>& vars, std::mt19937_64& rng, double full_prob)
{
    Event e = full_event(vars);
    std::uniform_real_distribution<double> u;
    for (std::size_t i = 0; i < vars.size(); ++i) {
        if (u(rng) < full_prob)
            continue;
        const auto& v = vars[i];
        if (v.is_discrete()) {
            std::uniform_int_distribution<int> code(0, v.cardinality - 1);
            const int a = code(rng), b = code(rng);
            e[i] = Interval::closed(std::min(a, b), std::max(a, b));
        } else {
            const double a = v.lo + u(rng) * (v.hi - v.lo), b = v.lo + u(rng) * (v.hi - v.lo);
            e[i] = Interval{std::min(a, b), std::max(a, b), u(rng) < 0.5, u(rng) < 0.5};
        }
    }
    return e;
}

// ---- random models ----

namespace {

class ModelGenerator {
public:
    ModelGenerator(const std::vector<VariableMeta>& vars, std::uint64_t seed) : vars_(vars), rng_(seed) {}

    Node generate(VarSet scope, std::size_t budget, int depth)
    {
        if (scope.size() == 1)
            return uni_leaf(scope[0]);
        if (budget <= scope.size() + 1 || depth > 60)
            return terminal(scope);
        if (budget < 2 * scope.size() + 4)
            return uniform() < 0.5 ? factorize(scope) : terminal(scope);
        if (uniform() < 0.25) {
            std::shuffle(scope.begin(), scope.end(), rng_);
            const std::size_t parts = std::min<std::size_t>(scope.size(), 2 + (uniform() < 0.3));
            std::vector<VarSet> groups(parts);
            for (std::size_t i = 0; i < scope.size(); ++i)
                groups[i < parts ? i : std::uniform_int_distribution<std::size_t>(0, parts - 1)(rng_)].push_back(scope[i]);
            for (auto& g : groups)
                std::sort(g.begin(), g.end());
            std::sort(groups.begin(), groups.end());
            ProductNode prod;
            for (const auto& g : groups) {
                const std::size_t share = (budget - 1) * g.size() / scope.size();
                prod.children.push_back(generate(g, std::max<std::size_t>(share, 1), depth + 1));
                prod.child_scopes.push_back(g);
            }
            return Node{std::move(prod)};
        }
        std::sort(scope.begin(), scope.end());
        const int k = 2 + (uniform() < 0.3);
        SumNode sum;
        for (int i = 0; i < k; ++i) {
            sum.children.push_back(generate(scope, (budget - 1) / static_cast<std::size_t>(k), depth + 1));
            sum.weights.push_back(0.1 + uniform());
        }
        const double total = std::accumulate(sum.weights.begin(), sum.weights.end(), 0.0);
        for (auto& w : sum.weights)
            w /= total;
        return Node{std::move(sum)};
    }

private:
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

    std::vector<double> simplex(std::size_t n)
    {
        std::exponential_distribution<double> g(1.0);
        std::vector<double> w(n);
        double total = 0.0;
        for (auto& x : w)
            total += (x = g(rng_) + 1e-3);
        for (auto& x : w)
            x /= total;
        return w;
    }

    Node uni_leaf(int var)
    {
        const auto& v = vars_[static_cast<std::size_t>(var)];
        if (v.is_discrete())
            return Node{UniLeafNode{var, Histogram{simplex(static_cast<std::size_t>(v.cardinality))}}};
        const std::size_t k = 1 + (uniform() < 0.5);
        GaussianMixture g;
        g.weights = simplex(k);
        for (std::size_t c = 0; c < k; ++c) {
            g.means.push_back(v.lo + uniform() * (v.hi - v.lo));
            g.sds.push_back((v.hi - v.lo) * (0.05 + 0.2 * uniform()));
        }
        return Node{UniLeafNode{var, std::move(g)}};
    }

    Node terminal(const VarSet& scope)
    {
        ProductNode prod;
        for (int v : scope) {
            prod.children.push_back(uni_leaf(v));
            prod.child_scopes.push_back({v});
        }
        return Node{std::move(prod)};
    }

    Node factorize(VarSet scope)
    {
        std::shuffle(scope.begin(), scope.end(), rng_);
        // W small so the conditional walk stays cheap; H at most three variables
        const std::size_t h_size = std::min<std::size_t>(3, 1 + std::uniform_int_distribution<std::size_t>(0, scope.size() - 2)(rng_));
        VarSet h(scope.begin(), scope.begin() + static_cast<std::ptrdiff_t>(h_size));
        VarSet w(scope.begin() + static_cast<std::ptrdiff_t>(h_size), scope.end());
        std::sort(h.begin(), h.end());
        std::sort(w.begin(), w.end());
        FactorizeNode f;
        f.h_scope = h;
        f.w_scope = w;
        f.children.push_back(w.size() == 1 ? uni_leaf(w[0]) : terminal(w));
        f.children.push_back(split_tree(h, w, full_event(vars_), 2));
        return Node{std::move(f)};
    }

    Node split_tree(const VarSet& h, const VarSet& w, const Event& region, int depth)
    {
        if (depth == 0 || uniform() < 0.3)
            return multi_leaf(h, region);
        std::vector<int> splittable;
        for (int c : w) {
            const auto& iv = region[static_cast<std::size_t>(c)];
            if (iv.lo < iv.hi)
                splittable.push_back(c);
        }
        if (splittable.empty())
            return multi_leaf(h, region);
        const int c = splittable[std::uniform_int_distribution<std::size_t>(0, splittable.size() - 1)(rng_)];
        const auto& meta = vars_[static_cast<std::size_t>(c)];
        const Interval iv = region[static_cast<std::size_t>(c)];
        Event left = region, right = region;
        if (meta.is_discrete()) {
            const int cut = std::uniform_int_distribution<int>(static_cast<int>(iv.lo), static_cast<int>(iv.hi) - 1)(rng_);
            left[static_cast<std::size_t>(c)] = Interval::closed(iv.lo, cut);
            right[static_cast<std::size_t>(c)] = Interval::closed(cut + 1, iv.hi);
        } else {
            const double cut = iv.lo + (0.2 + 0.6 * uniform()) * (iv.hi - iv.lo);
            left[static_cast<std::size_t>(c)] = Interval{iv.lo, cut, iv.lo_open, false};
            right[static_cast<std::size_t>(c)] = Interval{cut, iv.hi, true, iv.hi_open};
        }
        SplitNode s;
        s.regions = {left, right};
        s.children.push_back(split_tree(h, w, left, depth - 1));
        s.children.push_back(split_tree(h, w, right, depth - 1));
        return Node{std::move(s)};
    }

    Node multi_leaf(const VarSet& h, const Event& region)
    {
        const bool discrete = std::all_of(h.begin(), h.end(), [&](int v) { return vars_[static_cast<std::size_t>(v)].is_discrete(); });
        if (discrete) {
            std::vector<int> dims;
            std::size_t cells = 1;
            for (int v : h) {
                dims.push_back(vars_[static_cast<std::size_t>(v)].cardinality);
                cells *= static_cast<std::size_t>(dims.back());
            }
            return Node{MultiLeafNode{h, region, DenseJointHistogram(std::move(dims), simplex(cells))}};
        }
        const auto p = static_cast<Eigen::Index>(h.size());
        Eigen::VectorXd mean(p);
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
        for (Eigen::Index i = 0; i < p; ++i) {
            const auto& v = vars_[static_cast<std::size_t>(h[static_cast<std::size_t>(i)])];
            mean(i) = v.domain_lo() + uniform() * (v.domain_hi() - v.domain_lo());
            for (Eigen::Index j = 0; j < p; ++j)
                a(i, j) = uniform() - 0.5;
            a(i, i) += 0.2 * (v.domain_hi() - v.domain_lo());
        }
        Eigen::MatrixXd cov = a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(p, p);
        return Node{MultiLeafNode{h, region, MvGaussianMixture({1.0}, {mean}, {cov})}};
    }

    const std::vector<VariableMeta>& vars_;
    std::mt19937_64 rng_;
};

}  // namespace

FspnModel random_model(const RandomModelSpec& spec, std::uint64_t seed)
{
    if (spec.n_vars < 2 || spec.max_card < 2)
        throw std::invalid_argument("random model needs two variables of cardinality two or more");
    std::mt19937_64 rng(seed);
    FspnModel m;
    for (int i = 0; i < spec.n_vars; ++i) {
        const std::string name = "V" + std::to_string(i);
        if (spec.with_continuous && i % 3 == 2) {
            const double lo = std::uniform_real_distribution<double>(-10.0, 0.0)(rng);
            m.variables.push_back(VariableMeta::continuous(name, lo, lo + std::uniform_real_distribution<double>(1.0, 10.0)(rng)));
        } else {
            m.variables.push_back(VariableMeta::discrete(name, std::uniform_int_distribution<int>(2, spec.max_card)(rng)));
        }
    }
    VarSet all(m.variables.size());
    std::iota(all.begin(), all.end(), 0);
    m.root = ModelGenerator(m.variables, rng()).generate(all, spec.target_nodes, 0);
    return m;
}

ScalingReport scaling_benchmark(const std::vector<std::size_t>& sizes, int events_per_size, std::uint64_t seed,
                                int repetitions)
{
    using clock = std::chrono::steady_clock;
    ScalingReport report;
    std::uint64_t model_seed = seed;
    for (std::size_t target : sizes) {
        const FspnModel model = random_model({8, 4, false, target}, ++model_seed);
        std::mt19937_64 rng(seed ^ target);
        std::vector<Event> events;
        for (int i = 0; i < events_per_size; ++i)
            events.push_back(random_event(model.variables, rng));

        volatile double sink = 0.0;
        auto batch = [&]() {
            double s = 0.0;
            for (const auto& e : events)
                s += infer_marginal(model, e);
            sink = sink + s;
        };
        for (int i = 0; i < 5; ++i)
            batch();
        std::vector<double> times;
        for (int r = 0; r < repetitions; ++r) {
            const auto t0 = clock::now();
            batch();
            times.push_back(std::chrono::duration<double>(clock::now() - t0).count() / events_per_size);
        }
        std::sort(times.begin(), times.end());
        const double med = times.size() % 2 ? times[times.size() / 2]
                                             : 0.5 * (times[times.size() / 2 - 1] + times[times.size() / 2]);
        report.rows.push_back({target, stats(model).n_nodes, med});
    }

    if (report.rows.size() >= 2) {
        std::vector<double> x, y;
        for (const auto& r : report.rows) {
            x.push_back(std::log(static_cast<double>(r.n_nodes)));
            y.push_back(std::log(r.median_seconds));
        }
        const double n = static_cast<double>(x.size());
        const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
        const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
        double sxy = 0.0, sxx = 0.0, syy = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            sxy += (x[i] - mx) * (y[i] - my);
            sxx += (x[i] - mx) * (x[i] - mx);
            syy += (y[i] - my) * (y[i] - my);
        }
        if (sxx > 0.0) {
            report.slope = sxy / sxx;
            report.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
        }
    }
    return report;
}

}  // namespace fspn
