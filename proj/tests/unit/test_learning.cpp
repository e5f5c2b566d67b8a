#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fspn/inference.hpp"
#include "fspn/learning.hpp"
#include "fspn/serialize.hpp"

using namespace fspn;

namespace {

DataMatrix discrete_table(const std::vector<int>& cards, const std::vector<std::vector<int>>& rows)
{
    DataMatrix d;
    for (std::size_t i = 0; i < cards.size(); ++i)
        d.variables.push_back(VariableMeta::discrete("X" + std::to_string(i + 1), cards[i]));
    for (const auto& r : rows)
        for (int v : r)
            d.values.push_back(v);
    return d;
}

CorrelationMatrix scores3(double s12, double s13, double s23)
{
    CorrelationMatrix c;
    c.scope = {0, 1, 2};
    c.scores.resize(3, 3);
    c.scores << 1, s12, s13, s12, 1, s23, s13, s23, 1;
    return c;
}

// 3 columns where X2 copies X1 with 1% noise and X3 is independent.
DataMatrix copied_pair(int n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> code(0, 9);
    std::bernoulli_distribution flip(0.01);
    std::vector<std::vector<int>> rows;
    for (int i = 0; i < n; ++i) {
        const int a = code(rng);
        rows.push_back({a, flip(rng) ? code(rng) : a, code(rng)});
    }
    return discrete_table({10, 10, 10}, rows);
}

template <class T>
int count_nodes(const Node& n)
{
    int c = std::holds_alternative<T>(n.kind) ? 1 : 0;
    std::visit(
        [&](const auto& k) {
            if constexpr (requires { k.children; })
                for (const auto& ch : k.children)
                    c += count_nodes<T>(ch);
        },
        n.kind);
    return c;
}

void check_sum_weights(const Node& n)
{
    if (const auto* s = std::get_if<SumNode>(&n.kind)) {
        double t = 0.0;
        for (double w : s->weights)
            t += w;
        CHECK(std::abs(t - 1.0) < 1e-12);
    }
    std::visit(
        [&](const auto& k) {
            if constexpr (requires { k.children; })
                for (const auto& ch : k.children)
                    check_sum_weights(ch);
        },
        n.kind);
}

}  // namespace

TEST_CASE("rdc of a series with itself or an affine image is one")
{
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n01;
    std::vector<double> x(500), y(500);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = n01(rng);
        y[i] = 3 * x[i] + 2;
    }
    const LearnConfig cfg;
    CHECK(rdc(x, x, cfg) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(rdc(x, y, cfg) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(rdc(x, y, cfg) == rdc(x, y, cfg));
}

TEST_CASE("rdc of independent uniforms is small")
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u;
    std::vector<double> a(5000), b(5000);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = u(rng);
        b[i] = u(rng);
    }
    const LearnConfig cfg;
    const double s = rdc(a, b, cfg);
    CHECK(s < 0.3);
    CHECK(s == doctest::Approx(rdc(b, a, cfg)).epsilon(1e-9));
}

TEST_CASE("rdc detects a nonmonotone dependence and scores constants zero")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> x(2000), y(2000), c(2000, 4.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = u(rng);
        y[i] = x[i] * x[i];
    }
    const LearnConfig cfg;
    CHECK(rdc(x, y, cfg) > 0.9);
    CHECK(rdc(x, c, cfg) == 0.0);
    CHECK_THROWS_AS(rdc(std::vector<double>{1, 2}, std::vector<double>{1}, cfg), std::invalid_argument);
}

TEST_CASE("correlation matrix on a copied pair")
{
    const auto d = copied_pair(3000, 4);
    const auto c = correlation_matrix(d, {0, 1, 2}, LearnConfig{});
    CHECK(c(0, 0) == 1.0);
    CHECK(c(0, 1) > 0.9);
    CHECK(c(0, 2) < 0.3);
    CHECK(c(1, 2) < 0.3);
    CHECK(c(0, 1) == c(1, 0));
}

TEST_CASE("grouping highly correlated variables")
{
    CHECK(group_correlated(scores3(0.9, 0.1, 0.2), 0.7) == VarSet{0, 1});
    CHECK(group_correlated(scores3(0.8, 0.75, 0.2), 0.7) == VarSet{0, 1, 2});
    CHECK(group_correlated(scores3(0.5, 0.1, 0.2), 0.7).empty());

    // relabelling the variables relabels the group
    CorrelationMatrix r = scores3(0.2, 0.1, 0.9);
    r.scope = {4, 7, 9};
    CHECK(group_correlated(r, 0.7) == VarSet{7, 9});
}

TEST_CASE("partitioning weakly correlated variables")
{
    auto parts = partition_independent(scores3(0.9, 0.1, 0.2), 0.3);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0] == VarSet{0, 1});
    CHECK(parts[1] == VarSet{2});
    CHECK(partition_independent(scores3(0.1, 0.1, 0.1), 0.3).size() == 3);
    CHECK(partition_independent(scores3(0.4, 0.1, 0.5), 0.3).size() == 1);
}

TEST_CASE("clustering separates two blobs")
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    DataMatrix d;
    d.variables = {VariableMeta::continuous("a", -20, 20), VariableMeta::continuous("b", -20, 20)};
    std::vector<int> truth;
    for (int i = 0; i < 400; ++i) {
        const int side = i % 2;
        const double c = side ? 10.0 : -10.0;
        d.values.push_back(c + n01(rng));
        d.values.push_back(c + n01(rng));
        truth.push_back(side);
    }
    const auto r = cluster_rows(d, 2, 7);
    REQUIRE(r.clusters.size() == 2);
    CHECK(r.weights[0] + r.weights[1] == doctest::Approx(1.0));
    const int label0 = truth[r.clusters[0][0]];
    int agree = 0;
    for (auto row : r.clusters[0])
        agree += truth[row] == label0;
    for (auto row : r.clusters[1])
        agree += truth[row] != label0;
    CHECK(agree >= 396);
}

TEST_CASE("identical rows form one cluster")
{
    const auto d = discrete_table({3, 3}, std::vector<std::vector<int>>(50, {1, 2}));
    const auto r = cluster_rows(d, 2, 1);
    REQUIRE(r.clusters.size() == 1);
    CHECK(r.weights[0] == 1.0);
    CHECK(r.clusters[0].size() == 50);
}

TEST_CASE("greedy split cuts where the scope dependence changes")
{
    // X1 and X2 are drawn from the low half of their domain when X3 <= 5
    // and from the high half above; within either side nothing depends on X3.
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> half(0, 4), cond(0, 11);
    std::vector<std::vector<int>> rows;
    for (int i = 0; i < 4000; ++i) {
        const int c = cond(rng);
        const int base = c > 5 ? 5 : 0;
        rows.push_back({base + half(rng), base + half(rng), c});
    }
    const auto d = discrete_table({10, 10, 12}, rows);
    std::vector<std::size_t> all(d.n_rows());
    std::iota(all.begin(), all.end(), 0);
    LearnConfig cfg;
    cfg.greedy_candidates = 100;
    const auto s = split_conditional(d, all, {0, 1}, {2}, full_event(d.variables), cfg, 1);
    REQUIRE(s);
    CHECK(s->variable == 2);
    CHECK(s->threshold == 5.0);
    CHECK(s->left_region[2] == Interval::closed(0, 5));
    CHECK(s->right_region[2] == Interval::closed(6, 11));
    CHECK(s->left_rows.size() + s->right_rows.size() == all.size());
}

TEST_CASE("no split on a constant condition column")
{
    std::vector<std::vector<int>> rows;
    for (int i = 0; i < 100; ++i)
        rows.push_back({i % 4, (i / 4) % 4, 2});
    const auto d = discrete_table({4, 4, 5}, rows);
    std::vector<std::size_t> all(d.n_rows());
    std::iota(all.begin(), all.end(), 0);
    LearnConfig cfg;
    CHECK_FALSE(split_conditional(d, all, {0, 1}, {2}, full_event(d.variables), cfg, 1));
    cfg.split_method = SplitMethod::grid_kmeans;
    CHECK_FALSE(split_conditional(d, all, {0, 1}, {2}, full_event(d.variables), cfg, 1));
}

TEST_CASE("grid k-means split chooses the separating condition variable")
{
    // Two blobs differ in X1 (scope) and X2 (condition); X3 (condition) is noise.
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> noise(0, 19), jitter(-1, 1);
    std::vector<std::vector<int>> rows;
    for (int i = 0; i < 600; ++i) {
        const int base = (i % 2) ? 16 : 3;
        rows.push_back({base + jitter(rng), base + jitter(rng), noise(rng)});
    }
    const auto d = discrete_table({20, 20, 20}, rows);
    std::vector<std::size_t> all(d.n_rows());
    std::iota(all.begin(), all.end(), 0);
    LearnConfig cfg;
    cfg.split_method = SplitMethod::grid_kmeans;
    const auto s = split_conditional(d, all, {0}, {1, 2}, full_event(d.variables), cfg, 3);
    REQUIRE(s);
    CHECK(s->variable == 1);
    CHECK(s->threshold >= 4.0);
    CHECK(s->threshold <= 14.0);
    CHECK(s->left_rows.size() == 300);
}

TEST_CASE("uni-leaf histogram fitting")
{
    const auto meta = VariableMeta::discrete("A", 3);
    std::vector<double> v{0, 0, 1, 1, 1, 2, 2, 2, 2, 2};
    LearnConfig cfg;
    cfg.smoothing_alpha = 0.0;
    auto h = std::get<Histogram>(fit_uni_leaf(v, meta, cfg));
    CHECK(h.masses == std::vector<double>{0.2, 0.3, 0.5});
    cfg.smoothing_alpha = 1.0;
    h = std::get<Histogram>(fit_uni_leaf(v, meta, cfg));
    CHECK(h.masses[0] == doctest::Approx(3.0 / 13));
    CHECK(h.masses[1] == doctest::Approx(4.0 / 13));
    CHECK(h.masses[2] == doctest::Approx(6.0 / 13));
}

TEST_CASE("uni-leaf gaussian fitting recovers a normal sample")
{
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(1.5, 2.0);
    std::vector<double> v(10000);
    for (auto& x : v)
        x = g(rng);
    const auto meta = VariableMeta::continuous("Y", -15, 15);
    LearnConfig cfg;
    cfg.gmm_components = 1;
    const auto m = std::get<GaussianMixture>(fit_uni_leaf(v, meta, cfg));
    REQUIRE(m.weights.size() == 1);
    CHECK(std::abs(m.means[0] - 1.5) < 0.05);
    CHECK(std::abs(m.sds[0] - 2.0) < 0.05);

    cfg.gmm_components = 3;
    const auto m3 = std::get<GaussianMixture>(fit_uni_leaf(v, meta, cfg));
    double total = 0.0;
    for (double w : m3.weights)
        total += w;
    CHECK(total == doctest::Approx(1.0));
    CHECK(m3.mass(full_interval(meta), meta) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("multi-leaf joint histogram fitting")
{
    const auto d = discrete_table({2, 2}, {{0, 0}, {1, 1}, {0, 0}, {1, 1}});
    LearnConfig cfg;
    cfg.smoothing_alpha = 0.0;
    const auto j = std::get<DenseJointHistogram>(fit_multi_leaf(d, {0, 1}, cfg));
    CHECK(j.masses() == std::vector<double>{0.5, 0.0, 0.0, 0.5});

    // lattice too large to store densely: sparse entries plus escape mass
    std::vector<std::vector<int>> rows;
    for (int i = 0; i < 50; ++i)
        rows.push_back({i % 7, (i * 3) % 11, i % 5, 0});
    const auto big = discrete_table({100, 100, 100, 10}, rows);
    cfg.smoothing_alpha = 1.0;
    const auto leaf = fit_multi_leaf(big, {0, 1, 2, 3}, cfg);
    REQUIRE(std::holds_alternative<SparseJointHistogram>(leaf));
    const auto& s = std::get<SparseJointHistogram>(leaf);
    const int lo[4] = {0, 0, 0, 0}, hi[4] = {99, 99, 99, 9};
    CHECK(std::abs(s.box_mass(lo, hi) - 1.0) < 1e-9);
    CHECK(s.default_mass > 0.0);
}

TEST_CASE("multi-leaf gaussian fitting integrates to one")
{
    std::mt19937_64 rng(10);
    std::normal_distribution<double> n01;
    DataMatrix d;
    d.variables = {VariableMeta::continuous("a", -10, 10), VariableMeta::continuous("b", -10, 10)};
    for (int i = 0; i < 2000; ++i) {
        const double z = n01(rng);
        d.values.push_back(z);
        d.values.push_back(0.8 * z + 0.6 * n01(rng));
    }
    const auto leaf = fit_multi_leaf(d, {0, 1}, LearnConfig{});
    REQUIRE(std::holds_alternative<MvGaussianMixture>(leaf));
    const double inf = std::numeric_limits<double>::infinity();
    const double lo[2] = {-inf, -inf}, hi[2] = {inf, inf};
    CHECK(std::get<MvGaussianMixture>(leaf).box_mass(lo, hi) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("independent columns learn a product of uni-leaves")
{
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> code(0, 4);
    std::vector<std::vector<int>> rows;
    for (int i = 0; i < 10000; ++i)
        rows.push_back({code(rng), code(rng), code(rng)});
    const auto d = discrete_table({5, 5, 5}, rows);
    const auto m = learn_fspn(d, LearnConfig{});
    REQUIRE(std::holds_alternative<ProductNode>(m.root.kind));
    const auto& p = std::get<ProductNode>(m.root.kind);
    CHECK(p.children.size() == 3);
    for (const auto& c : p.children)
        CHECK(std::holds_alternative<UniLeafNode>(c.kind));
}

TEST_CASE("a copied pair learns a factorize root")
{
    const auto d = copied_pair(10000, 12);
    const auto m = learn_fspn(d, LearnConfig{});
    REQUIRE(validate(m).empty());
    REQUIRE(std::holds_alternative<FactorizeNode>(m.root.kind));
    const auto& f = std::get<FactorizeNode>(m.root.kind);
    // the pair is kept together in one side of the factorization
    const bool pair_in_h = std::find(f.h_scope.begin(), f.h_scope.end(), 1) != f.h_scope.end();
    CHECK(pair_in_h);
    CHECK(f.h_scope.size() + f.w_scope.size() == 3);
}

TEST_CASE("without the correlation threshold no factorize node is learned")
{
    const auto d = copied_pair(3000, 13);
    LearnConfig cfg;
    cfg.tau_high = std::numeric_limits<double>::infinity();
    const auto m = learn_fspn(d, cfg);
    CHECK(validate(m).empty());
    CHECK(count_nodes<FactorizeNode>(m.root) == 0);
    CHECK(count_nodes<MultiLeafNode>(m.root) == 0);
    check_sum_weights(m.root);
}

TEST_CASE("learning is deterministic and valid")
{
    const auto d = copied_pair(2000, 14);
    LearnConfig cfg;
    cfg.seed = 77;
    const auto a = learn_fspn(d, cfg);
    const auto b = learn_fspn(d, cfg);
    CHECK(validate(a).empty());
    CHECK(serialize(a) == serialize(b));
    REQUIRE(a.learn_config);
    CHECK(*a.learn_config == cfg);
    check_sum_weights(a.root);
    CHECK(infer_marginal(a, full_event(a.variables)) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("smoothing keeps unseen values at finite likelihood")
{
    const auto d = copied_pair(1000, 15);
    LearnConfig cfg;
    cfg.smoothing_alpha = 1.0;
    const auto m = learn_fspn(d, cfg);
    DataMatrix unseen;
    unseen.variables = d.variables;
    unseen.values = {9, 0, 9};
    const auto ll = log_likelihood(m, unseen);
    CHECK(std::isfinite(ll.average));
}

TEST_CASE("learning rejects empty tables and bad configs")
{
    DataMatrix empty;
    empty.variables = {VariableMeta::discrete("A", 2)};
    CHECK_THROWS_AS(learn_fspn(empty, LearnConfig{}), DataError);
    LearnConfig bad;
    bad.tau_low = 0.9;
    CHECK_THROWS_AS(learn_fspn(copied_pair(10, 1), bad), DataError);
}

TEST_CASE("node seeds depend on path")
{
    CHECK(derive_seed(1, "root") == derive_seed(1, "root"));
    CHECK(derive_seed(1, "root") != derive_seed(1, "root/w"));
    CHECK(derive_seed(1, "root") != derive_seed(2, "root"));
}
