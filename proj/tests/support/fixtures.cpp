#include "fixtures.hpp"

#include <algorithm>
#include <map>

namespace fspn::testing {

namespace {

constexpr int kCard = 21;

// 21 masses: explicit values at some codes, the remainder spread evenly over the rest.
std::vector<double> masses_with(const std::map<int, double>& fixed)
{
    double used = 0.0;
    for (const auto& [k, v] : fixed)
        used += v;
    const double rest = (1.0 - used) / static_cast<double>(kCard - static_cast<int>(fixed.size()));
    std::vector<double> m(kCard, rest);
    for (const auto& [k, v] : fixed)
        m[static_cast<std::size_t>(k)] = v;
    return m;
}

// Joint over (X1, X2): X1 has marginal `first`, X2 sits on or next to X1.
DenseJointHistogram correlated_pair(const std::vector<double>& first)
{
    std::vector<double> joint(kCard * kCard, 0.0);
    for (int a = 0; a < kCard; ++a) {
        const double pa = first[static_cast<std::size_t>(a)];
        auto add = [&](int b, double w) {
            b = std::clamp(b, 0, kCard - 1);
            joint[static_cast<std::size_t>(a * kCard + b)] += pa * w;
        };
        add(a, 0.6);
        add(a - 1, 0.2);
        add(a + 1, 0.2);
    }
    return DenseJointHistogram({kCard, kCard}, std::move(joint));
}

Node uni(int var, std::vector<double> masses)
{
    return Node{UniLeafNode{var, Histogram{std::move(masses)}}};
}

}  // namespace

FspnModel four_var_fixture()
{
    FspnModel model;
    for (int i = 1; i <= 4; ++i)
        model.variables.push_back(VariableMeta::discrete("X" + std::to_string(i), kCard));
    const auto& vars = model.variables;

    // X3 leaves: mass on [3,5] and on 6
    const auto l1 = masses_with({{3, 0.03}, {4, 0.03}, {5, 0.04}, {6, 0.3}});
    const auto l3 = masses_with({{3, 0.05}, {4, 0.07}, {5, 0.08}, {6, 0.3}});
    const auto l2 = masses_with({{0, 0.2}, {10, 0.1}});
    const auto l4 = masses_with({{20, 0.25}});

    ProductNode n4{{uni(2, l1), uni(3, l2)}, {{2}, {3}}};
    ProductNode n5{{uni(2, l3), uni(3, l4)}, {{2}, {3}}};
    SumNode n2{{Node{std::move(n4)}, Node{std::move(n5)}}, {0.3, 0.7}};

    // X1 marginals with Pr(X1 in [1,7]) = 0.3 and 0.4
    const auto x1_low = masses_with({{1, 0.05}, {2, 0.05}, {3, 0.04}, {4, 0.04}, {5, 0.04}, {6, 0.04}, {7, 0.04}});
    const auto x1_high = masses_with({{1, 0.1}, {2, 0.1}, {3, 0.05}, {4, 0.05}, {5, 0.04}, {6, 0.03}, {7, 0.03}});

    Event low = full_event(vars);
    low[2] = Interval::closed(0, 5);
    Event high = full_event(vars);
    high[2] = Interval::closed(6, 20);

    SplitNode n3;
    n3.regions = {low, high};
    n3.children.push_back(Node{MultiLeafNode{{0, 1}, low, correlated_pair(x1_low)}});
    n3.children.push_back(Node{MultiLeafNode{{0, 1}, high, correlated_pair(x1_high)}});

    FactorizeNode n1;
    n1.h_scope = {0, 1};
    n1.w_scope = {2, 3};
    n1.children.push_back(Node{std::move(n2)});
    n1.children.push_back(Node{std::move(n3)});
    model.root = Node{std::move(n1)};
    return model;
}

Event make_event(const std::vector<VariableMeta>& vars, std::initializer_list<std::pair<int, Interval>> constraints)
{
    Event e = full_event(vars);
    for (const auto& [var, iv] : constraints)
        e[static_cast<std::size_t>(var)] = iv;
    return e;
}

FspnModel single_leaf_model(std::vector<double> masses)
{
    FspnModel m;
    m.variables.push_back(VariableMeta::discrete("A", static_cast<int>(masses.size())));
    m.root = Node{UniLeafNode{0, Histogram{std::move(masses)}}};
    return m;
}

}  // namespace fspn::testing
