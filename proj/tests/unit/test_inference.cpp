#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "fspn/inference.hpp"

using namespace fspn;
using fspn::testing::four_var_fixture;
using fspn::testing::make_event;

TEST_CASE("range queries on the four variable fixture")
{
    const auto m = four_var_fixture();
    const auto& v = m.variables;
    const auto x1 = Interval::closed(1, 7);

    CHECK(std::abs(infer_marginal(m, make_event(v, {{0, x1}, {2, Interval::closed(3, 6)}})) - 0.171) < 1e-12);
    CHECK(std::abs(infer_marginal(m, make_event(v, {{0, x1}, {2, Interval::closed(3, 5)}})) - 0.051) < 1e-12);
    CHECK(std::abs(infer_marginal(m, make_event(v, {{0, x1}, {2, Interval{5, 6, true, false}}})) - 0.12) < 1e-12);
    CHECK(std::abs(infer_marginal(m, make_event(v, {{2, Interval::closed(3, 5)}})) - 0.17) < 1e-12);
    CHECK(std::abs(infer_marginal(m, full_event(v)) - 1.0) < 1e-9);
}

TEST_CASE("conditional query on the fixture")
{
    const auto m = four_var_fixture();
    const auto& v = m.variables;
    const auto q = make_event(v, {{0, Interval::closed(1, 7)}});
    const auto e = make_event(v, {{2, Interval{5, 6, true, false}}});
    CHECK(std::abs(infer_evidence(m, q, e) - 0.4) < 1e-12);
    CHECK(infer_evidence(m, q, full_event(v)) == doctest::Approx(infer_marginal(m, q)).epsilon(1e-12));
    CHECK_THROWS_AS(infer_evidence(m, q, q), DataError);
}

TEST_CASE("zero-mass evidence is an error")
{
    const auto m = fspn::testing::single_leaf_model({0.5, 0.5, 0.0});
    const auto e = make_event(m.variables, {{0, Interval::point(2)}});
    CHECK_THROWS_WITH_AS(infer_evidence(m, full_event(m.variables), e), "evidence has zero mass", DataError);
}

TEST_CASE("event partition by leaf regions")
{
    const auto m = four_var_fixture();
    const auto& v = m.variables;
    const auto& f = std::get<FactorizeNode>(m.root.kind);
    const auto leaves = collect_multileaves(f.right());
    REQUIRE(leaves.size() == 2);

    const auto ev = *canonicalize(make_event(v, {{0, Interval::closed(1, 7)}, {2, Interval::closed(3, 6)}}), v);
    auto parts = partition_event_by_multileaves(ev, leaves);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].leaf == 0);
    CHECK(parts[0].event[2] == Interval::closed(3, 5));
    CHECK(parts[1].leaf == 1);
    CHECK(parts[1].event[2] == Interval::closed(6, 6));
    CHECK(parts[0].event[0] == Interval::closed(1, 7));

    const auto inside = *canonicalize(make_event(v, {{2, Interval::closed(1, 2)}}), v);
    parts = partition_event_by_multileaves(inside, leaves);
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].event == inside);

    // clipped away entirely
    CHECK(infer_marginal(m, make_event(v, {{2, Interval::closed(30, 40)}})) == 0.0);
}

TEST_CASE("additivity and monotonicity on the fixture")
{
    const auto m = four_var_fixture();
    const auto& v = m.variables;
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> code(0, 20);
    for (int t = 0; t < 200; ++t) {
        Event e = full_event(v);
        for (std::size_t i = 0; i < 4; ++i) {
            int a = code(rng), b = code(rng);
            e[i] = Interval::closed(std::min(a, b), std::max(a, b));
        }
        const auto axis = static_cast<std::size_t>(t % 4);
        if (e[axis].lo < e[axis].hi) {
            const double cut = e[axis].lo;
            Event a = e, b = e;
            a[axis].hi = cut;
            b[axis].lo = cut;
            b[axis].lo_open = true;
            CHECK(std::abs(infer_marginal(m, a) + infer_marginal(m, b) - infer_marginal(m, e)) < 1e-9);
        }
        Event wider = e;
        wider[axis] = full_interval(v[axis]);
        CHECK(infer_marginal(m, e) <= infer_marginal(m, wider) + 1e-9);
    }
}

TEST_CASE("point log density on uniform leaves")
{
    const auto u = fspn::testing::single_leaf_model({0.25, 0.25, 0.25, 0.25});
    DataMatrix data;
    data.variables = u.variables;
    data.values = {0, 1, 2, 3};
    const auto ll = log_likelihood(u, data);
    REQUIRE(ll.per_row.size() == 4);
    for (double x : ll.per_row)
        CHECK(x == doctest::Approx(std::log(0.25)));
    CHECK(ll.average == doctest::Approx(std::log(0.25)));

    FspnModel prod;
    prod.variables = {VariableMeta::discrete("A", 2), VariableMeta::discrete("B", 2)};
    prod.root = Node{ProductNode{{Node{UniLeafNode{0, Histogram{{0.5, 0.5}}}}, Node{UniLeafNode{1, Histogram{{0.5, 0.5}}}}},
                                {{0}, {1}}}};
    REQUIRE(validate(prod).empty());
    DataMatrix two;
    two.variables = prod.variables;
    two.values = {0, 1, 1, 1};
    for (double x : log_likelihood(prod, two).per_row)
        CHECK(x == doctest::Approx(std::log(0.25)));

    DataMatrix wrong;
    wrong.variables = {VariableMeta::discrete("A", 2)};
    wrong.values = {0};
    CHECK_THROWS_AS(log_likelihood(prod, wrong), DataError);
}

TEST_CASE("point path agrees with point range queries on the fixture")
{
    const auto m = four_var_fixture();
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> code(0, 20);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> row(4);
        Event e = full_event(m.variables);
        for (std::size_t i = 0; i < 4; ++i) {
            row[i] = code(rng);
            e[i] = Interval::point(row[i]);
        }
        const double p = infer_marginal(m, e);
        const double lp = point_log_density(m, row);
        if (p == 0.0)
            CHECK(lp == -std::numeric_limits<double>::infinity());
        else
            CHECK(std::exp(lp) == doctest::Approx(p).epsilon(1e-10));
    }
}

TEST_CASE("query text grammar")
{
    const auto m = four_var_fixture();
    const auto& v = m.variables;
    auto q = parse_query("X1=1..7 X3=3..6", v);
    CHECK_FALSE(q.evidence);
    CHECK(std::abs(infer_marginal(m, q.query) - 0.171) < 1e-12);

    q = parse_query("X1=1..7 | X3=(5..6", v);
    REQUIRE(q.evidence);
    CHECK(q.evidence->intervals[2] == Interval{5, 6, true, false});
    CHECK(std::abs(infer_evidence(m, q.query, *q.evidence) - 0.4) < 1e-12);

    q = parse_query("X2=..4 X4=19.. X3=5..7)", v);
    CHECK(q.query[1] == Interval::closed(0, 4));
    CHECK(q.query[3] == Interval::closed(19, 20));
    CHECK(q.query[2] == Interval{5, 7, false, true});

    q = parse_query("X1=3", v);
    CHECK(q.query[0] == Interval::point(3));
    CHECK(format_event(q.query, v) == "X1=3");
    CHECK(format_event(parse_query("X2=(1..4)", v).query, v) == "X2=(1..4)");

    CHECK_THROWS_AS(parse_query("X9=1", v), DataError);
    CHECK_THROWS_AS(parse_query("X1", v), DataError);
    CHECK_THROWS_AS(parse_query("X1=a..b", v), DataError);
    CHECK_THROWS_AS(parse_query("X1=1 X1=2", v), DataError);
}

TEST_CASE("query values may use labels")
{
    std::vector<VariableMeta> vars{VariableMeta::discrete("color", 3), VariableMeta::discrete("size", 3)};
    vars[0].labels = {"blue", "green", "red"};
    vars[1].labels = {"10", "20", "40"};
    auto q = parse_query("color=green size=15..40", vars);
    CHECK(q.query[0] == Interval::point(1));
    CHECK(q.query[1] == Interval::closed(1, 2));
    CHECK(format_event(q.query, vars) == "color=green size=20..40");
    CHECK_THROWS_AS(parse_query("color=purple", vars), DataError);
}
