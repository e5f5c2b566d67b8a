#include <doctest.h>

#include <cmath>

#include "fspn/domain.hpp"

using namespace fspn;

TEST_CASE("discrete open bounds become closed lattice intervals")
{
    const auto x = VariableMeta::discrete("X", 21);
    auto iv = normalize(Interval{5, 6, true, false}, x);
    REQUIRE(iv);
    CHECK(*iv == Interval::closed(6, 6));

    iv = normalize(Interval{2.5, 7.5, false, false}, x);
    REQUIRE(iv);
    CHECK(*iv == Interval::closed(3, 7));

    iv = normalize(Interval{3, 4, true, true}, x);
    CHECK_FALSE(iv);
}

TEST_CASE("intervals are clipped to the domain")
{
    const auto x = VariableMeta::discrete("X", 4);
    auto iv = normalize(Interval::closed(-10, 10), x);
    REQUIRE(iv);
    CHECK(*iv == Interval::closed(0, 3));
    CHECK_FALSE(normalize(Interval::closed(7, 9), x));

    const auto y = VariableMeta::continuous("Y", -1.0, 1.0);
    auto c = normalize(Interval{-5.0, 0.5, true, true}, y);
    REQUIRE(c);
    CHECK(c->lo == -1.0);
    CHECK_FALSE(c->lo_open);
    CHECK(c->hi_open);
}

TEST_CASE("canonicalize rejects wrong arity and reports empty events")
{
    std::vector<VariableMeta> vars{VariableMeta::discrete("A", 3), VariableMeta::discrete("B", 3)};
    Event bad{{Interval::closed(0, 1)}};
    CHECK_THROWS_AS(canonicalize(bad, vars), std::invalid_argument);

    Event empty = full_event(vars);
    empty[1] = Interval::closed(5, 6);
    CHECK_FALSE(canonicalize(empty, vars));
}

TEST_CASE("interval intersection respects open endpoints")
{
    auto r = intersect(Interval{0, 5, false, true}, Interval::closed(5, 8));
    CHECK_FALSE(r);
    r = intersect(Interval{0, 5, false, false}, Interval{5, 8, true, false});
    CHECK_FALSE(r);
    r = intersect(Interval::closed(0, 5), Interval::closed(3, 8));
    REQUIRE(r);
    CHECK(*r == Interval::closed(3, 5));
}

TEST_CASE("containment and measure")
{
    std::vector<VariableMeta> vars{VariableMeta::discrete("A", 10), VariableMeta::continuous("B", 0.0, 2.0)};
    Event outer = full_event(vars);
    Event inner = outer;
    inner[0] = Interval::closed(2, 4);
    inner[1] = Interval{0.5, 1.0, true, false};
    CHECK(contains(outer, inner));
    CHECK_FALSE(contains(inner, outer));
    CHECK(event_measure(inner, vars) == doctest::Approx(1.5));
    CHECK(event_measure(outer, vars) == doctest::Approx(20.0));
}

TEST_CASE("variable metadata checks")
{
    CHECK(VariableMeta::discrete("A", 0).check() != "");
    CHECK(VariableMeta::discrete("A", 1).check() == "");
    CHECK(VariableMeta::continuous("B", 1.0, 1.0).check() != "");
    CHECK(is_full(Interval::closed(0, 9), VariableMeta::discrete("A", 10)));
    CHECK_FALSE(is_full(Interval::closed(0, 8), VariableMeta::discrete("A", 10)));
}
