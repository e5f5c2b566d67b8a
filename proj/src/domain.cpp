#include "fspn/domain.hpp"

#include <cmath>
#include <sstream>

namespace fspn {

VariableMeta VariableMeta::discrete(std::string name, int cardinality)
{
    VariableMeta m;
    m.name = std::move(name);
    m.kind = VarKind::discrete;
    m.cardinality = cardinality;
    return m;
}

VariableMeta VariableMeta::continuous(std::string name, double lo, double hi)
{
    VariableMeta m;
    m.name = std::move(name);
    m.kind = VarKind::continuous;
    m.lo = lo;
    m.hi = hi;
    return m;
}

std::string VariableMeta::check() const
{
    if (is_discrete()) {
        if (cardinality < 1)
            return "discrete variable '" + name + "' has cardinality < 1";
        if (!labels.empty() && static_cast<int>(labels.size()) != cardinality)
            return "discrete variable '" + name + "' has label count != cardinality";
        return {};
    }
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
        return "continuous variable '" + name + "' needs finite lo < hi";
    return {};
}

bool Interval::contains(double v) const
{
    if (v < lo || v > hi)
        return false;
    if (v == lo && lo_open)
        return false;
    if (v == hi && hi_open)
        return false;
    return true;
}

Interval full_interval(const VariableMeta& meta)
{
    return Interval::closed(meta.domain_lo(), meta.domain_hi());
}

std::optional<Interval> normalize(const Interval& iv, const VariableMeta& meta)
{
    if (std::isnan(iv.lo) || std::isnan(iv.hi))
        throw std::invalid_argument("interval bound is NaN");
    if (meta.is_discrete()) {
        double lo = iv.lo_open ? std::floor(iv.lo) + 1.0 : std::ceil(iv.lo);
        double hi = iv.hi_open ? std::ceil(iv.hi) - 1.0 : std::floor(iv.hi);
        lo = std::max(lo, meta.domain_lo());
        hi = std::min(hi, meta.domain_hi());
        if (lo > hi)
            return std::nullopt;
        return Interval::closed(lo, hi);
    }
    Interval out = iv;
    if (out.lo < meta.lo) {
        out.lo = meta.lo;
        out.lo_open = false;
    }
    if (out.hi > meta.hi) {
        out.hi = meta.hi;
        out.hi_open = false;
    }
    if (out.lo > out.hi || (out.lo == out.hi && (out.lo_open || out.hi_open)))
        return std::nullopt;
    return out;
}

std::optional<Interval> intersect(const Interval& a, const Interval& b)
{
    Interval out;
    if (a.lo > b.lo) {
        out.lo = a.lo;
        out.lo_open = a.lo_open;
    } else if (b.lo > a.lo) {
        out.lo = b.lo;
        out.lo_open = b.lo_open;
    } else {
        out.lo = a.lo;
        out.lo_open = a.lo_open || b.lo_open;
    }
    if (a.hi < b.hi) {
        out.hi = a.hi;
        out.hi_open = a.hi_open;
    } else if (b.hi < a.hi) {
        out.hi = b.hi;
        out.hi_open = b.hi_open;
    } else {
        out.hi = a.hi;
        out.hi_open = a.hi_open || b.hi_open;
    }
    if (out.lo > out.hi || (out.lo == out.hi && (out.lo_open || out.hi_open)))
        return std::nullopt;
    return out;
}

bool is_full(const Interval& iv, const VariableMeta& meta)
{
    return iv.lo <= meta.domain_lo() && iv.hi >= meta.domain_hi() &&
           !(iv.lo == meta.domain_lo() && iv.lo_open) && !(iv.hi == meta.domain_hi() && iv.hi_open);
}

double interval_measure(const Interval& iv, const VariableMeta& meta)
{
    if (meta.is_discrete())
        return iv.hi - iv.lo + 1.0;
    return iv.hi - iv.lo;
}

Event full_event(const std::vector<VariableMeta>& vars)
{
    Event e;
    e.intervals.reserve(vars.size());
    for (const auto& v : vars)
        e.intervals.push_back(full_interval(v));
    return e;
}

std::optional<Event> canonicalize(const Event& event, const std::vector<VariableMeta>& vars)
{
    if (event.size() != vars.size())
        throw std::invalid_argument("event has " + std::to_string(event.size()) + " intervals but model has " +
                                    std::to_string(vars.size()) + " variables");
    Event out;
    out.intervals.reserve(vars.size());
    for (std::size_t i = 0; i < vars.size(); ++i) {
        auto iv = normalize(event[i], vars[i]);
        if (!iv)
            return std::nullopt;
        out.intervals.push_back(*iv);
    }
    return out;
}

std::optional<Event> intersect(const Event& a, const Event& b)
{
    if (a.size() != b.size())
        throw std::invalid_argument("cannot intersect events of different arity");
    Event out;
    out.intervals.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto iv = intersect(a[i], b[i]);
        if (!iv)
            return std::nullopt;
        out.intervals.push_back(*iv);
    }
    return out;
}

namespace {
bool interval_inside(const Interval& outer, const Interval& inner)
{
    bool lo_ok = inner.lo > outer.lo || (inner.lo == outer.lo && (!outer.lo_open || inner.lo_open));
    bool hi_ok = inner.hi < outer.hi || (inner.hi == outer.hi && (!outer.hi_open || inner.hi_open));
    return lo_ok && hi_ok;
}
}  // namespace

bool contains(const Event& outer, const Event& inner)
{
    if (outer.size() != inner.size())
        return false;
    for (std::size_t i = 0; i < outer.size(); ++i)
        if (!interval_inside(outer[i], inner[i]))
            return false;
    return true;
}

double event_measure(const Event& event, const std::vector<VariableMeta>& vars)
{
    double m = 1.0;
    for (std::size_t i = 0; i < vars.size(); ++i)
        m *= interval_measure(event[i], vars[i]);
    return m;
}

std::string to_string(const Interval& iv)
{
    std::ostringstream os;
    os.precision(12);
    os << (iv.lo_open ? '(' : '[') << iv.lo << ", " << iv.hi << (iv.hi_open ? ')' : ']');
    return os.str();
}

}  // namespace fspn
