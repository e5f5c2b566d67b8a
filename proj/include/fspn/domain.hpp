#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fspn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, tables, queries).
class DataError : public Error {
public:
    using Error::Error;
};

/// Corrupt or structurally invalid model.
class ModelError : public Error {
public:
    using Error::Error;
};

enum class VarKind { discrete, continuous };

/// Metadata of one model variable.
///
/// Discrete variables are integer coded 0..cardinality-1; `labels` optionally
/// maps each code back to the source value. Continuous variables carry a
/// closed domain interval in source units.
struct VariableMeta {
    std::string name;
    VarKind kind = VarKind::discrete;
    int cardinality = 0;
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::string> labels;

    static VariableMeta discrete(std::string name, int cardinality);
    static VariableMeta continuous(std::string name, double lo, double hi);

    bool is_discrete() const { return kind == VarKind::discrete; }
    double domain_lo() const { return is_discrete() ? 0.0 : lo; }
    double domain_hi() const { return is_discrete() ? static_cast<double>(cardinality - 1) : hi; }

    /// Empty string when the invariants hold, otherwise a description.
    std::string check() const;

    bool operator==(const VariableMeta&) const = default;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool lo_open = false;
    bool hi_open = false;

    static Interval closed(double lo, double hi) { return {lo, hi, false, false}; }
    static Interval point(double v) { return {v, v, false, false}; }

    bool contains(double v) const;
    bool operator==(const Interval&) const = default;
};

/// Interval covering the whole domain of `meta`.
Interval full_interval(const VariableMeta& meta);

/// Clips `iv` to the domain of `meta`; discrete intervals are moved onto the
/// integer lattice with closed endpoints. Returns nullopt when empty.
std::optional<Interval> normalize(const Interval& iv, const VariableMeta& meta);

/// Intersection of two intervals of the same variable; nullopt when empty.
std::optional<Interval> intersect(const Interval& a, const Interval& b);

bool is_full(const Interval& iv, const VariableMeta& meta);

/// Lattice point count (discrete) or length (continuous) of a normalized interval.
double interval_measure(const Interval& iv, const VariableMeta& meta);

/// Axis-aligned hyper-rectangle with one interval per model variable.
struct Event {
    std::vector<Interval> intervals;

    std::size_t size() const { return intervals.size(); }
    Interval& operator[](std::size_t i) { return intervals[i]; }
    const Interval& operator[](std::size_t i) const { return intervals[i]; }
    bool operator==(const Event&) const = default;
};

Event full_event(const std::vector<VariableMeta>& vars);

/// Clips and normalizes every interval. Throws std::invalid_argument when the
/// event does not have one interval per variable; returns nullopt when empty.
std::optional<Event> canonicalize(const Event& event, const std::vector<VariableMeta>& vars);

/// Per-variable intersection of two canonical events; nullopt when empty.
std::optional<Event> intersect(const Event& a, const Event& b);

/// True when every interval of `inner` lies inside the matching one of `outer`.
bool contains(const Event& outer, const Event& inner);

/// Product of per-variable measures.
double event_measure(const Event& event, const std::vector<VariableMeta>& vars);

std::string to_string(const Interval& iv);

}  // namespace fspn
