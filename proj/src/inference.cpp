#include "fspn/inference.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace fspn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct RangeEvaluator {
    const std::vector<VariableMeta>& vars;

    double eval(const Node& node, const Event& ev) const
    {
        return std::visit([&](const auto& n) { return eval_node(n, ev); }, node.kind);
    }

    double eval_node(const UniLeafNode& n, const Event& ev) const
    {
        const int scope[1] = {n.variable};
        return checked(leaf_mass(n.dist, scope, ev, vars));
    }

    double eval_node(const MultiLeafNode& n, const Event& ev) const
    {
        return checked(leaf_mass(n.dist, n.scope, ev, vars));
    }

    double eval_node(const SumNode& n, const Event& ev) const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < n.children.size(); ++i)
            s += n.weights[i] * eval(n.children[i], ev);
        return s;
    }

    double eval_node(const ProductNode& n, const Event& ev) const
    {
        double p = 1.0;
        for (const auto& c : n.children) {
            p *= eval(c, ev);
            if (p == 0.0)
                break;
        }
        return p;
    }

    double eval_node(const FactorizeNode& n, const Event& ev) const { return conditional(n.right(), ev, n.left()); }

    double eval_node(const SplitNode&, const Event&) const
    {
        throw ModelError("split node outside the conditional side of a factorize node");
    }

    // Walks the split tree under a factorize node. Each multi-leaf reached
    // contributes mass(H-part) * Pr_left(W-part) for the event clipped to its region.
    double conditional(const Node& node, const Event& ev, const Node& left) const
    {
        if (const auto* s = node.as<SplitNode>()) {
            double total = 0.0;
            for (std::size_t i = 0; i < s->children.size(); ++i) {
                if (auto part = intersect(ev, s->regions[i]))
                    total += conditional(s->children[i], *part, left);
            }
            return total;
        }
        const auto* leaf = node.as<MultiLeafNode>();
        if (!leaf)
            throw ModelError("unexpected node under the conditional side of a factorize node");
        auto part = intersect(ev, leaf->condition_region);
        if (!part)
            return 0.0;
        const double p = checked(leaf_mass(leaf->dist, leaf->scope, *part, vars));
        if (p == 0.0)
            return 0.0;
        return p * eval(left, *part);
    }

    static double checked(double v)
    {
        if (std::isnan(v))
            throw ModelError("leaf evaluation produced NaN");
        return v;
    }
};

double logsumexp(const std::vector<double>& xs)
{
    double mx = -kInf;
    for (double x : xs)
        mx = std::max(mx, x);
    if (!std::isfinite(mx))
        return mx;
    double s = 0.0;
    for (double x : xs)
        s += std::exp(x - mx);
    return mx + std::log(s);
}

struct PointEvaluator {
    const std::vector<VariableMeta>& vars;
    std::span<const double> row;
    std::vector<double> clamped;

    PointEvaluator(const std::vector<VariableMeta>& v, std::span<const double> r) : vars(v), row(r)
    {
        clamped.assign(r.begin(), r.end());
        for (std::size_t i = 0; i < vars.size(); ++i)
            clamped[i] = std::clamp(clamped[i], vars[i].domain_lo(), vars[i].domain_hi());
    }

    double eval(const Node& node) const
    {
        if (const auto* u = node.as<UniLeafNode>()) {
            const int scope[1] = {u->variable};
            return leaf_log_density(u->dist, scope, row, vars);
        }
        if (const auto* s = node.as<SumNode>()) {
            std::vector<double> terms;
            terms.reserve(s->children.size());
            for (std::size_t i = 0; i < s->children.size(); ++i)
                terms.push_back(std::log(s->weights[i]) + eval(s->children[i]));
            return logsumexp(terms);
        }
        if (const auto* p = node.as<ProductNode>()) {
            double total = 0.0;
            for (const auto& c : p->children)
                total += eval(c);
            return total;
        }
        if (const auto* f = node.as<FactorizeNode>()) {
            const MultiLeafNode* leaf = find_leaf(f->right());
            if (!leaf)
                return -kInf;
            const double h = leaf_log_density(leaf->dist, leaf->scope, row, vars);
            if (h == -kInf)
                return -kInf;
            return h + eval(f->left());
        }
        throw ModelError("point evaluation reached a conditional node outside a factorize node");
    }

    bool inside(const Event& region) const
    {
        for (std::size_t i = 0; i < vars.size(); ++i)
            if (!region[i].contains(clamped[i]))
                return false;
        return true;
    }

    const MultiLeafNode* find_leaf(const Node& node) const
    {
        if (const auto* s = node.as<SplitNode>()) {
            for (std::size_t i = 0; i < s->children.size(); ++i)
                if (inside(s->regions[i]))
                    return find_leaf(s->children[i]);
            return nullptr;
        }
        const auto* leaf = node.as<MultiLeafNode>();
        if (leaf && inside(leaf->condition_region))
            return leaf;
        return nullptr;
    }
};

bool constrains(const Interval& iv, const VariableMeta& meta)
{
    return !is_full(iv, meta);
}

Event canonical_or_throw(const Event& event, const std::vector<VariableMeta>& vars, bool& empty)
{
    try {
        auto c = canonicalize(event, vars);
        empty = !c.has_value();
        return c ? *c : Event{};
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
}

// ---- query text ----

std::optional<double> parse_number(const std::string& s)
{
    if (s.empty())
        return std::nullopt;
    if (s == "inf" || s == "+inf")
        return kInf;
    if (s == "-inf")
        return -kInf;
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+')
        ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

std::string number_text(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

bool numeric_labels(const VariableMeta& meta)
{
    if (meta.labels.empty())
        return false;
    for (const auto& l : meta.labels)
        if (!parse_number(l))
            return false;
    return true;
}

// Interval in source units on a discrete variable with numeric labels, mapped
// to the codes whose label lies inside it.
Interval labels_to_codes(const VariableMeta& meta, const Interval& src)
{
    int lo = meta.cardinality;
    int hi = -1;
    for (int c = 0; c < meta.cardinality; ++c) {
        if (src.contains(*parse_number(meta.labels[static_cast<std::size_t>(c)]))) {
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
    }
    if (hi < 0)
        return Interval::closed(1.0, 0.0);  // empty
    return Interval::closed(lo, hi);
}

double resolve_code(const VariableMeta& meta, const std::string& text)
{
    for (std::size_t c = 0; c < meta.labels.size(); ++c)
        if (meta.labels[c] == text)
            return static_cast<double>(c);
    if (auto v = parse_number(text))
        return *v;
    throw DataError("variable '" + meta.name + "': unknown value '" + text + "'");
}

Interval parse_interval(const VariableMeta& meta, std::string spec)
{
    Interval iv;
    if (!spec.empty() && (spec.front() == '(' || spec.front() == '[')) {
        iv.lo_open = spec.front() == '(';
        spec.erase(0, 1);
    }
    if (!spec.empty() && (spec.back() == ')' || spec.back() == ']')) {
        iv.hi_open = spec.back() == ')';
        spec.pop_back();
    }
    std::string lo_text, hi_text;
    if (const auto dots = spec.find(".."); dots != std::string::npos) {
        lo_text = spec.substr(0, dots);
        hi_text = spec.substr(dots + 2);
    } else {
        if (spec.empty())
            throw DataError("variable '" + meta.name + "': empty value");
        lo_text = hi_text = spec;
    }

    const bool by_source = numeric_labels(meta);
    auto bound = [&](const std::string& t, double missing) {
        if (t.empty())
            return missing;
        if (!meta.is_discrete() || by_source) {
            auto v = parse_number(t);
            if (!v)
                throw DataError("variable '" + meta.name + "': not a number '" + t + "'");
            return *v;
        }
        return resolve_code(meta, t);
    };
    iv.lo = bound(lo_text, -kInf);
    iv.hi = bound(hi_text, kInf);
    if (lo_text.empty())
        iv.lo_open = false;
    if (hi_text.empty())
        iv.hi_open = false;
    if (by_source)
        return labels_to_codes(meta, iv);
    return iv;
}

Event parse_tokens(const std::string& text, const std::vector<VariableMeta>& vars)
{
    Event ev = full_event(vars);
    std::vector<bool> seen(vars.size(), false);
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0)
            throw DataError("bad query token '" + tok + "' (expected name=value)");
        const auto name = tok.substr(0, eq);
        std::size_t idx = vars.size();
        for (std::size_t i = 0; i < vars.size(); ++i)
            if (vars[i].name == name)
                idx = i;
        if (idx == vars.size())
            throw DataError("unknown variable '" + name + "'");
        if (seen[idx])
            throw DataError("variable '" + name + "' constrained twice");
        seen[idx] = true;
        Interval iv = parse_interval(vars[idx], tok.substr(eq + 1));
        if (iv.lo == -kInf)
            iv.lo = vars[idx].domain_lo();
        if (iv.hi == kInf)
            iv.hi = vars[idx].domain_hi();
        ev[idx] = iv;
    }
    return ev;
}

std::string bound_text(const VariableMeta& meta, double v)
{
    if (meta.is_discrete() && !meta.labels.empty()) {
        const auto c = static_cast<long long>(v);
        if (c >= 0 && c < meta.cardinality && static_cast<double>(c) == v)
            return meta.labels[static_cast<std::size_t>(c)];
    }
    return number_text(v);
}

}  // namespace

double infer_marginal(const FspnModel& model, const Event& event)
{
    bool empty = false;
    const Event ev = canonical_or_throw(event, model.variables, empty);
    if (empty)
        return 0.0;
    const double p = RangeEvaluator{model.variables}.eval(model.root, ev);
    if (std::isnan(p))
        throw ModelError("inference produced NaN");
    return std::clamp(p, 0.0, 1.0);
}

double infer_evidence(const FspnModel& model, const Event& query, const Event& evidence)
{
    const auto& vars = model.variables;
    if (query.size() != vars.size() || evidence.size() != vars.size())
        throw DataError("event arity does not match the model");
    bool empty = false;
    const Event q = canonical_or_throw(query, vars, empty);
    const bool q_empty = empty;
    const Event e = canonical_or_throw(evidence, vars, empty);
    if (empty)
        throw DataError("evidence has zero mass");
    if (!q_empty)
        for (std::size_t i = 0; i < vars.size(); ++i)
            if (constrains(q[i], vars[i]) && constrains(e[i], vars[i]))
                throw DataError("query and evidence both constrain '" + vars[i].name + "'");

    const double pe = infer_marginal(model, e);
    if (pe < 1e-12)
        throw DataError("evidence has zero mass");
    if (q_empty)
        return 0.0;
    const auto joint = intersect(q, e);
    if (!joint)
        return 0.0;
    return std::clamp(infer_marginal(model, *joint) / pe, 0.0, 1.0);
}

double point_log_density(const FspnModel& model, std::span<const double> row)
{
    if (row.size() != model.variables.size())
        throw DataError("row has " + std::to_string(row.size()) + " values but model has " +
                        std::to_string(model.variables.size()) + " variables");
    const double v = PointEvaluator(model.variables, row).eval(model.root);
    if (std::isnan(v))
        throw ModelError("point evaluation produced NaN");
    return v;
}

LogLikelihood log_likelihood(const FspnModel& model, const DataMatrix& data)
{
    const auto& vars = model.variables;
    if (data.n_cols() != vars.size())
        throw DataError("data has " + std::to_string(data.n_cols()) + " columns but model has " +
                        std::to_string(vars.size()) + " variables");
    for (std::size_t j = 0; j < vars.size(); ++j)
        if (data.variables[j].kind != vars[j].kind)
            throw DataError("column " + std::to_string(j) + " ('" + data.variables[j].name +
                            "') has a different kind than the model variable");
    LogLikelihood out;
    out.per_row.reserve(data.n_rows());
    double sum = 0.0;
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
        const double ll = point_log_density(model, data.row(r));
        out.per_row.push_back(ll);
        sum += ll;
    }
    out.average = data.n_rows() ? sum / static_cast<double>(data.n_rows()) : 0.0;
    return out;
}

EventPartition partition_event_by_multileaves(const Event& event, std::span<const MultiLeafNode* const> leaves)
{
    EventPartition parts;
    for (std::size_t i = 0; i < leaves.size(); ++i)
        if (auto p = intersect(event, leaves[i]->condition_region))
            parts.push_back({std::move(*p), i});
    return parts;
}

ParsedQuery parse_query(const std::string& line, const std::vector<VariableMeta>& vars)
{
    ParsedQuery out;
    const auto bar = line.find('|');
    out.query = parse_tokens(line.substr(0, bar), vars);
    if (bar != std::string::npos)
        out.evidence = parse_tokens(line.substr(bar + 1), vars);
    return out;
}

std::string format_event(const Event& event, const std::vector<VariableMeta>& vars)
{
    std::string out;
    for (std::size_t i = 0; i < vars.size() && i < event.size(); ++i) {
        const auto& iv = event[i];
        const auto& meta = vars[i];
        if (is_full(iv, meta))
            continue;
        if (!out.empty())
            out += ' ';
        out += meta.name + '=';
        if (iv.lo == iv.hi && !iv.lo_open && !iv.hi_open) {
            out += bound_text(meta, iv.lo);
            continue;
        }
        if (iv.lo_open)
            out += '(';
        out += bound_text(meta, iv.lo) + ".." + bound_text(meta, iv.hi);
        if (iv.hi_open)
            out += ')';
    }
    return out;
}

}  // namespace fspn
