#include "fspn/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace fspn {

const std::vector<Node>* Node::children() const
{
    return std::visit(
        [](const auto& n) -> const std::vector<Node>* {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, UniLeafNode> || std::is_same_v<T, MultiLeafNode>)
                return nullptr;
            else
                return &n.children;
        },
        kind);
}

namespace {

bool sorted_unique(const VarSet& s)
{
    return std::adjacent_find(s.begin(), s.end(), [](int a, int b) { return a >= b; }) == s.end();
}

VarSet set_union(const VarSet& a, const VarSet& b)
{
    VarSet out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

bool disjoint(const VarSet& a, const VarSet& b)
{
    VarSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out.empty();
}

std::string set_text(const VarSet& s)
{
    std::string out = "{";
    for (std::size_t i = 0; i < s.size(); ++i)
        out += (i ? "," : "") + std::to_string(s[i]);
    return out + "}";
}

class Validator {
public:
    Validator(const FspnModel& model, ValidationReport& report) : model_(model), report_(report) {}

    VarSet check(const Node& node, const std::string& path);

private:
    VarSet check_conditional(const Node& node, const std::string& path, const VarSet& cond, const Event& region);
    void fail(const std::string& path, std::string message) { report_.push_back({path, std::move(message)}); }
    bool check_scope_indices(const VarSet& s, const std::string& path, const char* what);

    const FspnModel& model_;
    ValidationReport& report_;
};

bool Validator::check_scope_indices(const VarSet& s, const std::string& path, const char* what)
{
    if (!sorted_unique(s)) {
        fail(path, std::string(what) + " is not sorted and duplicate-free");
        return false;
    }
    for (int v : s)
        if (v < 0 || static_cast<std::size_t>(v) >= model_.variables.size()) {
            fail(path, std::string(what) + " references unknown variable " + std::to_string(v));
            return false;
        }
    return true;
}

VarSet Validator::check(const Node& node, const std::string& path)
{
    if (const auto* f = node.as<FactorizeNode>()) {
        if (f->children.size() != 2) {
            fail(path, "factorize node needs exactly two children");
            return {};
        }
        check_scope_indices(f->h_scope, path, "h_scope");
        check_scope_indices(f->w_scope, path, "w_scope");
        if (f->h_scope.empty())
            fail(path, "factorize h_scope is empty");
        if (!disjoint(f->h_scope, f->w_scope))
            fail(path, "factorize h_scope and w_scope overlap");
        const VarSet left = check(f->left(), path + "/left");
        if (left != f->w_scope)
            fail(path, "left child scope " + set_text(left) + " != w_scope " + set_text(f->w_scope));
        const VarSet right =
            check_conditional(f->right(), path + "/right", f->w_scope, full_event(model_.variables));
        if (right != f->h_scope)
            fail(path, "right child scope " + set_text(right) + " != h_scope " + set_text(f->h_scope));
        return set_union(f->h_scope, f->w_scope);
    }
    if (const auto* s = node.as<SumNode>()) {
        if (s->children.empty()) {
            fail(path, "sum node has no children");
            return {};
        }
        if (s->weights.size() != s->children.size())
            fail(path, "sum node weight count != child count");
        double total = 0.0;
        for (double w : s->weights) {
            if (!(w > 0.0) || !std::isfinite(w))
                fail(path, "sum weight " + std::to_string(w) + " is not positive");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            std::ostringstream os;
            os.precision(12);
            os << "weights sum " << total << " != 1";
            fail(path, os.str());
        }
        VarSet scope;
        for (std::size_t i = 0; i < s->children.size(); ++i) {
            VarSet cs = check(s->children[i], path + "/sum[" + std::to_string(i) + "]");
            if (i == 0)
                scope = cs;
            else if (cs != scope)
                fail(path, "sum children have different scopes");
        }
        return scope;
    }
    if (const auto* p = node.as<ProductNode>()) {
        if (p->children.empty()) {
            fail(path, "product node has no children");
            return {};
        }
        if (p->child_scopes.size() != p->children.size())
            fail(path, "product child_scopes count != child count");
        VarSet scope;
        for (std::size_t i = 0; i < p->children.size(); ++i) {
            const std::string cpath = path + "/product[" + std::to_string(i) + "]";
            VarSet cs = check(p->children[i], cpath);
            if (i < p->child_scopes.size() && cs != p->child_scopes[i])
                fail(cpath, "child scope " + set_text(cs) + " != declared " + set_text(p->child_scopes[i]));
            if (!disjoint(scope, cs))
                fail(path, "product child scopes are not disjoint");
            scope = set_union(scope, cs);
        }
        return scope;
    }
    if (const auto* u = node.as<UniLeafNode>()) {
        if (u->variable < 0 || static_cast<std::size_t>(u->variable) >= model_.variables.size()) {
            fail(path, "uni-leaf references unknown variable " + std::to_string(u->variable));
            return {};
        }
        if (!is_univariate(u->dist))
            fail(path, "uni-leaf holds a multivariate distribution");
        const int v = u->variable;
        if (auto msg = leaf_check(u->dist, std::span<const int>(&v, 1), model_.variables); !msg.empty())
            fail(path, msg);
        return {u->variable};
    }
    if (node.is<SplitNode>())
        fail(path, "split node outside the right child of a factorize node");
    else
        fail(path, "multi-leaf node outside the right child of a factorize node");
    return {};
}

VarSet Validator::check_conditional(const Node& node, const std::string& path, const VarSet& cond,
                                    const Event& region)
{
    const auto& vars = model_.variables;
    if (const auto* m = node.as<MultiLeafNode>()) {
        if (!check_scope_indices(m->scope, path, "multi-leaf scope"))
            return {};
        if (m->scope.empty())
            fail(path, "multi-leaf scope is empty");
        if (is_univariate(m->dist))
            fail(path, "multi-leaf holds a univariate-only distribution type");
        if (!(m->condition_region == region))
            fail(path, "multi-leaf condition region differs from the region assigned by its parent");
        if (auto msg = leaf_check(m->dist, m->scope, vars); !msg.empty())
            fail(path, msg);
        return m->scope;
    }
    const auto* s = node.as<SplitNode>();
    if (!s) {
        fail(path, "only split and multi-leaf nodes may appear below a factorize right child");
        return {};
    }
    if (s->children.empty()) {
        fail(path, "split node has no children");
        return {};
    }
    if (s->regions.size() != s->children.size()) {
        fail(path, "split region count != child count");
        return {};
    }
    const std::set<int> cond_set(cond.begin(), cond.end());
    bool regions_ok = true;
    for (std::size_t i = 0; i < s->regions.size(); ++i) {
        const Event& r = s->regions[i];
        if (r.size() != vars.size()) {
            fail(path, "region " + std::to_string(i) + " has wrong arity");
            regions_ok = false;
            continue;
        }
        for (std::size_t v = 0; v < vars.size(); ++v) {
            const auto norm = normalize(r[v], vars[v]);
            if (!norm || !(*norm == r[v])) {
                fail(path, "region " + std::to_string(i) + " interval on '" + vars[v].name + "' is not canonical");
                regions_ok = false;
            } else if (!cond_set.count(static_cast<int>(v)) && !is_full(r[v], vars[v])) {
                fail(path, "region " + std::to_string(i) + " constrains non-condition variable '" + vars[v].name + "'");
                regions_ok = false;
            }
        }
        if (regions_ok && !contains(region, r)) {
            fail(path, "region " + std::to_string(i) + " leaves the parent region");
            regions_ok = false;
        }
    }
    if (regions_ok) {
        for (std::size_t i = 0; i < s->regions.size(); ++i)
            for (std::size_t j = i + 1; j < s->regions.size(); ++j)
                if (intersect(s->regions[i], s->regions[j])) {
                    fail(path, "regions not disjoint (" + std::to_string(i) + ", " + std::to_string(j) + ")");
                    regions_ok = false;
                }
    }
    if (regions_ok) {
        double covered = 0.0;
        for (const auto& r : s->regions)
            covered += event_measure(r, vars);
        const double parent = event_measure(region, vars);
        if (std::abs(covered - parent) > 1e-9 * std::max(1.0, parent))
            fail(path, "regions do not cover the parent region");
    }
    VarSet scope;
    for (std::size_t i = 0; i < s->children.size(); ++i) {
        const Event& child_region = regions_ok ? s->regions[i] : region;
        VarSet cs = check_conditional(s->children[i], path + "/split[" + std::to_string(i) + "]", cond, child_region);
        if (i == 0)
            scope = cs;
        else if (cs != scope)
            fail(path, "split children have different scopes");
    }
    return scope;
}

void accumulate_stats(const Node& node, std::size_t level, ModelStats& st)
{
    ++st.n_nodes;
    st.depth = std::max(st.depth, level);
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, FactorizeNode>) {
                ++st.n_factorize;
            } else if constexpr (std::is_same_v<T, SumNode>) {
                ++st.n_sum;
                st.n_params += n.weights.empty() ? 0 : n.weights.size() - 1;
            } else if constexpr (std::is_same_v<T, ProductNode>) {
                ++st.n_product;
            } else if constexpr (std::is_same_v<T, SplitNode>) {
                ++st.n_split;
                st.n_params += split_cut_count(n);
            } else if constexpr (std::is_same_v<T, UniLeafNode>) {
                ++st.n_unileaf;
                st.n_params += leaf_param_count(n.dist);
            } else {
                ++st.n_multileaf;
                st.n_params += leaf_param_count(n.dist);
            }
        },
        node.kind);
    if (const auto* ch = node.children())
        for (const auto& c : *ch)
            accumulate_stats(c, level + 1, st);
}

void collect_into(const Node& node, std::vector<const MultiLeafNode*>& out)
{
    if (const auto* m = node.as<MultiLeafNode>()) {
        out.push_back(m);
    } else if (const auto* s = node.as<SplitNode>()) {
        for (const auto& c : s->children)
            collect_into(c, out);
    }
}

}  // namespace

ValidationReport validate(const FspnModel& model)
{
    ValidationReport report;
    if (model.format_version != kFormatVersion)
        report.push_back({"model", "unsupported format version " + std::to_string(model.format_version)});
    if (model.variables.empty())
        report.push_back({"model", "model has no variables"});
    std::set<std::string> names;
    for (const auto& v : model.variables) {
        if (auto msg = v.check(); !msg.empty())
            report.push_back({"variables", msg});
        if (!names.insert(v.name).second)
            report.push_back({"variables", "duplicate variable name '" + v.name + "'"});
    }
    if (!report.empty())
        return report;
    Validator validator(model, report);
    const VarSet scope = validator.check(model.root, "root");
    VarSet all(model.variables.size());
    for (std::size_t i = 0; i < all.size(); ++i)
        all[i] = static_cast<int>(i);
    if (scope != all)
        report.push_back({"root", "root scope " + set_text(scope) + " does not cover all variables"});
    return report;
}

std::string to_string(const ValidationReport& report)
{
    std::string out;
    for (const auto& v : report)
        out += v.path + ": " + v.message + "\n";
    return out;
}

ValidationError::ValidationError(ValidationReport report)
    : ModelError("model failed validation:\n" + to_string(report)), report_(std::move(report))
{
}

ModelStats stats(const FspnModel& model)
{
    ModelStats st;
    accumulate_stats(model.root, 1, st);
    return st;
}

VarSet node_scope(const Node& node)
{
    return std::visit(
        [](const auto& n) -> VarSet {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, FactorizeNode>)
                return set_union(n.h_scope, n.w_scope);
            else if constexpr (std::is_same_v<T, UniLeafNode>)
                return {n.variable};
            else if constexpr (std::is_same_v<T, MultiLeafNode>)
                return n.scope;
            else if constexpr (std::is_same_v<T, ProductNode>) {
                VarSet s;
                for (const auto& cs : n.child_scopes)
                    s = set_union(s, cs);
                return s;
            } else
                return n.children.empty() ? VarSet{} : node_scope(n.children.front());
        },
        node.kind);
}

std::vector<const MultiLeafNode*> collect_multileaves(const Node& node)
{
    std::vector<const MultiLeafNode*> out;
    collect_into(node, out);
    return out;
}

std::size_t split_cut_count(const SplitNode& split)
{
    if (split.regions.empty())
        return 0;
    std::size_t cuts = 0;
    const std::size_t m = split.regions.front().size();
    for (std::size_t v = 0; v < m; ++v) {
        std::set<std::pair<double, bool>> uppers;
        for (const auto& r : split.regions)
            uppers.emplace(r[v].hi, r[v].hi_open);
        cuts += uppers.size() - 1;
    }
    return cuts;
}

}  // namespace fspn
