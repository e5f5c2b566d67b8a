#include "fspn/compile.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace fspn {

std::size_t JointTable::flat_index(std::span<const int> point) const
{
    std::size_t flat = 0;
    for (std::size_t a = 0; a < dims.size(); ++a)
        flat = flat * static_cast<std::size_t>(dims[a]) + static_cast<std::size_t>(point[a]);
    return flat;
}

void JointTable::unflatten(std::size_t flat, std::span<int> point) const
{
    for (std::size_t a = dims.size(); a-- > 0;) {
        point[a] = static_cast<int>(flat % static_cast<std::size_t>(dims[a]));
        flat /= static_cast<std::size_t>(dims[a]);
    }
}

std::string JointTable::check() const
{
    double cells = 1.0;
    for (int d : dims)
        cells *= d;
    if (cells != static_cast<double>(masses.size()))
        return "mass count does not match the lattice";
    double total = 0.0;
    for (double m : masses) {
        if (!(m >= 0.0))
            return "negative mass";
        total += m;
    }
    if (std::abs(total - 1.0) > 1e-9)
        return "masses sum " + std::to_string(total);
    return "";
}

std::size_t lattice_cells(std::span<const int> dims)
{
    double cells = 1.0;
    for (int d : dims)
        cells *= d;
    if (cells > JointTable::kMaxCells)
        throw DataError("joint lattice of " + std::to_string(static_cast<long long>(cells)) +
                        " states exceeds the limit of 1000000");
    return static_cast<std::size_t>(cells);
}

std::size_t BayesNet::cpt_rows(std::size_t node) const
{
    std::size_t rows = 1;
    for (int p : parents[node])
        rows *= static_cast<std::size_t>(variables[static_cast<std::size_t>(p)].cardinality);
    return rows;
}

double BayesNet::conditional(std::size_t node, int value, std::span<const int> assignment) const
{
    std::size_t row = 0;
    for (int p : parents[node])
        row = row * static_cast<std::size_t>(variables[static_cast<std::size_t>(p)].cardinality) +
              static_cast<std::size_t>(assignment[static_cast<std::size_t>(p)]);
    return cpts[node][row * static_cast<std::size_t>(variables[node].cardinality) + static_cast<std::size_t>(value)];
}

std::size_t BayesNet::cpt_entry_count() const
{
    std::size_t n = 0;
    for (const auto& c : cpts)
        n += c.size();
    return n;
}

std::string BayesNet::check() const
{
    const std::size_t n = variables.size();
    if (n == 0)
        return "network has no variables";
    if (parents.size() != n || cpts.size() != n)
        return "parent or CPT list does not match the variable count";
    for (std::size_t i = 0; i < n; ++i) {
        if (!variables[i].is_discrete())
            return "variable '" + variables[i].name + "' is not discrete";
        if (auto msg = variables[i].check(); !msg.empty())
            return msg;
        for (int p : parents[i])
            if (p < 0 || static_cast<std::size_t>(p) >= n || static_cast<std::size_t>(p) == i)
                return "bad parent of '" + variables[i].name + "'";
        if (!std::is_sorted(parents[i].begin(), parents[i].end()) ||
            std::adjacent_find(parents[i].begin(), parents[i].end()) != parents[i].end())
            return "parents of '" + variables[i].name + "' are not sorted and distinct";
    }

    // Kahn's algorithm
    std::vector<int> indegree(n, 0);
    std::vector<std::vector<std::size_t>> children(n);
    for (std::size_t i = 0; i < n; ++i)
        for (int p : parents[i]) {
            children[static_cast<std::size_t>(p)].push_back(i);
            ++indegree[i];
        }
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0)
            ready.push_back(i);
    std::size_t seen = 0;
    while (!ready.empty()) {
        const auto v = ready.back();
        ready.pop_back();
        ++seen;
        for (auto c : children[v])
            if (--indegree[c] == 0)
                ready.push_back(c);
    }
    if (seen != n)
        return "network has a cycle";

    for (std::size_t i = 0; i < n; ++i) {
        const auto card = static_cast<std::size_t>(variables[i].cardinality);
        if (cpts[i].size() != cpt_rows(i) * card)
            return "incomplete CPT for '" + variables[i].name + "'";
        for (std::size_t r = 0; r < cpt_rows(i); ++r) {
            double total = 0.0;
            for (std::size_t v = 0; v < card; ++v) {
                const double p = cpts[i][r * card + v];
                if (!(p >= 0.0))
                    return "negative probability in CPT of '" + variables[i].name + "'";
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-9)
                return "CPT row " + std::to_string(r) + " of '" + variables[i].name + "' sums to " +
                       std::to_string(total);
        }
    }
    return "";
}

// ---- text format ----

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

[[noreturn]] void fail(int line, const std::string& msg)
{
    throw DataError("bayes net line " + std::to_string(line) + ": " + msg);
}

double parse_number(const std::string& tok, int line)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used == tok.size())
            return v;
    } catch (const std::exception&) {
    }
    fail(line, "not a number '" + tok + "'");
}

std::vector<std::string> words(const std::string& s)
{
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;)
        out.push_back(w);
    return out;
}

}  // namespace

BayesNet parse_bayes_net(const std::string& text)
{
    BayesNet bn;
    std::map<std::string, int> index;
    // cpt rows per node keyed by parent assignment row index
    std::vector<std::map<std::size_t, std::vector<double>>> rows;
    enum class Section { none, variables, edges, cpt } section = Section::none;
    int cpt_node = -1;

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw.substr(0, raw.find('#'));
        line = trim(line);
        if (line.empty())
            continue;
        const auto w = words(line);
        if (w[0] == "variables" && w.size() == 1) {
            section = Section::variables;
            continue;
        }
        if (w[0] == "edges" && w.size() == 1) {
            section = Section::edges;
            continue;
        }
        if (w[0] == "cpt") {
            if (w.size() != 2 || !index.contains(w[1]))
                fail(line_no, "expected 'cpt <variable>'");
            section = Section::cpt;
            cpt_node = index[w[1]];
            if (!rows[static_cast<std::size_t>(cpt_node)].empty())
                fail(line_no, "second CPT for '" + w[1] + "'");
            continue;
        }
        switch (section) {
        case Section::none:
            fail(line_no, "content before any section");
        case Section::variables: {
            if (w.size() != 2)
                fail(line_no, "expected '<name> <cardinality>'");
            if (index.contains(w[0]))
                fail(line_no, "duplicate variable '" + w[0] + "'");
            const double card = parse_number(w[1], line_no);
            if (card < 2 || card != std::floor(card))
                fail(line_no, "cardinality must be an integer >= 2");
            index[w[0]] = static_cast<int>(bn.variables.size());
            bn.variables.push_back(VariableMeta::discrete(w[0], static_cast<int>(card)));
            bn.parents.emplace_back();
            rows.emplace_back();
            break;
        }
        case Section::edges: {
            if (w.size() != 3 || w[1] != "->")
                fail(line_no, "expected '<parent> -> <child>'");
            if (!index.contains(w[0]) || !index.contains(w[2]))
                fail(line_no, "unknown variable in edge");
            auto& ps = bn.parents[static_cast<std::size_t>(index[w[2]])];
            if (std::find(ps.begin(), ps.end(), index[w[0]]) != ps.end())
                fail(line_no, "duplicate edge");
            ps.push_back(index[w[0]]);
            std::sort(ps.begin(), ps.end());
            break;
        }
        case Section::cpt: {
            const auto node = static_cast<std::size_t>(cpt_node);
            const auto colon = line.find(':');
            const auto lhs = colon == std::string::npos ? std::vector<std::string>{} : words(line.substr(0, colon));
            const auto rhs = words(colon == std::string::npos ? line : line.substr(colon + 1));
            const auto& ps = bn.parents[node];
            if (lhs.size() != ps.size())
                fail(line_no, "expected " + std::to_string(ps.size()) + " parent values before ':'");
            std::size_t row = 0;
            for (std::size_t k = 0; k < ps.size(); ++k) {
                const int card = bn.variables[static_cast<std::size_t>(ps[k])].cardinality;
                const double v = parse_number(lhs[k], line_no);
                if (v < 0 || v >= card || v != std::floor(v))
                    fail(line_no, "parent value out of range");
                row = row * static_cast<std::size_t>(card) + static_cast<std::size_t>(v);
            }
            if (rhs.size() != static_cast<std::size_t>(bn.variables[node].cardinality))
                fail(line_no, "expected " + std::to_string(bn.variables[node].cardinality) + " probabilities");
            std::vector<double> probs;
            for (const auto& t : rhs)
                probs.push_back(parse_number(t, line_no));
            if (rows[node].contains(row))
                fail(line_no, "duplicate CPT row");
            rows[node][row] = std::move(probs);
            break;
        }
        }
    }

    for (std::size_t i = 0; i < bn.size(); ++i) {
        if (rows[i].size() != bn.cpt_rows(i))
            throw DataError("incomplete CPT for '" + bn.variables[i].name + "'");
        std::vector<double> flat;
        for (auto& [r, probs] : rows[i])
            flat.insert(flat.end(), probs.begin(), probs.end());
        bn.cpts.push_back(std::move(flat));
    }
    if (bn.cpts.size() != bn.size())
        bn.cpts.resize(bn.size());
    if (auto msg = bn.check(); !msg.empty())
        throw DataError(msg);
    return bn;
}

BayesNet load_bayes_net(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return parse_bayes_net(s.str());
}

std::string format_bayes_net(const BayesNet& bn)
{
    std::ostringstream out;
    out.precision(17);
    out << "variables\n";
    for (const auto& v : bn.variables)
        out << v.name << ' ' << v.cardinality << '\n';
    out << "edges\n";
    for (std::size_t i = 0; i < bn.size(); ++i)
        for (int p : bn.parents[i])
            out << bn.variables[static_cast<std::size_t>(p)].name << " -> " << bn.variables[i].name << '\n';
    for (std::size_t i = 0; i < bn.size(); ++i) {
        out << "cpt " << bn.variables[i].name << '\n';
        const auto& ps = bn.parents[i];
        const auto card = static_cast<std::size_t>(bn.variables[i].cardinality);
        for (std::size_t r = 0; r < bn.cpt_rows(i); ++r) {
            std::vector<int> vals(ps.size());
            std::size_t rem = r;
            for (std::size_t k = ps.size(); k-- > 0;) {
                const auto pc = static_cast<std::size_t>(bn.variables[static_cast<std::size_t>(ps[k])].cardinality);
                vals[k] = static_cast<int>(rem % pc);
                rem /= pc;
            }
            for (int v : vals)
                out << v << ' ';
            out << ':';
            for (std::size_t v = 0; v < card; ++v)
                out << ' ' << bn.cpts[i][r * card + v];
            out << '\n';
        }
    }
    return out.str();
}

// ---- compilation ----

namespace {

class Compiler {
public:
    explicit Compiler(const BayesNet& bn) : bn_(bn), children_(bn.size())
    {
        for (std::size_t i = 0; i < bn.size(); ++i)
            for (int p : bn.parents[i])
                children_[static_cast<std::size_t>(p)].push_back(static_cast<int>(i));
    }

    Node compile(const VarSet& scope)
    {
        const auto parts = components(scope);
        if (parts.size() > 1) {
            ProductNode prod;
            for (const auto& part : parts) {
                prod.children.push_back(compile(part));
                prod.child_scopes.push_back(part);
            }
            return Node{std::move(prod)};
        }

        // lowest-index variable with no child inside the scope
        int sink = -1;
        for (int v : scope) {
            const auto& ch = children_[static_cast<std::size_t>(v)];
            if (std::none_of(ch.begin(), ch.end(), [&](int c) { return std::binary_search(scope.begin(), scope.end(), c); })) {
                sink = v;
                break;
            }
        }
        const auto s = static_cast<std::size_t>(sink);
        if (bn_.parents[s].empty())
            return Node{UniLeafNode{sink, Histogram{bn_.cpts[s]}}};

        FactorizeNode f;
        f.h_scope = {sink};
        std::copy_if(scope.begin(), scope.end(), std::back_inserter(f.w_scope), [&](int v) { return v != sink; });
        f.children.push_back(compile(f.w_scope));
        f.children.push_back(parent_splits(sink, full_event(bn_.variables), 0, 0));
        return Node{std::move(f)};
    }

private:
    std::vector<VarSet> components(const VarSet& scope) const
    {
        std::vector<VarSet> out;
        std::vector<bool> done(bn_.size(), false);
        auto in_scope = [&](int v) { return std::binary_search(scope.begin(), scope.end(), v); };
        for (int start : scope) {
            if (done[static_cast<std::size_t>(start)])
                continue;
            VarSet comp;
            std::vector<int> stack{start};
            done[static_cast<std::size_t>(start)] = true;
            while (!stack.empty()) {
                const int v = stack.back();
                stack.pop_back();
                comp.push_back(v);
                auto visit = [&](int u) {
                    if (in_scope(u) && !done[static_cast<std::size_t>(u)]) {
                        done[static_cast<std::size_t>(u)] = true;
                        stack.push_back(u);
                    }
                };
                for (int p : bn_.parents[static_cast<std::size_t>(v)])
                    visit(p);
                for (int c : children_[static_cast<std::size_t>(v)])
                    visit(c);
            }
            std::sort(comp.begin(), comp.end());
            out.push_back(std::move(comp));
        }
        return out;
    }

    // Nested binary splits over the parents in index order, one leaf per CPT row.
    Node parent_splits(int node, const Event& region, std::size_t parent_pos, std::size_t row)
    {
        const auto n = static_cast<std::size_t>(node);
        const auto& ps = bn_.parents[n];
        if (parent_pos == ps.size()) {
            const auto card = static_cast<std::size_t>(bn_.variables[n].cardinality);
            std::vector<double> probs(bn_.cpts[n].begin() + static_cast<std::ptrdiff_t>(row * card),
                                      bn_.cpts[n].begin() + static_cast<std::ptrdiff_t>((row + 1) * card));
            return Node{MultiLeafNode{{node}, region,
                                      DenseJointHistogram({static_cast<int>(card)}, std::move(probs))}};
        }
        return peel(node, region, parent_pos, row, 0);
    }

    // Splits off parent value `value` from the values above it.
    Node peel(int node, const Event& region, std::size_t parent_pos, std::size_t row, int value)
    {
        const auto p = static_cast<std::size_t>(bn_.parents[static_cast<std::size_t>(node)][parent_pos]);
        const int card = bn_.variables[p].cardinality;
        const auto next_row = [&](int v) { return row * static_cast<std::size_t>(card) + static_cast<std::size_t>(v); };

        Event left = region, right = region;
        left[p] = Interval::point(value);
        right[p] = Interval::closed(value + 1, card - 1);
        SplitNode s;
        s.regions = {left, right};
        s.children.push_back(parent_splits(node, left, parent_pos + 1, next_row(value)));
        if (value + 1 == card - 1)
            s.children.push_back(parent_splits(node, right, parent_pos + 1, next_row(value + 1)));
        else
            s.children.push_back(peel(node, right, parent_pos, row, value + 1));
        return Node{std::move(s)};
    }

    const BayesNet& bn_;
    std::vector<std::vector<int>> children_;
};

}  // namespace

FspnModel bn_to_fspn(const BayesNet& bn)
{
    if (auto msg = bn.check(); !msg.empty())
        throw DataError("invalid bayes net: " + msg);
    VarSet all(bn.size());
    std::iota(all.begin(), all.end(), 0);
    FspnModel m;
    m.variables = bn.variables;
    m.root = Compiler(bn).compile(all);
    return m;
}

JointTable bn_joint(const BayesNet& bn)
{
    if (auto msg = bn.check(); !msg.empty())
        throw DataError("invalid bayes net: " + msg);
    JointTable t;
    for (const auto& v : bn.variables)
        t.dims.push_back(v.cardinality);
    t.masses.resize(lattice_cells(t.dims));
    std::vector<int> x(bn.size());
    for (std::size_t flat = 0; flat < t.masses.size(); ++flat) {
        t.unflatten(flat, x);
        double p = 1.0;
        for (std::size_t i = 0; i < bn.size(); ++i)
            p *= bn.conditional(i, x[i], x);
        t.masses[flat] = p;
    }
    return t;
}

BayesNet random_bayes_net(int n_nodes, int max_card, double edge_prob, int max_parents, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> card(2, std::max(2, max_card));
    std::bernoulli_distribution edge(edge_prob);
    std::exponential_distribution<double> gamma1(1.0);

    BayesNet bn;
    for (int i = 0; i < n_nodes; ++i)
        bn.variables.push_back(VariableMeta::discrete("N" + std::to_string(i), card(rng)));
    bn.parents.resize(static_cast<std::size_t>(n_nodes));
    for (int j = 0; j < n_nodes; ++j) {
        std::vector<int> ps;
        for (int i = 0; i < j; ++i)
            if (edge(rng))
                ps.push_back(i);
        std::shuffle(ps.begin(), ps.end(), rng);
        if (static_cast<int>(ps.size()) > max_parents)
            ps.resize(static_cast<std::size_t>(max_parents));
        std::sort(ps.begin(), ps.end());
        bn.parents[static_cast<std::size_t>(j)] = std::move(ps);
    }
    for (std::size_t i = 0; i < bn.size(); ++i) {
        const auto c = static_cast<std::size_t>(bn.variables[i].cardinality);
        std::vector<double> cpt(bn.cpt_rows(i) * c);
        for (std::size_t r = 0; r < bn.cpt_rows(i); ++r) {
            double total = 0.0;
            for (std::size_t v = 0; v < c; ++v)
                total += (cpt[r * c + v] = gamma1(rng));
            for (std::size_t v = 0; v < c; ++v)
                cpt[r * c + v] /= total;
        }
        bn.cpts.push_back(std::move(cpt));
    }
    return bn;
}

}  // namespace fspn
