#include "fspn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>

namespace fspn {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Comma split with double-quote quoting ("" escapes a quote).
std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(trim(cur));
    return out;
}

std::optional<double> parse_double(const std::string& s)
{
    if (s.empty())
        return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+')
        ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
        return std::nullopt;
    return v;
}

std::string number_text(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string quote_if_needed(const std::string& s)
{
    if (s.find_first_of(",\"") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"')
            out += '"';
        out += ch;
    }
    return out + '"';
}

struct RawTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

RawTable read_table(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open '" + path + "'");
    RawTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        auto fields = split_csv_line(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size())
            throw DataError(path + " line " + std::to_string(line_no) + ": expected " +
                            std::to_string(t.header.size()) + " fields, got " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(line_no);
    }
    if (t.header.empty())
        throw DataError("'" + path + "' has no header row");
    return t;
}

bool is_integral(double v)
{
    return std::floor(v) == v;
}

}  // namespace

std::vector<double> DataMatrix::column(std::size_t c) const
{
    std::vector<double> out(n_rows());
    for (std::size_t r = 0; r < out.size(); ++r)
        out[r] = at(r, c);
    return out;
}

DataMatrix DataMatrix::select_rows(std::span<const std::size_t> rows) const
{
    DataMatrix out;
    out.variables = variables;
    out.values.reserve(rows.size() * n_cols());
    for (auto r : rows) {
        const auto src = row(r);
        out.values.insert(out.values.end(), src.begin(), src.end());
    }
    return out;
}

void DataMatrix::append_row(std::span<const double> r)
{
    if (r.size() != n_cols())
        throw DataError("row width does not match the table");
    values.insert(values.end(), r.begin(), r.end());
}

DataMatrix load_csv(const std::string& path, const SchemaHints& hints)
{
    const RawTable t = read_table(path);
    const std::size_t m = t.header.size();
    const std::size_t n = t.rows.size();
    if (n == 0)
        throw DataError("'" + path + "' has no data rows");
    for (const auto& [name, hint] : hints)
        if (std::find(t.header.begin(), t.header.end(), name) == t.header.end())
            throw DataError("schema hint names unknown column '" + name + "'");

    DataMatrix out;
    out.values.assign(n * m, 0.0);
    for (std::size_t c = 0; c < m; ++c) {
        const auto& name = t.header[c];
        const auto it = hints.find(name);
        const KindHint hint = it == hints.end() ? KindHint::automatic : it->second;

        std::vector<std::optional<double>> nums(n);
        bool all_numeric = true;
        bool all_integral = true;
        for (std::size_t r = 0; r < n; ++r) {
            nums[r] = parse_double(t.rows[r][c]);
            if (!nums[r]) {
                all_numeric = false;
                if (hint == KindHint::continuous)
                    throw DataError(path + " line " + std::to_string(t.line_numbers[r]) + ", column '" + name +
                                    "': cannot parse number '" + t.rows[r][c] + "'");
            } else if (!is_integral(*nums[r])) {
                all_integral = false;
            }
        }
        const bool discrete =
            hint == KindHint::discrete || (hint == KindHint::automatic && (!all_numeric || all_integral));

        if (!discrete) {
            double lo = *nums[0], hi = *nums[0];
            for (const auto& v : nums) {
                lo = std::min(lo, *v);
                hi = std::max(hi, *v);
            }
            double margin = 0.01 * (hi - lo);
            if (margin == 0.0)
                margin = 0.01 * std::max(1.0, std::abs(lo));
            out.variables.push_back(VariableMeta::continuous(name, lo - margin, hi + margin));
            for (std::size_t r = 0; r < n; ++r)
                out.values[r * m + c] = *nums[r];
            continue;
        }

        // Distinct values, ordered numerically when all cells are numeric.
        std::vector<std::string> labels;
        std::vector<std::size_t> codes(n);
        if (all_numeric) {
            std::map<double, std::string> distinct;
            for (std::size_t r = 0; r < n; ++r)
                distinct.emplace(*nums[r], t.rows[r][c]);
            std::map<double, std::size_t> code_of;
            for (const auto& [v, text] : distinct) {
                code_of[v] = labels.size();
                labels.push_back(text);
            }
            for (std::size_t r = 0; r < n; ++r)
                codes[r] = code_of[*nums[r]];
        } else {
            std::set<std::string> distinct;
            for (std::size_t r = 0; r < n; ++r)
                distinct.insert(t.rows[r][c]);
            labels.assign(distinct.begin(), distinct.end());
            for (std::size_t r = 0; r < n; ++r)
                codes[r] = static_cast<std::size_t>(
                    std::lower_bound(labels.begin(), labels.end(), t.rows[r][c]) - labels.begin());
        }
        auto meta = VariableMeta::discrete(name, static_cast<int>(labels.size()));
        meta.labels = std::move(labels);
        out.variables.push_back(std::move(meta));
        for (std::size_t r = 0; r < n; ++r)
            out.values[r * m + c] = static_cast<double>(codes[r]);
    }
    return out;
}

DataMatrix load_csv_with_variables(const std::string& path, const std::vector<VariableMeta>& variables)
{
    const RawTable t = read_table(path);
    std::vector<std::size_t> source(variables.size());
    for (std::size_t j = 0; j < variables.size(); ++j) {
        const auto it = std::find(t.header.begin(), t.header.end(), variables[j].name);
        if (it == t.header.end())
            throw DataError("'" + path + "' has no column '" + variables[j].name + "'");
        source[j] = static_cast<std::size_t>(it - t.header.begin());
    }
    DataMatrix out;
    out.variables = variables;
    out.values.reserve(t.rows.size() * variables.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (std::size_t j = 0; j < variables.size(); ++j) {
            const auto& meta = variables[j];
            const auto& cell = t.rows[r][source[j]];
            auto fail = [&](const std::string& why) {
                return DataError(path + " line " + std::to_string(t.line_numbers[r]) + ", column '" + meta.name +
                                 "': " + why);
            };
            if (meta.is_discrete()) {
                double code = -1.0;
                if (!meta.labels.empty()) {
                    const auto it = std::find(meta.labels.begin(), meta.labels.end(), cell);
                    if (it != meta.labels.end()) {
                        code = static_cast<double>(it - meta.labels.begin());
                    } else if (auto v = parse_double(cell)) {
                        // numerically equal label written differently, e.g. "1.0" for "1"
                        for (std::size_t k = 0; k < meta.labels.size(); ++k)
                            if (auto lv = parse_double(meta.labels[k]); lv && *lv == *v)
                                code = static_cast<double>(k);
                    }
                    if (code < 0)
                        throw fail("unknown value '" + cell + "'");
                } else {
                    auto v = parse_double(cell);
                    if (!v || !is_integral(*v) || *v < 0 || *v >= meta.cardinality)
                        throw fail("value '" + cell + "' is not a code in 0.." + std::to_string(meta.cardinality - 1));
                    code = *v;
                }
                out.values.push_back(code);
            } else {
                auto v = parse_double(cell);
                if (!v)
                    throw fail("cannot parse number '" + cell + "'");
                out.values.push_back(*v);
            }
        }
    }
    return out;
}

void save_csv(const DataMatrix& data, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write '" + path + "'");
    for (std::size_t c = 0; c < data.n_cols(); ++c)
        out << (c ? "," : "") << quote_if_needed(data.variables[c].name);
    out << '\n';
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
        for (std::size_t c = 0; c < data.n_cols(); ++c) {
            const auto& meta = data.variables[c];
            const double v = data.at(r, c);
            if (c)
                out << ',';
            if (meta.is_discrete() && !meta.labels.empty())
                out << quote_if_needed(meta.labels[static_cast<std::size_t>(v)]);
            else
                out << number_text(v);
        }
        out << '\n';
    }
}

DataMatrix load_binary_rows(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("missing benchmark file '" + path + "'");
    DataMatrix out;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        const auto fields = split_csv_line(line);
        if (width == 0) {
            width = fields.size();
            for (std::size_t c = 0; c < width; ++c)
                out.variables.push_back(VariableMeta::discrete("V" + std::to_string(c), 2));
        } else if (fields.size() != width) {
            throw DataError(path + " line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                            " values, got " + std::to_string(fields.size()));
        }
        for (const auto& f : fields) {
            if (f == "0")
                out.values.push_back(0.0);
            else if (f == "1")
                out.values.push_back(1.0);
            else
                throw DataError(path + " line " + std::to_string(line_no) + ": non-binary value '" + f + "'");
        }
    }
    if (width == 0)
        throw DataError("benchmark file '" + path + "' is empty");
    return out;
}

BenchmarkSplits load_benchmark(const std::string& dir, const std::string& name)
{
    const std::filesystem::path base(dir);
    const char* suffixes[3] = {".ts.data", ".valid.data", ".test.data"};
    for (const char* s : suffixes) {
        const auto p = base / (name + s);
        if (!std::filesystem::exists(p))
            throw DataError("missing benchmark file '" + p.string() + "'");
    }
    BenchmarkSplits out{load_binary_rows((base / (name + suffixes[0])).string()),
                        load_binary_rows((base / (name + suffixes[1])).string()),
                        load_binary_rows((base / (name + suffixes[2])).string())};
    if (out.valid.n_cols() != out.train.n_cols() || out.test.n_cols() != out.train.n_cols())
        throw DataError("benchmark '" + name + "': column counts differ across splits (" +
                        std::to_string(out.train.n_cols()) + ", " + std::to_string(out.valid.n_cols()) + ", " +
                        std::to_string(out.test.n_cols()) + ")");
    return out;
}

// ---- synthetic generator ----

std::string SyntheticSpec::check() const
{
    if (domain_sizes.size() != n_vars)
        return "domain_sizes must list one size per variable";
    for (int d : domain_sizes)
        if (d < 2)
            return "domain sizes must be >= 2";
    if (!(noise_level >= 0.0 && noise_level <= 1.0))
        return "noise_level must be in [0, 1]";
    std::vector<bool> used(n_vars, false);
    for (const auto& g : groups) {
        if (g.empty())
            return "groups must be nonempty";
        for (int v : g) {
            if (v < 0 || static_cast<std::size_t>(v) >= n_vars)
                return "group names variable " + std::to_string(v) + " out of range";
            if (used[static_cast<std::size_t>(v)])
                return "groups must be disjoint";
            used[static_cast<std::size_t>(v)] = true;
        }
    }
    return {};
}

namespace {

void check_spec(const SyntheticSpec& spec)
{
    if (auto msg = spec.check(); !msg.empty())
        throw DataError("invalid synthetic spec: " + msg);
}

int group_classes(const SyntheticSpec& spec, const std::vector<int>& group)
{
    int k = 0;
    for (int v : group)
        k = std::max(k, spec.domain_sizes[static_cast<std::size_t>(v)]);
    return k;
}

std::vector<std::vector<int>> make_perms(const SyntheticSpec& spec, std::mt19937_64& rng)
{
    std::vector<std::vector<int>> perms(spec.n_vars);
    for (std::size_t j = 0; j < spec.n_vars; ++j) {
        perms[j].resize(static_cast<std::size_t>(spec.domain_sizes[j]));
        std::iota(perms[j].begin(), perms[j].end(), 0);
        std::shuffle(perms[j].begin(), perms[j].end(), rng);
    }
    return perms;
}

std::vector<int> ungrouped_vars(const SyntheticSpec& spec)
{
    std::vector<bool> used(spec.n_vars, false);
    for (const auto& g : spec.groups)
        for (int v : g)
            used[static_cast<std::size_t>(v)] = true;
    std::vector<int> out;
    for (std::size_t j = 0; j < spec.n_vars; ++j)
        if (!used[j])
            out.push_back(static_cast<int>(j));
    return out;
}

}  // namespace

DataMatrix generate_synthetic(const SyntheticSpec& spec)
{
    check_spec(spec);
    std::mt19937_64 rng(spec.seed);
    const auto perms = make_perms(spec, rng);
    const auto loose = ungrouped_vars(spec);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    DataMatrix out;
    for (std::size_t j = 0; j < spec.n_vars; ++j)
        out.variables.push_back(VariableMeta::discrete("V" + std::to_string(j), spec.domain_sizes[j]));
    out.values.assign(spec.n_rows * spec.n_vars, 0.0);

    auto uniform_code = [&](int d) { return std::uniform_int_distribution<int>(0, d - 1)(rng); };
    for (std::size_t r = 0; r < spec.n_rows; ++r) {
        double* row = out.values.data() + r * spec.n_vars;
        for (const auto& g : spec.groups) {
            const int z = uniform_code(group_classes(spec, g));
            for (int v : g) {
                const int d = spec.domain_sizes[static_cast<std::size_t>(v)];
                const bool resample = unit(rng) < spec.noise_level;
                row[v] = resample ? uniform_code(d) : perms[static_cast<std::size_t>(v)][static_cast<std::size_t>(z % d)];
            }
        }
        for (int v : loose)
            row[v] = uniform_code(spec.domain_sizes[static_cast<std::size_t>(v)]);
    }
    return out;
}

SyntheticTruth::SyntheticTruth(SyntheticSpec spec) : spec_(std::move(spec))
{
    check_spec(spec_);
    std::mt19937_64 rng(spec_.seed);
    perms_ = make_perms(spec_, rng);
    ungrouped_ = ungrouped_vars(spec_);
}

double SyntheticTruth::probability(std::span<const int> x) const
{
    if (x.size() != spec_.n_vars)
        throw DataError("assignment arity does not match the synthetic spec");
    const double noise = spec_.noise_level;
    double p = 1.0;
    for (const auto& g : spec_.groups) {
        const int k = group_classes(spec_, g);
        double mix = 0.0;
        for (int z = 0; z < k; ++z) {
            double term = 1.0;
            for (int v : g) {
                const auto j = static_cast<std::size_t>(v);
                const int d = spec_.domain_sizes[j];
                const bool hit = perms_[j][static_cast<std::size_t>(z % d)] == x[j];
                term *= (hit ? 1.0 - noise : 0.0) + noise / d;
            }
            mix += term;
        }
        p *= mix / k;
    }
    for (int v : ungrouped_)
        p /= spec_.domain_sizes[static_cast<std::size_t>(v)];
    return p;
}

std::string format_synthetic_spec(const SyntheticSpec& spec)
{
    std::ostringstream os;
    os << "n_rows=" << spec.n_rows << '\n' << "n_vars=" << spec.n_vars << '\n' << "domain_sizes=";
    for (std::size_t i = 0; i < spec.domain_sizes.size(); ++i)
        os << (i ? "," : "") << spec.domain_sizes[i];
    os << '\n' << "groups=";
    for (std::size_t g = 0; g < spec.groups.size(); ++g) {
        os << (g ? ";" : "");
        for (std::size_t i = 0; i < spec.groups[g].size(); ++i)
            os << (i ? "," : "") << spec.groups[g][i];
    }
    os << '\n' << "noise_level=" << number_text(spec.noise_level) << '\n' << "seed=" << spec.seed << '\n';
    return os.str();
}

SyntheticSpec parse_synthetic_spec(const std::string& text)
{
    SyntheticSpec spec;
    std::istringstream in(text);
    std::string line;
    auto ints = [](const std::string& s, char sep) {
        std::vector<int> out;
        std::istringstream parts(s);
        std::string item;
        while (std::getline(parts, item, sep)) {
            item = trim(item);
            if (item.empty())
                continue;
            int v = 0;
            const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
            if (ec != std::errc{} || ptr != item.data() + item.size())
                throw DataError("synthetic spec: not an integer '" + item + "'");
            out.push_back(v);
        }
        return out;
    };
    auto count = [&](const std::string& key, const std::string& v) {
        auto xs = ints(v, ',');
        if (xs.size() != 1 || xs[0] < 0)
            throw DataError("synthetic spec: bad value for " + key);
        return static_cast<std::size_t>(xs[0]);
    };
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("synthetic spec: expected key=value, got '" + line + "'");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key == "n_rows")
            spec.n_rows = count(key, value);
        else if (key == "n_vars")
            spec.n_vars = count(key, value);
        else if (key == "domain_sizes")
            spec.domain_sizes = ints(value, ',');
        else if (key == "groups") {
            spec.groups.clear();
            std::istringstream gs(value);
            std::string g;
            while (std::getline(gs, g, ';'))
                if (auto members = ints(g, ','); !members.empty())
                    spec.groups.push_back(std::move(members));
        } else if (key == "noise_level") {
            auto v = parse_double(value);
            if (!v)
                throw DataError("synthetic spec: bad noise_level");
            spec.noise_level = *v;
        } else if (key == "seed") {
            std::uint64_t s = 0;
            const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), s);
            if (ec != std::errc{} || ptr != value.data() + value.size())
                throw DataError("synthetic spec: bad seed");
            spec.seed = s;
        } else {
            throw DataError("synthetic spec: unknown key '" + key + "'");
        }
    }
    check_spec(spec);
    return spec;
}

std::uint64_t fnv1a(std::span<const char> bytes)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t file_hash(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const auto s = buf.str();
    return fnv1a(s);
}

}  // namespace fspn
