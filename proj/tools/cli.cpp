#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "fspn/compile.hpp"
#include "fspn/data.hpp"
#include "fspn/evalharness.hpp"
#include "fspn/inference.hpp"
#include "fspn/learning.hpp"
#include "fspn/serialize.hpp"

namespace fspn::cli {

namespace {

using json = nlohmann::ordered_json;

std::string num(double v)
{
    std::ostringstream s;
    s << std::setprecision(12) << v;
    return s.str();
}

std::string hex(std::uint64_t v)
{
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << v;
    return s.str();
}

std::string read_text(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write '" + path + "'");
    out << text;
}

/// Collects what a run read, wrote and resolved, and writes the sidecar.
class Manifest {
public:
    explicit Manifest(std::string subcommand, const std::vector<std::string>& args)
        : start_(std::chrono::steady_clock::now())
    {
        doc_["subcommand"] = std::move(subcommand);
        doc_["args"] = args;
        doc_["config"] = json::object();
        doc_["seed"] = nullptr;
        doc_["inputs"] = json::array();
        doc_["outputs"] = json::array();
    }

    void input(const std::string& path) { doc_["inputs"].push_back({{"path", path}, {"fnv1a", hex(file_hash(path))}}); }
    void output(const std::string& path) { doc_["outputs"].push_back(path); }
    void seed(std::uint64_t s) { doc_["seed"] = s; }
    void config(const std::string& key, json value) { doc_["config"][key] = std::move(value); }
    void learn_config(const LearnConfig& cfg)
    {
        std::istringstream lines(format_learn_config(cfg));
        for (std::string line; std::getline(lines, line);) {
            const auto eq = line.find('=');
            if (eq != std::string::npos)
                config(line.substr(0, eq), line.substr(eq + 1));
        }
        seed(cfg.seed);
    }

    void write(const std::string& path, int exit_code)
    {
        doc_["exit_code"] = exit_code;
        doc_["timings"] = {{"wall_seconds",
                            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count()}};
        write_text(path, doc_.dump(1) + "\n");
    }

private:
    json doc_;
    std::chrono::steady_clock::time_point start_;
};

/// Results either go to --out or to stdout.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback, Manifest& manifest) : path_(path), fallback_(fallback), manifest_(manifest) {}
    std::ostream& stream() { return path_.empty() ? fallback_ : buffer_; }
    void finish()
    {
        if (!path_.empty()) {
            write_text(path_, buffer_.str());
            manifest_.output(path_);
        }
    }

private:
    std::string path_;
    std::ostream& fallback_;
    Manifest& manifest_;
    std::ostringstream buffer_;
};

DataMatrix load_table(const std::string& path, Manifest& manifest)
{
    manifest.input(path);
    if (path.size() > 5 && path.ends_with(".data"))
        return load_binary_rows(path);
    return load_csv(path);
}

LearnConfig resolve_config(const std::string& config_path, const std::optional<std::uint64_t>& seed, Manifest& manifest)
{
    LearnConfig cfg;
    if (!config_path.empty()) {
        manifest.input(config_path);
        cfg = parse_learn_config(read_text(config_path));
    }
    if (seed)
        cfg.seed = *seed;
    if (auto msg = cfg.check(); !msg.empty())
        throw DataError("invalid config: " + msg);
    manifest.learn_config(cfg);
    return cfg;
}

std::vector<std::size_t> parse_size_list(const std::string& text)
{
    std::vector<std::size_t> out;
    std::istringstream in(text);
    for (std::string tok; std::getline(in, tok, ',');) {
        std::size_t used = 0;
        long long v = -1;
        try {
            v = std::stoll(tok, &used);
        } catch (const std::exception&) {
        }
        if (used != tok.size() || v < 1)
            throw DataError("bad size list '" + text + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty())
        throw DataError("empty size list");
    return out;
}

struct Options {
    std::string model, data, config, query, out, format = "text", manifest, in;
    std::vector<std::string> expr;
    std::optional<std::uint64_t> seed;
    // eval-ll
    std::string benchmark_dir, name;
    bool per_row = false;
    // eval-kl
    std::string truth_bn, truth_spec;
    int conditional = 100;
    // gen-data
    std::string spec;
    std::size_t rows = 0, vars = 0;
    std::string domain = "3", groups;
    double noise = 0.0;
    // bench
    std::string sizes = "100,1000,10000";
    int events = 50;
    int reps = 30;
};

int cmd_learn(const Options& o, Manifest& m, std::ostream& out)
{
    const LearnConfig cfg = resolve_config(o.config, o.seed, m);
    const DataMatrix data = load_table(o.data, m);
    const FspnModel model = learn_fspn(data, cfg);
    save_model(model, o.out);
    m.output(o.out);
    const auto st = stats(model);
    out << "nodes " << st.n_nodes << "\nparams " << st.n_params << "\n";
    return kOk;
}

int cmd_infer(const Options& o, Manifest& m, std::ostream& out)
{
    m.input(o.model);
    const FspnModel model = load_model(o.model);
    std::vector<std::string> lines = o.expr;
    if (!o.query.empty()) {
        m.input(o.query);
        std::istringstream in(read_text(o.query));
        for (std::string line; std::getline(in, line);) {
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#')
                continue;
            lines.push_back(line);
        }
    }
    if (lines.empty())
        throw DataError("no queries given; use --query FILE or --expr TEXT");

    Sink sink(o.out, out, m);
    auto& s = sink.stream();
    if (o.format == "csv")
        s << "query,probability\n";
    for (const auto& line : lines) {
        const ParsedQuery q = parse_query(line, model.variables);
        const double p = q.evidence ? infer_evidence(model, q.query, *q.evidence) : infer_marginal(model, q.query);
        if (o.format == "csv")
            s << '"' << line << "\"," << num(p) << '\n';
        else
            s << num(p) << '\n';
    }
    sink.finish();
    return kOk;
}

int cmd_eval_ll(const Options& o, Manifest& m, std::ostream& out)
{
    FspnModel model;
    DataMatrix test;
    if (!o.benchmark_dir.empty()) {
        if (o.name.empty())
            throw DataError("--benchmark-dir needs --name");
        const LearnConfig cfg = resolve_config(o.config, o.seed, m);
        for (const char* split : {".ts.data", ".valid.data", ".test.data"}) {
            const std::string path = o.benchmark_dir + "/" + o.name + split;
            if (std::ifstream(path))
                m.input(path);
        }
        BenchmarkSplits splits = load_benchmark(o.benchmark_dir, o.name);
        model = learn_fspn(splits.train, cfg);
        test = std::move(splits.test);
        m.config("benchmark", o.name);
    } else {
        if (o.model.empty() || o.data.empty())
            throw DataError("eval-ll needs --model and --data, or --benchmark-dir and --name");
        m.input(o.model);
        model = load_model(o.model);
        m.input(o.data);
        test = o.data.ends_with(".data") ? load_binary_rows(o.data) : load_csv_with_variables(o.data, model.variables);
    }
    const LogLikelihood ll = log_likelihood(model, test);

    Sink sink(o.out, out, m);
    auto& s = sink.stream();
    if (o.format == "csv") {
        s << "row,log_likelihood\n";
        if (o.per_row)
            for (std::size_t i = 0; i < ll.per_row.size(); ++i)
                s << i << ',' << num(ll.per_row[i]) << '\n';
        s << "average," << num(ll.average) << '\n';
    } else {
        if (o.per_row)
            for (double v : ll.per_row)
                s << num(v) << '\n';
        s << "rows " << ll.per_row.size() << "\naverage " << num(ll.average) << '\n';
    }
    sink.finish();
    return kOk;
}

int cmd_eval_kl(const Options& o, Manifest& m, std::ostream& out)
{
    m.input(o.model);
    const FspnModel model = load_model(o.model);
    const std::uint64_t seed = o.seed.value_or(0);
    m.seed(seed);

    JointTable truth;
    std::optional<double> avg_rdc;
    LearnConfig rdc_cfg;
    rdc_cfg.seed = seed;
    const int sources = !o.truth_bn.empty() + !o.truth_spec.empty() + !o.data.empty();
    if (sources != 1)
        throw DataError("eval-kl needs exactly one of --truth-bn, --truth-spec or --data");
    if (!o.truth_bn.empty()) {
        m.input(o.truth_bn);
        truth = bn_joint(load_bayes_net(o.truth_bn));
    } else if (!o.truth_spec.empty()) {
        m.input(o.truth_spec);
        const SyntheticSpec spec = parse_synthetic_spec(read_text(o.truth_spec));
        truth = synthetic_joint(SyntheticTruth(spec));
        avg_rdc = avg_rdc_score(generate_synthetic(spec), rdc_cfg);
    } else {
        const DataMatrix data = load_table(o.data, m);
        truth = empirical_joint(data);
        if (data.n_cols() >= 2)
            avg_rdc = avg_rdc_score(data, rdc_cfg);
    }

    const double kl = kl_divergence(truth, model);
    const double ckl = o.conditional > 0 && truth.dims.size() >= 2 ? mean_conditional_kl(truth, model, o.conditional, seed)
                                                                  : std::numeric_limits<double>::quiet_NaN();
    const auto n_nodes = stats(model).n_nodes;
    m.config("conditional_queries", o.conditional);

    Sink sink(o.out, out, m);
    auto& s = sink.stream();
    const std::string rdc_text = avg_rdc ? num(*avg_rdc) : "";
    if (o.format == "csv") {
        s << "n_nodes,avg_rdc,kl,mean_conditional_kl\n";
        s << n_nodes << ',' << rdc_text << ',' << num(kl) << ',' << num(ckl) << '\n';
    } else {
        s << "n_nodes " << n_nodes << '\n';
        if (avg_rdc)
            s << "avg_rdc " << rdc_text << '\n';
        s << "kl " << num(kl) << "\nmean_conditional_kl " << num(ckl) << '\n';
    }
    sink.finish();
    return kOk;
}

int cmd_convert_bn(const Options& o, Manifest& m, std::ostream& out)
{
    m.input(o.in);
    const BayesNet bn = load_bayes_net(o.in);
    const FspnModel model = bn_to_fspn(bn);
    save_model(model, o.out);
    m.output(o.out);
    const auto st = stats(model);
    out << "nodes " << st.n_nodes << "\nparams " << st.n_params << "\ncpt_entries " << bn.cpt_entry_count() << '\n';
    return kOk;
}

int cmd_gen_data(const Options& o, Manifest& m, std::ostream& out)
{
    SyntheticSpec spec;
    if (!o.spec.empty()) {
        m.input(o.spec);
        spec = parse_synthetic_spec(read_text(o.spec));
        if (o.seed)
            spec.seed = *o.seed;
    } else {
        std::string text = "n_rows=" + std::to_string(o.rows) + "\nn_vars=" + std::to_string(o.vars) +
                           "\nnoise_level=" + num(o.noise) + "\nseed=" + std::to_string(o.seed.value_or(0)) + "\n";
        const auto sizes = parse_size_list(o.domain);
        text += "domain_sizes=";
        for (std::size_t i = 0; i < o.vars; ++i)
            text += (i ? "," : "") + std::to_string(sizes.size() == 1 ? sizes[0] : sizes.at(std::min(i, sizes.size() - 1)));
        text += "\ngroups=" + o.groups + "\n";
        spec = parse_synthetic_spec(text);
    }
    if (auto msg = spec.check(); !msg.empty())
        throw DataError("invalid synthetic spec: " + msg);
    m.seed(spec.seed);
    m.config("spec", format_synthetic_spec(spec));

    const DataMatrix data = generate_synthetic(spec);
    save_csv(data, o.out);
    m.output(o.out);
    write_text(o.out + ".spec", format_synthetic_spec(spec));
    m.output(o.out + ".spec");
    out << "rows " << data.n_rows() << "\ncolumns " << data.n_cols() << '\n';
    return kOk;
}

int cmd_validate(const Options& o, Manifest& m, std::ostream& out, std::ostream& err)
{
    m.input(o.model);
    try {
        const FspnModel model = deserialize(read_text(o.model));
        out << "valid\n";
        return kOk;
    } catch (const ValidationError& e) {
        for (const auto& v : e.report())
            out << v.path << ": " << v.message << '\n';
        err << "model is invalid (" << e.report().size() << " violations)\n";
        return kFailure;
    }
}

int cmd_stats(const Options& o, Manifest& m, std::ostream& out)
{
    m.input(o.model);
    const auto st = stats(load_model(o.model));
    const std::vector<std::pair<const char*, std::size_t>> rows{
        {"nodes", st.n_nodes},       {"factorize", st.n_factorize}, {"sum", st.n_sum},
        {"product", st.n_product},   {"split", st.n_split},         {"uni_leaf", st.n_unileaf},
        {"multi_leaf", st.n_multileaf}, {"depth", st.depth},        {"params", st.n_params}};
    Sink sink(o.out, out, m);
    auto& s = sink.stream();
    if (o.format == "csv") {
        for (std::size_t i = 0; i < rows.size(); ++i)
            s << (i ? "," : "") << rows[i].first;
        s << '\n';
        for (std::size_t i = 0; i < rows.size(); ++i)
            s << (i ? "," : "") << rows[i].second;
        s << '\n';
    } else {
        for (const auto& [k, v] : rows)
            s << k << ' ' << v << '\n';
    }
    sink.finish();
    return kOk;
}

int cmd_bench(const Options& o, Manifest& m, std::ostream& out)
{
    const auto sizes = parse_size_list(o.sizes);
    if (!std::is_sorted(sizes.begin(), sizes.end()))
        throw DataError("--sizes must be ascending");
    const std::uint64_t seed = o.seed.value_or(0);
    m.seed(seed);
    m.config("sizes", o.sizes);
    m.config("events", o.events);
    m.config("repetitions", o.reps);
    const ScalingReport r = scaling_benchmark(sizes, o.events, seed, o.reps);

    Sink sink(o.out, out, m);
    auto& s = sink.stream();
    const std::string slope = r.slope ? num(*r.slope) : "";
    const std::string r2 = r.r_squared ? num(*r.r_squared) : "";
    if (o.format == "csv") {
        s << "target_nodes,n_nodes,median_ms\n";
        for (const auto& row : r.rows)
            s << row.target_nodes << ',' << row.n_nodes << ',' << num(row.median_seconds * 1e3) << '\n';
        s << "# slope," << slope << "\n# r_squared," << r2 << '\n';
    } else {
        for (const auto& row : r.rows)
            s << row.target_nodes << ' ' << row.n_nodes << ' ' << num(row.median_seconds * 1e3) << " ms\n";
        s << "slope " << (r.slope ? slope : "absent") << "\nr_squared " << (r.r_squared ? r2 : "absent") << '\n';
    }
    sink.finish();
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Factorize-sum-split-product networks: learning, inference and evaluation"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) { sub->add_option("--manifest", o.manifest, "Run manifest path"); };
    auto formatted = [&](CLI::App* sub) {
        sub->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"text", "csv"}));
        sub->add_option("--out", o.out, "Write results here instead of stdout");
    };

    auto* learn = app.add_subcommand("learn", "Learn a model from a dataset");
    learn->add_option("--data", o.data, "CSV file, or a headerless 0/1 .data file")->required();
    learn->add_option("--config", o.config, "key=value learning config");
    learn->add_option("--seed", o.seed, "Overrides the config seed");
    learn->add_option("--out", o.out, "Model file to write")->required();
    common(learn);

    auto* infer = app.add_subcommand("infer", "Range and conditional probabilities");
    infer->add_option("--model", o.model)->required();
    infer->add_option("--query", o.query, "File with one query per line");
    infer->add_option("--expr", o.expr, "Query text; may repeat");
    formatted(infer);
    common(infer);

    auto* eval_ll = app.add_subcommand("eval-ll", "Per-row and average log-likelihood");
    eval_ll->add_option("--model", o.model);
    eval_ll->add_option("--data", o.data);
    eval_ll->add_option("--benchmark-dir", o.benchmark_dir, "Directory holding <name>.ts/.valid/.test.data");
    eval_ll->add_option("--name", o.name, "Benchmark dataset name");
    eval_ll->add_option("--config", o.config);
    eval_ll->add_option("--seed", o.seed);
    eval_ll->add_flag("--per-row", o.per_row, "Also print every row");
    formatted(eval_ll);
    common(eval_ll);

    auto* eval_kl = app.add_subcommand("eval-kl", "KL divergence from a true distribution to a model");
    eval_kl->add_option("--model", o.model)->required();
    eval_kl->add_option("--truth-bn", o.truth_bn, "Bayes net text file");
    eval_kl->add_option("--truth-spec", o.truth_spec, "Synthetic spec file");
    eval_kl->add_option("--data", o.data, "Dataset whose empirical joint is the truth");
    eval_kl->add_option("--conditional", o.conditional, "Random conditional queries (0 to skip)");
    eval_kl->add_option("--seed", o.seed);
    formatted(eval_kl);
    common(eval_kl);

    auto* convert = app.add_subcommand("convert-bn", "Compile a Bayes net into a model");
    convert->add_option("--in", o.in, "Bayes net text file")->required();
    convert->add_option("--out", o.out, "Model file to write")->required();
    common(convert);

    auto* gen = app.add_subcommand("gen-data", "Generate synthetic data");
    gen->add_option("--spec", o.spec, "Synthetic spec file");
    gen->add_option("--rows", o.rows);
    gen->add_option("--vars", o.vars);
    gen->add_option("--domain", o.domain, "One size, or a comma list per variable");
    gen->add_option("--groups", o.groups, "Dependent groups, e.g. 0,1,2;3,4");
    gen->add_option("--noise", o.noise)->check(CLI::Range(0.0, 1.0));
    gen->add_option("--seed", o.seed);
    gen->add_option("--out", o.out, "CSV to write; the spec goes next to it")->required();
    common(gen);

    auto* val = app.add_subcommand("validate", "Check a model file");
    val->add_option("--model", o.model)->required();
    common(val);

    auto* st = app.add_subcommand("stats", "Model size statistics");
    st->add_option("--model", o.model)->required();
    formatted(st);
    common(st);

    auto* bench = app.add_subcommand("bench", "Inference latency against model size");
    bench->add_option("--sizes", o.sizes, "Ascending node counts");
    bench->add_option("--events", o.events)->check(CLI::PositiveNumber);
    bench->add_option("--reps", o.reps)->check(CLI::PositiveNumber);
    bench->add_option("--seed", o.seed);
    formatted(bench);
    common(bench);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    CLI::App* sub = app.get_subcommands().front();
    Manifest manifest(sub->get_name(), args);
    int code = kFailure;
    try {
        if (sub == learn)
            code = cmd_learn(o, manifest, out);
        else if (sub == infer)
            code = cmd_infer(o, manifest, out);
        else if (sub == eval_ll)
            code = cmd_eval_ll(o, manifest, out);
        else if (sub == eval_kl)
            code = cmd_eval_kl(o, manifest, out);
        else if (sub == convert)
            code = cmd_convert_bn(o, manifest, out);
        else if (sub == gen)
            code = cmd_gen_data(o, manifest, out);
        else if (sub == val)
            code = cmd_validate(o, manifest, out, err);
        else if (sub == st)
            code = cmd_stats(o, manifest, out);
        else if (sub == bench)
            code = cmd_bench(o, manifest, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        code = kFailure;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        code = kFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        code = kFailure;
    }

    std::string manifest_path = o.manifest;
    if (manifest_path.empty())
        manifest_path = o.out.empty() ? "fspn-" + sub->get_name() + ".manifest.json" : o.out + ".manifest.json";
    try {
        manifest.write(manifest_path, code);
    } catch (const Error& e) {
        err << "warning: " << e.what() << '\n';
    }
    return code;
}

}  // namespace fspn::cli
