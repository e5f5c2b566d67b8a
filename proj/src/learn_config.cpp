#include "fspn/learn_config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "fspn/domain.hpp"

namespace fspn {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& v)
{
    if (v == "inf" || v == "+inf" || v == "infinity")
        return std::numeric_limits<double>::infinity();
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size())
            return d;
    } catch (const std::exception&) {
    }
    throw DataError("config key '" + key + "': not a number: '" + v + "'");
}

long long parse_int(const std::string& key, const std::string& v)
{
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw DataError("config key '" + key + "': not an integer: '" + v + "'");
    return out;
}

std::string real_text(double d)
{
    if (std::isinf(d))
        return "inf";
    std::ostringstream os;
    os.precision(17);
    os << d;
    return os.str();
}

}  // namespace

std::string LearnConfig::check() const
{
    if (!(tau_low >= 0.0))
        return "tau_low must be >= 0";
    if (!(tau_low < tau_high))
        return "tau_low must be < tau_high";
    if (!(tau_high <= 1.0) && !std::isinf(tau_high))
        return "tau_high must be <= 1 or inf";
    if (min_instances < 1)
        return "min_instances must be >= 1";
    if (sum_k < 2)
        return "sum_k must be >= 2";
    if (rdc_features < 1 || rdc_seeds < 1 || gmm_components < 1 || greedy_candidates < 1 || max_depth < 1)
        return "counts must be >= 1";
    if (rdc_max_rows < 2)
        return "rdc_max_rows must be >= 2";
    if (!(rdc_scale > 0.0))
        return "rdc_scale must be > 0";
    if (!(smoothing_alpha >= 0.0))
        return "smoothing_alpha must be >= 0";
    return {};
}

void set_learn_config_value(LearnConfig& cfg, const std::string& key, const std::string& value)
{
    auto as_count = [&](int& field) { field = static_cast<int>(parse_int(key, value)); };
    if (key == "tau_low")
        cfg.tau_low = parse_real(key, value);
    else if (key == "tau_high")
        cfg.tau_high = parse_real(key, value);
    else if (key == "min_instances")
        as_count(cfg.min_instances);
    else if (key == "sum_k")
        as_count(cfg.sum_k);
    else if (key == "rdc_features")
        as_count(cfg.rdc_features);
    else if (key == "rdc_scale")
        cfg.rdc_scale = parse_real(key, value);
    else if (key == "rdc_seeds")
        as_count(cfg.rdc_seeds);
    else if (key == "rdc_max_rows")
        as_count(cfg.rdc_max_rows);
    else if (key == "smoothing_alpha")
        cfg.smoothing_alpha = parse_real(key, value);
    else if (key == "gmm_components")
        as_count(cfg.gmm_components);
    else if (key == "split_method") {
        if (value == "greedy")
            cfg.split_method = SplitMethod::greedy;
        else if (value == "grid_kmeans")
            cfg.split_method = SplitMethod::grid_kmeans;
        else
            throw DataError("config key 'split_method': expected greedy or grid_kmeans, got '" + value + "'");
    } else if (key == "greedy_candidates")
        as_count(cfg.greedy_candidates);
    else if (key == "max_depth")
        as_count(cfg.max_depth);
    else if (key == "seed")
        cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else
        throw DataError("unknown config key '" + key + "'");
}

LearnConfig parse_learn_config(const std::string& text, LearnConfig base)
{
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("config line " + std::to_string(line_no) + ": expected key=value");
        set_learn_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    if (auto msg = base.check(); !msg.empty())
        throw DataError("invalid config: " + msg);
    return base;
}

std::string format_learn_config(const LearnConfig& cfg)
{
    std::ostringstream os;
    os << "tau_low=" << real_text(cfg.tau_low) << '\n'
       << "tau_high=" << real_text(cfg.tau_high) << '\n'
       << "min_instances=" << cfg.min_instances << '\n'
       << "sum_k=" << cfg.sum_k << '\n'
       << "rdc_features=" << cfg.rdc_features << '\n'
       << "rdc_scale=" << real_text(cfg.rdc_scale) << '\n'
       << "rdc_seeds=" << cfg.rdc_seeds << '\n'
       << "rdc_max_rows=" << cfg.rdc_max_rows << '\n'
       << "smoothing_alpha=" << real_text(cfg.smoothing_alpha) << '\n'
       << "gmm_components=" << cfg.gmm_components << '\n'
       << "split_method=" << to_string(cfg.split_method) << '\n'
       << "greedy_candidates=" << cfg.greedy_candidates << '\n'
       << "max_depth=" << cfg.max_depth << '\n'
       << "seed=" << cfg.seed << '\n';
    return os.str();
}

std::string to_string(SplitMethod m)
{
    return m == SplitMethod::greedy ? "greedy" : "grid_kmeans";
}

}  // namespace fspn
