#include "fspn/serialize.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fspn {

using nlohmann::json;

namespace {

json interval_json(const Interval& iv)
{
    return json::array({iv.lo, iv.hi, iv.lo_open, iv.hi_open});
}

json event_json(const Event& e)
{
    json out = json::array();
    for (const auto& iv : e.intervals)
        out.push_back(interval_json(iv));
    return out;
}

json dist_json(const LeafDistribution& dist)
{
    json j;
    j["type"] = leaf_type_name(dist);
    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Histogram>) {
                j["masses"] = d.masses;
            } else if constexpr (std::is_same_v<T, GaussianMixture>) {
                j["weights"] = d.weights;
                j["means"] = d.means;
                j["sds"] = d.sds;
            } else if constexpr (std::is_same_v<T, DenseJointHistogram>) {
                j["dims"] = d.dims();
                j["masses"] = d.masses();
            } else if constexpr (std::is_same_v<T, SparseJointHistogram>) {
                j["dims"] = d.dims;
                j["coords"] = d.coords;
                j["masses"] = d.masses;
                j["default_mass"] = d.default_mass;
            } else {
                j["weights"] = d.weights();
                json means = json::array();
                json covs = json::array();
                for (std::size_t c = 0; c < d.n_components(); ++c) {
                    const auto& mu = d.means()[c];
                    means.push_back(std::vector<double>(mu.data(), mu.data() + mu.size()));
                    json rows = json::array();
                    const auto& cov = d.covariances()[c];
                    for (Eigen::Index r = 0; r < cov.rows(); ++r) {
                        std::vector<double> row(static_cast<std::size_t>(cov.cols()));
                        for (Eigen::Index k = 0; k < cov.cols(); ++k)
                            row[static_cast<std::size_t>(k)] = cov(r, k);
                        rows.push_back(row);
                    }
                    covs.push_back(rows);
                }
                j["means"] = means;
                j["covariances"] = covs;
            }
        },
        dist);
    return j;
}

json node_json(const Node& node)
{
    json j;
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, FactorizeNode>) {
                j["type"] = "factorize";
                j["h_scope"] = n.h_scope;
                j["w_scope"] = n.w_scope;
                j["left"] = node_json(n.left());
                j["right"] = node_json(n.right());
            } else if constexpr (std::is_same_v<T, SumNode>) {
                j["type"] = "sum";
                j["weights"] = n.weights;
                json ch = json::array();
                for (const auto& c : n.children)
                    ch.push_back(node_json(c));
                j["children"] = ch;
            } else if constexpr (std::is_same_v<T, ProductNode>) {
                j["type"] = "product";
                j["child_scopes"] = n.child_scopes;
                json ch = json::array();
                for (const auto& c : n.children)
                    ch.push_back(node_json(c));
                j["children"] = ch;
            } else if constexpr (std::is_same_v<T, SplitNode>) {
                j["type"] = "split";
                json regions = json::array();
                for (const auto& r : n.regions)
                    regions.push_back(event_json(r));
                j["regions"] = regions;
                json ch = json::array();
                for (const auto& c : n.children)
                    ch.push_back(node_json(c));
                j["children"] = ch;
            } else if constexpr (std::is_same_v<T, UniLeafNode>) {
                j["type"] = "uni_leaf";
                j["variable"] = n.variable;
                j["dist"] = dist_json(n.dist);
            } else {
                j["type"] = "multi_leaf";
                j["scope"] = n.scope;
                j["condition_region"] = event_json(n.condition_region);
                j["dist"] = dist_json(n.dist);
            }
        },
        node.kind);
    return j;
}

Interval interval_from(const json& j)
{
    if (!j.is_array() || j.size() != 4)
        throw ModelError("interval must be [lo, hi, lo_open, hi_open]");
    return Interval{j[0].get<double>(), j[1].get<double>(), j[2].get<bool>(), j[3].get<bool>()};
}

Event event_from(const json& j)
{
    Event e;
    for (const auto& iv : j)
        e.intervals.push_back(interval_from(iv));
    return e;
}

LeafDistribution dist_from(const json& j)
{
    const auto type = j.at("type").get<std::string>();
    if (type == "histogram")
        return Histogram{j.at("masses").get<std::vector<double>>()};
    if (type == "gaussian_mixture")
        return GaussianMixture{j.at("weights").get<std::vector<double>>(), j.at("means").get<std::vector<double>>(),
                               j.at("sds").get<std::vector<double>>()};
    if (type == "dense_joint_histogram")
        return DenseJointHistogram(j.at("dims").get<std::vector<int>>(), j.at("masses").get<std::vector<double>>());
    if (type == "sparse_joint_histogram")
        return SparseJointHistogram{j.at("dims").get<std::vector<int>>(), j.at("coords").get<std::vector<int>>(),
                                    j.at("masses").get<std::vector<double>>(), j.at("default_mass").get<double>()};
    if (type == "mv_gaussian_mixture") {
        std::vector<Eigen::VectorXd> means;
        std::vector<Eigen::MatrixXd> covs;
        for (const auto& m : j.at("means")) {
            const auto v = m.get<std::vector<double>>();
            means.emplace_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
        }
        for (const auto& c : j.at("covariances")) {
            const auto n = static_cast<Eigen::Index>(c.size());
            Eigen::MatrixXd cov(n, n);
            for (Eigen::Index r = 0; r < n; ++r) {
                const auto row = c[static_cast<std::size_t>(r)].get<std::vector<double>>();
                if (static_cast<Eigen::Index>(row.size()) != n)
                    throw ModelError("covariance matrix is not square");
                for (Eigen::Index k = 0; k < n; ++k)
                    cov(r, k) = row[static_cast<std::size_t>(k)];
            }
            covs.push_back(std::move(cov));
        }
        return MvGaussianMixture(j.at("weights").get<std::vector<double>>(), std::move(means), std::move(covs));
    }
    throw ModelError("unknown distribution tag '" + type + "'");
}

Node node_from(const json& j)
{
    const auto type = j.at("type").get<std::string>();
    auto children_from = [](const json& arr) {
        std::vector<Node> out;
        for (const auto& c : arr)
            out.push_back(node_from(c));
        return out;
    };
    if (type == "factorize") {
        FactorizeNode f;
        f.h_scope = j.at("h_scope").get<VarSet>();
        f.w_scope = j.at("w_scope").get<VarSet>();
        f.children.push_back(node_from(j.at("left")));
        f.children.push_back(node_from(j.at("right")));
        return Node{std::move(f)};
    }
    if (type == "sum")
        return Node{SumNode{children_from(j.at("children")), j.at("weights").get<std::vector<double>>()}};
    if (type == "product")
        return Node{ProductNode{children_from(j.at("children")), j.at("child_scopes").get<std::vector<VarSet>>()}};
    if (type == "split") {
        SplitNode s;
        s.children = children_from(j.at("children"));
        for (const auto& r : j.at("regions"))
            s.regions.push_back(event_from(r));
        return Node{std::move(s)};
    }
    if (type == "uni_leaf")
        return Node{UniLeafNode{j.at("variable").get<int>(), dist_from(j.at("dist"))}};
    if (type == "multi_leaf")
        return Node{MultiLeafNode{j.at("scope").get<VarSet>(), event_from(j.at("condition_region")),
                                  dist_from(j.at("dist"))}};
    throw ModelError("unknown node tag '" + type + "'");
}

json variable_json(const VariableMeta& v)
{
    json j;
    j["name"] = v.name;
    if (v.is_discrete()) {
        j["kind"] = "discrete";
        j["cardinality"] = v.cardinality;
        if (!v.labels.empty())
            j["labels"] = v.labels;
    } else {
        j["kind"] = "continuous";
        j["lo"] = v.lo;
        j["hi"] = v.hi;
    }
    return j;
}

VariableMeta variable_from(const json& j)
{
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "discrete") {
        auto v = VariableMeta::discrete(j.at("name").get<std::string>(), j.at("cardinality").get<int>());
        if (j.contains("labels"))
            v.labels = j.at("labels").get<std::vector<std::string>>();
        return v;
    }
    if (kind == "continuous")
        return VariableMeta::continuous(j.at("name").get<std::string>(), j.at("lo").get<double>(),
                                        j.at("hi").get<double>());
    throw ModelError("unknown variable kind '" + kind + "'");
}

json config_json(const LearnConfig& cfg)
{
    json j = json::object();
    std::istringstream in(format_learn_config(cfg));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        j[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return j;
}

LearnConfig config_from(const json& j)
{
    LearnConfig cfg;
    for (const auto& [key, value] : j.items())
        set_learn_config_value(cfg, key, value.get<std::string>());
    return cfg;
}

}  // namespace

std::string serialize(const FspnModel& model)
{
    json j;
    j["format"] = "fspn-model";
    j["format_version"] = model.format_version;
    json vars = json::array();
    for (const auto& v : model.variables)
        vars.push_back(variable_json(v));
    j["variables"] = vars;
    j["learn_config"] = model.learn_config ? config_json(*model.learn_config) : json(nullptr);
    j["root"] = node_json(model.root);
    return j.dump(1) + "\n";
}

FspnModel deserialize(const std::string& text)
{
    FspnModel model;
    try {
        const json j = json::parse(text);
        if (!j.is_object() || j.value("format", std::string{}) != "fspn-model")
            throw ModelError("not an fspn model file");
        const int version = j.at("format_version").get<int>();
        if (version != kFormatVersion)
            throw ModelError("unsupported format version " + std::to_string(version));
        model.format_version = version;
        for (const auto& v : j.at("variables"))
            model.variables.push_back(variable_from(v));
        if (!j.at("learn_config").is_null())
            model.learn_config = config_from(j.at("learn_config"));
        model.root = node_from(j.at("root"));
    } catch (const json::exception& e) {
        throw ModelError(std::string("malformed model text: ") + e.what());
    } catch (const DataError& e) {
        throw ModelError(std::string("malformed learn_config: ") + e.what());
    }
    if (auto report = validate(model); !report.empty())
        throw ValidationError(std::move(report));
    return model;
}

FspnModel load_model(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ModelError("cannot open model file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize(buf.str());
}

void save_model(const FspnModel& model, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ModelError("cannot write model file '" + path + "'");
    out << serialize(model);
}

}  // namespace fspn
