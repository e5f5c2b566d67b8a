#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fspn/domain.hpp"
#include "fspn/leaf.hpp"
#include "fspn/learn_config.hpp"

namespace fspn {

/// Sorted, duplicate-free list of model variable indices.
using VarSet = std::vector<int>;

struct Node;

/// Pr(S) = Pr(W) * Pr(H | W). `children[0]` models W, `children[1]` models H given W
/// and contains only split and multi-leaf nodes.
struct FactorizeNode {
    std::vector<Node> children;
    VarSet h_scope;
    VarSet w_scope;

    const Node& left() const { return children[0]; }
    const Node& right() const { return children[1]; }
};

struct SumNode {
    std::vector<Node> children;
    std::vector<double> weights;
};

struct ProductNode {
    std::vector<Node> children;
    std::vector<VarSet> child_scopes;
};

/// Partitions the condition space into hyper-rectangles, one per child.
/// Regions hold one interval per model variable; only condition variables
/// may be narrower than their domain.
struct SplitNode {
    std::vector<Node> children;
    std::vector<Event> regions;
};

struct UniLeafNode {
    int variable = 0;
    LeafDistribution dist;
};

struct MultiLeafNode {
    VarSet scope;
    Event condition_region;
    LeafDistribution dist;
};

struct Node {
    std::variant<FactorizeNode, SumNode, ProductNode, SplitNode, UniLeafNode, MultiLeafNode> kind;

    template <class T>
    const T* as() const { return std::get_if<T>(&kind); }
    template <class T>
    bool is() const { return std::holds_alternative<T>(kind); }

    const std::vector<Node>* children() const;
};

inline constexpr int kFormatVersion = 1;

struct FspnModel {
    std::vector<VariableMeta> variables;
    Node root;
    int format_version = kFormatVersion;
    std::optional<LearnConfig> learn_config;
};

struct Violation {
    std::string path;
    std::string message;
};

using ValidationReport = std::vector<Violation>;

/// Checks every structural invariant; an empty report means the model is valid.
ValidationReport validate(const FspnModel& model);

std::string to_string(const ValidationReport& report);

/// Thrown when a model fails validation; carries the full report.
class ValidationError : public ModelError {
public:
    explicit ValidationError(ValidationReport report);
    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

struct ModelStats {
    std::size_t n_nodes = 0;
    std::size_t n_factorize = 0;
    std::size_t n_multileaf = 0;
    std::size_t n_sum = 0;
    std::size_t n_product = 0;
    std::size_t n_split = 0;
    std::size_t n_unileaf = 0;
    /// Free scalar parameters: leaf parameters, sum weights minus one per sum
    /// node, one per split cut point.
    std::size_t n_params = 0;
    /// Levels on the longest root-to-leaf path; a single leaf has depth 1.
    std::size_t depth = 0;
};

ModelStats stats(const FspnModel& model);

/// Variables the node's distribution ranges over.
VarSet node_scope(const Node& node);

/// Multi-leaf nodes reachable from `node` through split nodes, in tree order.
std::vector<const MultiLeafNode*> collect_multileaves(const Node& node);

/// Distinct interior cut points of a split node, summed over variables.
std::size_t split_cut_count(const SplitNode& split);

}  // namespace fspn
