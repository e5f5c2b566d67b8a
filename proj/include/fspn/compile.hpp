#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fspn/joint_table.hpp"
#include "fspn/model.hpp"

namespace fspn {

/// Discrete Bayesian network.
///
/// `parents[i]` is sorted by variable index. `cpts[i]` holds one row per
/// parent assignment, rows ordered lexicographically with the first parent
/// most significant, each row holding cardinality(i) probabilities.
struct BayesNet {
    std::vector<VariableMeta> variables;
    std::vector<std::vector<int>> parents;
    std::vector<std::vector<double>> cpts;

    std::size_t size() const { return variables.size(); }
    std::size_t cpt_rows(std::size_t node) const;
    /// Probability of `value` given the parent values found in `assignment`.
    double conditional(std::size_t node, int value, std::span<const int> assignment) const;
    /// Total number of stored CPT entries.
    std::size_t cpt_entry_count() const;

    /// Empty when the network is a valid DAG with complete, normalized CPTs.
    std::string check() const;
};

/// Reads the text format with `variables`, `edges` and `cpt <name>` sections.
/// Throws DataError with the offending line on malformed input.
BayesNet parse_bayes_net(const std::string& text);
BayesNet load_bayes_net(const std::string& path);
std::string format_bayes_net(const BayesNet& bn);

/// Compiles a network into an equivalent model. Throws DataError when the
/// network is cyclic or a CPT is incomplete.
FspnModel bn_to_fspn(const BayesNet& bn);

/// Chain-rule joint of the network; throws DataError above 10^6 states.
JointTable bn_joint(const BayesNet& bn);

/// Random DAG over `n_nodes` variables with cardinalities in [2, max_card],
/// each forward edge present with `edge_prob`, at most `max_parents` parents
/// per node, and Dirichlet(1) CPT rows.
BayesNet random_bayes_net(int n_nodes, int max_card, double edge_prob, int max_parents, std::uint64_t seed);

}  // namespace fspn
