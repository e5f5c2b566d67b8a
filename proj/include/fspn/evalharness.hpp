#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "fspn/data.hpp"
#include "fspn/joint_table.hpp"
#include "fspn/learn_config.hpp"
#include "fspn/model.hpp"

namespace fspn {

/// Relative frequencies of the rows. All columns must be discrete.
JointTable empirical_joint(const DataMatrix& data);

/// Exact box sum of `event` over the table; the event is in code units.
double brute_force_marginal(const JointTable& joint, const Event& event);

/// Enumerates the lattice through point densities. Discrete models only.
JointTable materialize_joint(const FspnModel& model);

/// Exact distribution of the synthetic generator.
JointTable synthetic_joint(const SyntheticTruth& truth);

/// sum p ln(p/q). +infinity when q vanishes where p does not.
double kl_divergence(const JointTable& p, const JointTable& q);
/// q(x) from point queries on the model.
double kl_divergence(const JointTable& p, const FspnModel& q);

/// Average KL between the true and modelled conditionals Pr(Q | E = e) over
/// `n_queries` random queries. Each query picks a random nonempty proper
/// subset of variables as evidence, fixes it to an assignment drawn from
/// `p`, and takes all remaining variables as the query.
double mean_conditional_kl(const JointTable& p, const FspnModel& q, int n_queries, std::uint64_t seed);

/// Mean pairwise RDC over all unordered column pairs.
double avg_rdc_score(const DataMatrix& data, const LearnConfig& cfg);

/// Random canonical event: each variable independently kept full with
/// probability `full_prob`, otherwise narrowed to a random subinterval.
Event random_event(const std::vector<VariableMeta>& vars, std::mt19937_64& rng, double full_prob = 0.3);

struct RandomModelSpec {
    int n_vars = 6;
    int max_card = 4;
    bool with_continuous = false;
    std::size_t target_nodes = 50;
};

/// Random valid model mixing every node type, with roughly the target node count.
FspnModel random_model(const RandomModelSpec& spec, std::uint64_t seed);

struct ScalingRow {
    std::size_t target_nodes = 0;
    std::size_t n_nodes = 0;
    double median_seconds = 0.0;  // per query
};

struct ScalingReport {
    std::vector<ScalingRow> rows;
    std::optional<double> slope;  // log-log fit, absent for fewer than two sizes
    std::optional<double> r_squared;
};

/// Times infer_marginal on random models of the given sizes. Each size runs
/// 5 warm-up batches and the median of `repetitions` timed batches.
ScalingReport scaling_benchmark(const std::vector<std::size_t>& sizes, int events_per_size, std::uint64_t seed,
                                int repetitions = 30);

}  // namespace fspn
