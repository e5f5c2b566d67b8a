#pragma once

#include <cstdint>
#include <limits>
#include <string>

namespace fspn {

enum class SplitMethod { grid_kmeans, greedy };

/// Hyper-parameters of structure learning.
///
/// `tau_low` and `tau_high` are the independence and high-correlation
/// thresholds on the RDC score; `tau_high = inf` disables factorize nodes.
struct LearnConfig {
    double tau_low = 0.3;
    double tau_high = 0.7;
    int min_instances = 100;
    int sum_k = 2;
    int rdc_features = 20;
    double rdc_scale = 1.0 / 6.0;
    int rdc_seeds = 5;
    /// Rows used by one RDC evaluation; larger inputs are subsampled.
    int rdc_max_rows = 10000;
    double smoothing_alpha = 0.1;
    int gmm_components = 2;
    SplitMethod split_method = SplitMethod::greedy;
    int greedy_candidates = 10;
    int max_depth = 30;
    std::uint64_t seed = 0;

    /// Empty when valid, otherwise the first violated constraint.
    std::string check() const;

    bool operator==(const LearnConfig&) const = default;
};

/// Flat `key=value` lines; `#` starts a comment. Unknown keys are rejected.
LearnConfig parse_learn_config(const std::string& text, LearnConfig base = {});
std::string format_learn_config(const LearnConfig& cfg);

/// Applies one `key=value` setting; throws DataError on an unknown key or bad value.
void set_learn_config_value(LearnConfig& cfg, const std::string& key, const std::string& value);

std::string to_string(SplitMethod m);

}  // namespace fspn
