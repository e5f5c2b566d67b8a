#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fspn/data.hpp"
#include "fspn/model.hpp"

namespace fspn {

/// Pr(X in event). The event is canonicalized against the model's variables
/// first; an empty event has probability 0. Tiny negative round-off is
/// clamped to 0 and results above 1 to 1. Throws DataError on an arity
/// mismatch and ModelError when a leaf produces NaN.
double infer_marginal(const FspnModel& model, const Event& event);

/// Pr(query | evidence). The two events must constrain disjoint variables.
/// Throws DataError("evidence has zero mass") when Pr(evidence) < 1e-12.
double infer_evidence(const FspnModel& model, const Event& query, const Event& evidence);

/// Natural log of the point mass or density of one full row. Factorize nodes
/// pick the multi-leaf whose region holds the row.
double point_log_density(const FspnModel& model, std::span<const double> row);

struct LogLikelihood {
    std::vector<double> per_row;
    double average = 0.0;
};

/// Throws DataError when the columns do not match the model's variables.
LogLikelihood log_likelihood(const FspnModel& model, const DataMatrix& data);

struct EventPart {
    Event event;
    std::size_t leaf = 0;  // index into the leaf list
};

using EventPartition = std::vector<EventPart>;

/// Intersects `event` with each leaf's condition region, dropping empty parts.
EventPartition partition_event_by_multileaves(const Event& event, std::span<const MultiLeafNode* const> leaves);

struct ParsedQuery {
    Event query;
    std::optional<Event> evidence;
};

/// Parses `name=lo..hi` / `name=v` tokens separated by spaces, optionally
/// followed by `|` and evidence tokens. A leading `(` makes the lower bound
/// open and a trailing `)` the upper bound; either bound may be omitted.
/// Discrete values may be given as labels. Throws DataError on bad input.
ParsedQuery parse_query(const std::string& line, const std::vector<VariableMeta>& vars);

/// Inverse of the token grammar for the constrained variables.
std::string format_event(const Event& event, const std::vector<VariableMeta>& vars);

}  // namespace fspn
