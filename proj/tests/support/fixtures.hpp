#pragma once

#include <initializer_list>
#include <utility>

#include "fspn/model.hpp"

namespace fspn::testing {

/// Four discrete variables X1..X4 over 0..20. X1,X2 are factored out
/// against X3,X4; the conditional side splits on X3 at 5.
///
///   root: factorize(H={X1,X2}, W={X3,X4})
///     left:  sum(0.3, 0.7) of product(L1(X3), L2(X4)) and product(L3(X3), L4(X4))
///     right: split on X3 into [0,5] -> L5(X1,X2) and [6,20] -> L6(X1,X2)
///
/// L1 puts 0.1 on X3 in [3,5] and 0.3 on X3 = 6; L3 puts 0.2 and 0.3.
/// L5 gives Pr(X1 in [1,7]) = 0.3, L6 gives 0.4.
FspnModel four_var_fixture();

/// Event over `vars` with the listed (variable, interval) constraints and
/// every other variable left at its full domain.
Event make_event(const std::vector<VariableMeta>& vars, std::initializer_list<std::pair<int, Interval>> constraints);

/// Single uni-leaf model over one discrete variable.
FspnModel single_leaf_model(std::vector<double> masses);

}  // namespace fspn::testing
