#pragma once

#include <set>

#include "dbmm/automaton.hpp"
#include "dbmm/traces.hpp"

namespace dbmm {

// Deletes every alpha-input whose observed output is the same at all of
// its occurrences across the whole sample set, recording the constant in
// the returned record. Positional alternation is not preserved.
std::pair<SampleSet, ReductionRecord> remove_redundant_alpha(const SampleSet& samples);

// Deletes all occurrences of the given beta-inputs (they are known a
// priori to cause no state change). Throws DataError if `trivial`
// mentions a symbol outside the sample set's beta alphabet.
SampleSet remove_trivial_beta(const SampleSet& samples, const std::set<SymbolId>& trivial);

// Recovery: G(q, i_alpha) = R(i_alpha) for every state. Throws DataError
// if the machine already emits something else for a recorded input.
Machine restore_redundant_alpha(const Machine& machine, const ReductionRecord& record);

// Recovery: self-loop T(q, i_beta) = q on every state for each removed
// trivial beta-input.
Machine restore_trivial_beta(const Machine& machine, const ReductionRecord& record);

// Both rules in pipeline order (alpha first), merged record.
std::pair<SampleSet, ReductionRecord> apply_reductions(const SampleSet& samples,
                                                       const std::set<SymbolId>& trivial);
Machine restore_all(const Machine& machine, const ReductionRecord& record);

}  // namespace dbmm
