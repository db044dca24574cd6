#pragma once

#include <vector>

#include "dbmm/automaton.hpp"
#include "dbmm/traces.hpp"

namespace dbmm {

// Name used for a machine state in augmented observations and exports.
std::string state_name(const Machine& machine, StateId s);

// Pairs each observation with the TM state reached before consuming that
// step's label, then advances the TM by the label. Throws DataError with
// the step index if the TM has no transition for a label.
LabeledTrace supplement_trace(const TransitionMachine& tm, const LabeledTrace& trace);

// Element-wise supplement; error messages carry the trace index.
std::vector<LabeledTrace> supplement_corpus(const TransitionMachine& tm,
                                            const std::vector<LabeledTrace>& traces);

}  // namespace dbmm
