#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "dbmm/symbols.hpp"

namespace dbmm {

// One environment step: the label set of the current observation, the
// observation itself, the action taken and the reward received. Rewards
// are interned canonical decimal strings so output equality is exact.
struct TraceStep {
    SymbolId label = kNoSymbol;
    SymbolId obs = kNoSymbol;
    SymbolId action = kNoSymbol;
    SymbolId reward = kNoSymbol;
};

struct LabeledTrace {
    std::vector<TraceStep> steps;
};

// What the reduction rules removed, so recovery can put it back.
struct ReductionRecord {
    std::map<SymbolId, SymbolId> redundant_alpha;  // alpha-input -> constant output
    std::set<SymbolId> trivial_beta;

    bool empty() const { return redundant_alpha.empty() && trivial_beta.empty(); }
};

// An input/output sequence pair. Outputs align positionally with inputs;
// beta positions hold the kBetaDefault placeholder.
struct Sample {
    std::vector<SymbolId> inputs;
    std::vector<SymbolId> outputs;
};

struct SampleSet {
    SymbolTablePtr symbols;
    std::vector<Sample> samples;
    std::vector<SymbolId> alpha_alphabet;
    std::vector<SymbolId> beta_alphabet;
    ReductionRecord reduction_log;

    std::string debug_json() const;  // not a stable interchange format
};

// --- trace file I/O (JSONL, one trace object per line) ---

std::vector<LabeledTrace> read_traces(const std::string& path, const SymbolTablePtr& symbols);
std::vector<LabeledTrace> parse_traces(const std::string& text, const SymbolTablePtr& symbols);
void write_traces(const std::string& path, const std::vector<LabeledTrace>& traces,
                  const SymbolTable& symbols);
std::string traces_to_jsonl(const std::vector<LabeledTrace>& traces, const SymbolTable& symbols);

// --- trace -> sample reduction ---

// Input layout per trace: <(o0,a0), l0, (o1,a1), l1, ...> ending on an
// alpha-input. The TM sample drops the final (o,a) pair (its successor
// observation is unknown) and the label before it; outputs are the next
// observations. Traces must have at least 2 steps.
SampleSet to_tm_samples(const std::vector<LabeledTrace>& traces, const SymbolTablePtr& symbols);

// Same layout at full length; outputs are the per-step rewards.
SampleSet to_rm_samples(const std::vector<LabeledTrace>& traces, const SymbolTablePtr& symbols);

// The interned (obs, action) alpha symbol used by both conversions.
SymbolId alpha_pair_symbol(SymbolTable& table, SymbolId obs, SymbolId action);

}  // namespace dbmm
