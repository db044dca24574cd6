#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dbmm/automaton.hpp"
#include "dbmm/traces.hpp"

namespace dbmm {

// Tree-shaped machine representing a sample set exactly: one state per
// distinct beta-input prefix, alpha outputs recorded at the prefix where
// they were observed.
struct PrefixTreeTransducer {
    Machine machine;
    std::vector<StateId> parent;        // kNoState at the root
    std::vector<SymbolId> parent_label;
    // Position of each state in the shortlex (length, then content)
    // order of access strings; drives deterministic blue selection.
    std::vector<std::uint32_t> shortlex_rank;

    std::vector<SymbolId> access_string(StateId s) const;
};

struct InferenceStats {
    std::size_t ptt_states = 0;
    std::size_t final_states = 0;
    std::size_t merge_attempts = 0;
    std::size_t merge_successes = 0;
    std::size_t promotions = 0;
    // F in the complexity bound: most alpha outputs recorded at one state.
    std::size_t max_outputs_per_state = 0;
    double elapsed_ms = 0.0;

    std::string to_json() const;
};

// Throws InconsistentSamplesError (with the two offending sample
// indices) when two samples disagree on an output at the same prefix.
PrefixTreeTransducer build_ptt(const SampleSet& samples);

// Local compatibility: all alpha-inputs defined at both states agree.
bool compatible(const Machine& machine, StateId u, StateId v);

// Folds `blue` (the root of a tree hanging off the consolidated part of
// the machine) into `red`, merging every implied pair. Returns the folded
// machine, or nullopt if any implied pair is locally incompatible; the
// input machine is never modified.
std::optional<Machine> try_merge(const Machine& machine, StateId red, StateId blue);

// Red-blue merging loop over the PTT. Deterministic: blue states are
// taken in shortlex order of their original access strings, red states in
// promotion order.
Machine state_merging(const PrefixTreeTransducer& ptt, InferenceStats* stats = nullptr);

struct InferenceResult {
    Machine machine;
    InferenceStats stats;
};

// build_ptt + state_merging; the canonical result reproduces every
// training sample exactly.
InferenceResult infer_with_stats(const SampleSet& samples);
Machine infer(const SampleSet& samples);

}  // namespace dbmm
