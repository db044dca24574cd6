#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dbmm/automaton.hpp"
#include "dbmm/envs.hpp"
#include "dbmm/traces.hpp"

namespace dbmm {
namespace oracle {

// Smallest machine (up to max_states) consistent with the samples, found
// by exhaustive search over canonical quotients of the sample prefix
// tree, or nullopt if none exists within the bound. Independent of the
// merging learner: it builds its own trie and enumerates directly.
// Throws BudgetExceededError when the search explores too many nodes.
std::optional<Machine> brute_force_minimal(const SampleSet& samples, int max_states,
                                           std::size_t node_budget = 50'000'000);

enum class MachineKind { Tm, Rm };

struct ResolvenceReport {
    bool ok = true;
    std::size_t pairs_checked = 0;
    // First failing feasible history, as (observation, action) steps; the
    // final entry is the action whose prediction was wrong.
    std::vector<std::pair<std::string, std::string>> counterexample;
    std::string detail;

    std::string to_json() const;
};

// Enumerates feasible histories of the environment breadth-first up to
// `depth` actions (memoized on (environment state, machine state)), and
// checks the machine's prediction for every action against the
// environment. For reward machines inferred over supplemented
// observations, pass the transition machine used for the supplement.
ResolvenceReport check_resolvent(const Machine& machine, MachineKind kind, const DetPomdp& env,
                                 int depth, const TransitionMachine* supplement_tm = nullptr,
                                 std::size_t pair_budget = 10'000'000);

struct CompletenessReport {
    bool state_coverage = false;
    std::vector<StateId> uncovered_states;
    bool transition_coverage = false;
    std::vector<std::pair<StateId, SymbolId>> uncovered_transitions;
    bool conflict_convergence = false;
    // Pairs of beta-prefixes reaching distinct target states with no
    // conflicting evidence (capped).
    std::vector<std::pair<std::string, std::string>> non_conflicting_prefixes;

    bool overall() const { return state_coverage && transition_coverage && conflict_convergence; }
    std::string to_json() const;
};

// Evaluates the three structure-completeness conditions of the sample
// set against a target machine (total on its beta alphabet).
CompletenessReport check_structure_complete(const SampleSet& samples, const Machine& target);

// --- value iteration on the tabular environment (ground-truth optimum) ---

struct ValueIterationResult {
    std::vector<double> values;
    std::vector<int> greedy_action;  // per state
    int sweeps = 0;
};

ValueIterationResult value_iteration(const DetPomdp& env, double tolerance = 1e-12,
                                     int max_sweeps = 1'000'000);

// Undiscounted return of the value-iteration greedy policy rolled out
// from the initial state (episode cap max_steps).
double optimal_undiscounted_return(const DetPomdp& env, int max_steps);

}  // namespace oracle
}  // namespace dbmm
