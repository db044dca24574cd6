#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dbmm/symbols.hpp"

namespace dbmm {

using StateId = std::int32_t;
inline constexpr StateId kNoState = -1;

// A dual-behavior Mealy machine: alpha-inputs emit one output each and
// leave the state alone, beta-inputs move the state and emit nothing.
// Both maps are partial; inference works on incomplete machines and the
// recovery steps in preprocess fill in what was removed up front.
//
// States are dense integers 0..num_states-1 so merge operations can
// relabel cheaply; serialized form carries stable per-state names.
class Machine {
public:
    struct State {
        std::map<SymbolId, StateId> next;  // beta-input -> successor
        std::map<SymbolId, SymbolId> out;  // alpha-input -> output
    };

    Machine() = default;
    explicit Machine(SymbolTablePtr symbols) : symbols_(std::move(symbols)) {}

    const SymbolTablePtr& symbols() const { return symbols_; }
    void set_symbols(SymbolTablePtr s) { symbols_ = std::move(s); }

    StateId add_state();
    StateId initial() const { return initial_; }
    void set_initial(StateId s);
    std::size_t num_states() const { return states_.size(); }
    const State& state(StateId s) const;

    // Alphabets. add_* are idempotent; membership is what step/output
    // validate their inputs against.
    void add_alpha(SymbolId s);
    void add_beta(SymbolId s);
    const std::vector<SymbolId>& alpha_alphabet() const { return alpha_; }
    const std::vector<SymbolId>& beta_alphabet() const { return beta_; }
    bool is_alpha(SymbolId s) const;
    bool is_beta(SymbolId s) const;

    // Mutators used by builders and recovery. Setting an existing key to
    // a different value throws DataError (the maps are functional).
    void set_transition(StateId from, SymbolId beta, StateId to);
    void set_output(StateId st, SymbolId alpha, SymbolId out);
    // Overwrite variants for internal merge machinery.
    void force_transition(StateId from, SymbolId beta, StateId to);

    // T(state, input) - undefined is a normal answer mid-inference.
    // Throws DataError if state or input is unknown.
    std::optional<StateId> step_beta(StateId state, SymbolId input) const;

    // G(state, input).
    std::optional<SymbolId> output_alpha(StateId state, SymbolId input) const;

    struct RunResult {
        bool ok = true;
        std::size_t fail_position = 0;  // index into inputs when !ok
        std::vector<SymbolId> outputs;
        StateId final_state = kNoState;
    };

    // Processes a mixed alpha/beta sequence from `from`, collecting
    // alpha outputs in order. Stops at the first undefined lookup.
    RunResult try_run_from(StateId from, const std::vector<SymbolId>& inputs) const;
    RunResult try_run(const std::vector<SymbolId>& inputs) const;
    // Throwing wrapper: Error mentioning the failing position.
    std::vector<SymbolId> run(const std::vector<SymbolId>& inputs) const;

    // Checks the structural invariants (disjoint alphabets, references in
    // range). Throws DataError on violation.
    void validate() const;

    // Renumbers reachable states canonically (BFS from the initial state,
    // beta-inputs in symbol-key order) and drops unreachable ones.
    Machine canonical() const;

    std::string to_json() const;
    static Machine from_json(const std::string& text, SymbolTablePtr symbols);
    std::string to_dot(const std::string& graph_name = "machine") const;

    std::vector<std::string> state_names;  // optional; defaults to q0..qN

private:
    SymbolTablePtr symbols_;
    std::vector<State> states_;
    StateId initial_ = kNoState;
    std::vector<SymbolId> alpha_, beta_;

    void check_state(StateId s) const;
};

// True iff a bijection on the reachable states preserves the initial
// state, transitions and outputs. Symbols are matched by key, so the two
// machines may use different symbol tables.
bool isomorphic(const Machine& a, const Machine& b);

// Thin role wrappers. The beta alphabet is label sets over AP; alpha
// inputs are (observation, action) pairs.
struct TransitionMachine {
    Machine machine;

    std::optional<StateId> delta_q(StateId q, SymbolId label) const {
        return machine.step_beta(q, label);
    }
    // Predicted next observation for (observation, action) at q.
    std::optional<SymbolId> predict(StateId q, SymbolId alpha_pair) const {
        return machine.output_alpha(q, alpha_pair);
    }
};

struct RewardMachine {
    Machine machine;
    bool alpha_augmented = false;  // alpha observations carry TM states

    std::optional<StateId> delta_u(StateId u, SymbolId label) const {
        return machine.step_beta(u, label);
    }
    std::optional<SymbolId> reward(StateId u, SymbolId alpha_pair) const {
        return machine.output_alpha(u, alpha_pair);
    }
};

}  // namespace dbmm
