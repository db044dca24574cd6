#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dbmm/automaton.hpp"
#include "dbmm/traces.hpp"

namespace dbmm {

// Tabular deterministic partially observable MDP. Transitions, rewards,
// the observation map and the labeling are all total. Episodes end on
// entering a terminal state or after a terminal (state, action) step;
// the latter is needed for environments where sitting ends the episode
// without leaving the product state space.
struct DetPomdp {
    SymbolTablePtr symbols;
    std::string name;
    double gamma = 0.95;

    int num_states = 0;
    int initial_state = 0;
    std::vector<SymbolId> actions;

    std::vector<SymbolId> obs_of_state;               // Z
    std::map<SymbolId, SymbolId> label_of_obs;        // L, keyed by observation
    std::vector<std::string> propositions;            // AP

    std::vector<int> next;                            // [s * A + a]
    std::vector<SymbolId> reward_sym;                 // canonical decimals
    std::vector<double> reward_val;
    std::vector<char> terminal_state;                 // episode over on entry
    std::vector<char> terminal_action;                // [s * A + a], over after step

    int action_count() const { return static_cast<int>(actions.size()); }
    std::size_t sa(int s, int a) const {
        return static_cast<std::size_t>(s) * actions.size() + static_cast<std::size_t>(a);
    }
    SymbolId label_of(SymbolId obs) const;
    int action_index(SymbolId action) const;
    std::vector<SymbolId> observation_set() const;

    std::string to_json() const;
    static DetPomdp from_json(const std::string& text, SymbolTablePtr symbols);
};

struct EnvStep {
    int next_state;
    SymbolId obs;     // Z(P(s,a))
    SymbolId label;   // L(Z(P(s,a)))
    SymbolId reward;  // R(s,a)
    double reward_value;
    bool episode_over;
};

EnvStep step(const DetPomdp& env, int state, int action_idx);

// --- the four-area example environment ---

// Areas orangeroom (key), corridor, cyanroom (toilet, locked until the
// key was picked up) and limegreenroom (sofa). Sitting on the sofa
// always ends the episode; the reward is 1 iff the toilet was visited.
DetPomdp build_fig1_env(const SymbolTablePtr& symbols);

// --- n x n grid with a k-phase task ---

// Phase labels are placed on distinct cells (seeded shuffle); stepping on
// the cell of the next phase advances the task, and sitting in the final
// phase pays 1 and ends the episode. Sitting early is a no-op.
DetPomdp build_phase_grid(const SymbolTablePtr& symbols, int size, int phases,
                          std::uint64_t seed = 0);

// --- random machine-backed grid environments ---

struct RandomEnvParams {
    int grid = 25;
    int tm_states = 7;
    int rm_states = 3;
    int labels = 5;
    int cells_per_label = 16;      // label placements on odd-coordinate cells
    double extra_edge_prob = 0.2;  // extra TM transitions beyond the base cycle
    double impassable_frac = 0.3;  // per TM state, fraction of labeled cells blocked
    double gamma = 0.95;
    std::uint64_t seed = 1;
};

// Ground truth backing a generated environment: the label placement, the
// passability-controlling TM (with its per-state impassable cell sets)
// and the reward-controlling RM (complete over labels; forward DAG edges
// plus punished back edges; one terminal state).
struct GroundTruthSpec {
    int grid = 0;
    std::vector<std::string> label_names;
    std::map<int, int> cell_label;                   // cell index -> label index

    TransitionMachine tm;                            // full output function
    std::vector<std::set<int>> impassable;           // per TM state: cell indexes

    StateId rm_initial = 0;
    StateId rm_terminal = 0;
    std::vector<std::vector<StateId>> rm_delta;      // [u][label index]
    std::vector<std::vector<long long>> rm_reward;   // [u][label index]
    std::vector<std::vector<char>> rm_back_edge;     // [u][label index]

    // Joint replay of the ground-truth machines over a trace; true iff
    // every next observation and reward is reproduced exactly.
    bool replay_trace(const DetPomdp& env, const LabeledTrace& trace) const;

    std::string to_json() const;
};

std::pair<DetPomdp, GroundTruthSpec> generate_random_env(const SymbolTablePtr& symbols,
                                                         const RandomEnvParams& params);

// --- trace generation ---

enum class Policy { Random };

// Episodes draw their own generators from (seed, episode index), so the
// corpus is identical no matter how many worker threads run.
std::vector<LabeledTrace> generate_traces(const DetPomdp& env, Policy policy, int episodes,
                                          int max_len, std::uint64_t seed, int jobs = 1);

}  // namespace dbmm
