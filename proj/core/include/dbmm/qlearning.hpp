#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dbmm/automaton.hpp"
#include "dbmm/envs.hpp"

namespace dbmm {

// The Markovian state handed to the agent: raw observation plus the
// states of the inferred reward and transition machines.
struct AugmentedState {
    SymbolId obs;
    StateId u;  // reward machine
    StateId q;  // transition machine

    bool operator==(const AugmentedState&) const = default;
    bool operator<(const AugmentedState& o) const {
        return std::tie(obs, u, q) < std::tie(o.obs, o.u, o.q);
    }
};

struct QLearningConfig {
    double learning_rate = 0.1;
    double discount = 0.95;
    double epsilon = 0.3;
    double epsilon_decay = 0.995;  // applied after each episode
    double epsilon_floor = 0.01;
    int episodes = 1500;
    int max_steps = 300;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainResult {
    // Dense table over discovered augmented states.
    std::vector<AugmentedState> states;
    std::vector<std::vector<double>> q;  // [state][action]
    std::vector<double> episode_returns;

    // Restored-Markov-property bookkeeping: how often an (augmented
    // state, action) pair was followed by a different successor than
    // before.
    std::size_t markov_violations = 0;
    std::size_t transitions_observed = 0;

    std::string curve_csv(int moving_average_window = 100) const;
    std::string qtable_json(const SymbolTable& symbols,
                            const std::vector<SymbolId>& actions) const;
};

// Tabular Q-learning over (observation, RM state, TM state) with
// epsilon-greedy exploration; greedy ties break toward the lowest action
// index. Throws DataError when a machine lacks a transition for an
// emitted label.
TrainResult train(const DetPomdp& env, const TransitionMachine& tm, const RewardMachine& rm,
                  const QLearningConfig& cfg);

// Mean undiscounted return of the greedy policy over `episodes` runs.
double evaluate_greedy(const DetPomdp& env, const TransitionMachine& tm, const RewardMachine& rm,
                       const TrainResult& trained, int episodes, int max_steps,
                       std::uint64_t seed = 0);

}  // namespace dbmm
