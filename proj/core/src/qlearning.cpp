#include "dbmm/qlearning.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "dbmm/errors.hpp"
#include "dbmm/supplement.hpp"

namespace dbmm {

void QLearningConfig::validate() const {
    if (learning_rate <= 0.0 || learning_rate > 1.0) throw DataError("learning_rate must be in (0,1]");
    if (discount < 0.0 || discount > 1.0) throw DataError("discount must be in [0,1]");
    if (epsilon < 0.0 || epsilon > 1.0) throw DataError("epsilon must be in [0,1]");
    if (epsilon_decay <= 0.0 || epsilon_decay > 1.0) throw DataError("epsilon_decay must be in (0,1]");
    if (epsilon_floor > epsilon) throw DataError("epsilon_floor must not exceed epsilon");
    if (episodes < 0 || max_steps <= 0) throw DataError("episodes must be >= 0, max_steps positive");
}

namespace {

struct Tables {
    std::map<AugmentedState, int> index;
    std::vector<AugmentedState> states;
    std::vector<std::vector<double>> q;
    int actions;

    int lookup(const AugmentedState& s) {
        auto it = index.find(s);
        if (it != index.end()) return it->second;
        int id = static_cast<int>(states.size());
        index.emplace(s, id);
        states.push_back(s);
        q.emplace_back(static_cast<std::size_t>(actions), 0.0);
        return id;
    }

    // Greedy action; exact ties resolve uniformly via the caller's RNG
    // (zero-initialized tables tie everywhere early on, and a fixed pick
    // would pin the agent against a wall).
    int greedy(int s, std::mt19937_64& rng) const {
        const auto& row = q[static_cast<std::size_t>(s)];
        double best = row[0];
        int count = 1;
        for (int a = 1; a < actions; ++a) {
            if (row[static_cast<std::size_t>(a)] > best) {
                best = row[static_cast<std::size_t>(a)];
                count = 1;
            } else if (row[static_cast<std::size_t>(a)] == best) {
                ++count;
            }
        }
        if (count == 1) {
            for (int a = 0; a < actions; ++a)
                if (row[static_cast<std::size_t>(a)] == best) return a;
        }
        int pick = static_cast<int>(rng() % static_cast<std::uint64_t>(count));
        for (int a = 0; a < actions; ++a) {
            if (row[static_cast<std::size_t>(a)] == best && pick-- == 0) return a;
        }
        return 0;
    }
};

StateId advance(const Machine& m, StateId s, SymbolId label, const char* which) {
    if (!m.is_beta(label))
        throw DataError(std::string(which) + " machine has no transition for label " +
                        m.symbols()->key(label).display());
    auto next = m.step_beta(s, label);
    if (!next)
        throw DataError(std::string(which) + " machine has no transition for label " +
                        m.symbols()->key(label).display() + " at state " + state_name(m, s));
    return *next;
}

}  // namespace

TrainResult train(const DetPomdp& env, const TransitionMachine& tm, const RewardMachine& rm,
                  const QLearningConfig& cfg) {
    cfg.validate();
    TrainResult result;
    Tables tables;
    tables.actions = env.action_count();

    // Determinism witness for the restored Markov property.
    std::map<std::pair<AugmentedState, int>, AugmentedState> seen;

    std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ull + 0xda3e39cb94b95bdbull);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> pick(0, env.action_count() - 1);

    double epsilon = cfg.epsilon;
    for (int episode = 0; episode < cfg.episodes; ++episode) {
        int s = env.initial_state;
        AugmentedState aug{env.obs_of_state[static_cast<std::size_t>(s)], rm.machine.initial(),
                           tm.machine.initial()};
        double total = 0.0;
        for (int t = 0; t < cfg.max_steps; ++t) {
            int si = tables.lookup(aug);
            int a = unit(rng) < epsilon ? pick(rng) : tables.greedy(si, rng);
            std::size_t k = env.sa(s, a);
            int s2 = env.next[k];
            double r = env.reward_val[k];
            total += r;
            bool over = env.terminal_action[k] || env.terminal_state[static_cast<std::size_t>(s2)];

            double target = r;
            if (!over) {
                // Machines consume the label of the current observation; an
                // episode-ending step has no successor to annotate.
                SymbolId label = env.label_of(aug.obs);
                AugmentedState aug2{env.obs_of_state[static_cast<std::size_t>(s2)],
                                    advance(rm.machine, aug.u, label, "reward"),
                                    advance(tm.machine, aug.q, label, "transition")};

                ++result.transitions_observed;
                auto [it, inserted] = seen.try_emplace({aug, a}, aug2);
                if (!inserted && !(it->second == aug2)) ++result.markov_violations;

                int s2i = tables.lookup(aug2);
                const auto& row = tables.q[static_cast<std::size_t>(s2i)];
                target += cfg.discount * *std::max_element(row.begin(), row.end());
                auto& cell = tables.q[static_cast<std::size_t>(si)][static_cast<std::size_t>(a)];
                cell += cfg.learning_rate * (target - cell);
                if (!std::isfinite(cell)) throw Error("Q-value diverged");
                s = s2;
                aug = aug2;
            } else {
                auto& cell = tables.q[static_cast<std::size_t>(si)][static_cast<std::size_t>(a)];
                cell += cfg.learning_rate * (target - cell);
                if (!std::isfinite(cell)) throw Error("Q-value diverged");
                break;
            }
        }
        result.episode_returns.push_back(total);
        epsilon = std::max(cfg.epsilon_floor, epsilon * cfg.epsilon_decay);
    }
    result.states = std::move(tables.states);
    result.q = std::move(tables.q);
    return result;
}

double evaluate_greedy(const DetPomdp& env, const TransitionMachine& tm, const RewardMachine& rm,
                       const TrainResult& trained, int episodes, int max_steps,
                       std::uint64_t /*seed*/) {
    if (episodes <= 0) return 0.0;
    std::map<AugmentedState, int> index;
    for (std::size_t i = 0; i < trained.states.size(); ++i)
        index.emplace(trained.states[i], static_cast<int>(i));

    double sum = 0.0;
    for (int e = 0; e < episodes; ++e) {
        int s = env.initial_state;
        AugmentedState aug{env.obs_of_state[static_cast<std::size_t>(s)], rm.machine.initial(),
                           tm.machine.initial()};
        double total = 0.0;
        for (int t = 0; t < max_steps; ++t) {
            int a = 0;
            auto it = index.find(aug);
            if (it != index.end()) {
                const auto& row = trained.q[static_cast<std::size_t>(it->second)];
                for (int cand = 1; cand < env.action_count(); ++cand)
                    if (row[static_cast<std::size_t>(cand)] > row[static_cast<std::size_t>(a)])
                        a = cand;
            }
            std::size_t k = env.sa(s, a);
            total += env.reward_val[k];
            int s2 = env.next[k];
            SymbolId label = env.label_of(aug.obs);
            if (env.terminal_action[k] || env.terminal_state[static_cast<std::size_t>(s2)]) break;
            aug = AugmentedState{env.obs_of_state[static_cast<std::size_t>(s2)],
                                 advance(rm.machine, aug.u, label, "reward"),
                                 advance(tm.machine, aug.q, label, "transition")};
            s = s2;
        }
        sum += total;
    }
    return sum / episodes;
}

std::string TrainResult::curve_csv(int window) const {
    std::ostringstream os;
    os << "episode,total_reward,moving_avg\n";
    double acc = 0.0;
    std::vector<double> buf;
    for (std::size_t i = 0; i < episode_returns.size(); ++i) {
        buf.push_back(episode_returns[i]);
        acc += episode_returns[i];
        if (buf.size() > static_cast<std::size_t>(window)) {
            acc -= buf[buf.size() - static_cast<std::size_t>(window) - 1];
        }
        double avg = acc / std::min<std::size_t>(buf.size(), static_cast<std::size_t>(window));
        os << i << "," << episode_returns[i] << "," << avg << "\n";
    }
    return os.str();
}

std::string TrainResult::qtable_json(const SymbolTable& symbols,
                                     const std::vector<SymbolId>& actions) const {
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t i = 0; i < states.size(); ++i) {
        nlohmann::json row;
        row["obs"] = symbols.key(states[i].obs).display();
        row["u"] = states[i].u;
        row["q"] = states[i].q;
        nlohmann::json vals;
        for (std::size_t a = 0; a < actions.size(); ++a)
            vals[symbols.key(actions[a]).parts.at(0)] = q[i][a];
        row["values"] = vals;
        j.push_back(row);
    }
    return j.dump(2);
}

}  // namespace dbmm
