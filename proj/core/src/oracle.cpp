#include "dbmm/oracle.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <unordered_map>

#include <json.hpp>

#include "dbmm/errors.hpp"

namespace dbmm {
namespace oracle {

using nlohmann::json;

namespace {

// The oracle keeps its own prefix trie so it never shares code with the
// learner it cross-checks.
struct Trie {
    struct Node {
        std::map<SymbolId, int> kids;
        std::map<SymbolId, SymbolId> pins;  // alpha-input -> output
    };
    std::vector<Node> nodes;

    explicit Trie(const SampleSet& samples) {
        nodes.emplace_back();
        for (std::size_t idx = 0; idx < samples.samples.size(); ++idx) {
            const Sample& s = samples.samples[idx];
            int cur = 0;
            for (std::size_t i = 0; i < s.inputs.size(); ++i) {
                if (s.outputs[i] != kBetaDefault) {
                    auto it = nodes[static_cast<std::size_t>(cur)].pins.find(s.inputs[i]);
                    if (it != nodes[static_cast<std::size_t>(cur)].pins.end()) {
                        if (it->second != s.outputs[i])
                            throw InconsistentSamplesError(idx, idx,
                                                           "conflicting outputs at a shared prefix");
                    } else {
                        nodes[static_cast<std::size_t>(cur)].pins[s.inputs[i]] = s.outputs[i];
                    }
                } else {
                    auto it = nodes[static_cast<std::size_t>(cur)].kids.find(s.inputs[i]);
                    if (it == nodes[static_cast<std::size_t>(cur)].kids.end()) {
                        nodes.emplace_back();
                        int fresh = static_cast<int>(nodes.size()) - 1;
                        nodes[static_cast<std::size_t>(cur)].kids[s.inputs[i]] = fresh;
                        cur = fresh;
                    } else {
                        cur = it->second;
                    }
                }
            }
        }
    }

    std::vector<int> bfs_order() const {
        std::vector<int> order;
        std::deque<int> queue{0};
        while (!queue.empty()) {
            int n = queue.front();
            queue.pop_front();
            order.push_back(n);
            for (const auto& [sym, kid] : nodes[static_cast<std::size_t>(n)].kids) queue.push_back(kid);
        }
        return order;
    }
};

// Backtracking enumeration of canonical quotients with at most m classes.
class QuotientSearch {
public:
    QuotientSearch(const Trie& trie, int m, std::size_t budget, std::size_t& spent)
        : trie_(trie), m_(m), budget_(budget), spent_(spent) {
        order_ = trie.bfs_order();
        position_.assign(trie_.nodes.size(), 0);
        for (std::size_t i = 0; i < order_.size(); ++i)
            position_[static_cast<std::size_t>(order_[i])] = i;
        cls_.assign(trie_.nodes.size(), -1);
        cls_[0] = 0;
        used_ = 1;
        class_pins_.assign(static_cast<std::size_t>(m), {});
        delta_.assign(static_cast<std::size_t>(m), {});
    }

    bool run() { return place(0); }

    Machine build(const SampleSet& samples) const {
        Machine out(samples.symbols);
        for (int c = 0; c < used_; ++c) out.add_state();
        out.set_initial(0);
        for (SymbolId a : samples.alpha_alphabet) out.add_alpha(a);
        for (SymbolId b : samples.beta_alphabet) out.add_beta(b);
        for (int c = 0; c < used_; ++c) {
            for (const auto& [sym, to] : delta_[static_cast<std::size_t>(c)])
                out.force_transition(c, sym, to);
            for (const auto& [sym, o] : class_pins_[static_cast<std::size_t>(c)])
                out.set_output(c, sym, o);
        }
        return out;
    }

private:
    // Processes order_[i]: merge its pins into its class, then assign
    // classes to its children (forced by delta where defined, branching
    // otherwise) and recurse.
    bool place(std::size_t i) {
        if (++spent_ > budget_) throw BudgetExceededError("quotient search budget exhausted");
        if (i == order_.size()) return true;
        int node = order_[i];
        int c = cls_[static_cast<std::size_t>(node)];
        auto& pins = class_pins_[static_cast<std::size_t>(c)];
        std::vector<SymbolId> added;
        for (const auto& [sym, out] : trie_.nodes[static_cast<std::size_t>(node)].pins) {
            auto it = pins.find(sym);
            if (it != pins.end()) {
                if (it->second != out) {
                    for (SymbolId s : added) pins.erase(s);
                    return false;
                }
            } else {
                pins[sym] = out;
                added.push_back(sym);
            }
        }
        if (assign_children(node, trie_.nodes[static_cast<std::size_t>(node)].kids.begin(), i)) return true;
        for (SymbolId s : added) pins.erase(s);
        return false;
    }

    bool assign_children(int node, std::map<SymbolId, int>::const_iterator it, std::size_t i) {
        int c = cls_[static_cast<std::size_t>(node)];
        if (it == trie_.nodes[static_cast<std::size_t>(node)].kids.end()) return place(i + 1);
        auto [sym, kid] = *it;
        auto next_it = std::next(it);
        auto& row = delta_[static_cast<std::size_t>(c)];
        auto d = row.find(sym);
        if (d != row.end()) {
            cls_[static_cast<std::size_t>(kid)] = d->second;
            if (assign_children(node, next_it, i)) return true;
            cls_[static_cast<std::size_t>(kid)] = -1;
            return false;
        }
        // Canonical enumeration: every already-used class, then one fresh.
        int options = std::min(used_ + 1, m_);
        for (int target = 0; target < options; ++target) {
            bool fresh = target == used_;
            if (fresh) ++used_;
            row[sym] = target;
            cls_[static_cast<std::size_t>(kid)] = target;
            if (assign_children(node, next_it, i)) return true;
            cls_[static_cast<std::size_t>(kid)] = -1;
            row.erase(sym);
            if (fresh) --used_;
        }
        return false;
    }

    const Trie& trie_;
    int m_;
    std::size_t budget_;
    std::size_t& spent_;
    std::vector<int> order_;
    std::vector<std::size_t> position_;
    std::vector<int> cls_;
    int used_;
    std::vector<std::map<SymbolId, SymbolId>> class_pins_;
    std::vector<std::map<SymbolId, int>> delta_;
};

}  // namespace

std::optional<Machine> brute_force_minimal(const SampleSet& samples, int max_states,
                                           std::size_t node_budget) {
    Trie trie(samples);
    std::size_t spent = 0;
    for (int m = 1; m <= max_states; ++m) {
        QuotientSearch search(trie, m, node_budget, spent);
        if (search.run()) return search.build(samples).canonical();
    }
    return std::nullopt;
}

std::string ResolvenceReport::to_json() const {
    json j;
    j["ok"] = ok;
    j["pairs_checked"] = pairs_checked;
    j["detail"] = detail;
    json hist = json::array();
    for (const auto& [obs, act] : counterexample) hist.push_back({{"obs", obs}, {"action", act}});
    j["counterexample"] = hist;
    return j.dump(2);
}

ResolvenceReport check_resolvent(const Machine& machine, MachineKind kind, const DetPomdp& env,
                                 int depth, const TransitionMachine* supplement_tm,
                                 std::size_t pair_budget) {
    ResolvenceReport report;
    SymbolTable& table = *env.symbols;

    struct Key {
        int env_state;
        StateId v;
        StateId tq;
        bool operator==(const Key&) const = default;
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            return (static_cast<std::size_t>(k.env_state) * 1000003u) ^
                   (static_cast<std::size_t>(static_cast<std::uint32_t>(k.v)) << 20) ^
                   static_cast<std::uint32_t>(k.tq);
        }
    };
    struct Visit {
        Key parent;
        SymbolId action = kNoSymbol;
        bool root = true;
    };
    std::unordered_map<Key, Visit, KeyHash> visited;

    auto history_of = [&](Key k, SymbolId failing_action) {
        std::vector<std::pair<std::string, std::string>> hist;
        SymbolId fo = env.obs_of_state[static_cast<std::size_t>(k.env_state)];
        hist.push_back({table.key(fo).display(), table.key(failing_action).display()});
        while (!visited.at(k).root) {
            const Visit& v = visited.at(k);
            SymbolId o = env.obs_of_state[static_cast<std::size_t>(v.parent.env_state)];
            hist.push_back({table.key(o).display(), table.key(v.action).display()});
            k = v.parent;
        }
        std::reverse(hist.begin(), hist.end());
        return hist;
    };

    auto augmented_obs = [&](SymbolId obs, StateId tq) {
        SymbolKey k = table.key(obs);
        std::string name = "q" + std::to_string(tq);
        if (supplement_tm && static_cast<std::size_t>(tq) <
                                 supplement_tm->machine.state_names.size())
            name = supplement_tm->machine.state_names[static_cast<std::size_t>(tq)];
        k.parts.push_back(name);
        return table.intern(std::move(k));
    };

    Key root{env.initial_state, machine.initial(),
             supplement_tm ? supplement_tm->machine.initial() : 0};
    std::deque<Key> frontier{root};
    visited[root] = Visit{};
    int level = 0;

    while (!frontier.empty() && level <= depth) {
        std::deque<Key> next_frontier;
        for (const Key& key : frontier) {
            if (env.terminal_state[static_cast<std::size_t>(key.env_state)]) continue;
            SymbolId obs = env.obs_of_state[static_cast<std::size_t>(key.env_state)];
            SymbolId label = env.label_of(obs);
            SymbolId machine_obs =
                kind == MachineKind::Rm && supplement_tm ? augmented_obs(obs, key.tq) : obs;
            for (int a = 0; a < env.action_count(); ++a) {
                if (++report.pairs_checked > pair_budget)
                    throw BudgetExceededError("resolvence check budget exhausted");
                std::size_t sa = env.sa(key.env_state, a);
                bool ends_episode = env.terminal_action[sa] ||
                                    env.terminal_state[static_cast<std::size_t>(env.next[sa])];
                // No feasible history ever shows the observation after an
                // episode-ending step, so there is nothing for a TM to
                // predict there. Rewards are observed on every step.
                if (kind == MachineKind::Tm && ends_episode) continue;
                SymbolId alpha = alpha_pair_symbol(table, machine_obs, env.actions[static_cast<std::size_t>(a)]);
                SymbolId expected = kind == MachineKind::Tm
                                        ? env.obs_of_state[static_cast<std::size_t>(env.next[sa])]
                                        : env.reward_sym[sa];
                std::optional<SymbolId> got;
                if (machine.is_alpha(alpha)) got = machine.output_alpha(key.v, alpha);
                if (!got || *got != expected) {
                    report.ok = false;
                    report.counterexample = history_of(key, env.actions[static_cast<std::size_t>(a)]);
                    report.detail =
                        !got ? "prediction undefined"
                             : "predicted " + table.key(*got).display() + ", environment produced " +
                                   table.key(expected).display();
                    return report;
                }
                // Expand the feasible continuation.
                int s2 = env.next[sa];
                if (env.terminal_action[sa] || env.terminal_state[static_cast<std::size_t>(s2)])
                    continue;
                std::optional<StateId> v2;
                if (machine.is_beta(label)) v2 = machine.step_beta(key.v, label);
                if (!v2) {
                    report.ok = false;
                    report.counterexample = history_of(key, env.actions[static_cast<std::size_t>(a)]);
                    report.detail = "machine has no transition for label " + table.key(label).display();
                    return report;
                }
                StateId tq2 = key.tq;
                if (supplement_tm) {
                    auto step = supplement_tm->delta_q(key.tq, label);
                    if (!step) {
                        report.ok = false;
                        report.counterexample = history_of(key, env.actions[static_cast<std::size_t>(a)]);
                        report.detail = "supplement machine stuck on label " + table.key(label).display();
                        return report;
                    }
                    tq2 = *step;
                }
                Key next{s2, *v2, tq2};
                if (!visited.count(next)) {
                    visited[next] = Visit{key, env.actions[static_cast<std::size_t>(a)], false};
                    next_frontier.push_back(next);
                }
            }
        }
        frontier = std::move(next_frontier);
        ++level;
    }
    return report;
}

std::string CompletenessReport::to_json() const {
    json j;
    j["state_coverage"] = state_coverage;
    j["transition_coverage"] = transition_coverage;
    j["conflict_convergence"] = conflict_convergence;
    j["overall"] = overall();
    j["uncovered_states"] = uncovered_states;
    json ut = json::array();
    for (const auto& [q, l] : uncovered_transitions) ut.push_back({q, l});
    j["uncovered_transitions"] = ut;
    json nc = json::array();
    for (const auto& [a, b] : non_conflicting_prefixes) nc.push_back({a, b});
    j["non_conflicting_prefixes"] = nc;
    return j.dump(2);
}

CompletenessReport check_structure_complete(const SampleSet& samples, const Machine& target) {
    CompletenessReport report;
    SymbolTable& table = *samples.symbols;

    // Group prefix occurrences by beta-projection; each group carries the
    // target state it reaches and the alpha evidence pinned there.
    struct Node {
        std::map<SymbolId, int> kids;
        std::map<SymbolId, SymbolId> pins;
        StateId target_state = kNoState;
        std::string prefix;
    };
    std::vector<Node> nodes(1);
    nodes[0].target_state = target.initial();

    std::set<StateId> covered_states{target.initial()};
    std::set<std::pair<StateId, SymbolId>> covered_transitions;

    for (const auto& s : samples.samples) {
        int cur = 0;
        for (std::size_t i = 0; i < s.inputs.size(); ++i) {
            if (s.outputs[i] != kBetaDefault) {
                nodes[static_cast<std::size_t>(cur)].pins[s.inputs[i]] = s.outputs[i];
                continue;
            }
            StateId before = nodes[static_cast<std::size_t>(cur)].target_state;
            auto stepped = target.step_beta(before, s.inputs[i]);
            if (!stepped)
                throw DataError("target machine undefined on a sample beta-input; it must be "
                                "total on its beta alphabet");
            covered_transitions.insert({before, s.inputs[i]});
            auto it = nodes[static_cast<std::size_t>(cur)].kids.find(s.inputs[i]);
            if (it == nodes[static_cast<std::size_t>(cur)].kids.end()) {
                Node fresh;
                fresh.target_state = *stepped;
                fresh.prefix = nodes[static_cast<std::size_t>(cur)].prefix +
                               (nodes[static_cast<std::size_t>(cur)].prefix.empty() ? "" : ".") +
                               table.key(s.inputs[i]).display();
                nodes.push_back(std::move(fresh));
                int idx = static_cast<int>(nodes.size()) - 1;
                nodes[static_cast<std::size_t>(cur)].kids[s.inputs[i]] = idx;
                cur = idx;
            } else {
                cur = it->second;
            }
            covered_states.insert(nodes[static_cast<std::size_t>(cur)].target_state);
        }
    }

    // State coverage.
    for (StateId q = 0; q < static_cast<StateId>(target.num_states()); ++q)
        if (!covered_states.count(q)) report.uncovered_states.push_back(q);
    report.state_coverage = report.uncovered_states.empty();

    // Transition coverage over the target's defined edges.
    for (StateId q = 0; q < static_cast<StateId>(target.num_states()); ++q)
        for (const auto& [sym, to] : target.state(q).next) {
            (void)to;
            if (!covered_transitions.count({q, sym}))
                report.uncovered_transitions.push_back({q, sym});
        }
    report.transition_coverage = report.uncovered_transitions.empty();

    // Conflict convergence: prefixes reaching different target states
    // must pin a shared alpha-input with different outputs.
    report.conflict_convergence = true;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < nodes.size(); ++j) {
            if (nodes[i].target_state == nodes[j].target_state) continue;
            bool conflict = false;
            const auto& small = nodes[i].pins.size() <= nodes[j].pins.size() ? nodes[i].pins : nodes[j].pins;
            const auto& large = nodes[i].pins.size() <= nodes[j].pins.size() ? nodes[j].pins : nodes[i].pins;
            for (const auto& [sym, out] : small) {
                auto it = large.find(sym);
                if (it != large.end() && it->second != out) {
                    conflict = true;
                    break;
                }
            }
            if (!conflict) {
                report.conflict_convergence = false;
                if (report.non_conflicting_prefixes.size() < 16)
                    report.non_conflicting_prefixes.push_back(
                        {nodes[i].prefix.empty() ? "<empty>" : nodes[i].prefix,
                         nodes[j].prefix.empty() ? "<empty>" : nodes[j].prefix});
            }
        }
    }
    return report;
}

ValueIterationResult value_iteration(const DetPomdp& env, double tolerance, int max_sweeps) {
    ValueIterationResult res;
    res.values.assign(static_cast<std::size_t>(env.num_states), 0.0);
    res.greedy_action.assign(static_cast<std::size_t>(env.num_states), 0);
    for (res.sweeps = 0; res.sweeps < max_sweeps; ++res.sweeps) {
        double delta = 0.0;
        for (int s = 0; s < env.num_states; ++s) {
            if (env.terminal_state[static_cast<std::size_t>(s)]) continue;
            double best = -1e300;
            int best_a = 0;
            for (int a = 0; a < env.action_count(); ++a) {
                std::size_t k = env.sa(s, a);
                double cont = env.terminal_action[k] ? 0.0
                                                     : res.values[static_cast<std::size_t>(env.next[k])];
                double v = env.reward_val[k] + env.gamma * cont;
                if (v > best + 1e-15) {
                    best = v;
                    best_a = a;
                }
            }
            delta = std::max(delta, std::abs(best - res.values[static_cast<std::size_t>(s)]));
            res.values[static_cast<std::size_t>(s)] = best;
            res.greedy_action[static_cast<std::size_t>(s)] = best_a;
        }
        if (delta < tolerance) break;
    }
    return res;
}

double optimal_undiscounted_return(const DetPomdp& env, int max_steps) {
    ValueIterationResult vi = value_iteration(env);
    double total = 0.0;
    int s = env.initial_state;
    for (int t = 0; t < max_steps; ++t) {
        if (env.terminal_state[static_cast<std::size_t>(s)]) break;
        int a = vi.greedy_action[static_cast<std::size_t>(s)];
        std::size_t k = env.sa(s, a);
        total += env.reward_val[k];
        if (env.terminal_action[k]) break;
        s = env.next[k];
        if (env.terminal_state[static_cast<std::size_t>(s)]) break;
    }
    return total;
}

}  // namespace oracle
}  // namespace dbmm
