#include "dbmm/envs.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dbmm/errors.hpp"

namespace dbmm {

using nlohmann::json;

SymbolId DetPomdp::label_of(SymbolId obs) const {
    auto it = label_of_obs.find(obs);
    if (it == label_of_obs.end())
        throw DataError("observation has no label entry: " + symbols->key(obs).display());
    return it->second;
}

int DetPomdp::action_index(SymbolId action) const {
    for (std::size_t i = 0; i < actions.size(); ++i)
        if (actions[i] == action) return static_cast<int>(i);
    throw DataError("unknown action: " + symbols->key(action).display());
}

std::vector<SymbolId> DetPomdp::observation_set() const {
    std::vector<SymbolId> out;
    for (SymbolId o : obs_of_state)
        if (std::find(out.begin(), out.end(), o) == out.end()) out.push_back(o);
    return out;
}

EnvStep step(const DetPomdp& env, int state, int action_idx) {
    if (state < 0 || state >= env.num_states) throw DataError("state out of range");
    if (action_idx < 0 || action_idx >= env.action_count()) throw DataError("action out of range");
    std::size_t k = env.sa(state, action_idx);
    EnvStep out;
    out.next_state = env.next[k];
    out.obs = env.obs_of_state[static_cast<std::size_t>(out.next_state)];
    out.label = env.label_of(out.obs);
    out.reward = env.reward_sym[k];
    out.reward_value = env.reward_val[k];
    out.episode_over = env.terminal_action[k] ||
                       env.terminal_state[static_cast<std::size_t>(out.next_state)];
    return out;
}

namespace {

SymbolId empty_label(SymbolTable& table) { return table.intern(SymbolKey{}); }

SymbolId label_singleton(SymbolTable& table, const std::string& prop) {
    return table.intern(SymbolKey{{prop}});
}

void size_tables(DetPomdp& env) {
    std::size_t n = static_cast<std::size_t>(env.num_states) * env.actions.size();
    env.next.assign(n, 0);
    env.reward_sym.assign(n, kNoSymbol);
    env.reward_val.assign(n, 0.0);
    env.terminal_state.assign(static_cast<std::size_t>(env.num_states), 0);
    env.terminal_action.assign(n, 0);
    env.obs_of_state.assign(static_cast<std::size_t>(env.num_states), kNoSymbol);
}

void fill_reward(DetPomdp& env, std::size_t sa, long long value) {
    env.reward_sym[sa] = env.symbols->intern(std::to_string(value));
    env.reward_val[sa] = static_cast<double>(value);
}

}  // namespace

DetPomdp build_fig1_env(const SymbolTablePtr& symbols) {
    DetPomdp env;
    env.symbols = symbols;
    env.name = "four-areas";
    env.gamma = 0.95;
    env.propositions = {"key", "sofa", "toilet"};

    const std::vector<std::string> areas = {"orangeroom", "corridor", "cyanroom", "limegreenroom"};
    enum { kOrange = 0, kCorridor = 1, kCyan = 2, kLime = 3 };
    for (const char* a : {"up", "down", "left", "right", "sit"})
        env.actions.push_back(symbols->intern(a));
    enum { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kSit = 4 };

    std::vector<SymbolId> area_obs;
    for (const auto& a : areas) area_obs.push_back(symbols->intern(a));
    env.label_of_obs[area_obs[kOrange]] = label_singleton(*symbols, "key");
    env.label_of_obs[area_obs[kCorridor]] = empty_label(*symbols);
    env.label_of_obs[area_obs[kCyan]] = label_singleton(*symbols, "toilet");
    env.label_of_obs[area_obs[kLime]] = label_singleton(*symbols, "sofa");

    env.num_states = 16;  // area x key-bit x toilet-bit
    auto pack = [](int area, int key, int toilet) { return area * 4 + key * 2 + toilet; };
    size_tables(env);
    env.initial_state = pack(kCorridor, 0, 0);

    for (int area = 0; area < 4; ++area) {
        for (int key = 0; key < 2; ++key) {
            for (int toilet = 0; toilet < 2; ++toilet) {
                int s = pack(area, key, toilet);
                env.obs_of_state[static_cast<std::size_t>(s)] = area_obs[area];
                int key2 = key || area == kOrange ? 1 : 0;
                int toilet2 = toilet || area == kCyan ? 1 : 0;
                for (int a = 0; a < 5; ++a) {
                    int target = area;
                    switch (area) {
                        case kCorridor:
                            if (a == kUp) target = key ? kCyan : kCorridor;
                            else if (a == kLeft) target = kOrange;
                            else if (a == kRight) target = kLime;
                            break;
                        case kOrange:
                            if (a == kDown) target = kCorridor;
                            break;
                        case kCyan:
                            if (a == kDown) target = kCorridor;
                            break;
                        case kLime:
                            if (a == kLeft) target = kCorridor;
                            break;
                    }
                    std::size_t k = env.sa(s, a);
                    env.next[k] = pack(target, key2, toilet2);
                    long long r = 0;
                    if (area == kLime && a == kSit) {
                        r = toilet ? 1 : 0;
                        env.terminal_action[k] = 1;
                    }
                    fill_reward(env, k, r);
                }
            }
        }
    }
    return env;
}

DetPomdp build_phase_grid(const SymbolTablePtr& symbols, int size, int phases,
                          std::uint64_t seed) {
    // A k-phase task automaton has k states and k-1 advancing events;
    // sitting in the final phase completes the task.
    if (size < 2 || phases < 1 || phases > size * size)
        throw DataError("invalid phase-grid parameters");
    int events = phases - 1;
    int final_phase = phases - 1;

    DetPomdp env;
    env.symbols = symbols;
    env.name = "phase-grid-" + std::to_string(size) + "x" + std::to_string(size) + "-" +
               std::to_string(phases);
    env.gamma = 0.95;
    for (const char* a : {"up", "down", "left", "right", "sit"})
        env.actions.push_back(symbols->intern(a));

    // One cell per advancing event, shuffled placement, never on the
    // start cell.
    std::vector<int> cells;
    for (int c = 1; c < size * size; ++c) cells.push_back(c);
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);
    std::shuffle(cells.begin(), cells.end(), rng);

    std::vector<SymbolId> cell_obs(static_cast<std::size_t>(size * size));
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            cell_obs[static_cast<std::size_t>(y * size + x)] =
                symbols->intern(std::to_string(x) + "," + std::to_string(y));

    std::vector<int> event_of_cell(static_cast<std::size_t>(size * size), 0);
    for (int p = 1; p <= events; ++p) {
        std::string prop = "p" + std::to_string(p);
        env.propositions.push_back(prop);
        int cell = cells[static_cast<std::size_t>(p - 1)];
        event_of_cell[static_cast<std::size_t>(cell)] = p;
        env.label_of_obs[cell_obs[static_cast<std::size_t>(cell)]] = label_singleton(*symbols, prop);
    }
    for (int c = 0; c < size * size; ++c)
        if (event_of_cell[static_cast<std::size_t>(c)] == 0)
            env.label_of_obs[cell_obs[static_cast<std::size_t>(c)]] = empty_label(*symbols);

    env.num_states = size * size * phases;
    auto pack = [&](int cell, int ph) { return cell * phases + ph; };
    size_tables(env);
    env.initial_state = pack(0, 0);

    const int dx[4] = {0, 0, -1, 1};
    const int dy[4] = {-1, 1, 0, 0};
    for (int cell = 0; cell < size * size; ++cell) {
        int x = cell % size, y = cell / size;
        for (int ph = 0; ph < phases; ++ph) {
            int s = pack(cell, ph);
            env.obs_of_state[static_cast<std::size_t>(s)] = cell_obs[static_cast<std::size_t>(cell)];
            // The label of the current cell is consumed during the step.
            int ph2 = (ph < final_phase && event_of_cell[static_cast<std::size_t>(cell)] == ph + 1)
                          ? ph + 1
                          : ph;
            for (int a = 0; a < 5; ++a) {
                int target = cell;
                if (a < 4) {
                    int tx = x + dx[a], ty = y + dy[a];
                    if (tx >= 0 && tx < size && ty >= 0 && ty < size) target = ty * size + tx;
                }
                std::size_t k = env.sa(s, a);
                env.next[k] = pack(target, ph2);
                long long r = 0;
                if (a == 4 && ph == final_phase) {
                    r = 1;
                    env.terminal_action[k] = 1;
                }
                fill_reward(env, k, r);
            }
        }
    }
    return env;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

struct RmDraft {
    std::vector<std::vector<StateId>> delta;
    std::vector<std::vector<long long>> reward;
    std::vector<std::vector<char>> back;
};

// Longest positive-reward accumulation over forward edges from `from` up
// to `to`; -1 when `to` is unreachable.
long long max_positive_path(const RmDraft& rm, StateId from, StateId to) {
    if (from == to) return 0;
    long long best = -1;
    for (std::size_t l = 0; l < rm.delta[static_cast<std::size_t>(from)].size(); ++l) {
        StateId mid = rm.delta[static_cast<std::size_t>(from)][l];
        if (rm.back[static_cast<std::size_t>(from)][l] || mid <= from || mid > to) continue;
        long long rest = max_positive_path(rm, mid, to);
        if (rest < 0) continue;
        long long gain = std::max<long long>(rm.reward[static_cast<std::size_t>(from)][l], 0);
        best = std::max(best, gain + rest);
    }
    return best;
}

}  // namespace

std::pair<DetPomdp, GroundTruthSpec> generate_random_env(const SymbolTablePtr& symbols,
                                                         const RandomEnvParams& p) {
    if (p.grid < 5 || p.tm_states < 1 || p.rm_states < 2 || p.labels < 1 ||
        p.cells_per_label < 1 || p.gamma < 0.0 || p.gamma > 1.0)
        throw DataError("invalid random environment parameters");
    std::vector<int> odd_cells;
    for (int y = 1; y <= p.grid - 2; y += 2)
        for (int x = 1; x <= p.grid - 2; x += 2) odd_cells.push_back(y * p.grid + x);
    if (static_cast<std::size_t>(p.labels * p.cells_per_label) > odd_cells.size())
        throw DataError("not enough odd-coordinate cells for the requested labels");

    std::mt19937_64 rng(splitmix64(p.seed));
    const int Q = p.tm_states, U = p.rm_states, L = p.labels;
    const int total_cells = p.labels * p.cells_per_label;

    for (int attempt = 0; attempt < 64; ++attempt) {
        // --- label placement ---
        std::vector<int> cells = odd_cells;
        std::shuffle(cells.begin(), cells.end(), rng);
        cells.resize(static_cast<std::size_t>(total_cells));
        std::map<int, int> cell_label;
        for (int i = 0; i < total_cells; ++i) cell_label[cells[static_cast<std::size_t>(i)]] = i / p.cells_per_label;

        // --- TM transitions: all-state cycle, extras, then completion ---
        std::vector<std::vector<StateId>> tm_delta(static_cast<std::size_t>(Q),
                                                   std::vector<StateId>(static_cast<std::size_t>(L), kNoState));
        std::vector<StateId> order(static_cast<std::size_t>(Q));
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        for (int i = 0; i < Q; ++i) {
            StateId from = order[static_cast<std::size_t>(i)];
            StateId to = order[static_cast<std::size_t>((i + 1) % Q)];
            int l = static_cast<int>(rng() % static_cast<std::uint64_t>(L));
            tm_delta[static_cast<std::size_t>(from)][static_cast<std::size_t>(l)] = to;
        }
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        for (int q = 0; q < Q; ++q)
            for (int l = 0; l < L; ++l) {
                auto& slot = tm_delta[static_cast<std::size_t>(q)][static_cast<std::size_t>(l)];
                if (slot == kNoState && coin(rng) < p.extra_edge_prob)
                    slot = static_cast<StateId>(rng() % static_cast<std::uint64_t>(Q));
            }
        for (int q = 0; q < Q; ++q)
            for (int l = 0; l < L; ++l) {
                auto& slot = tm_delta[static_cast<std::size_t>(q)][static_cast<std::size_t>(l)];
                if (slot == kNoState) slot = static_cast<StateId>(rng() % static_cast<std::uint64_t>(Q));
            }

        // --- impassable cell sets ---
        int per_state = std::max(1, static_cast<int>(p.impassable_frac * total_cells + 0.5));
        std::vector<std::set<int>> impassable(static_cast<std::size_t>(Q));
        for (int q = 0; q < Q; ++q) {
            std::vector<int> pool = cells;
            std::shuffle(pool.begin(), pool.end(), rng);
            impassable[static_cast<std::size_t>(q)] =
                std::set<int>(pool.begin(), pool.begin() + per_state);
        }
        bool ok = true;
        for (int round = 0; round < 100; ++round) {
            bool changed = false;
            // No cell may be blocked in every TM state.
            for (int c : cells) {
                bool all = true;
                for (int q = 0; q < Q && all; ++q) all = impassable[static_cast<std::size_t>(q)].count(c) > 0;
                if (all) {
                    impassable[rng() % static_cast<std::uint64_t>(Q)].erase(c);
                    changed = true;
                }
            }
            // Every label must keep a passable cell in every TM state, so
            // every machine edge stays exercisable.
            for (int q = 0; q < Q; ++q)
                for (int l = 0; l < L; ++l) {
                    bool any_open = false;
                    for (int i = l * p.cells_per_label; i < (l + 1) * p.cells_per_label; ++i)
                        if (!impassable[static_cast<std::size_t>(q)].count(cells[static_cast<std::size_t>(i)])) {
                            any_open = true;
                            break;
                        }
                    if (!any_open) {
                        int i = l * p.cells_per_label +
                                static_cast<int>(rng() % static_cast<std::uint64_t>(p.cells_per_label));
                        impassable[static_cast<std::size_t>(q)].erase(cells[static_cast<std::size_t>(i)]);
                        changed = true;
                    }
                }
            // Distinct sets per state keep all TM states distinguishable.
            for (int q1 = 0; q1 < Q; ++q1)
                for (int q2 = q1 + 1; q2 < Q; ++q2)
                    if (impassable[static_cast<std::size_t>(q1)] == impassable[static_cast<std::size_t>(q2)]) {
                        int c = cells[rng() % cells.size()];
                        if (impassable[static_cast<std::size_t>(q2)].count(c))
                            impassable[static_cast<std::size_t>(q2)].erase(c);
                        else
                            impassable[static_cast<std::size_t>(q2)].insert(c);
                        changed = true;
                    }
            if (!changed) break;
            if (round == 99) ok = false;
        }
        if (!ok) continue;

        // --- RM: forward DAG, reachability, back edges, rewards ---
        RmDraft rm;
        rm.delta.assign(static_cast<std::size_t>(U), {});
        rm.reward.assign(static_cast<std::size_t>(U), {});
        rm.back.assign(static_cast<std::size_t>(U), {});
        for (int u = 0; u < U; ++u) {
            rm.delta[static_cast<std::size_t>(u)].assign(static_cast<std::size_t>(L), static_cast<StateId>(u));
            rm.reward[static_cast<std::size_t>(u)].assign(static_cast<std::size_t>(L), 0);
            rm.back[static_cast<std::size_t>(u)].assign(static_cast<std::size_t>(L), 0);
        }
        StateId terminal = static_cast<StateId>(U - 1);
        for (int u = 0; u < U - 1; ++u) {
            for (int l = 0; l < L; ++l)
                if (coin(rng) < 0.2) {
                    StateId to = static_cast<StateId>(
                        u + 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(U - 1 - u)));
                    rm.delta[static_cast<std::size_t>(u)][static_cast<std::size_t>(l)] = to;
                }
            bool has_forward = false;
            for (int l = 0; l < L; ++l)
                has_forward |= rm.delta[static_cast<std::size_t>(u)][static_cast<std::size_t>(l)] >
                               static_cast<StateId>(u);
            if (!has_forward) {
                int l = static_cast<int>(rng() % static_cast<std::uint64_t>(L));
                rm.delta[static_cast<std::size_t>(u)][static_cast<std::size_t>(l)] = terminal;
            }
        }
        for (int u = 1; u < U - 1; ++u)
            for (int l = 0; l < L; ++l)
                if (rm.delta[static_cast<std::size_t>(u)][static_cast<std::size_t>(l)] ==
                        static_cast<StateId>(u) &&
                    coin(rng) < 0.35) {
                    rm.delta[static_cast<std::size_t>(u)][static_cast<std::size_t>(l)] =
                        static_cast<StateId>(rng() % static_cast<std::uint64_t>(u));
                    rm.back[static_cast<std::size_t>(u)][static_cast<std::size_t>(l)] = 1;
                }
        for (int u = 0; u < U - 1; ++u)
            for (int l = 0; l < L; ++l) {
                StateId to = rm.delta[static_cast<std::size_t>(u)][static_cast<std::size_t>(l)];
                if (rm.back[static_cast<std::size_t>(u)][static_cast<std::size_t>(l)] || to <= static_cast<StateId>(u))
                    continue;
                rm.reward[static_cast<std::size_t>(u)][static_cast<std::size_t>(l)] =
                    to == terminal ? 5 + static_cast<long long>(rng() % 5)
                                   : static_cast<long long>(rng() % 4);
            }
        for (int u = 1; u < U - 1; ++u)
            for (int l = 0; l < L; ++l)
                if (rm.back[static_cast<std::size_t>(u)][static_cast<std::size_t>(l)]) {
                    StateId v = rm.delta[static_cast<std::size_t>(u)][static_cast<std::size_t>(l)];
                    long long gain = max_positive_path(rm, v, static_cast<StateId>(u));
                    rm.reward[static_cast<std::size_t>(u)][static_cast<std::size_t>(l)] =
                        -(std::max<long long>(gain, 0) + 1);
                }
        // Non-terminal states must differ somewhere in their reward rows,
        // otherwise the data can never tell them apart.
        for (int round = 0; round < 20; ++round) {
            bool fixed = true;
            for (int u1 = 0; u1 < U - 1 && fixed; ++u1)
                for (int u2 = u1 + 1; u2 < U - 1 && fixed; ++u2)
                    if (rm.reward[static_cast<std::size_t>(u1)] == rm.reward[static_cast<std::size_t>(u2)]) {
                        int l = static_cast<int>(rng() % static_cast<std::uint64_t>(L));
                        if (!rm.back[static_cast<std::size_t>(u2)][static_cast<std::size_t>(l)] &&
                            rm.delta[static_cast<std::size_t>(u2)][static_cast<std::size_t>(l)] >
                                static_cast<StateId>(u2))
                            rm.reward[static_cast<std::size_t>(u2)][static_cast<std::size_t>(l)] += 1;
                        fixed = false;
                    }
            if (fixed) break;
        }

        // --- assemble the tabular environment ---
        DetPomdp env;
        env.symbols = symbols;
        env.name = "random-grid-" + std::to_string(p.grid);
        env.gamma = p.gamma;
        for (const char* a : {"up", "down", "left", "right"}) env.actions.push_back(symbols->intern(a));

        GroundTruthSpec spec;
        spec.grid = p.grid;
        spec.cell_label = cell_label;
        for (int l = 0; l < L; ++l) {
            std::string prop(1, static_cast<char>('a' + l));
            spec.label_names.push_back(prop);
            env.propositions.push_back(prop);
        }
        std::vector<SymbolId> label_syms;
        for (const auto& name : spec.label_names) label_syms.push_back(label_singleton(*symbols, name));
        SymbolId none = empty_label(*symbols);

        std::vector<SymbolId> cell_obs(static_cast<std::size_t>(p.grid * p.grid));
        for (int y = 0; y < p.grid; ++y)
            for (int x = 0; x < p.grid; ++x) {
                SymbolId o = symbols->intern(std::to_string(x) + "," + std::to_string(y));
                cell_obs[static_cast<std::size_t>(y * p.grid + x)] = o;
                auto it = cell_label.find(y * p.grid + x);
                env.label_of_obs[o] = it == cell_label.end() ? none : label_syms[static_cast<std::size_t>(it->second)];
            }

        env.num_states = p.grid * p.grid * Q * U;
        auto pack = [&](int cell, int q, int u) { return (cell * Q + q) * U + u; };
        size_tables(env);
        // Start mid-grid (even coordinates, never labeled).
        env.initial_state = pack((p.grid / 2) * p.grid + p.grid / 2, 0, 0);

        const int dx[4] = {0, 0, -1, 1};
        const int dy[4] = {-1, 1, 0, 0};
        auto landing = [&](int cell, int q, int a) {
            int x = cell % p.grid, y = cell / p.grid;
            int tx = x + dx[a], ty = y + dy[a];
            if (tx < 0 || tx >= p.grid || ty < 0 || ty >= p.grid) return cell;
            int t = ty * p.grid + tx;
            if (cell_label.count(t) && impassable[static_cast<std::size_t>(q)].count(t)) return cell;
            return t;
        };

        for (int cell = 0; cell < p.grid * p.grid; ++cell) {
            int lbl = cell_label.count(cell) ? cell_label.at(cell) : -1;
            for (int q = 0; q < Q; ++q) {
                StateId q2 = lbl < 0 ? static_cast<StateId>(q)
                                     : tm_delta[static_cast<std::size_t>(q)][static_cast<std::size_t>(lbl)];
                for (int u = 0; u < U; ++u) {
                    StateId u2 = lbl < 0 ? static_cast<StateId>(u)
                                         : rm.delta[static_cast<std::size_t>(u)][static_cast<std::size_t>(lbl)];
                    int s = pack(cell, q, u);
                    env.obs_of_state[static_cast<std::size_t>(s)] = cell_obs[static_cast<std::size_t>(cell)];
                    env.terminal_state[static_cast<std::size_t>(s)] = u == terminal;
                    for (int a = 0; a < 4; ++a) {
                        int to_cell = landing(cell, q, a);
                        std::size_t k = env.sa(s, a);
                        env.next[k] = pack(to_cell, q2, u2);
                        // Reward on entering a labeled cell: the value of
                        // the machine edge its label is about to take.
                        long long r = 0;
                        auto it = cell_label.find(to_cell);
                        if (it != cell_label.end() && to_cell != cell)
                            r = rm.reward[static_cast<std::size_t>(u)][static_cast<std::size_t>(it->second)];
                        fill_reward(env, k, r);
                    }
                }
            }
        }

        // --- ground-truth machines ---
        spec.impassable = impassable;
        spec.rm_initial = 0;
        spec.rm_terminal = terminal;
        spec.rm_delta = rm.delta;
        spec.rm_reward = rm.reward;
        for (const auto& row : rm.back) spec.rm_back_edge.push_back(row);

        Machine tm(symbols);
        for (int q = 0; q < Q; ++q) tm.add_state();
        tm.set_initial(0);
        tm.add_beta(none);
        for (SymbolId ls : label_syms) tm.add_beta(ls);
        for (int q = 0; q < Q; ++q) {
            tm.force_transition(q, none, q);
            for (int l = 0; l < L; ++l)
                tm.force_transition(q, label_syms[static_cast<std::size_t>(l)],
                                    tm_delta[static_cast<std::size_t>(q)][static_cast<std::size_t>(l)]);
            for (int cell = 0; cell < p.grid * p.grid; ++cell)
                for (int a = 0; a < 4; ++a) {
                    SymbolId pair = alpha_pair_symbol(
                        *symbols, cell_obs[static_cast<std::size_t>(cell)], env.actions[static_cast<std::size_t>(a)]);
                    tm.add_alpha(pair);
                    tm.set_output(q, pair, cell_obs[static_cast<std::size_t>(landing(cell, q, a))]);
                }
        }
        spec.tm.machine = std::move(tm);

        // Sanity: the constraints the construction promises.
        bool valid = true;
        for (int c : cells) {
            bool all = true;
            for (int q = 0; q < Q && all; ++q) all = impassable[static_cast<std::size_t>(q)].count(c) > 0;
            if (all) valid = false;
        }
        for (int u = 0; u < U - 1 && valid; ++u) {
            bool has_forward = false;
            for (int l = 0; l < L; ++l)
                has_forward |= rm.delta[static_cast<std::size_t>(u)][static_cast<std::size_t>(l)] >
                               static_cast<StateId>(u);
            valid = has_forward;
        }
        for (int q1 = 0; q1 < Q && valid; ++q1)
            for (int q2 = q1 + 1; q2 < Q && valid; ++q2)
                valid = impassable[static_cast<std::size_t>(q1)] != impassable[static_cast<std::size_t>(q2)];
        for (int u1 = 0; u1 < U - 1 && valid; ++u1)
            for (int u2 = u1 + 1; u2 < U - 1 && valid; ++u2)
                valid = rm.reward[static_cast<std::size_t>(u1)] != rm.reward[static_cast<std::size_t>(u2)];
        if (!valid) continue;
        return {std::move(env), std::move(spec)};
    }
    throw GenerationError("random environment constraints unsatisfiable under these parameters");
}

bool GroundTruthSpec::replay_trace(const DetPomdp& env, const LabeledTrace& trace) const {
    SymbolTable& table = *env.symbols;
    std::map<SymbolId, int> label_index;
    for (std::size_t i = 0; i < label_names.size(); ++i)
        label_index[table.intern(SymbolKey{{label_names[i]}})] = static_cast<int>(i);

    StateId q = tm.machine.initial();
    StateId u = rm_initial;
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
        const TraceStep& st = trace.steps[t];
        SymbolId pair = alpha_pair_symbol(table, st.obs, st.action);
        auto predicted = tm.predict(q, pair);
        if (!predicted) return false;
        // Reward: value of the machine edge the entered label will take.
        long long expect = 0;
        auto li = label_index.find(env.label_of(*predicted));
        if (li != label_index.end() && *predicted != st.obs)
            expect = rm_reward[static_cast<std::size_t>(u)][static_cast<std::size_t>(li->second)];
        if (table.key(st.reward).parts.at(0) != std::to_string(expect)) return false;
        if (t + 1 < trace.steps.size() && *predicted != trace.steps[t + 1].obs) return false;

        auto lt = label_index.find(st.label);
        if (lt != label_index.end()) {
            q = *tm.delta_q(q, st.label);
            u = rm_delta[static_cast<std::size_t>(u)][static_cast<std::size_t>(lt->second)];
        } else {
            q = *tm.delta_q(q, st.label);  // empty label self-loop
        }
    }
    return true;
}

std::vector<LabeledTrace> generate_traces(const DetPomdp& env, Policy policy, int episodes,
                                          int max_len, std::uint64_t seed, int jobs) {
    if (policy != Policy::Random) throw DataError("unsupported policy");
    if (episodes < 0 || max_len <= 0) throw DataError("episodes must be >= 0, max_len positive");
    std::vector<LabeledTrace> traces(static_cast<std::size_t>(episodes));

    // Symbols are fully interned at environment construction, so episodes
    // only read shared state and may run on any number of threads.
    auto run_episode = [&](int e) {
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(e) + 1)));
        std::uniform_int_distribution<int> pick(0, env.action_count() - 1);
        LabeledTrace trace;
        int s = env.initial_state;
        for (int t = 0; t < max_len; ++t) {
            SymbolId obs = env.obs_of_state[static_cast<std::size_t>(s)];
            int a = pick(rng);
            std::size_t k = env.sa(s, a);
            trace.steps.push_back(TraceStep{env.label_of(obs), obs, env.actions[static_cast<std::size_t>(a)],
                                            env.reward_sym[k]});
            int s2 = env.next[k];
            if (env.terminal_action[k] || env.terminal_state[static_cast<std::size_t>(s2)]) break;
            s = s2;
        }
        traces[static_cast<std::size_t>(e)] = std::move(trace);
    };

    jobs = std::max(1, jobs);
    if (jobs == 1 || episodes < 2 * jobs) {
        for (int e = 0; e < episodes; ++e) run_episode(e);
        return traces;
    }
    std::vector<std::thread> workers;
    std::atomic<int> cursor{0};
    for (int w = 0; w < jobs; ++w)
        workers.emplace_back([&] {
            for (int e = cursor.fetch_add(1); e < episodes; e = cursor.fetch_add(1)) run_episode(e);
        });
    for (auto& t : workers) t.join();
    return traces;
}

namespace {

json symbol_json(const SymbolTable& table, SymbolId id) {
    const SymbolKey& k = table.key(id);
    if (k.parts.size() == 1) return json(k.parts[0]);
    json arr = json::array();
    for (const auto& p : k.parts) arr.push_back(p);
    return arr;
}

}  // namespace

std::string GroundTruthSpec::to_json() const {
    json j;
    j["grid"] = grid;
    j["label_names"] = label_names;
    json cl = json::array();
    for (const auto& [cell, label] : cell_label) cl.push_back({cell, label});
    j["cell_label"] = cl;
    json imp = json::array();
    for (const auto& s : impassable) imp.push_back(std::vector<int>(s.begin(), s.end()));
    j["impassable"] = imp;
    j["tm"] = json::parse(tm.machine.to_json());
    j["rm"] = {{"initial", rm_initial},
               {"terminal", rm_terminal},
               {"delta", rm_delta},
               {"reward", rm_reward}};
    json back = json::array();
    for (const auto& row : rm_back_edge) {
        json r = json::array();
        for (char c : row) r.push_back(static_cast<int>(c));
        back.push_back(r);
    }
    j["rm"]["back_edges"] = back;
    return j.dump();
}

std::string DetPomdp::to_json() const {
    json j;
    j["name"] = name;
    j["gamma"] = gamma;
    json acts = json::array();
    for (SymbolId a : actions) acts.push_back(symbols->key(a).parts.at(0));
    j["actions"] = acts;
    j["num_states"] = num_states;
    j["initial"] = initial_state;
    j["propositions"] = propositions;

    std::vector<SymbolId> obs_list = observation_set();
    json obs = json::array();
    std::map<SymbolId, int> obs_index;
    for (std::size_t i = 0; i < obs_list.size(); ++i) {
        obs.push_back(symbol_json(*symbols, obs_list[i]));
        obs_index[obs_list[i]] = static_cast<int>(i);
    }
    j["observations"] = obs;
    json labels = json::array();
    for (SymbolId o : obs_list) {
        json props = json::array();
        for (const auto& part : symbols->key(label_of(o)).parts) props.push_back(part);
        labels.push_back(props);
    }
    j["labels"] = labels;
    json per_state = json::array();
    for (SymbolId o : obs_of_state) per_state.push_back(obs_index.at(o));
    j["obs_of_state"] = per_state;

    j["next"] = next;
    json rewards = json::array();
    for (SymbolId r : reward_sym) rewards.push_back(symbols->key(r).parts.at(0));
    j["reward"] = rewards;
    json ts = json::array(), ta = json::array();
    for (char c : terminal_state) ts.push_back(static_cast<int>(c));
    for (char c : terminal_action) ta.push_back(static_cast<int>(c));
    j["terminal_state"] = ts;
    j["terminal_action"] = ta;
    return j.dump();
}

DetPomdp DetPomdp::from_json(const std::string& text, SymbolTablePtr symbols) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("environment JSON parse error: ") + e.what());
    }
    for (const char* f : {"name", "gamma", "actions", "num_states", "initial", "observations",
                          "labels", "obs_of_state", "next", "reward", "terminal_state",
                          "terminal_action", "propositions"})
        if (!j.contains(f)) throw DataError(std::string("environment JSON missing '") + f + "'");

    DetPomdp env;
    env.symbols = symbols;
    env.name = j["name"].get<std::string>();
    env.gamma = j["gamma"].get<double>();
    for (const auto& a : j["actions"]) env.actions.push_back(symbols->intern(a.get<std::string>()));
    env.num_states = j["num_states"].get<int>();
    env.initial_state = j["initial"].get<int>();
    for (const auto& p : j["propositions"]) env.propositions.push_back(p.get<std::string>());

    std::vector<SymbolId> obs_list;
    for (const auto& o : j["observations"]) {
        SymbolKey k;
        if (o.is_string())
            k.parts.push_back(o.get<std::string>());
        else
            for (const auto& part : o) k.parts.push_back(part.get<std::string>());
        obs_list.push_back(symbols->intern(std::move(k)));
    }
    std::size_t li = 0;
    for (const auto& l : j["labels"]) {
        std::vector<std::string> props;
        for (const auto& part : l) props.push_back(part.get<std::string>());
        std::sort(props.begin(), props.end());
        env.label_of_obs[obs_list.at(li++)] = symbols->intern(SymbolKey{std::move(props)});
    }
    for (const auto& idx : j["obs_of_state"])
        env.obs_of_state.push_back(obs_list.at(idx.get<std::size_t>()));
    for (const auto& n : j["next"]) env.next.push_back(n.get<int>());
    for (const auto& r : j["reward"]) {
        std::string norm = normalize_decimal(r.get<std::string>());
        env.reward_sym.push_back(symbols->intern(norm));
        env.reward_val.push_back(std::stod(norm));
    }
    for (const auto& c : j["terminal_state"]) env.terminal_state.push_back(static_cast<char>(c.get<int>()));
    for (const auto& c : j["terminal_action"]) env.terminal_action.push_back(static_cast<char>(c.get<int>()));

    std::size_t expected = static_cast<std::size_t>(env.num_states) * env.actions.size();
    if (env.next.size() != expected || env.reward_sym.size() != expected ||
        env.terminal_action.size() != expected ||
        env.terminal_state.size() != static_cast<std::size_t>(env.num_states) ||
        env.obs_of_state.size() != static_cast<std::size_t>(env.num_states))
        throw DataError("environment JSON table sizes are inconsistent");
    return env;
}

}  // namespace dbmm
