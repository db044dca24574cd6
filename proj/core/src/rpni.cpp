#include "dbmm/rpni.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <limits>
#include <unordered_map>

#include <json.hpp>

#include "dbmm/errors.hpp"

namespace dbmm {

std::vector<SymbolId> PrefixTreeTransducer::access_string(StateId s) const {
    std::vector<SymbolId> path;
    while (parent[static_cast<std::size_t>(s)] != kNoState) {
        path.push_back(parent_label[static_cast<std::size_t>(s)]);
        s = parent[static_cast<std::size_t>(s)];
    }
    std::reverse(path.begin(), path.end());
    return path;
}

std::string InferenceStats::to_json() const {
    nlohmann::json j{{"ptt_states", ptt_states},
                     {"final_states", final_states},
                     {"merge_attempts", merge_attempts},
                     {"merge_successes", merge_successes},
                     {"promotions", promotions},
                     {"max_outputs_per_state", max_outputs_per_state},
                     {"elapsed_ms", elapsed_ms}};
    return j.dump();
}

PrefixTreeTransducer build_ptt(const SampleSet& samples) {
    PrefixTreeTransducer ptt;
    ptt.machine = Machine(samples.symbols);
    Machine& m = ptt.machine;
    StateId root = m.add_state();
    m.set_initial(root);
    ptt.parent.push_back(kNoState);
    ptt.parent_label.push_back(kNoSymbol);
    for (SymbolId a : samples.alpha_alphabet) m.add_alpha(a);
    for (SymbolId b : samples.beta_alphabet) m.add_beta(b);

    // Which sample pinned each (state, alpha) output, for error reports.
    std::unordered_map<std::uint64_t, std::size_t> origin;
    auto pack = [](StateId q, SymbolId x) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(q)) << 32) |
               static_cast<std::uint32_t>(x);
    };

    for (std::size_t idx = 0; idx < samples.samples.size(); ++idx) {
        const Sample& s = samples.samples[idx];
        if (s.inputs.size() != s.outputs.size())
            throw DataError("sample " + std::to_string(idx) + ": inputs and outputs differ in length");
        StateId q = root;
        for (std::size_t i = 0; i < s.inputs.size(); ++i) {
            SymbolId x = s.inputs[i];
            if (s.outputs[i] != kBetaDefault) {
                auto existing = m.output_alpha(q, x);
                if (existing && *existing != s.outputs[i])
                    throw InconsistentSamplesError(
                        origin[pack(q, x)], idx,
                        "two outputs for alpha-input " + samples.symbols->key(x).display() +
                            " at the same beta-prefix");
                if (!existing) {
                    m.set_output(q, x, s.outputs[i]);
                    origin[pack(q, x)] = idx;
                }
            } else {
                auto next = m.step_beta(q, x);
                if (!next) {
                    StateId fresh = m.add_state();
                    ptt.parent.push_back(q);
                    ptt.parent_label.push_back(x);
                    m.set_transition(q, x, fresh);
                    next = fresh;
                }
                q = *next;
            }
        }
    }

    // Shortlex ranks: BFS from the root visiting children in symbol-key
    // order enumerates access strings in (length, content) order.
    std::vector<SymbolId> beta_order = m.beta_alphabet();
    std::sort(beta_order.begin(), beta_order.end(), [&](SymbolId a, SymbolId b) {
        return samples.symbols->key(a) < samples.symbols->key(b);
    });
    ptt.shortlex_rank.assign(m.num_states(), 0);
    std::deque<StateId> queue{root};
    std::uint32_t rank = 0;
    while (!queue.empty()) {
        StateId cur = queue.front();
        queue.pop_front();
        ptt.shortlex_rank[static_cast<std::size_t>(cur)] = rank++;
        const auto& st = m.state(cur);
        for (SymbolId b : beta_order) {
            auto it = st.next.find(b);
            if (it != st.next.end()) queue.push_back(it->second);
        }
    }
    return ptt;
}

bool compatible(const Machine& machine, StateId u, StateId v) {
    const auto& a = machine.state(u).out;
    const auto& b = machine.state(v).out;
    const auto& small = a.size() <= b.size() ? a : b;
    const auto& large = a.size() <= b.size() ? b : a;
    for (const auto& [sym, out] : small) {
        auto it = large.find(sym);
        if (it != large.end() && it->second != out) return false;
    }
    return true;
}

namespace {

// Mutable view used by the merging loop. All changes go through a
// journal so a failed fold can be rolled back without copying.
class Merger {
public:
    explicit Merger(const Machine& m)
        : machine_(m), parent_(m.num_states(), kNoState), parent_label_(m.num_states(), kNoSymbol),
          alive_(m.num_states(), true) {
        next_.reserve(m.num_states());
        out_.reserve(m.num_states());
        for (std::size_t i = 0; i < m.num_states(); ++i) {
            next_.push_back(m.state(static_cast<StateId>(i)).next);
            out_.push_back(m.state(static_cast<StateId>(i)).out);
        }
        for (std::size_t i = 0; i < next_.size(); ++i) {
            for (const auto& [sym, to] : next_[i]) {
                if (to != static_cast<StateId>(i) && parent_[static_cast<std::size_t>(to)] == kNoState &&
                    to != m.initial()) {
                    parent_[static_cast<std::size_t>(to)] = static_cast<StateId>(i);
                    parent_label_[static_cast<std::size_t>(to)] = sym;
                }
            }
        }
    }

    Merger(const Machine& m, const std::vector<StateId>& parents,
           const std::vector<SymbolId>& labels)
        : machine_(m), parent_(parents), parent_label_(labels), alive_(m.num_states(), true) {
        next_.reserve(m.num_states());
        out_.reserve(m.num_states());
        for (std::size_t i = 0; i < m.num_states(); ++i) {
            next_.push_back(m.state(static_cast<StateId>(i)).next);
            out_.push_back(m.state(static_cast<StateId>(i)).out);
        }
    }

    bool alive(StateId s) const { return alive_[static_cast<std::size_t>(s)]; }
    const std::map<SymbolId, StateId>& next(StateId s) const {
        return next_[static_cast<std::size_t>(s)];
    }
    const std::map<SymbolId, SymbolId>& out(StateId s) const {
        return out_[static_cast<std::size_t>(s)];
    }

    // Redirects blue's parent edge to red and folds the subtree. On
    // failure everything is rolled back and false is returned.
    bool merge(StateId red, StateId blue) {
        if (red == blue) return true;
        std::size_t mark = journal_.size();
        StateId p = parent_[static_cast<std::size_t>(blue)];
        if (p == kNoState) return false;  // only the root lacks a parent
        SymbolId pl = parent_label_[static_cast<std::size_t>(blue)];
        set_next(p, pl, red);
        if (fold(red, blue)) {
            journal_.clear();  // committed; nothing to roll back anymore
            return true;
        }
        rollback(mark);
        return false;
    }

    Machine result(const Machine& original) const {
        Machine out(original.symbols());
        std::vector<StateId> remap(next_.size(), kNoState);
        StateId root = original.initial();
        std::deque<StateId> queue{root};
        remap[static_cast<std::size_t>(root)] = out.add_state();
        while (!queue.empty()) {
            StateId cur = queue.front();
            queue.pop_front();
            for (const auto& [sym, to] : next_[static_cast<std::size_t>(cur)]) {
                if (remap[static_cast<std::size_t>(to)] == kNoState) {
                    remap[static_cast<std::size_t>(to)] = out.add_state();
                    queue.push_back(to);
                }
            }
        }
        out.set_initial(remap[static_cast<std::size_t>(root)]);
        for (SymbolId a : original.alpha_alphabet()) out.add_alpha(a);
        for (SymbolId b : original.beta_alphabet()) out.add_beta(b);
        for (std::size_t i = 0; i < next_.size(); ++i) {
            if (remap[i] == kNoState) continue;
            for (const auto& [sym, to] : next_[i])
                out.force_transition(remap[i], sym, remap[static_cast<std::size_t>(to)]);
            for (const auto& [sym, o] : out_[i]) out.set_output(remap[i], sym, o);
        }
        return out;
    }

private:
    enum class OpKind { NextSet, NextChange, OutSet, ParentChange, Died };
    struct Op {
        OpKind kind;
        StateId node;
        SymbolId sym;
        StateId old_state;
        SymbolId old_sym;
    };

    void set_next(StateId node, SymbolId sym, StateId to) {
        auto& slot = next_[static_cast<std::size_t>(node)];
        auto it = slot.find(sym);
        if (it == slot.end()) {
            journal_.push_back({OpKind::NextSet, node, sym, kNoState, kNoSymbol});
            slot[sym] = to;
        } else {
            journal_.push_back({OpKind::NextChange, node, sym, it->second, kNoSymbol});
            it->second = to;
        }
    }

    void set_out(StateId node, SymbolId sym, SymbolId value) {
        journal_.push_back({OpKind::OutSet, node, sym, kNoState, kNoSymbol});
        out_[static_cast<std::size_t>(node)][sym] = value;
    }

    void set_parent(StateId node, StateId p, SymbolId pl) {
        journal_.push_back({OpKind::ParentChange, node, kNoSymbol,
                            parent_[static_cast<std::size_t>(node)],
                            parent_label_[static_cast<std::size_t>(node)]});
        parent_[static_cast<std::size_t>(node)] = p;
        parent_label_[static_cast<std::size_t>(node)] = pl;
    }

    void kill(StateId node) {
        journal_.push_back({OpKind::Died, node, kNoSymbol, kNoState, kNoSymbol});
        alive_[static_cast<std::size_t>(node)] = false;
    }

    void rollback(std::size_t mark) {
        while (journal_.size() > mark) {
            const Op op = journal_.back();
            journal_.pop_back();
            switch (op.kind) {
                case OpKind::NextSet:
                    next_[static_cast<std::size_t>(op.node)].erase(op.sym);
                    break;
                case OpKind::NextChange:
                    next_[static_cast<std::size_t>(op.node)][op.sym] = op.old_state;
                    break;
                case OpKind::OutSet:
                    out_[static_cast<std::size_t>(op.node)].erase(op.sym);
                    break;
                case OpKind::ParentChange:
                    parent_[static_cast<std::size_t>(op.node)] = op.old_state;
                    parent_label_[static_cast<std::size_t>(op.node)] = op.old_sym;
                    break;
                case OpKind::Died:
                    alive_[static_cast<std::size_t>(op.node)] = true;
                    break;
            }
        }
    }

    // Identifies tree node `b` with `t`, recursing along shared
    // beta-inputs. Output conflicts fail the fold; they are never
    // overwritten.
    bool fold(StateId t, StateId b) {
        for (const auto& [sym, o] : out_[static_cast<std::size_t>(b)]) {
            auto it = out_[static_cast<std::size_t>(t)].find(sym);
            if (it != out_[static_cast<std::size_t>(t)].end()) {
                if (it->second != o) return false;
            } else {
                set_out(t, sym, o);
            }
        }
        kill(b);
        // Copy: recursion below may attach children under t and grow maps.
        const std::map<SymbolId, StateId> children = next_[static_cast<std::size_t>(b)];
        for (const auto& [sym, child] : children) {
            auto it = next_[static_cast<std::size_t>(t)].find(sym);
            if (it == next_[static_cast<std::size_t>(t)].end()) {
                set_next(t, sym, child);
                set_parent(child, t, sym);
            } else if (it->second != child) {
                if (!fold(it->second, child)) return false;
            }
        }
        return true;
    }

    const Machine& machine_;
    std::vector<std::map<SymbolId, StateId>> next_;
    std::vector<std::map<SymbolId, SymbolId>> out_;
    std::vector<StateId> parent_;
    std::vector<SymbolId> parent_label_;
    std::vector<char> alive_;
    std::vector<Op> journal_;
};

}  // namespace

std::optional<Machine> try_merge(const Machine& machine, StateId red, StateId blue) {
    if (red == blue) return machine;
    Merger merger(machine);
    if (!merger.merge(red, blue)) return std::nullopt;
    return merger.result(machine);
}

Machine state_merging(const PrefixTreeTransducer& ptt, InferenceStats* stats) {
    InferenceStats local;
    InferenceStats& st = stats ? *stats : local;
    st.ptt_states = ptt.machine.num_states();

    Merger merger(ptt.machine, ptt.parent, ptt.parent_label);
    std::vector<StateId> reds{ptt.machine.initial()};
    std::vector<char> is_red(ptt.machine.num_states(), false);
    is_red[static_cast<std::size_t>(ptt.machine.initial())] = true;

    while (true) {
        // Blue: alive non-red successors of red states, lowest shortlex
        // rank first.
        StateId blue = kNoState;
        std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
        for (StateId r : reds) {
            for (const auto& [sym, to] : merger.next(r)) {
                (void)sym;
                if (!merger.alive(to) || is_red[static_cast<std::size_t>(to)]) continue;
                std::uint32_t rank = ptt.shortlex_rank[static_cast<std::size_t>(to)];
                if (rank < best) {
                    best = rank;
                    blue = to;
                }
            }
        }
        if (blue == kNoState) break;

        bool merged = false;
        for (StateId r : reds) {
            ++st.merge_attempts;
            if (merger.merge(r, blue)) {
                merged = true;
                ++st.merge_successes;
                break;
            }
        }
        if (!merged) {
            is_red[static_cast<std::size_t>(blue)] = true;
            reds.push_back(blue);
            ++st.promotions;
        }
    }

    Machine result = merger.result(ptt.machine).canonical();
    st.final_states = result.num_states();
    for (std::size_t i = 0; i < result.num_states(); ++i)
        st.max_outputs_per_state =
            std::max(st.max_outputs_per_state, result.state(static_cast<StateId>(i)).out.size());
    return result;
}

InferenceResult infer_with_stats(const SampleSet& samples) {
    auto start = std::chrono::steady_clock::now();
    InferenceResult res;
    PrefixTreeTransducer ptt = build_ptt(samples);
    res.machine = state_merging(ptt, &res.stats);
    res.stats.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return res;
}

Machine infer(const SampleSet& samples) {
    return infer_with_stats(samples).machine;
}

}  // namespace dbmm
