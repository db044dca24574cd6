#include "dbmm/automaton.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dbmm/errors.hpp"

namespace dbmm {

using nlohmann::json;

StateId Machine::add_state() {
    states_.emplace_back();
    if (initial_ == kNoState) initial_ = 0;
    return static_cast<StateId>(states_.size() - 1);
}

void Machine::set_initial(StateId s) {
    check_state(s);
    initial_ = s;
}

const Machine::State& Machine::state(StateId s) const {
    check_state(s);
    return states_[static_cast<std::size_t>(s)];
}

void Machine::check_state(StateId s) const {
    if (s < 0 || static_cast<std::size_t>(s) >= states_.size())
        throw DataError("unknown state id " + std::to_string(s));
}

void Machine::add_alpha(SymbolId s) {
    if (!is_alpha(s)) alpha_.push_back(s);
}

void Machine::add_beta(SymbolId s) {
    if (!is_beta(s)) beta_.push_back(s);
}

bool Machine::is_alpha(SymbolId s) const {
    return std::find(alpha_.begin(), alpha_.end(), s) != alpha_.end();
}

bool Machine::is_beta(SymbolId s) const {
    return std::find(beta_.begin(), beta_.end(), s) != beta_.end();
}

void Machine::set_transition(StateId from, SymbolId beta, StateId to) {
    check_state(from);
    check_state(to);
    auto& slot = states_[static_cast<std::size_t>(from)].next;
    auto it = slot.find(beta);
    if (it != slot.end() && it->second != to)
        throw DataError("transition already defined with a different target");
    slot[beta] = to;
}

void Machine::force_transition(StateId from, SymbolId beta, StateId to) {
    check_state(from);
    check_state(to);
    states_[static_cast<std::size_t>(from)].next[beta] = to;
}

void Machine::set_output(StateId st, SymbolId alpha, SymbolId out) {
    check_state(st);
    auto& slot = states_[static_cast<std::size_t>(st)].out;
    auto it = slot.find(alpha);
    if (it != slot.end() && it->second != out)
        throw DataError("output already defined with a different value");
    slot[alpha] = out;
}

std::optional<StateId> Machine::step_beta(StateId state, SymbolId input) const {
    check_state(state);
    if (!is_beta(input))
        throw DataError("input is not in the beta alphabet");
    const auto& next = states_[static_cast<std::size_t>(state)].next;
    auto it = next.find(input);
    if (it == next.end()) return std::nullopt;
    return it->second;
}

std::optional<SymbolId> Machine::output_alpha(StateId state, SymbolId input) const {
    check_state(state);
    if (!is_alpha(input))
        throw DataError("input is not in the alpha alphabet");
    const auto& out = states_[static_cast<std::size_t>(state)].out;
    auto it = out.find(input);
    if (it == out.end()) return std::nullopt;
    return it->second;
}

Machine::RunResult Machine::try_run_from(StateId from, const std::vector<SymbolId>& inputs) const {
    check_state(from);
    RunResult r;
    StateId cur = from;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        SymbolId sym = inputs[i];
        const auto& st = states_[static_cast<std::size_t>(cur)];
        if (is_alpha(sym)) {
            auto it = st.out.find(sym);
            if (it == st.out.end()) {
                r.ok = false;
                r.fail_position = i;
                r.final_state = cur;
                return r;
            }
            r.outputs.push_back(it->second);
        } else if (is_beta(sym)) {
            auto it = st.next.find(sym);
            if (it == st.next.end()) {
                r.ok = false;
                r.fail_position = i;
                r.final_state = cur;
                return r;
            }
            cur = it->second;
        } else {
            throw DataError("input " + std::to_string(i) + " belongs to neither alphabet");
        }
    }
    r.final_state = cur;
    return r;
}

Machine::RunResult Machine::try_run(const std::vector<SymbolId>& inputs) const {
    return try_run_from(initial_, inputs);
}

std::vector<SymbolId> Machine::run(const std::vector<SymbolId>& inputs) const {
    RunResult r = try_run(inputs);
    if (!r.ok)
        throw Error("undefined transition or output at input position " +
                    std::to_string(r.fail_position));
    return std::move(r.outputs);
}

void Machine::validate() const {
    if (states_.empty()) throw DataError("machine has no states");
    check_state(initial_);
    std::set<SymbolId> a(alpha_.begin(), alpha_.end());
    for (SymbolId b : beta_)
        if (a.count(b))
            throw DataError("alpha and beta alphabets intersect");
    for (const auto& st : states_) {
        for (const auto& [sym, to] : st.next) {
            if (!a.empty() && a.count(sym))
                throw DataError("beta transition keyed by an alpha symbol");
            check_state(to);
            if (std::find(beta_.begin(), beta_.end(), sym) == beta_.end())
                throw DataError("transition uses symbol outside the beta alphabet");
        }
        for (const auto& [sym, out] : st.out) {
            (void)out;
            if (std::find(alpha_.begin(), alpha_.end(), sym) == alpha_.end())
                throw DataError("emission uses symbol outside the alpha alphabet");
        }
    }
}

namespace {

// Symbol ids ordered by their keys so canonical forms do not depend on
// interning order.
std::vector<SymbolId> sorted_by_key(const SymbolTable& table, std::vector<SymbolId> ids) {
    std::sort(ids.begin(), ids.end(), [&](SymbolId x, SymbolId y) {
        return table.key(x) < table.key(y);
    });
    return ids;
}

}  // namespace

Machine Machine::canonical() const {
    if (states_.empty()) return *this;
    std::vector<SymbolId> beta_order = sorted_by_key(*symbols_, beta_);
    std::vector<StateId> remap(states_.size(), kNoState);
    std::vector<StateId> order;
    std::deque<StateId> queue{initial_};
    remap[static_cast<std::size_t>(initial_)] = 0;
    order.push_back(initial_);
    while (!queue.empty()) {
        StateId cur = queue.front();
        queue.pop_front();
        const auto& st = states_[static_cast<std::size_t>(cur)];
        for (SymbolId b : beta_order) {
            auto it = st.next.find(b);
            if (it == st.next.end()) continue;
            StateId to = it->second;
            if (remap[static_cast<std::size_t>(to)] == kNoState) {
                remap[static_cast<std::size_t>(to)] = static_cast<StateId>(order.size());
                order.push_back(to);
                queue.push_back(to);
            }
        }
    }
    Machine out(symbols_);
    for (std::size_t i = 0; i < order.size(); ++i) out.add_state();
    out.set_initial(0);
    out.alpha_ = sorted_by_key(*symbols_, alpha_);
    out.beta_ = beta_order;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& st = states_[static_cast<std::size_t>(order[i])];
        for (const auto& [sym, to] : st.next) {
            StateId t = remap[static_cast<std::size_t>(to)];
            if (t != kNoState)
                out.force_transition(static_cast<StateId>(i), sym, t);
        }
        for (const auto& [sym, o] : st.out)
            out.set_output(static_cast<StateId>(i), sym, o);
    }
    out.state_names.resize(order.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        out.state_names[i] = "q" + std::to_string(i);
    return out;
}

bool isomorphic(const Machine& a, const Machine& b) {
    // Canonicalize both and compare structure with symbols resolved to keys.
    Machine ca = a.canonical();
    Machine cb = b.canonical();
    if (ca.num_states() != cb.num_states()) return false;

    auto key_of = [](const Machine& m, SymbolId s) -> const SymbolKey& {
        return m.symbols()->key(s);
    };
    for (std::size_t i = 0; i < ca.num_states(); ++i) {
        const auto& sa = ca.state(static_cast<StateId>(i));
        const auto& sb = cb.state(static_cast<StateId>(i));
        if (sa.next.size() != sb.next.size() || sa.out.size() != sb.out.size()) return false;
        // Compare transition maps with symbols matched by key.
        std::map<SymbolKey, StateId> ta, tb;
        for (const auto& [sym, to] : sa.next) ta[key_of(ca, sym)] = to;
        for (const auto& [sym, to] : sb.next) tb[key_of(cb, sym)] = to;
        if (ta != tb) return false;
        std::map<SymbolKey, SymbolKey> oa, ob;
        for (const auto& [sym, out] : sa.out) oa[key_of(ca, sym)] = key_of(ca, out);
        for (const auto& [sym, out] : sb.out) ob[key_of(cb, sym)] = key_of(cb, out);
        if (oa != ob) return false;
    }
    return true;
}

namespace {

json symbol_to_json(const SymbolTable& table, SymbolId id) {
    const SymbolKey& k = table.key(id);
    if (k.parts.size() == 1) return json(k.parts[0]);
    json arr = json::array();
    for (const auto& p : k.parts) arr.push_back(p);
    return arr;
}

SymbolKey symbol_from_json(const json& j) {
    SymbolKey k;
    if (j.is_string()) {
        k.parts.push_back(j.get<std::string>());
    } else if (j.is_array()) {
        for (const auto& p : j) {
            if (!p.is_string()) throw DataError("symbol array parts must be strings");
            k.parts.push_back(p.get<std::string>());
        }
    } else {
        throw DataError("symbol must be a string or an array of strings");
    }
    return k;
}

}  // namespace

std::string Machine::to_json() const {
    json j;
    std::vector<std::string> names = state_names;
    if (names.size() != states_.size()) {
        names.resize(states_.size());
        for (std::size_t i = 0; i < states_.size(); ++i) names[i] = "q" + std::to_string(i);
    }
    j["states"] = names;
    j["initial"] = names[static_cast<std::size_t>(initial_)];
    json alpha = json::array(), beta = json::array(), outputs = json::array();
    for (SymbolId s : sorted_by_key(*symbols_, alpha_)) alpha.push_back(symbol_to_json(*symbols_, s));
    for (SymbolId s : sorted_by_key(*symbols_, beta_)) beta.push_back(symbol_to_json(*symbols_, s));
    std::set<SymbolId> outs;
    for (const auto& st : states_)
        for (const auto& [sym, o] : st.out) outs.insert(o);
    for (SymbolId s : sorted_by_key(*symbols_, {outs.begin(), outs.end()}))
        outputs.push_back(symbol_to_json(*symbols_, s));
    j["alpha"] = alpha;
    j["beta"] = beta;
    j["outputs"] = outputs;

    json transitions = json::array(), emissions = json::array();
    for (std::size_t i = 0; i < states_.size(); ++i) {
        std::vector<SymbolId> syms;
        for (const auto& [sym, to] : states_[i].next) syms.push_back(sym);
        for (SymbolId sym : sorted_by_key(*symbols_, syms))
            transitions.push_back({names[i], symbol_to_json(*symbols_, sym),
                                   names[static_cast<std::size_t>(states_[i].next.at(sym))]});
        syms.clear();
        for (const auto& [sym, o] : states_[i].out) syms.push_back(sym);
        for (SymbolId sym : sorted_by_key(*symbols_, syms))
            emissions.push_back({names[i], symbol_to_json(*symbols_, sym),
                                 symbol_to_json(*symbols_, states_[i].out.at(sym))});
    }
    j["transitions"] = transitions;
    j["emissions"] = emissions;
    return j.dump(2);
}

Machine Machine::from_json(const std::string& text, SymbolTablePtr symbols) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("machine JSON parse error: ") + e.what());
    }
    for (const char* field : {"states", "initial", "alpha", "beta", "transitions", "emissions"})
        if (!j.contains(field)) throw DataError(std::string("machine JSON missing '") + field + "'");

    Machine m(symbols);
    std::unordered_map<std::string, StateId> by_name;
    for (const auto& n : j["states"]) {
        StateId s = m.add_state();
        m.state_names.push_back(n.get<std::string>());
        by_name[n.get<std::string>()] = s;
    }
    if (m.num_states() == 0) throw DataError("machine JSON has no states");
    auto lookup = [&](const json& n) {
        auto it = by_name.find(n.get<std::string>());
        if (it == by_name.end()) throw DataError("machine JSON references unknown state " + n.dump());
        return it->second;
    };
    m.set_initial(lookup(j["initial"]));
    for (const auto& s : j["alpha"]) m.add_alpha(symbols->intern(symbol_from_json(s)));
    for (const auto& s : j["beta"]) m.add_beta(symbols->intern(symbol_from_json(s)));
    for (const auto& t : j["transitions"]) {
        if (!t.is_array() || t.size() != 3) throw DataError("transition entries must be triples");
        SymbolId sym = symbols->intern(symbol_from_json(t[1]));
        if (!m.is_beta(sym)) throw DataError("transition symbol not in beta alphabet");
        m.set_transition(lookup(t[0]), sym, lookup(t[2]));
    }
    for (const auto& e : j["emissions"]) {
        if (!e.is_array() || e.size() != 3) throw DataError("emission entries must be triples");
        SymbolId sym = symbols->intern(symbol_from_json(e[1]));
        if (!m.is_alpha(sym)) throw DataError("emission symbol not in alpha alphabet");
        m.set_output(lookup(e[0]), sym, symbols->intern(symbol_from_json(e[2])));
    }
    m.validate();
    return m;
}

std::string Machine::to_dot(const std::string& graph_name) const {
    std::ostringstream os;
    std::vector<std::string> names = state_names;
    if (names.size() != states_.size()) {
        names.resize(states_.size());
        for (std::size_t i = 0; i < states_.size(); ++i) names[i] = "q" + std::to_string(i);
    }
    auto escape = [](const std::string& s) {
        std::string out;
        for (char c : s) {
            if (c == '"' || c == '\\') out += '\\';
            out += c;
        }
        return out;
    };
    os << "digraph " << graph_name << " {\n  rankdir=LR;\n  node [shape=circle];\n";
    for (std::size_t i = 0; i < states_.size(); ++i) {
        std::string label = names[i];
        for (const auto& [sym, o] : states_[i].out)
            label += "\\n" + symbols_->key(sym).display() + " / " + symbols_->key(o).display();
        os << "  \"" << escape(names[i]) << "\" [label=\"" << escape(label) << "\""
           << (static_cast<StateId>(i) == initial_ ? ", shape=doublecircle" : "") << "];\n";
    }
    for (std::size_t i = 0; i < states_.size(); ++i)
        for (const auto& [sym, to] : states_[i].next)
            os << "  \"" << escape(names[i]) << "\" -> \""
               << escape(names[static_cast<std::size_t>(to)]) << "\" [label=\""
               << escape(symbols_->key(sym).display()) << "\"];\n";
    os << "}\n";
    return os.str();
}

}  // namespace dbmm
