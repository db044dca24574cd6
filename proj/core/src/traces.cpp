#include "dbmm/traces.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dbmm/errors.hpp"

namespace dbmm {

using nlohmann::json;

namespace {

SymbolId intern_label(SymbolTable& table, const json& arr, std::size_t line) {
    if (!arr.is_array())
        throw DataError("line " + std::to_string(line) + ": 'label' must be an array");
    std::vector<std::string> props;
    for (const auto& p : arr) {
        if (!p.is_string())
            throw DataError("line " + std::to_string(line) + ": label propositions must be strings");
        props.push_back(p.get<std::string>());
    }
    std::sort(props.begin(), props.end());
    props.erase(std::unique(props.begin(), props.end()), props.end());
    return table.intern(SymbolKey{std::move(props)});
}

SymbolId intern_obs(SymbolTable& table, const json& v, std::size_t line) {
    if (v.is_string()) return table.intern(v.get<std::string>());
    if (v.is_array()) {
        // Augmented observation [obs, tm_state].
        SymbolKey k;
        for (const auto& p : v) {
            if (!p.is_string())
                throw DataError("line " + std::to_string(line) + ": observation parts must be strings");
            k.parts.push_back(p.get<std::string>());
        }
        if (k.parts.empty())
            throw DataError("line " + std::to_string(line) + ": empty observation");
        return table.intern(std::move(k));
    }
    throw DataError("line " + std::to_string(line) + ": 'obs' must be a string or array");
}

SymbolId intern_reward(SymbolTable& table, const json& v, std::size_t line) {
    std::string text;
    if (v.is_string())
        text = v.get<std::string>();
    else if (v.is_number_integer())
        text = std::to_string(v.get<long long>());
    else if (v.is_number())
        text = v.dump();
    else
        throw DataError("line " + std::to_string(line) + ": 'reward' must be a number or string");
    try {
        return table.intern(normalize_decimal(text));
    } catch (const DataError& e) {
        throw DataError("line " + std::to_string(line) + ": " + e.what());
    }
}

}  // namespace

std::vector<LabeledTrace> parse_traces(const std::string& text, const SymbolTablePtr& symbols) {
    std::vector<LabeledTrace> traces;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError("line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("steps") || !j["steps"].is_array())
            throw DataError("line " + std::to_string(lineno) + ": trace must be {\"steps\": [...]}");
        LabeledTrace trace;
        for (const auto& s : j["steps"]) {
            for (const char* field : {"label", "obs", "action", "reward"})
                if (!s.contains(field))
                    throw DataError("line " + std::to_string(lineno) + ": step missing '" +
                                    std::string(field) + "'");
            TraceStep step;
            step.label = intern_label(*symbols, s["label"], lineno);
            step.obs = intern_obs(*symbols, s["obs"], lineno);
            if (!s["action"].is_string())
                throw DataError("line " + std::to_string(lineno) + ": 'action' must be a string");
            step.action = symbols->intern(s["action"].get<std::string>());
            step.reward = intern_reward(*symbols, s["reward"], lineno);
            trace.steps.push_back(step);
        }
        if (trace.steps.empty())
            throw DataError("line " + std::to_string(lineno) + ": trace has no steps");
        traces.push_back(std::move(trace));
    }
    return traces;
}

std::vector<LabeledTrace> read_traces(const std::string& path, const SymbolTablePtr& symbols) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open trace file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_traces(buf.str(), symbols);
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

std::string traces_to_jsonl(const std::vector<LabeledTrace>& traces, const SymbolTable& symbols) {
    std::ostringstream os;
    for (const auto& trace : traces) {
        json steps = json::array();
        for (const auto& s : trace.steps) {
            json step;
            json label = json::array();
            for (const auto& p : symbols.key(s.label).parts) label.push_back(p);
            step["label"] = label;
            step["obs"] = symbol_json(symbols, s.obs);
            step["action"] = symbols.key(s.action).parts.at(0);
            step["reward"] = symbols.key(s.reward).parts.at(0);
            steps.push_back(step);
        }
        os << json{{"steps", steps}}.dump() << "\n";
    }
    return os.str();
}

void write_traces(const std::string& path, const std::vector<LabeledTrace>& traces,
                  const SymbolTable& symbols) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write trace file: " + path);
    out << traces_to_jsonl(traces, symbols);
}

SymbolId alpha_pair_symbol(SymbolTable& table, SymbolId obs, SymbolId action) {
    SymbolKey k = table.key(obs);
    k.parts.push_back(table.key(action).parts.at(0));
    return table.intern(std::move(k));
}

namespace {

void note_alphabet(std::vector<SymbolId>& v, SymbolId s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

enum class SampleKind { Tm, Rm };

SampleSet convert(const std::vector<LabeledTrace>& traces, const SymbolTablePtr& symbols,
                  SampleKind kind) {
    SampleSet set;
    set.symbols = symbols;
    for (std::size_t t = 0; t < traces.size(); ++t) {
        const auto& steps = traces[t].steps;
        if (steps.empty()) throw DataError("trace " + std::to_string(t) + " is empty");
        if (kind == SampleKind::Tm && steps.size() < 2)
            throw DataError("trace " + std::to_string(t) +
                            " too short for a TM sample (needs at least 2 steps)");
        // TM samples stop at the last (o,a) pair whose successor
        // observation is known, keeping that pair's label as a trailing
        // beta-input (the observation supplement consumes it); RM samples
        // keep every step and end on the final (o,a) pair.
        std::size_t n = kind == SampleKind::Tm ? steps.size() - 1 : steps.size();
        Sample sample;
        for (std::size_t i = 0; i < n; ++i) {
            SymbolId pair = alpha_pair_symbol(*symbols, steps[i].obs, steps[i].action);
            sample.inputs.push_back(pair);
            sample.outputs.push_back(kind == SampleKind::Tm ? steps[i + 1].obs : steps[i].reward);
            note_alphabet(set.alpha_alphabet, pair);
            if (kind == SampleKind::Tm || i + 1 < n) {
                sample.inputs.push_back(steps[i].label);
                sample.outputs.push_back(kBetaDefault);
                note_alphabet(set.beta_alphabet, steps[i].label);
            }
        }
        set.samples.push_back(std::move(sample));
    }
    return set;
}

}  // namespace

SampleSet to_tm_samples(const std::vector<LabeledTrace>& traces, const SymbolTablePtr& symbols) {
    return convert(traces, symbols, SampleKind::Tm);
}

SampleSet to_rm_samples(const std::vector<LabeledTrace>& traces, const SymbolTablePtr& symbols) {
    return convert(traces, symbols, SampleKind::Rm);
}

std::string SampleSet::debug_json() const {
    json j;
    json arr = json::array();
    for (const auto& s : samples) {
        json in = json::array(), out = json::array();
        for (SymbolId sym : s.inputs) in.push_back(symbols->key(sym).display());
        for (SymbolId sym : s.outputs)
            out.push_back(sym == kBetaDefault ? "<beta>" : symbols->key(sym).display());
        arr.push_back({{"inputs", in}, {"outputs", out}});
    }
    j["samples"] = arr;
    return j.dump(2);
}

}  // namespace dbmm
