#include "dbmm/supplement.hpp"

#include "dbmm/errors.hpp"

namespace dbmm {

std::string state_name(const Machine& machine, StateId s) {
    if (static_cast<std::size_t>(s) < machine.state_names.size())
        return machine.state_names[static_cast<std::size_t>(s)];
    return "q" + std::to_string(s);
}

LabeledTrace supplement_trace(const TransitionMachine& tm, const LabeledTrace& trace) {
    SymbolTable& table = *tm.machine.symbols();
    LabeledTrace out;
    out.steps.reserve(trace.steps.size());
    StateId q = tm.machine.initial();
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        TraceStep step = trace.steps[i];
        SymbolKey augmented = table.key(step.obs);
        augmented.parts.push_back(state_name(tm.machine, q));
        step.obs = table.intern(std::move(augmented));
        out.steps.push_back(step);
        if (i + 1 == trace.steps.size()) break;  // nothing left to annotate
        std::optional<StateId> next;
        if (tm.machine.is_beta(trace.steps[i].label))
            next = tm.delta_q(q, trace.steps[i].label);
        if (!next)
            throw DataError("transition machine undefined for label " +
                            table.key(trace.steps[i].label).display() + " at step " +
                            std::to_string(i));
        q = *next;
    }
    return out;
}

std::vector<LabeledTrace> supplement_corpus(const TransitionMachine& tm,
                                            const std::vector<LabeledTrace>& traces) {
    std::vector<LabeledTrace> out;
    out.reserve(traces.size());
    std::string failures;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        try {
            out.push_back(supplement_trace(tm, traces[i]));
        } catch (const DataError& e) {
            if (!failures.empty()) failures += "; ";
            failures += "trace " + std::to_string(i) + ": " + e.what();
        }
    }
    if (!failures.empty()) throw DataError("observation supplement failed: " + failures);
    return out;
}

}  // namespace dbmm
