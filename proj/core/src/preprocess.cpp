#include "dbmm/preprocess.hpp"

#include <algorithm>

#include "dbmm/errors.hpp"

namespace dbmm {

std::pair<SampleSet, ReductionRecord> remove_redundant_alpha(const SampleSet& samples) {
    // Census: which alpha-inputs ever produce two different outputs.
    std::map<SymbolId, SymbolId> constant;  // alpha -> single observed output
    std::set<SymbolId> varying;
    for (const auto& s : samples.samples) {
        for (std::size_t i = 0; i < s.inputs.size(); ++i) {
            if (s.outputs[i] == kBetaDefault) continue;
            SymbolId a = s.inputs[i], out = s.outputs[i];
            if (varying.count(a)) continue;
            auto it = constant.find(a);
            if (it == constant.end()) {
                constant[a] = out;
            } else if (it->second != out) {
                varying.insert(a);
                constant.erase(it);
            }
        }
    }

    ReductionRecord record;
    record.redundant_alpha.insert(constant.begin(), constant.end());

    SampleSet reduced;
    reduced.symbols = samples.symbols;
    reduced.beta_alphabet = samples.beta_alphabet;
    for (SymbolId a : samples.alpha_alphabet)
        if (!record.redundant_alpha.count(a)) reduced.alpha_alphabet.push_back(a);
    for (const auto& s : samples.samples) {
        Sample out;
        for (std::size_t i = 0; i < s.inputs.size(); ++i) {
            if (s.outputs[i] != kBetaDefault && record.redundant_alpha.count(s.inputs[i])) continue;
            out.inputs.push_back(s.inputs[i]);
            out.outputs.push_back(s.outputs[i]);
        }
        reduced.samples.push_back(std::move(out));
    }
    reduced.reduction_log = samples.reduction_log;
    reduced.reduction_log.redundant_alpha.insert(record.redundant_alpha.begin(),
                                                 record.redundant_alpha.end());
    return {std::move(reduced), std::move(record)};
}

SampleSet remove_trivial_beta(const SampleSet& samples, const std::set<SymbolId>& trivial) {
    for (SymbolId b : trivial) {
        if (std::find(samples.beta_alphabet.begin(), samples.beta_alphabet.end(), b) ==
            samples.beta_alphabet.end())
            throw DataError("trivial beta-input not in the sample set's beta alphabet: " +
                            samples.symbols->key(b).display());
    }
    SampleSet reduced;
    reduced.symbols = samples.symbols;
    reduced.alpha_alphabet = samples.alpha_alphabet;
    for (SymbolId b : samples.beta_alphabet)
        if (!trivial.count(b)) reduced.beta_alphabet.push_back(b);
    for (const auto& s : samples.samples) {
        Sample out;
        for (std::size_t i = 0; i < s.inputs.size(); ++i) {
            if (s.outputs[i] == kBetaDefault && trivial.count(s.inputs[i])) continue;
            out.inputs.push_back(s.inputs[i]);
            out.outputs.push_back(s.outputs[i]);
        }
        reduced.samples.push_back(std::move(out));
    }
    reduced.reduction_log = samples.reduction_log;
    reduced.reduction_log.trivial_beta.insert(trivial.begin(), trivial.end());
    return reduced;
}

Machine restore_redundant_alpha(const Machine& machine, const ReductionRecord& record) {
    Machine out = machine;
    for (const auto& [alpha, value] : record.redundant_alpha) {
        out.add_alpha(alpha);
        for (StateId q = 0; q < static_cast<StateId>(out.num_states()); ++q) {
            auto existing = out.output_alpha(q, alpha);
            if (existing && *existing != value)
                throw DataError("recovery conflict: state " + std::to_string(q) +
                                " already emits a different output for " +
                                machine.symbols()->key(alpha).display());
            if (!existing) out.set_output(q, alpha, value);
        }
    }
    return out;
}

Machine restore_trivial_beta(const Machine& machine, const ReductionRecord& record) {
    Machine out = machine;
    for (SymbolId beta : record.trivial_beta) {
        out.add_beta(beta);
        for (StateId q = 0; q < static_cast<StateId>(out.num_states()); ++q)
            out.force_transition(q, beta, q);
    }
    return out;
}

std::pair<SampleSet, ReductionRecord> apply_reductions(const SampleSet& samples,
                                                       const std::set<SymbolId>& trivial) {
    auto [after_alpha, record] = remove_redundant_alpha(samples);
    std::set<SymbolId> present;
    for (SymbolId b : trivial)
        if (std::find(after_alpha.beta_alphabet.begin(), after_alpha.beta_alphabet.end(), b) !=
            after_alpha.beta_alphabet.end())
            present.insert(b);
    SampleSet reduced = remove_trivial_beta(after_alpha, present);
    // Recovery must cover the whole configured set: a trivial label can
    // occur in traces without surviving into the sample alphabet.
    record.trivial_beta = trivial;
    reduced.reduction_log.trivial_beta = trivial;
    return {std::move(reduced), std::move(record)};
}

Machine restore_all(const Machine& machine, const ReductionRecord& record) {
    return restore_trivial_beta(restore_redundant_alpha(machine, record), record);
}

}  // namespace dbmm
