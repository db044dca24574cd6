#include "dbmm/pipeline.hpp"

#include <chrono>

#include <json.hpp>

#include "dbmm/errors.hpp"
#include "dbmm/supplement.hpp"

namespace dbmm {

using nlohmann::json;

bool replay_consistent(const Machine& machine, const SampleSet& samples) {
    for (const auto& s : samples.samples) {
        Machine::RunResult r = machine.try_run(s.inputs);
        if (!r.ok) return false;
        std::size_t oi = 0;
        for (std::size_t i = 0; i < s.inputs.size(); ++i) {
            if (s.outputs[i] == kBetaDefault) continue;
            if (oi >= r.outputs.size() || r.outputs[oi] != s.outputs[i]) return false;
            ++oi;
        }
        if (oi != r.outputs.size()) return false;
    }
    return true;
}

std::uint64_t corpus_digest(const std::vector<LabeledTrace>& traces, const SymbolTable& symbols) {
    std::string text = traces_to_jsonl(traces, symbols);
    std::uint64_t h = 1469598103934665603ull;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

struct StageOutput {
    Machine machine;
    ReductionRecord record;
    InferenceStats stats;
};

StageOutput run_stage(const SampleSet& raw, const PipelineOptions& options) {
    StageOutput out;
    SampleSet working = raw;
    if (options.use_alpha_removal) {
        auto [reduced, record] = remove_redundant_alpha(working);
        working = std::move(reduced);
        out.record.redundant_alpha = record.redundant_alpha;
    }
    if (options.use_beta_removal) {
        std::set<SymbolId> present;
        for (SymbolId b : options.trivial_betas)
            if (std::find(working.beta_alphabet.begin(), working.beta_alphabet.end(), b) !=
                working.beta_alphabet.end())
                present.insert(b);
        working = remove_trivial_beta(working, present);
        out.record.trivial_beta = options.trivial_betas;
    }
    InferenceResult inferred = infer_with_stats(working);
    out.stats = inferred.stats;
    out.machine = restore_all(inferred.machine, out.record);
    return out;
}

json record_json(const ReductionRecord& record, const SymbolTable& table) {
    json j;
    json alpha = json::array();
    for (const auto& [sym, out] : record.redundant_alpha)
        alpha.push_back({table.key(sym).display(), table.key(out).display()});
    j["redundant_alpha"] = alpha;
    json beta = json::array();
    for (SymbolId b : record.trivial_beta) beta.push_back(table.key(b).display());
    j["trivial_beta"] = beta;
    return j;
}

}  // namespace

PipelineResult infer_machines(const std::vector<LabeledTrace>& traces,
                              const SymbolTablePtr& symbols, const PipelineOptions& options) {
    if (traces.empty()) throw DataError("cannot infer machines from an empty corpus");
    auto t0 = std::chrono::steady_clock::now();

    PipelineResult result;
    SampleSet tm_samples = to_tm_samples(traces, symbols);
    StageOutput tm_stage = run_stage(tm_samples, options);
    result.tm.machine = tm_stage.machine;
    result.tm_record = tm_stage.record;
    result.tm_stats = tm_stage.stats;

    auto t1 = std::chrono::steady_clock::now();

    std::vector<LabeledTrace> rm_source = traces;
    if (options.use_supplement) rm_source = supplement_corpus(result.tm, traces);
    SampleSet rm_samples = to_rm_samples(rm_source, symbols);
    StageOutput rm_stage = run_stage(rm_samples, options);
    result.rm.machine = rm_stage.machine;
    result.rm.alpha_augmented = options.use_supplement;
    result.rm_record = rm_stage.record;
    result.rm_stats = rm_stage.stats;

    auto t2 = std::chrono::steady_clock::now();

    json manifest;
    manifest["corpus"] = {{"traces", traces.size()},
                          {"digest", corpus_digest(traces, *symbols)}};
    manifest["options"] = {{"use_alpha_removal", options.use_alpha_removal},
                           {"use_beta_removal", options.use_beta_removal},
                           {"use_supplement", options.use_supplement}};
    json trivial = json::array();
    for (SymbolId b : options.trivial_betas) trivial.push_back(symbols->key(b).display());
    manifest["options"]["trivial_betas"] = trivial;
    manifest["tm"] = {{"states", result.tm.machine.num_states()},
                      {"stats", json::parse(result.tm_stats.to_json())},
                      {"reductions", record_json(result.tm_record, *symbols)},
                      {"machine", json::parse(result.tm.machine.to_json())}};
    manifest["rm"] = {{"states", result.rm.machine.num_states()},
                      {"alpha_augmented", result.rm.alpha_augmented},
                      {"stats", json::parse(result.rm_stats.to_json())},
                      {"reductions", record_json(result.rm_record, *symbols)},
                      {"machine", json::parse(result.rm.machine.to_json())}};
    manifest["timings_ms"] = {
        {"tm", std::chrono::duration<double, std::milli>(t1 - t0).count()},
        {"rm", std::chrono::duration<double, std::milli>(t2 - t1).count()},
        {"total", std::chrono::duration<double, std::milli>(t2 - t0).count()}};
    result.manifest_json = manifest.dump(2);
    return result;
}

}  // namespace dbmm
