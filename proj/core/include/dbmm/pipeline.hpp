#pragma once

#include <set>
#include <string>
#include <vector>

#include "dbmm/automaton.hpp"
#include "dbmm/preprocess.hpp"
#include "dbmm/rpni.hpp"
#include "dbmm/traces.hpp"

namespace dbmm {

struct PipelineOptions {
    std::set<SymbolId> trivial_betas;   // removed before inference, self-looped after
    bool use_alpha_removal = true;
    bool use_beta_removal = true;
    bool use_supplement = true;
};

struct PipelineResult {
    TransitionMachine tm;
    RewardMachine rm;
    ReductionRecord tm_record;
    ReductionRecord rm_record;
    InferenceStats tm_stats;
    InferenceStats rm_stats;
    std::string manifest_json;
};

// The full inference pipeline: TM samples -> reductions -> merging ->
// recovery; supplement the corpus with the recovered TM; RM samples ->
// reductions -> merging -> recovery. Machines come back canonicalized
// and reproduce the corpus exactly.
PipelineResult infer_machines(const std::vector<LabeledTrace>& traces,
                              const SymbolTablePtr& symbols, const PipelineOptions& options);

// True iff the machine reproduces every sample's outputs exactly.
bool replay_consistent(const Machine& machine, const SampleSet& samples);

// Stable digest of a corpus for the manifest.
std::uint64_t corpus_digest(const std::vector<LabeledTrace>& traces, const SymbolTable& symbols);

}  // namespace dbmm
