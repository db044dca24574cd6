#include <doctest.h>

#include <json.hpp>

#include "dbmm/envs.hpp"
#include "dbmm/errors.hpp"
#include "dbmm/oracle.hpp"
#include "dbmm/pipeline.hpp"
#include "dbmm/supplement.hpp"
#include "test_support.hpp"

using namespace dbmm;
using namespace dbmm::testing;

namespace {

PipelineOptions default_options(const SymbolTablePtr& table) {
    PipelineOptions opt;
    opt.trivial_betas = {table->intern(SymbolKey{})};
    return opt;
}

nlohmann::json strip_timings(const std::string& manifest) {
    nlohmann::json j = nlohmann::json::parse(manifest);
    j.erase("timings_ms");
    j["tm"]["stats"].erase("elapsed_ms");
    j["rm"]["stats"].erase("elapsed_ms");
    return j;
}

}  // namespace

TEST_CASE("the four-area corpus yields the reference machines") {
    auto table = make_table();
    DetPomdp env = build_fig1_env(table);
    auto traces = generate_traces(env, Policy::Random, 400, 40, 21);

    PipelineResult result = infer_machines(traces, table, default_options(table));
    CHECK(result.rm.machine.num_states() == 2);
    CHECK(result.tm.machine.num_states() == 2);

    // Both machines predict the environment on every feasible history.
    auto tm_report = oracle::check_resolvent(result.tm.machine, oracle::MachineKind::Tm, env, 12);
    CHECK(tm_report.ok);
    auto rm_report =
        oracle::check_resolvent(result.rm.machine, oracle::MachineKind::Rm, env, 12, &result.tm);
    CHECK(rm_report.ok);
}

TEST_CASE("machines reproduce the corpus exactly after recovery") {
    auto table = make_table();
    DetPomdp env = build_fig1_env(table);
    auto traces = generate_traces(env, Policy::Random, 150, 30, 5);
    PipelineResult result = infer_machines(traces, table, default_options(table));

    CHECK(replay_consistent(result.tm.machine, to_tm_samples(traces, table)));
    auto augmented = supplement_corpus(result.tm, traces);
    CHECK(replay_consistent(result.rm.machine, to_rm_samples(augmented, table)));

    // Recovery completeness: total over every (state, input) pair that
    // occurs in the corpus.
    SampleSet tm_samples = to_tm_samples(traces, table);
    for (const auto& s : tm_samples.samples) CHECK(result.tm.machine.try_run(s.inputs).ok);
}

TEST_CASE("a Markovian constant-reward corpus collapses to one state") {
    auto table = make_table();
    // Fully observable two-cell walk with zero rewards everywhere.
    DetPomdp env;
    env.symbols = table;
    env.name = "two-cells";
    env.num_states = 2;
    env.initial_state = 0;
    env.actions = {table->intern("go")};
    SymbolId left = table->intern("L"), right = table->intern("R");
    env.obs_of_state = {left, right};
    SymbolId none = table->intern(SymbolKey{});
    env.label_of_obs[left] = none;
    env.label_of_obs[right] = none;
    env.next = {1, 0};
    SymbolId zero = table->intern("0");
    env.reward_sym = {zero, zero};
    env.reward_val = {0.0, 0.0};
    env.terminal_state = {0, 0};
    env.terminal_action = {0, 0};

    auto traces = generate_traces(env, Policy::Random, 10, 10, 3);
    PipelineResult result = infer_machines(traces, table, default_options(table));
    CHECK(result.tm.machine.num_states() == 1);
    CHECK(result.rm.machine.num_states() == 1);
}

TEST_CASE("manifests are deterministic modulo timings") {
    auto table = make_table();
    DetPomdp env = build_fig1_env(table);
    auto traces = generate_traces(env, Policy::Random, 60, 25, 13);

    auto table2 = make_table();
    DetPomdp env2 = build_fig1_env(table2);
    auto traces2 = generate_traces(env2, Policy::Random, 60, 25, 13);

    PipelineResult r1 = infer_machines(traces, table, default_options(table));
    PipelineResult r2 = infer_machines(traces2, table2, default_options(table2));
    CHECK(strip_timings(r1.manifest_json) == strip_timings(r2.manifest_json));
    CHECK(r1.tm.machine.to_json() == r2.tm.machine.to_json());
    CHECK(r1.rm.machine.to_json() == r2.rm.machine.to_json());
}

TEST_CASE("the pipeline rejects an empty corpus") {
    auto table = make_table();
    CHECK_THROWS_AS(infer_machines({}, table, default_options(table)), DataError);
}

TEST_CASE("reductions do not change what the machines compute") {
    auto table = make_table();
    DetPomdp env = build_fig1_env(table);
    auto traces = generate_traces(env, Policy::Random, 120, 30, 17);

    PipelineOptions with = default_options(table);
    PipelineOptions without = with;
    without.use_alpha_removal = false;
    without.use_beta_removal = false;

    PipelineResult a = infer_machines(traces, table, with);
    PipelineResult b = infer_machines(traces, table, without);

    // Output equivalence on all training inputs: both pipelines
    // reproduce the corpus exactly, reduced or not.
    SampleSet tm_samples = to_tm_samples(traces, table);
    CHECK(replay_consistent(a.tm.machine, tm_samples));
    CHECK(replay_consistent(b.tm.machine, tm_samples));
    CHECK(replay_consistent(a.rm.machine, to_rm_samples(supplement_corpus(a.tm, traces), table)));
    CHECK(replay_consistent(b.rm.machine, to_rm_samples(supplement_corpus(b.tm, traces), table)));
}
