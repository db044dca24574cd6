#include <doctest.h>

#include <set>

#include "dbmm/errors.hpp"
#include "dbmm/oracle.hpp"
#include "dbmm/rpni.hpp"
#include "test_support.hpp"

using namespace dbmm;
using namespace dbmm::testing;

namespace {

// The canonical tiny corpus: one sample <x,a,x,a,x> -> <0,_,1,_,0>
// generated by the toggle machine.
SampleSet toggle_corpus(const SymbolTablePtr& table) {
    SampleSet set;
    set.symbols = table;
    SymbolId x = table->intern("x"), a = table->intern("a");
    SymbolId o0 = table->intern("0"), o1 = table->intern("1");
    set.alpha_alphabet = {x};
    set.beta_alphabet = {a};
    set.samples.push_back({{x, a, x, a, x}, {o0, kBetaDefault, o1, kBetaDefault, o0}});
    set.samples.push_back({{a, x, a, x}, {kBetaDefault, o1, kBetaDefault, o0}});
    return set;
}

}  // namespace

TEST_CASE("build_ptt creates one state per beta-prefix") {
    auto table = make_table();
    SampleSet set;
    set.symbols = table;
    SymbolId a = table->intern("a"), b = table->intern("b");
    set.beta_alphabet = {a, b};
    set.samples.push_back({{a, b}, {kBetaDefault, kBetaDefault}});
    PrefixTreeTransducer ptt = build_ptt(set);
    CHECK(ptt.machine.num_states() == 3);  // prefixes: empty, a, ab
    CHECK(ptt.access_string(0).empty());

    // Size law on random corpora: 1 + distinct non-empty beta-prefixes.
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        Machine target = random_target(table, {.states = 3, .betas = 2, .alphas = 2, .seed = seed,
                                               .distinct_rows = false});
        SampleSet corpus = random_walk_corpus(target, 20, 10, seed);
        std::set<std::vector<SymbolId>> prefixes;
        for (const auto& s : corpus.samples) {
            std::vector<SymbolId> prefix;
            for (std::size_t i = 0; i < s.inputs.size(); ++i) {
                if (s.outputs[i] != kBetaDefault) continue;
                prefix.push_back(s.inputs[i]);
                prefixes.insert(prefix);
            }
        }
        CHECK(build_ptt(corpus).machine.num_states() == prefixes.size() + 1);
    }
}

TEST_CASE("build_ptt rejects contradictory samples with their indices") {
    auto table = make_table();
    SampleSet set;
    set.symbols = table;
    SymbolId x = table->intern("x");
    SymbolId o0 = table->intern("0"), o1 = table->intern("1");
    set.alpha_alphabet = {x};
    set.samples.push_back({{x}, {o0}});
    set.samples.push_back({{x}, {o1}});
    try {
        build_ptt(set);
        FAIL("expected inconsistency");
    } catch (const InconsistentSamplesError& e) {
        CHECK(e.first_sample == 0);
        CHECK(e.second_sample == 1);
    }
}

TEST_CASE("compatible compares only shared alpha inputs") {
    auto table = make_table();
    Machine m(table);
    StateId u = m.add_state(), v = m.add_state(), w = m.add_state();
    SymbolId x = table->intern("x"), y = table->intern("y");
    SymbolId o0 = table->intern("0"), o1 = table->intern("1");
    m.add_alpha(x);
    m.add_alpha(y);
    m.set_output(u, x, o0);
    m.set_output(v, x, o0);
    CHECK(compatible(m, u, v));
    m.set_output(w, x, o1);
    CHECK(!compatible(m, u, w));

    Machine n(table);
    StateId p = n.add_state(), q = n.add_state();
    n.add_alpha(x);
    n.add_alpha(y);
    n.set_output(p, x, o0);
    n.set_output(q, y, o1);
    CHECK(compatible(n, p, q));  // disjoint domains are vacuously fine
}

TEST_CASE("try_merge folds the toggle prefix tree") {
    auto table = make_table();
    SampleSet set = toggle_corpus(table);
    set.samples.resize(1);  // just <x,a,x,a,x>
    PrefixTreeTransducer ptt = build_ptt(set);
    REQUIRE(ptt.machine.num_states() == 3);

    // Root and the depth-2 state agree on x; the fold yields the toggle.
    auto merged = try_merge(ptt.machine, 0, 2);
    REQUIRE(merged.has_value());
    Machine toggle = toggle_machine(make_table());
    CHECK(isomorphic(*merged, toggle));

    // Root and the depth-1 state disagree (0 vs 1 on x).
    CHECK(!try_merge(ptt.machine, 0, 1).has_value());

    // Merging a state with itself is the identity.
    SampleSet tiny;
    tiny.symbols = table;
    tiny.alpha_alphabet = {table->intern("x")};
    tiny.samples.push_back({{table->intern("x")}, {table->intern("0")}});
    PrefixTreeTransducer single = build_ptt(tiny);
    auto same = try_merge(single.machine, 0, 0);
    REQUIRE(same.has_value());
    CHECK(isomorphic(*same, single.machine));
}

TEST_CASE("failed merges leave the machine untouched") {
    auto table = make_table();
    SampleSet set = toggle_corpus(table);
    PrefixTreeTransducer ptt = build_ptt(set);
    std::string before = ptt.machine.to_json();
    CHECK(!try_merge(ptt.machine, 0, 1).has_value());
    CHECK(ptt.machine.to_json() == before);
}

TEST_CASE("state_merging recovers the toggle machine") {
    auto table = make_table();
    InferenceResult res = infer_with_stats(toggle_corpus(table));
    CHECK(res.machine.num_states() == 2);
    CHECK(isomorphic(res.machine, toggle_machine(make_table())));

    // Cross-check against the exhaustive search.
    auto minimal = oracle::brute_force_minimal(toggle_corpus(table), 3);
    REQUIRE(minimal.has_value());
    CHECK(isomorphic(res.machine, *minimal));
}

TEST_CASE("state_merging collapses indistinguishable corpora to one state") {
    auto table = make_table();
    SampleSet set;
    set.symbols = table;
    SymbolId x = table->intern("x"), a = table->intern("a");
    SymbolId o0 = table->intern("0");
    set.alpha_alphabet = {x};
    set.beta_alphabet = {a};
    set.samples.push_back({{x, a, x, a, x}, {o0, kBetaDefault, o0, kBetaDefault, o0}});
    set.samples.push_back({{a, a, a, x}, {kBetaDefault, kBetaDefault, kBetaDefault, o0}});
    Machine m = infer(set);
    CHECK(m.num_states() == 1);
}

TEST_CASE("infer on an empty sample set gives a bare machine") {
    auto table = make_table();
    SampleSet set;
    set.symbols = table;
    Machine m = infer(set);
    CHECK(m.num_states() == 1);
    CHECK(m.alpha_alphabet().empty());
    CHECK(m.beta_alphabet().empty());
}

TEST_CASE("inference reproduces its training samples") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto table = make_table();
        Machine target = random_target(table, {.states = 4, .betas = 2, .alphas = 3, .seed = seed,
                                               .distinct_rows = false});
        SampleSet corpus = random_walk_corpus(target, 25, 10, seed);
        InferenceResult res = infer_with_stats(corpus);
        for (const auto& s : corpus.samples) {
            auto run = res.machine.try_run(s.inputs);
            REQUIRE(run.ok);
            std::size_t oi = 0;
            for (std::size_t i = 0; i < s.inputs.size(); ++i) {
                if (s.outputs[i] == kBetaDefault) continue;
                CHECK(run.outputs[oi++] == s.outputs[i]);
            }
        }
        // Termination accounting.
        CHECK(res.stats.promotions + res.stats.merge_successes <= res.stats.ptt_states);
        CHECK(res.stats.final_states <= res.stats.ptt_states);
    }
}

TEST_CASE("adding consistent samples never breaks old ones") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        auto table = make_table();
        Machine target = random_target(table, {.states = 3, .betas = 2, .alphas = 2, .seed = seed});
        SampleSet small = random_walk_corpus(target, 10, 8, seed);
        SampleSet big = random_walk_corpus(target, 30, 8, seed);
        big.samples.insert(big.samples.end(), small.samples.begin(), small.samples.end());
        Machine grown = infer(big);
        for (const auto& s : small.samples) {
            auto run = grown.try_run(s.inputs);
            REQUIRE(run.ok);
            std::size_t oi = 0;
            for (std::size_t i = 0; i < s.inputs.size(); ++i) {
                if (s.outputs[i] == kBetaDefault) continue;
                CHECK(run.outputs[oi++] == s.outputs[i]);
            }
        }
    }
}

TEST_CASE("structure-complete corpora yield the minimal machine") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto table = make_table();
        Machine target = random_target(table, {.states = 4, .betas = 2, .alphas = 3, .seed = seed});
        SampleSet corpus = structure_complete_corpus(target);
        REQUIRE(oracle::check_structure_complete(corpus, target).overall());
        Machine learned = infer(corpus);
        CHECK(learned.num_states() == target.num_states());
        CHECK(isomorphic(learned, target));
    }
}
