#include <doctest.h>

#include "dbmm/automaton.hpp"
#include "dbmm/errors.hpp"
#include "test_support.hpp"

using namespace dbmm;
using namespace dbmm::testing;

TEST_CASE("step_beta follows defined transitions and reports undefined ones") {
    auto table = make_table();
    Machine toggle = toggle_machine(table);
    SymbolId a = table->intern("a");

    CHECK(*toggle.step_beta(0, a) == 1);

    // Self-loop stays put.
    Machine loop(table);
    loop.add_state();
    loop.add_beta(a);
    loop.set_transition(0, a, 0);
    CHECK(*loop.step_beta(0, a) == 0);

    // A prefix tree only contains observed beta-prefixes.
    Machine ptt(table);
    ptt.add_state();
    SymbolId x = table->intern("x");
    ptt.add_alpha(x);
    ptt.add_beta(a);
    SymbolId b = table->intern("b");
    ptt.add_beta(b);
    ptt.set_output(0, x, table->intern("0"));
    CHECK(!ptt.step_beta(0, b).has_value());

    CHECK_THROWS_AS((void)toggle.step_beta(7, a), DataError);
    CHECK_THROWS_AS((void)toggle.step_beta(0, table->intern("unseen")), DataError);
}

TEST_CASE("output_alpha is a partial map") {
    auto table = make_table();
    // Two-state reward machine: sitting in the limegreen room pays 1 only
    // after the toilet was reached.
    Machine rm(table);
    StateId u0 = rm.add_state();
    StateId u1 = rm.add_state();
    rm.set_initial(u0);
    SymbolId toilet = table->intern(SymbolKey{{"toilet"}});
    rm.add_beta(toilet);
    rm.set_transition(u0, toilet, u1);
    rm.set_transition(u1, toilet, u1);
    SymbolId sit = table->intern_pair("limegreenroom", "sit");
    rm.add_alpha(sit);
    rm.set_output(u0, sit, table->intern("0"));
    rm.set_output(u1, sit, table->intern("1"));

    CHECK(table->key(*rm.output_alpha(u1, sit)).parts[0] == "1");
    CHECK(table->key(*rm.output_alpha(u0, sit)).parts[0] == "0");

    SymbolId other = table->intern_pair("corridor", "up");
    rm.add_alpha(other);
    CHECK(!rm.output_alpha(u0, other).has_value());
}

TEST_CASE("run alternates outputs and transitions") {
    auto table = make_table();
    Machine toggle = toggle_machine(table);
    SymbolId a = table->intern("a"), x = table->intern("x");
    SymbolId o0 = table->intern("0"), o1 = table->intern("1");

    CHECK(toggle.run({x, a, x, a, x}) == std::vector<SymbolId>{o0, o1, o0});
    CHECK(toggle.run({}).empty());

    // Beta-only input emits nothing.
    Machine loop(table);
    loop.add_state();
    loop.add_beta(a);
    loop.set_transition(0, a, 0);
    CHECK(loop.run({a, a, a, a, a}).empty());

    // Undefined mid-run reports the position.
    Machine partial(table);
    partial.add_state();
    partial.add_state();
    partial.add_beta(a);
    partial.add_alpha(x);
    partial.set_transition(0, a, 1);
    partial.set_output(0, x, o0);
    auto r = partial.try_run({x, a, x});
    CHECK(!r.ok);
    CHECK(r.fail_position == 2);
    CHECK_THROWS(partial.run({x, a, x}));
}

TEST_CASE("run composes over concatenation") {
    auto table = make_table();
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Machine m = random_target(table, {.states = 4, .betas = 2, .alphas = 2, .seed = seed,
                                          .distinct_rows = false});
        std::mt19937_64 rng(seed);
        std::vector<SymbolId> w1, w2;
        for (int i = 0; i < 8; ++i) {
            (rng() % 2 ? w1 : w2)
                .push_back(rng() % 2 ? m.alpha_alphabet()[rng() % m.alpha_alphabet().size()]
                                     : m.beta_alphabet()[rng() % m.beta_alphabet().size()]);
        }
        auto r1 = m.try_run(w1);
        REQUIRE(r1.ok);
        auto r2 = m.try_run_from(r1.final_state, w2);
        REQUIRE(r2.ok);
        std::vector<SymbolId> joined = w1;
        joined.insert(joined.end(), w2.begin(), w2.end());
        auto rj = m.try_run(joined);
        REQUIRE(rj.ok);
        std::vector<SymbolId> expected = r1.outputs;
        expected.insert(expected.end(), r2.outputs.begin(), r2.outputs.end());
        CHECK(rj.outputs == expected);
        CHECK(rj.final_state == r2.final_state);
    }
}

TEST_CASE("alpha inputs never change the beta-reached state") {
    auto table = make_table();
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Machine m = random_target(table, {.states = 4, .betas = 2, .alphas = 2, .seed = seed,
                                          .distinct_rows = false});
        std::mt19937_64 rng(seed ^ 77);
        std::vector<SymbolId> betas;
        for (int i = 0; i < 6; ++i)
            betas.push_back(m.beta_alphabet()[rng() % m.beta_alphabet().size()]);
        std::vector<SymbolId> interleaved;
        for (SymbolId b : betas) {
            while (rng() % 3 == 0)
                interleaved.push_back(m.alpha_alphabet()[rng() % m.alpha_alphabet().size()]);
            interleaved.push_back(b);
        }
        auto plain = m.try_run(betas);
        auto mixed = m.try_run(interleaved);
        REQUIRE(plain.ok);
        REQUIRE(mixed.ok);
        CHECK(plain.final_state == mixed.final_state);
    }
}

TEST_CASE("isomorphic recognizes renamings and rejects behavioral differences") {
    auto table = make_table();
    Machine toggle = toggle_machine(table);

    // Same machine with permuted state ids.
    Machine renamed(table);
    StateId r1 = renamed.add_state();
    StateId r0 = renamed.add_state();
    renamed.set_initial(r0);
    SymbolId a = table->intern("a"), x = table->intern("x");
    renamed.add_beta(a);
    renamed.add_alpha(x);
    renamed.set_transition(r0, a, r1);
    renamed.set_transition(r1, a, r0);
    renamed.set_output(r0, x, table->intern("0"));
    renamed.set_output(r1, x, table->intern("1"));
    CHECK(isomorphic(toggle, renamed));

    // One state versus two distinguishable states.
    Machine single(table);
    single.add_state();
    single.add_beta(a);
    single.add_alpha(x);
    single.set_transition(0, a, 0);
    single.set_output(0, x, table->intern("0"));
    CHECK(!isomorphic(toggle, single));

    // Swapped outputs change behavior: the distinguishing sequence is
    // <x> (0 vs 1 at the initial state).
    Machine swapped(table);
    swapped.add_state();
    swapped.add_state();
    swapped.set_initial(0);
    swapped.add_beta(a);
    swapped.add_alpha(x);
    swapped.set_transition(0, a, 1);
    swapped.set_transition(1, a, 0);
    swapped.set_output(0, x, table->intern("1"));
    swapped.set_output(1, x, table->intern("0"));
    CHECK(!isomorphic(toggle, swapped));
}

TEST_CASE("isomorphic is an equivalence relation on random machines") {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        auto table = make_table();
        Machine a = random_target(table, {.states = 4, .betas = 2, .alphas = 2, .seed = seed});
        CHECK(isomorphic(a, a));  // reflexive

        // A key-renamed copy in a fresh table stays isomorphic (symmetry
        // and transitivity across representations).
        auto table2 = make_table();
        Machine b = Machine::from_json(a.to_json(), table2);
        CHECK(isomorphic(a, b));
        CHECK(isomorphic(b, a));
        auto table3 = make_table();
        Machine c = Machine::from_json(b.to_json(), table3);
        CHECK(isomorphic(b, c));
        CHECK(isomorphic(a, c));
    }
}

TEST_CASE("JSON round trip preserves structure") {
    auto table = make_table();
    Machine toggle = toggle_machine(table);
    auto table2 = make_table();
    Machine back = Machine::from_json(toggle.to_json(), table2);
    CHECK(isomorphic(toggle, back));
    CHECK(back.to_json() == Machine::from_json(back.to_json(), make_table()).to_json());
}

TEST_CASE("validate rejects overlapping alphabets") {
    auto table = make_table();
    Machine m(table);
    m.add_state();
    SymbolId s = table->intern("both");
    m.add_alpha(s);
    m.add_beta(s);
    CHECK_THROWS_AS(m.validate(), DataError);
}

TEST_CASE("DOT export names edges and emissions") {
    auto table = make_table();
    Machine toggle = toggle_machine(table);
    std::string dot = toggle.to_dot("toggle");
    CHECK(dot.find("digraph toggle") != std::string::npos);
    CHECK(dot.find("x / 0") != std::string::npos);
    CHECK(dot.find("label=\"a\"") != std::string::npos);
}
