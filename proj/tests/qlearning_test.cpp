#include <doctest.h>

#include <cmath>

#include "dbmm/envs.hpp"
#include "dbmm/errors.hpp"
#include "dbmm/oracle.hpp"
#include "dbmm/pipeline.hpp"
#include "dbmm/qlearning.hpp"
#include "test_support.hpp"

using namespace dbmm;
using namespace dbmm::testing;

namespace {

PipelineResult fig1_machines(const SymbolTablePtr& table, const DetPomdp& env) {
    auto traces = generate_traces(env, Policy::Random, 400, 40, 21);
    PipelineOptions opt;
    opt.trivial_betas = {table->intern(SymbolKey{})};
    return infer_machines(traces, table, opt);
}

}  // namespace

TEST_CASE("zero episodes leave the table empty") {
    auto table = make_table();
    DetPomdp env = build_fig1_env(table);
    PipelineResult machines = fig1_machines(table, env);
    QLearningConfig cfg;
    cfg.episodes = 0;
    TrainResult r = train(env, machines.tm, machines.rm, cfg);
    CHECK(r.episode_returns.empty());
    CHECK(r.states.empty());
    CHECK(evaluate_greedy(env, machines.tm, machines.rm, r, 0, 10) == 0.0);
}

TEST_CASE("config validation") {
    QLearningConfig cfg;
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), DataError);
    cfg = {};
    cfg.epsilon_floor = 0.9;
    CHECK_THROWS_AS(cfg.validate(), DataError);
    cfg = {};
    cfg.max_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), DataError);
}

TEST_CASE("training on the four-area task reaches the optimum and stays Markovian") {
    auto table = make_table();
    DetPomdp env = build_fig1_env(table);
    PipelineResult machines = fig1_machines(table, env);

    QLearningConfig cfg;
    cfg.max_steps = 150;
    cfg.seed = 3;
    TrainResult r = train(env, machines.tm, machines.rm, cfg);
    CHECK(r.episode_returns.size() == 1500);
    CHECK(r.markov_violations == 0);
    CHECK(r.transitions_observed > 5000);
    for (const auto& row : r.q)
        for (double v : row) CHECK(std::isfinite(v));

    double got = evaluate_greedy(env, machines.tm, machines.rm, r, 3, 150);
    double want = oracle::optimal_undiscounted_return(env, 150);
    CHECK(got == doctest::Approx(want));
    CHECK(want == doctest::Approx(1.0));
}

TEST_CASE("training is reproducible for a fixed seed") {
    auto table = make_table();
    DetPomdp env = build_fig1_env(table);
    PipelineResult machines = fig1_machines(table, env);

    QLearningConfig cfg;
    cfg.episodes = 120;
    cfg.max_steps = 40;
    cfg.seed = 11;
    TrainResult a = train(env, machines.tm, machines.rm, cfg);
    TrainResult b = train(env, machines.tm, machines.rm, cfg);
    CHECK(a.episode_returns == b.episode_returns);
    CHECK(a.states.size() == b.states.size());
    cfg.seed = 12;
    TrainResult c = train(env, machines.tm, machines.rm, cfg);
    bool differs = a.episode_returns != c.episode_returns || a.states != c.states;
    CHECK(differs);
}

TEST_CASE("learning curve CSV carries a moving average") {
    auto table = make_table();
    DetPomdp env = build_fig1_env(table);
    PipelineResult machines = fig1_machines(table, env);
    QLearningConfig cfg;
    cfg.episodes = 30;
    cfg.max_steps = 40;
    TrainResult r = train(env, machines.tm, machines.rm, cfg);
    std::string csv = r.curve_csv(10);
    CHECK(csv.find("episode,total_reward,moving_avg") == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 31);
}
