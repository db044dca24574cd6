// Command-line front end: generate environments and traces, infer
// transition/reward machines, verify them against an environment, train
// a tabular Q-learning agent on the augmented state, and export DOT.
//
// Exit codes: 0 ok, 2 data error, 3 verification failure, 4 internal.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dbmm/envs.hpp"
#include "dbmm/errors.hpp"
#include "dbmm/oracle.hpp"
#include "dbmm/pipeline.hpp"
#include "dbmm/qlearning.hpp"
#include "dbmm/supplement.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dbmm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 2;
constexpr int kExitVerification = 3;
constexpr int kExitInternal = 4;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError("cannot write file: " + path);
        out << content;
    }
    fs::rename(tmp, target);
}

// Values from --config are applied to every option the command line left
// untouched; unknown keys are rejected.
void apply_config(CLI::App* cmd, const json& section) {
    for (const auto& [key, value] : section.items()) {
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (!opt) throw DataError("unknown config key '" + key + "' for command " + cmd->get_name());
        if (opt->count() > 0) continue;  // command line wins
        std::vector<std::string> args;
        if (value.is_array())
            for (const auto& v : value) args.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        else
            args.push_back(value.is_string() ? value.get<std::string>() : value.dump());
        opt->add_result(args);
        opt->run_callback();
    }
}

std::set<SymbolId> parse_trivial_betas(const std::vector<std::string>& specs,
                                       const SymbolTablePtr& table) {
    std::set<SymbolId> out;
    if (specs.empty()) {
        out.insert(table->intern(SymbolKey{}));  // the empty label set
        return out;
    }
    for (const auto& text : specs) {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error&) {
            throw DataError("--trivial-beta expects a JSON array of propositions, got: " + text);
        }
        if (!j.is_array()) throw DataError("--trivial-beta expects a JSON array, got: " + text);
        std::vector<std::string> props;
        for (const auto& p : j) props.push_back(p.get<std::string>());
        std::sort(props.begin(), props.end());
        props.erase(std::unique(props.begin(), props.end()), props.end());
        out.insert(table->intern(SymbolKey{std::move(props)}));
    }
    return out;
}

struct MachineFile {
    Machine machine;
    bool alpha_augmented = false;
};

MachineFile load_machine(const std::string& path, const SymbolTablePtr& table) {
    MachineFile out{Machine::from_json(read_file(path), table), false};
    json j = json::parse(read_file(path));
    if (j.contains("alpha_augmented")) out.alpha_augmented = j["alpha_augmented"].get<bool>();
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Inference of transition and reward machines from traces of deterministic "
                 "partially observable environments, with downstream Q-learning"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; command-line flags override it");

    // --- gen-env ---
    auto* gen_env = app.add_subcommand("gen-env", "Generate an environment spec file");
    std::string ge_type = "fig1", ge_out = "env.json";
    int ge_size = 3, ge_phases = 3;
    RandomEnvParams ge_params;
    std::uint64_t ge_seed = 1;
    gen_env->add_option("--type", ge_type, "fig1, phase or random")
        ->check(CLI::IsMember({"fig1", "phase", "random"}));
    gen_env->add_option("--out", ge_out, "output path");
    gen_env->add_option("--size", ge_size, "grid size (phase)");
    gen_env->add_option("--phases", ge_phases, "task phases (phase)");
    gen_env->add_option("--grid", ge_params.grid, "grid size (random)");
    gen_env->add_option("--tm-states", ge_params.tm_states, "ground-truth TM states (random)");
    gen_env->add_option("--rm-states", ge_params.rm_states, "ground-truth RM states (random)");
    gen_env->add_option("--labels", ge_params.labels, "distinct labels (random)");
    gen_env->add_option("--cells-per-label", ge_params.cells_per_label,
                        "placements per label on odd cells (random)");
    gen_env->add_option("--extra-edge-prob", ge_params.extra_edge_prob,
                        "extra TM transition probability (random)");
    gen_env->add_option("--impassable-frac", ge_params.impassable_frac,
                        "fraction of labeled cells blocked per TM state (random)");
    gen_env->add_option("--gamma", ge_params.gamma, "discount factor");
    gen_env->add_option("--seed", ge_seed, "generator seed");

    // --- gen-traces ---
    auto* gen_tr = app.add_subcommand("gen-traces", "Generate a random-agent trace corpus");
    std::string gt_env, gt_out = "traces.jsonl";
    int gt_n = 100, gt_max_len = 100, gt_jobs = 1;
    std::uint64_t gt_seed = 1;
    gen_tr->add_option("--env", gt_env, "environment spec file");
    gen_tr->add_option("--n", gt_n, "number of episodes");
    gen_tr->add_option("--max-len", gt_max_len, "episode step cap");
    gen_tr->add_option("--seed", gt_seed, "corpus seed");
    gen_tr->add_option("--jobs", gt_jobs, "worker threads (result is identical for any value)");
    gen_tr->add_option("--out", gt_out, "output path");

    // --- infer ---
    auto* infer_cmd = app.add_subcommand("infer", "Infer machines from a trace corpus");
    std::string in_traces, in_out = "out";
    std::vector<std::string> in_trivial;
    bool in_no_supplement = false, in_no_alpha = false, in_no_beta = false;
    infer_cmd->add_option("--traces", in_traces, "trace corpus (JSONL)");
    infer_cmd->add_option("--out", in_out, "output directory");
    infer_cmd->add_option("--trivial-beta", in_trivial,
                          "trivial label set as a JSON array, repeatable (default: [])");
    infer_cmd->add_flag("--no-supplement", in_no_supplement, "skip the observation supplement");
    infer_cmd->add_flag("--no-alpha-removal", in_no_alpha, "skip redundant alpha-input removal");
    infer_cmd->add_flag("--no-beta-removal", in_no_beta, "skip trivial beta-input removal");

    // --- verify ---
    auto* verify_cmd = app.add_subcommand("verify", "Check machines against an environment");
    std::string vf_env, vf_tm, vf_rm, vf_out;
    int vf_depth = 12;
    verify_cmd->add_option("--env", vf_env, "environment spec file");
    verify_cmd->add_option("--tm", vf_tm, "transition machine JSON");
    verify_cmd->add_option("--rm", vf_rm, "reward machine JSON");
    verify_cmd->add_option("--depth", vf_depth, "history depth");
    verify_cmd->add_option("--out", vf_out, "report output path");

    // --- train ---
    auto* train_cmd = app.add_subcommand("train", "Tabular Q-learning over (obs, u, q)");
    std::string tr_env, tr_tm, tr_rm, tr_out = "out";
    QLearningConfig tr_cfg;
    int tr_eval_episodes = 5;
    train_cmd->add_option("--env", tr_env, "environment spec file");
    train_cmd->add_option("--tm", tr_tm, "transition machine JSON");
    train_cmd->add_option("--rm", tr_rm, "reward machine JSON");
    train_cmd->add_option("--out", tr_out, "output directory");
    train_cmd->add_option("--alpha", tr_cfg.learning_rate, "learning rate");
    train_cmd->add_option("--gamma", tr_cfg.discount, "discount factor");
    train_cmd->add_option("--epsilon", tr_cfg.epsilon, "initial exploration rate");
    train_cmd->add_option("--epsilon-decay", tr_cfg.epsilon_decay, "per-episode decay factor");
    train_cmd->add_option("--epsilon-floor", tr_cfg.epsilon_floor, "exploration floor");
    train_cmd->add_option("--episodes", tr_cfg.episodes, "training episodes");
    train_cmd->add_option("--max-steps", tr_cfg.max_steps, "step cap per episode");
    train_cmd->add_option("--eval-episodes", tr_eval_episodes, "greedy evaluation episodes");
    train_cmd->add_option("--seed", tr_cfg.seed, "training seed");

    // --- export-dot ---
    auto* dot_cmd = app.add_subcommand("export-dot", "Render a machine JSON as DOT");
    std::string dt_machine, dt_out = "machine.dot";
    dot_cmd->add_option("--machine", dt_machine, "machine JSON file");
    dot_cmd->add_option("--out", dt_out, "output path");

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            return app.exit(e) == 0 ? kExitOk : kExitData;
        }
        if (!config_path.empty()) {
            json config = json::parse(read_file(config_path));
            for (const auto& [section, values] : config.items()) {
                CLI::App* cmd = app.get_subcommand_no_throw(section);
                if (!cmd) throw DataError("unknown config section: " + section);
                if (!values.is_object()) throw DataError("config section must be an object: " + section);
                if (cmd->parsed()) apply_config(cmd, values);
            }
        }

        auto require = [](const std::string& value, const char* flag) {
            if (value.empty()) throw DataError(std::string("missing required option ") + flag);
        };
        auto table = std::make_shared<SymbolTable>();

        if (app.got_subcommand(gen_env)) {
            json out;
            if (ge_type == "fig1") {
                out = json::parse(build_fig1_env(table).to_json());
            } else if (ge_type == "phase") {
                out = json::parse(build_phase_grid(table, ge_size, ge_phases, ge_seed).to_json());
            } else {
                ge_params.seed = ge_seed;
                auto [env, spec] = generate_random_env(table, ge_params);
                out = json::parse(env.to_json());
                out["ground_truth"] = json::parse(spec.to_json());
            }
            write_file_atomic(ge_out, out.dump(2) + "\n");
            std::cout << "wrote " << ge_out << "\n";
        } else if (app.got_subcommand(gen_tr)) {
            require(gt_env, "--env");
            DetPomdp env = DetPomdp::from_json(read_file(gt_env), table);
            auto traces = generate_traces(env, Policy::Random, gt_n, gt_max_len, gt_seed, gt_jobs);
            write_file_atomic(gt_out, traces_to_jsonl(traces, *table));
            double mean = 0;
            for (const auto& t : traces) mean += static_cast<double>(t.steps.size());
            if (!traces.empty()) mean /= static_cast<double>(traces.size());
            std::cout << "wrote " << gt_out << " (" << traces.size() << " traces, mean length "
                      << mean << ")\n";
        } else if (app.got_subcommand(infer_cmd)) {
            require(in_traces, "--traces");
            auto traces = read_traces(in_traces, table);
            PipelineOptions options;
            options.trivial_betas = parse_trivial_betas(in_trivial, table);
            options.use_supplement = !in_no_supplement;
            options.use_alpha_removal = !in_no_alpha;
            options.use_beta_removal = !in_no_beta;
            PipelineResult result = infer_machines(traces, table, options);

            json tm_json = json::parse(result.tm.machine.to_json());
            write_file_atomic((fs::path(in_out) / "tm.json").string(), tm_json.dump(2) + "\n");
            json rm_json = json::parse(result.rm.machine.to_json());
            rm_json["alpha_augmented"] = result.rm.alpha_augmented;
            write_file_atomic((fs::path(in_out) / "rm.json").string(), rm_json.dump(2) + "\n");
            write_file_atomic((fs::path(in_out) / "manifest.json").string(),
                              result.manifest_json + "\n");
            std::cout << "tm states: " << result.tm.machine.num_states()
                      << "\nrm states: " << result.rm.machine.num_states() << "\nwrote " << in_out
                      << "/{tm,rm,manifest}.json\n";
        } else if (app.got_subcommand(verify_cmd)) {
            if (vf_tm.empty() && vf_rm.empty())
                throw DataError("verify needs --tm and/or --rm");
            require(vf_env, "--env");
            DetPomdp env = DetPomdp::from_json(read_file(vf_env), table);
            json report;
            bool ok = true;
            std::optional<TransitionMachine> tm;
            if (!vf_tm.empty()) {
                tm = TransitionMachine{load_machine(vf_tm, table).machine};
                auto r = oracle::check_resolvent(tm->machine, oracle::MachineKind::Tm, env, vf_depth);
                report["tm"] = json::parse(r.to_json());
                ok = ok && r.ok;
            }
            if (!vf_rm.empty()) {
                MachineFile rm = load_machine(vf_rm, table);
                if (rm.alpha_augmented && !tm)
                    throw DataError("this reward machine was inferred over supplemented "
                                    "observations; pass the matching --tm");
                auto r = oracle::check_resolvent(rm.machine, oracle::MachineKind::Rm, env, vf_depth,
                                                 rm.alpha_augmented ? &*tm : nullptr);
                report["rm"] = json::parse(r.to_json());
                ok = ok && r.ok;
            }
            report["ok"] = ok;
            std::string text = report.dump(2) + "\n";
            if (!vf_out.empty()) write_file_atomic(vf_out, text);
            std::cout << text;
            return ok ? kExitOk : kExitVerification;
        } else if (app.got_subcommand(train_cmd)) {
            require(tr_env, "--env");
            require(tr_tm, "--tm");
            require(tr_rm, "--rm");
            DetPomdp env = DetPomdp::from_json(read_file(tr_env), table);
            TransitionMachine tm{load_machine(tr_tm, table).machine};
            RewardMachine rm{load_machine(tr_rm, table).machine};
            TrainResult result = train(env, tm, rm, tr_cfg);
            double mean_return =
                evaluate_greedy(env, tm, rm, result, tr_eval_episodes, tr_cfg.max_steps);
            write_file_atomic((fs::path(tr_out) / "curve.csv").string(), result.curve_csv());
            write_file_atomic((fs::path(tr_out) / "qtable.json").string(),
                              result.qtable_json(*table, env.actions) + "\n");
            json summary{{"episodes", tr_cfg.episodes},
                         {"augmented_states", result.states.size()},
                         {"markov_violations", result.markov_violations},
                         {"transitions_observed", result.transitions_observed},
                         {"greedy_return", mean_return}};
            write_file_atomic((fs::path(tr_out) / "train_summary.json").string(),
                              summary.dump(2) + "\n");
            std::cout << summary.dump(2) << "\n";
        } else if (app.got_subcommand(dot_cmd)) {
            require(dt_machine, "--machine");
            MachineFile m = load_machine(dt_machine, table);
            write_file_atomic(dt_out, m.machine.to_dot());
            std::cout << "wrote " << dt_out << "\n";
        }
        return kExitOk;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}
