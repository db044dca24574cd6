#include <doctest.h>

#include <sstream>

#include "dbmm/errors.hpp"
#include "dbmm/traces.hpp"
#include "test_support.hpp"

using namespace dbmm;
using namespace dbmm::testing;

namespace {

std::string step_line(const std::string& label, const std::string& obs, const std::string& action,
                      const std::string& reward) {
    return "{\"label\": " + label + ", \"obs\": \"" + obs + "\", \"action\": \"" + action +
           "\", \"reward\": " + reward + "}";
}

}  // namespace

TEST_CASE("parse_traces reads one trace per line") {
    auto table = make_table();
    std::ostringstream os;
    for (int i = 0; i < 275; ++i)
        os << "{\"steps\": [" << step_line("[]", "corridor", "up", "0") << "]}\n";
    auto traces = parse_traces(os.str(), table);
    CHECK(traces.size() == 275);

    CHECK(parse_traces("", table).empty());
}

TEST_CASE("parse_traces reports schema violations with line numbers") {
    auto table = make_table();
    std::string good = "{\"steps\": [" + step_line("[]", "corridor", "up", "0") + "]}\n";
    std::string bad = "{\"steps\": [{\"label\": [], \"obs\": \"corridor\", \"action\": \"up\"}]}\n";
    try {
        parse_traces(good + bad, table);
        FAIL("expected a schema violation");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        CHECK(std::string(e.what()).find("reward") != std::string::npos);
    }
}

TEST_CASE("labels canonicalize to sorted unique propositions") {
    auto table = make_table();
    std::string line = "{\"steps\": [" + step_line("[\"key\", \"door\", \"key\"]", "o", "up", "1") +
                       "]}\n";
    auto traces = parse_traces(line, table);
    const SymbolKey& k = table->key(traces[0].steps[0].label);
    CHECK(k.parts == std::vector<std::string>{"door", "key"});
}

TEST_CASE("rewards normalize to canonical decimals") {
    auto table = make_table();
    std::string text = "{\"steps\": [" + step_line("[]", "o", "up", "\"1.50\"") + "," +
                       step_line("[]", "o", "up", "-0") + "," +
                       step_line("[]", "o", "up", "\"2e2\"") + "]}\n";
    auto traces = parse_traces(text, table);
    CHECK(table->key(traces[0].steps[0].reward).parts[0] == "1.5");
    CHECK(table->key(traces[0].steps[1].reward).parts[0] == "0");
    CHECK(table->key(traces[0].steps[2].reward).parts[0] == "200");
}

TEST_CASE("to_tm_samples truncates to known successors") {
    auto table = make_table();
    // Two steps staying in the corridor.
    std::string text = "{\"steps\": [" + step_line("[]", "corridor", "up", "0") + "," +
                       step_line("[]", "corridor", "sit", "0") + "]}\n";
    auto traces = parse_traces(text, table);
    SampleSet set = to_tm_samples(traces, table);
    REQUIRE(set.samples.size() == 1);
    const Sample& s = set.samples[0];
    // The known-successor pair plus its label as a trailing beta-input.
    REQUIRE(s.inputs.size() == 2);
    CHECK(table->key(s.inputs[0]).parts == std::vector<std::string>{"corridor", "up"});
    CHECK(table->key(s.outputs[0]).parts == std::vector<std::string>{"corridor"});
    CHECK(table->key(s.inputs[1]).parts.empty());
    CHECK(s.outputs[1] == kBetaDefault);

    // Single-step traces have no known successor observation.
    auto single = parse_traces("{\"steps\": [" + step_line("[]", "corridor", "sit", "0") + "]}\n",
                               table);
    CHECK_THROWS_AS(to_tm_samples(single, table), DataError);
}

TEST_CASE("to_tm_samples keeps history-dependent successors") {
    auto table = make_table();
    std::string text = "{\"steps\": [" + step_line("[\"key\"]", "orangeroom", "down", "0") + "," +
                       step_line("[]", "corridor", "up", "0") + "," +
                       step_line("[]", "cyanroom", "down", "0") + "]}\n";
    auto traces = parse_traces(text, table);
    SampleSet set = to_rm_samples(traces, table);
    (void)set;
    SampleSet tm = to_tm_samples(traces, table);
    const Sample& s = tm.samples[0];
    // inputs: (orangeroom,down) {key} (corridor,up) []; outputs: corridor _ cyanroom _
    REQUIRE(s.inputs.size() == 4);
    CHECK(table->key(s.inputs[1]).parts == std::vector<std::string>{"key"});
    CHECK(table->key(s.outputs[2]).parts == std::vector<std::string>{"cyanroom"});
}

TEST_CASE("to_rm_samples covers every step") {
    auto table = make_table();
    // Episode that sits on the sofa after the toilet: final reward 1.
    std::string text = "{\"steps\": [" + step_line("[]", "corridor", "up", "0") + "," +
                       step_line("[\"toilet\"]", "cyanroom", "down", "0") + "," +
                       step_line("[]", "corridor", "right", "0") + "," +
                       step_line("[\"sofa\"]", "limegreenroom", "sit", "1") + "]}\n";
    auto traces = parse_traces(text, table);
    SampleSet set = to_rm_samples(traces, table);
    const Sample& s = set.samples[0];
    REQUIRE(s.inputs.size() == 7);  // 4 alpha + 3 beta
    std::vector<std::string> alpha_outputs;
    for (std::size_t i = 0; i < s.inputs.size(); ++i)
        if (s.outputs[i] != kBetaDefault)
            alpha_outputs.push_back(table->key(s.outputs[i]).parts[0]);
    CHECK(alpha_outputs == std::vector<std::string>{"0", "0", "0", "1"});

    // Premature sit: all outputs zero.
    std::string premature = "{\"steps\": [" + step_line("[]", "corridor", "right", "0") + "," +
                            step_line("[\"sofa\"]", "limegreenroom", "sit", "0") + "]}\n";
    auto t2 = parse_traces(premature, table);
    SampleSet set2 = to_rm_samples(t2, table);
    for (std::size_t i = 0; i < set2.samples[0].outputs.size(); ++i)
        if (set2.samples[0].outputs[i] != kBetaDefault)
            CHECK(table->key(set2.samples[0].outputs[i]).parts[0] == "0");

    // Single-step trace keeps its one reward.
    auto t3 = parse_traces("{\"steps\": [" + step_line("[]", "corridor", "sit", "0") + "]}\n", table);
    SampleSet set3 = to_rm_samples(t3, table);
    REQUIRE(set3.samples[0].inputs.size() == 1);
    CHECK(table->key(set3.samples[0].outputs[0]).parts[0] == "0");
}

TEST_CASE("sample layouts line up between TM and RM conversions") {
    auto table = make_table();
    std::ostringstream os;
    std::mt19937_64 rng(3);
    for (int t = 0; t < 10; ++t) {
        os << "{\"steps\": [";
        int len = 2 + static_cast<int>(rng() % 6);
        for (int i = 0; i < len; ++i) {
            if (i) os << ",";
            os << step_line(rng() % 2 ? "[\"e\"]" : "[]", "o" + std::to_string(rng() % 3),
                            "a" + std::to_string(rng() % 2), std::to_string(rng() % 2));
        }
        os << "]}\n";
    }
    auto traces = parse_traces(os.str(), table);
    SampleSet tm = to_tm_samples(traces, table);
    SampleSet rm = to_rm_samples(traces, table);
    for (std::size_t i = 0; i < traces.size(); ++i) {
        std::size_t len = traces[i].steps.size();
        std::size_t tm_alpha = 0, rm_alpha = 0;
        for (std::size_t j = 0; j < tm.samples[i].inputs.size(); ++j)
            tm_alpha += tm.samples[i].outputs[j] != kBetaDefault;
        for (std::size_t j = 0; j < rm.samples[i].inputs.size(); ++j)
            rm_alpha += rm.samples[i].outputs[j] != kBetaDefault;
        CHECK(tm_alpha == len - 1);
        CHECK(rm_alpha == len);
        // The TM input sequence is a prefix of the RM input sequence.
        REQUIRE(tm.samples[i].inputs.size() <= rm.samples[i].inputs.size());
        for (std::size_t j = 0; j < tm.samples[i].inputs.size(); ++j)
            CHECK(tm.samples[i].inputs[j] == rm.samples[i].inputs[j]);
    }
}

TEST_CASE("trace JSONL round trip is exact") {
    auto table = make_table();
    std::string text = "{\"steps\": [" + step_line("[\"key\"]", "orangeroom", "down", "0") + "," +
                       step_line("[]", "corridor", "up", "0") + "]}\n";
    auto traces = parse_traces(text, table);
    std::string dumped = traces_to_jsonl(traces, *table);
    auto again = parse_traces(dumped, table);
    CHECK(traces_to_jsonl(again, *table) == dumped);
}
