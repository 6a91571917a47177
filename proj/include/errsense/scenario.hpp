#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "errsense/json_io.hpp"
#include "errsense/robot_sim.hpp"

namespace errsense {

/// Scenario file rejected; code tells schema violations apart from anchors
/// pointing at actions that don't exist, and pointer() names the offending
/// JSON location.
class ScenarioError : public std::runtime_error {
public:
    enum class Code { Schema, DanglingAnchor };

    ScenarioError(Code code, std::string pointer, const std::string& what)
        : std::runtime_error(what + " (at " + pointer + ")"),
          code_(code),
          pointer_(std::move(pointer)) {}

    Code code() const { return code_; }
    const std::string& pointer() const { return pointer_; }

private:
    Code code_;
    std::string pointer_;
};

enum class ErrorKind { Physical, Conceptual };

inline const char* to_string(ErrorKind k) {
    return k == ErrorKind::Physical ? "physical" : "conceptual";
}

struct InjectedError {
    std::string error_id;
    ErrorKind kind = ErrorKind::Physical;
    std::string action_id;  // anchor: the scripted action that realizes it
};

struct AuReactionSpec {
    Duration latency_millis = 1500;
    Duration duration_millis = 4000;
    double magnitude = 2.0;
    Duration latency_jitter_millis = 0;
};

struct SpeechReactionSpec {
    Duration latency_millis = 1500;
    std::string text;
    double probability = 0.0;
    Duration latency_jitter_millis = 0;
};

struct ExplicitReportSpec {
    Duration latency_millis = 5000;
    std::string text;
    double probability = 0.0;
    Duration latency_jitter_millis = 0;
};

enum class QueryPolicy { Truthful, AlwaysFine, Silent };

struct HumanModel {
    AuReactionSpec au_reaction;
    SpeechReactionSpec speech_reaction;
    ExplicitReportSpec explicit_report;
    QueryPolicy query_response_policy = QueryPolicy::Truthful;
    Duration query_response_latency_millis = 1000;
    std::map<std::string, bool> perceives_error;  // error id -> noticed at all

    bool perceives(const std::string& error_id) const {
        auto it = perceives_error.find(error_id);
        return it == perceives_error.end() ? true : it->second;
    }
};

struct NoiseModel {
    double spontaneous_au_burst_rate = 0.0;  // bursts per minute
    double burst_magnitude = 0.0;
    Duration burst_duration_millis = 0;
    double distractor_utterance_rate = 0.0;  // utterances per minute
    std::vector<std::string> distractor_texts;
};

struct Scenario {
    std::string task_name;
    ActionScript script;
    std::vector<InjectedError> errors;
    HumanModel human;
    NoiseModel noise;
    std::uint64_t seed = 0;
};

namespace detail {

inline const json* walk(const json& j, const std::string& key) {
    if (!j.is_object()) return nullptr;
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

struct FieldReader {
    const json& node;
    std::string base;  // pointer prefix for error messages

    const json& require(const char* key) const {
        const json* v = walk(node, key);
        if (!v)
            throw ScenarioError(ScenarioError::Code::Schema, base + "/" + key, "missing field");
        return *v;
    }

    template <typename T>
    T get(const char* key) const {
        try {
            return require(key).get<T>();
        } catch (const json::exception&) {
            throw ScenarioError(ScenarioError::Code::Schema, base + "/" + key, "wrong type");
        }
    }

    template <typename T>
    T get_or(const char* key, T fallback) const {
        const json* v = walk(node, key);
        if (!v) return fallback;
        try {
            return v->get<T>();
        } catch (const json::exception&) {
            throw ScenarioError(ScenarioError::Code::Schema, base + "/" + key, "wrong type");
        }
    }

    double probability(const char* key, double fallback) const {
        double p = get_or<double>(key, fallback);
        if (p < 0.0 || p > 1.0)
            throw ScenarioError(ScenarioError::Code::Schema, base + "/" + key,
                                "probability outside [0,1]");
        return p;
    }

    Duration non_negative(const char* key, Duration fallback) const {
        Duration d = get_or<Duration>(key, fallback);
        if (d < 0)
            throw ScenarioError(ScenarioError::Code::Schema, base + "/" + key,
                                "negative duration");
        return d;
    }
};

}  // namespace detail

inline Scenario parse_scenario(const json& j) {
    using detail::FieldReader;
    FieldReader top{j, ""};
    if (top.get<int>("schema") != 1)
        throw ScenarioError(ScenarioError::Code::Schema, "/schema", "unsupported schema version");

    Scenario sc;
    sc.task_name = top.get<std::string>("task");
    sc.seed = top.get_or<std::uint64_t>("seed", 0);

    const json& actions = top.require("actions");
    if (!actions.is_array() || actions.empty())
        throw ScenarioError(ScenarioError::Code::Schema, "/actions", "need a non-empty array");
    for (std::size_t i = 0; i < actions.size(); ++i) {
        const std::string base = "/actions/" + std::to_string(i);
        FieldReader ar{actions[i], base};
        RobotAction a;
        a.id = ar.get<std::string>("id");
        a.start = Timestamp{ar.get<std::int64_t>("start")};
        a.duration_millis = ar.get<Duration>("duration_millis");
        a.moving = ar.get_or<bool>("moving", true);
        if (const json* prof = detail::walk(actions[i], "gripper_profile")) {
            if (!prof->is_array())
                throw ScenarioError(ScenarioError::Code::Schema, base + "/gripper_profile",
                                    "need an array of [offset, state] pairs");
            for (std::size_t g = 0; g < prof->size(); ++g) {
                const json& step = (*prof)[g];
                const std::string gp = base + "/gripper_profile/" + std::to_string(g);
                if (!step.is_array() || step.size() != 2 || !step[0].is_number() ||
                    !step[1].is_string())
                    throw ScenarioError(ScenarioError::Code::Schema, gp,
                                        "need an [offset, state] pair");
                try {
                    a.gripper_profile.push_back(
                        {step[0].get<Duration>(), gripper_from_string(step[1].get<std::string>())});
                } catch (const TraceFormatError& e) {
                    throw ScenarioError(ScenarioError::Code::Schema, gp, e.what());
                }
            }
        }
        if (const json* err = detail::walk(actions[i], "is_error"))
            a.is_error = err->get<std::string>();
        sc.script.actions.push_back(std::move(a));
    }
    try {
        sc.script.validate();
    } catch (const ScriptError& e) {
        throw ScenarioError(ScenarioError::Code::Schema, "/actions", e.what());
    }

    const json& errors = top.require("errors");
    if (!errors.is_array())
        throw ScenarioError(ScenarioError::Code::Schema, "/errors", "need an array");
    std::set<std::string> seen_ids;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        const std::string base = "/errors/" + std::to_string(i);
        FieldReader er{errors[i], base};
        InjectedError e;
        e.error_id = er.get<std::string>("error_id");
        const std::string kind = er.get<std::string>("kind");
        if (kind == "physical") e.kind = ErrorKind::Physical;
        else if (kind == "conceptual") e.kind = ErrorKind::Conceptual;
        else throw ScenarioError(ScenarioError::Code::Schema, base + "/kind", "unknown error kind");
        e.action_id = er.get<std::string>("action_id");

        if (!seen_ids.insert(e.error_id).second)
            throw ScenarioError(ScenarioError::Code::Schema, base + "/error_id",
                                "duplicate error id");
        const RobotAction* anchor = sc.script.find(e.action_id);
        if (!anchor)
            throw ScenarioError(ScenarioError::Code::DanglingAnchor, base + "/action_id",
                                "no action named " + e.action_id);
        if (!anchor->is_error || *anchor->is_error != e.error_id)
            throw ScenarioError(ScenarioError::Code::Schema, base + "/action_id",
                                "anchor action does not carry is_error=" + e.error_id);
        sc.errors.push_back(std::move(e));
    }

    const json& human = top.require("human");
    FieldReader hr{human, "/human"};
    if (const json* au = detail::walk(human, "au_reaction")) {
        FieldReader r{*au, "/human/au_reaction"};
        sc.human.au_reaction.latency_millis = r.non_negative("latency_millis", 1500);
        sc.human.au_reaction.duration_millis = r.non_negative("duration_millis", 4000);
        sc.human.au_reaction.magnitude = r.get_or<double>("magnitude", 2.0);
        sc.human.au_reaction.latency_jitter_millis = r.non_negative("latency_jitter_millis", 0);
    }
    if (const json* sp = detail::walk(human, "speech_reaction")) {
        FieldReader r{*sp, "/human/speech_reaction"};
        sc.human.speech_reaction.latency_millis = r.non_negative("latency_millis", 1500);
        sc.human.speech_reaction.text = r.get_or<std::string>("text", "");
        sc.human.speech_reaction.probability = r.probability("probability", 0.0);
        sc.human.speech_reaction.latency_jitter_millis = r.non_negative("latency_jitter_millis", 0);
    }
    if (const json* rep = detail::walk(human, "explicit_report")) {
        FieldReader r{*rep, "/human/explicit_report"};
        sc.human.explicit_report.latency_millis = r.non_negative("latency_millis", 5000);
        sc.human.explicit_report.text = r.get_or<std::string>("text", "");
        sc.human.explicit_report.probability = r.probability("probability", 0.0);
        sc.human.explicit_report.latency_jitter_millis = r.non_negative("latency_jitter_millis", 0);
    }
    const std::string policy = hr.get_or<std::string>("query_response_policy", "truthful");
    if (policy == "truthful") sc.human.query_response_policy = QueryPolicy::Truthful;
    else if (policy == "always_fine") sc.human.query_response_policy = QueryPolicy::AlwaysFine;
    else if (policy == "silent") sc.human.query_response_policy = QueryPolicy::Silent;
    else
        throw ScenarioError(ScenarioError::Code::Schema, "/human/query_response_policy",
                            "unknown policy");
    sc.human.query_response_latency_millis = hr.non_negative("query_response_latency_millis", 1000);
    if (const json* per = detail::walk(human, "perceives_error")) {
        if (!per->is_object())
            throw ScenarioError(ScenarioError::Code::Schema, "/human/perceives_error",
                                "need an object of error_id -> bool");
        for (const auto& [key, v] : per->items()) {
            if (!seen_ids.count(key))
                throw ScenarioError(ScenarioError::Code::DanglingAnchor,
                                    "/human/perceives_error/" + key,
                                    "no injected error named " + key);
            if (!v.is_boolean())
                throw ScenarioError(ScenarioError::Code::Schema,
                                    "/human/perceives_error/" + key, "need a bool");
            sc.human.perceives_error[key] = v.get<bool>();
        }
    }

    if (const json* noise = detail::walk(j, "noise")) {
        FieldReader r{*noise, "/noise"};
        sc.noise.spontaneous_au_burst_rate = r.get_or<double>("spontaneous_au_burst_rate", 0.0);
        sc.noise.burst_magnitude = r.get_or<double>("burst_magnitude", 0.0);
        sc.noise.burst_duration_millis = r.non_negative("burst_duration_millis", 0);
        sc.noise.distractor_utterance_rate = r.get_or<double>("distractor_utterance_rate", 0.0);
        sc.noise.distractor_texts =
            r.get_or<std::vector<std::string>>("distractor_texts", {});
        if (sc.noise.spontaneous_au_burst_rate < 0.0 || sc.noise.distractor_utterance_rate < 0.0)
            throw ScenarioError(ScenarioError::Code::Schema, "/noise", "negative rate");
        if (sc.noise.distractor_utterance_rate > 0.0 && sc.noise.distractor_texts.empty())
            throw ScenarioError(ScenarioError::Code::Schema, "/noise/distractor_texts",
                                "distractor rate set but no texts given");
    }

    return sc;
}

inline Scenario load_scenario(const std::string& path) {
    json j;
    try {
        j = load_json_file(path);
    } catch (const TraceFormatError& e) {
        throw ScenarioError(ScenarioError::Code::Schema, "", e.what());
    }
    return parse_scenario(j);
}

}  // namespace errsense
