#pragma once

#include <functional>
#include <queue>
#include <set>

#include "errsense/engine.hpp"
#include "errsense/human.hpp"
#include "errsense/intent_http.hpp"
#include "errsense/metrics.hpp"
#include "errsense/robot_sim.hpp"
#include "errsense/scenario.hpp"

namespace errsense {

struct RunOptions {
    /// When set, verification queries go here instead of the scenario's
    /// scripted policy; return the reply text, or nothing to stay silent.
    std::function<std::optional<std::string>(const std::string& query)> interactive_responder;
};

struct RunResult {
    TraceMeta meta;
    std::vector<EventEnvelope> trace;
    RunMetrics metrics;
    std::vector<DetectorTraceRow> detector_trace;
    std::vector<std::string> diagnostics;
    std::size_t candidates_ignored = 0;  // failed the robot-context gate
    std::size_t candidates_dropped = 0;  // raised while a verification was busy
};

namespace detail {

// Agenda tick cadence for robot status and AU frames.
inline constexpr Duration kTickMillis = 100;
// How long the detection-to-error matcher looks back from a signal.
inline constexpr Duration kMatchHorizonMillis = 30000;
// Runaway guard: no run may outlive its script by more than this.
inline constexpr Duration kHardTailMillis = 600000;

struct AgendaItem {
    enum class Kind { Tick, HumanUtterance, RecoveryStatus };
    Timestamp t;
    int prio = 0;  // mirrors trace priority so same-instant delivery matches it
    std::uint64_t seq = 0;
    Kind kind = Kind::Tick;
    ScheduledUtterance utterance;
};

struct AgendaLater {
    bool operator()(const AgendaItem& a, const AgendaItem& b) const {
        if (a.t != b.t) return b.t < a.t;
        if (a.prio != b.prio) return b.prio < a.prio;
        return b.seq < a.seq;
    }
};

}  // namespace detail

/// Closed-loop scenario run: scripted robot, scripted human, real engine.
/// Drives everything off one logical-clock agenda at 10 Hz, so runs are
/// deterministic given (scenario seed, engine seed) and produce the exact
/// event trace the engine saw, plus metrics computed from that trace.
class ScenarioHarness {
public:
    ScenarioHarness(const Scenario& scenario, const EngineConfig& cfg, RunOptions opts = {})
        : scenario_(scenario),
          cfg_(cfg),
          opts_(std::move(opts)),
          sim_(scenario_.script),
          human_(scenario_, scenario_.script.end() + 15000),
          engine_(cfg_, load_lexicon_for(scenario_, cfg_), QueryPool::load(cfg_.query_pool_path),
                  make_backend(cfg_)) {}

    RunResult run() {
        RunResult result;
        for (const auto& u : human_.noise_utterances()) schedule_utterance(u);
        push({Timestamp{0}, 0, seq_++, detail::AgendaItem::Kind::Tick, {}});

        while (!agenda_.empty()) {
            detail::AgendaItem item = agenda_.top();
            agenda_.pop();
            switch (item.kind) {
                case detail::AgendaItem::Kind::Tick:
                    run_tick(item.t, result);
                    break;
                case detail::AgendaItem::Kind::HumanUtterance:
                    --pending_human_;
                    if (!human_.report_still_due(item.utterance)) break;  // error already fixed
                    feed(make_envelope(Utterance{item.utterance.t, item.utterance.text,
                                                 Speaker::Human}),
                         result);
                    break;
                case detail::AgendaItem::Kind::RecoveryStatus: {
                    --pending_recovery_;
                    RobotStatus st = sim_.status_at(item.t);
                    st.recovery_complete = true;
                    feed(make_envelope(st), result);
                    break;
                }
            }
        }

        std::swap(result.trace, trace_);
        std::swap(result.detector_trace, detector_trace_);
        result.meta = make_meta();
        result.metrics = compute_metrics(result.meta, result.trace);
        result.candidates_ignored = engine_.candidates_ignored();
        result.candidates_dropped = engine_.candidates_dropped();
        for (const auto& d : engine_.diagnostics()) result.diagnostics.push_back(d);
        for (const auto& d : sim_.diagnostics()) result.diagnostics.push_back(d);
        return result;
    }

private:
    static TaskLexicon load_lexicon_for(const Scenario& sc, const EngineConfig& cfg) {
        const std::string path = cfg.lexicon_dir + "/" + sc.task_name + ".json";
        try {
            return TaskLexicon::from_json(load_json_file(path));
        } catch (const TraceFormatError& e) {
            throw EngineConfigError(e.what());
        }
    }

    static std::unique_ptr<IntentBackend> make_backend(const EngineConfig& cfg) {
        if (cfg.intent_backend.kind == "http")
            return std::make_unique<HttpIntentBackend>(cfg.intent_backend.base_url,
                                                       cfg.intent_backend.path,
                                                       cfg.intent_backend.timeout_ms);
        return std::make_unique<RuleIntentBackend>();
    }

    void push(detail::AgendaItem item) { agenda_.push(std::move(item)); }

    void schedule_utterance(const ScheduledUtterance& u) {
        ++pending_human_;
        push({u.t, 2, seq_++, detail::AgendaItem::Kind::HumanUtterance, u});
    }

    void run_tick(Timestamp now, RunResult& result) {
        trigger_due_errors(now);
        feed(make_envelope(sim_.status_at(now)), result);
        feed(make_envelope(human_.au_frame_at(now)), result);

        const bool done = sim_.script_done(now) && engine_.phase() == Phase::Monitoring &&
                          pending_human_ == 0 && pending_recovery_ == 0;
        const bool overtime =
            now.millis > scenario_.script.end().millis + detail::kHardTailMillis;
        if (overtime)
            result.diagnostics.push_back("run hit the hard time cap; stopping ticks");
        if (!done && !overtime)
            push({now + detail::kTickMillis, 0, seq_++, detail::AgendaItem::Kind::Tick, {}});
    }

    /// An injected error "occurs" the moment its anchor action starts
    /// executing, on the real clock (pauses shift it right).
    void trigger_due_errors(Timestamp now) {
        const Timestamp tau = sim_.script_time(now);
        for (const auto& err : scenario_.errors) {
            if (triggered_.count(err.error_id)) continue;
            const RobotAction* a = scenario_.script.find(err.action_id);
            if (tau < a->start) continue;
            triggered_.insert(err.error_id);
            auto real = sim_.real_time_of(a->start);
            const Timestamp occurred = real ? *real : now;
            occurrence_[err.error_id] = occurred;
            for (auto& u : human_.on_error_occurred(err.error_id, occurred)) {
                if (u.t < now) u.t = now;  // zero-latency reactions land this tick
                schedule_utterance(u);
            }
        }
    }

    void feed(const EventEnvelope& env, RunResult& result) {
        StepOutput out = engine_.step(env);
        if (out.detector_row) detector_trace_.push_back(*out.detector_row);

        std::vector<EventEnvelope> batch;
        batch.push_back(env);

        for (const auto& cmd : out.commands) {
            batch.push_back(make_envelope(cmd));
            sim_.on_command(cmd);
            if (cmd.kind == CommandKind::Recover) {
                if (auto due = sim_.recovery_due()) {
                    ++pending_recovery_;
                    push({*due, 0, seq_++, detail::AgendaItem::Kind::RecoveryStatus, {}});
                    sim_.clear_recovery();
                }
            }
        }
        if (out.query_said) on_query_said(*out.query_said);
        if (out.exchange) batch.push_back(make_envelope(*out.exchange));
        if (out.detection) {
            DetectionEvent d = *out.detection;
            d.matched_error_id = match_detection(d);
            if (d.matched_error_id) {
                resolved_.insert(*d.matched_error_id);
                human_.on_resolved(*d.matched_error_id);
            }
            batch.push_back(make_envelope(d));
        }

        // Timeout synthesis can stamp outputs earlier than the input event;
        // a stable sort keeps the trace ordered by (t, kind priority).
        std::stable_sort(batch.begin(), batch.end(),
                         [](const EventEnvelope& a, const EventEnvelope& b) {
                             if (a.t != b.t) return a.t < b.t;
                             return stream_priority(a) < stream_priority(b);
                         });
        for (auto& e : batch) trace_.push_back(std::move(e));
    }

    void on_query_said(const Command& say) {
        if (opts_.interactive_responder) {
            if (auto reply = opts_.interactive_responder(say.text)) {
                schedule_utterance({say.t + scenario_.human.query_response_latency_millis,
                                    *reply, UtteranceTag::Response, {}});
            }
            return;
        }
        if (auto reply = human_.on_query(say.t)) schedule_utterance(*reply);
    }

    /// Nearest unresolved perceived error that occurred at or before the
    /// signal, looking back at most the match horizon.
    std::optional<std::string> match_detection(const DetectionEvent& d) const {
        std::optional<std::string> best;
        Timestamp best_at{};
        for (const auto& [id, at] : occurrence_) {
            if (resolved_.count(id)) continue;
            if (!scenario_.human.perceives(id)) continue;
            if (at > d.t_signal) continue;
            if (d.t_signal - at > detail::kMatchHorizonMillis) continue;
            if (!best || at > best_at) {
                best = id;
                best_at = at;
            }
        }
        return best;
    }

    TraceMeta make_meta() const {
        TraceMeta meta;
        meta.scenario = scenario_.task_name;
        meta.config = cfg_.label.empty() ? to_string(cfg_.mode) : cfg_.label;
        meta.mode = to_string(cfg_.mode);
        meta.scenario_seed = scenario_.seed;
        meta.engine_seed = cfg_.seed;
        for (const auto& err : scenario_.errors) {
            ErrorRecord rec;
            rec.error_id = err.error_id;
            rec.kind = err.kind;
            rec.perceived = scenario_.human.perceives(err.error_id);
            auto it = occurrence_.find(err.error_id);
            if (it != occurrence_.end()) rec.t_occurred = it->second;
            meta.errors.push_back(std::move(rec));
        }
        return meta;
    }

    Scenario scenario_;
    EngineConfig cfg_;
    RunOptions opts_;
    RobotArmSim sim_;
    HumanActor human_;
    Engine engine_;

    std::priority_queue<detail::AgendaItem, std::vector<detail::AgendaItem>, detail::AgendaLater>
        agenda_;
    std::uint64_t seq_ = 0;
    int pending_human_ = 0;
    int pending_recovery_ = 0;

    std::set<std::string> triggered_;
    std::map<std::string, Timestamp> occurrence_;
    std::set<std::string> resolved_;

    std::vector<EventEnvelope> trace_;
    std::vector<DetectorTraceRow> detector_trace_;
};

inline RunResult run_scenario(const Scenario& scenario, const EngineConfig& cfg,
                              RunOptions opts = {}) {
    ScenarioHarness harness(scenario, cfg, std::move(opts));
    return harness.run();
}

struct Comparison {
    RunMetrics a;
    RunMetrics b;
    std::optional<double> delta_mean_delay_s;       // a - b
    std::optional<double> delta_percent_detected;   // a - b
};

inline Comparison compare_configs(const Scenario& scenario, const EngineConfig& a,
                                  const EngineConfig& b) {
    Comparison cmp;
    cmp.a = run_scenario(scenario, a).metrics;
    cmp.b = run_scenario(scenario, b).metrics;
    if (cmp.a.mean_delay_s && cmp.b.mean_delay_s)
        cmp.delta_mean_delay_s = *cmp.a.mean_delay_s - *cmp.b.mean_delay_s;
    if (cmp.a.percent_detected && cmp.b.percent_detected)
        cmp.delta_percent_detected = *cmp.a.percent_detected - *cmp.b.percent_detected;
    return cmp;
}

}  // namespace errsense
