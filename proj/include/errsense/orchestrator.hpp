#pragma once

#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "errsense/events.hpp"
#include "errsense/intent.hpp"
#include "errsense/json_io.hpp"

namespace errsense {

enum class Mode { Proactive, Reactive };
enum class Phase { Monitoring, AwaitingVerification, Recovering };
enum class SignalModality { Au, Speech };

inline const char* to_string(Mode m) { return m == Mode::Proactive ? "proactive" : "reactive"; }

/// Signal that might indicate a task error, plus the robot status snapshot
/// current when it was raised.
struct PotentialError {
    Timestamp t_signal;
    SignalModality modality;
    RobotStatus context;
};

enum class GateDecision { Pass, Ignore };

/// Human reactions only implicate the robot if it acted recently: the gate
/// passes while the arm moves or within three seconds of its last movement.
/// Gripper state rides along in the snapshot for downstream logging but does
/// not veto.
inline GateDecision context_gate(const PotentialError& p) {
    if (p.context.moving) return GateDecision::Pass;
    return p.context.millis_since_last_movement <= 3000 ? GateDecision::Pass
                                                        : GateDecision::Ignore;
}

class QueryPoolError : public std::runtime_error {
public:
    explicit QueryPoolError(const std::string& what) : std::runtime_error(what) {}
};

/// Verification phrasings.  Every template must stay neutral -- asking
/// whether things are going to plan, never whether something went wrong --
/// so an unsure human isn't pushed toward reporting a phantom problem.
struct QueryPool {
    std::vector<std::string> templates;

    void validate() const {
        if (templates.size() < 2) throw QueryPoolError("need at least two query templates");
        static const char* const banned[] = {"error", "mistake", "wrong", "fail"};
        for (const auto& q : templates) {
            const std::string norm = normalize_text(q);
            for (const char* b : banned) {
                if (norm.find(b) != std::string::npos)
                    throw QueryPoolError("query template leads the witness: \"" + q + "\"");
            }
        }
    }

    static QueryPool load(const std::string& path) {
        json j = load_json_file(path);
        QueryPool pool;
        if (j.is_array()) {
            pool.templates = j.get<std::vector<std::string>>();
        } else if (j.is_object() && j.contains("templates")) {
            pool.templates = j.at("templates").get<std::vector<std::string>>();
        } else {
            throw QueryPoolError(path + ": expected an array of templates");
        }
        pool.validate();
        return pool;
    }
};

/// Deterministic template pick: the first query of a run is always
/// templates[0]; later picks draw from the seeded rng and step past the
/// previous pick so back-to-back queries never repeat verbatim.
inline std::string generate_query(std::mt19937_64& rng, const QueryPool& pool,
                                  const std::vector<std::string>& history) {
    if (history.empty()) return pool.templates.front();
    std::size_t idx = static_cast<std::size_t>(rng() % pool.templates.size());
    if (pool.templates[idx] == history.back()) idx = (idx + 1) % pool.templates.size();
    return pool.templates[idx];
}

inline constexpr const char* kApologyText = "I'm sorry - let me fix that.";

// Logical inputs to the detection state machine, already stripped of
// transport detail by the engine.
struct EvCandidate {
    PotentialError potential;
};
struct EvExplicitReport {
    Timestamp t;
    std::string description;
};
struct EvQueryAnswer {
    Timestamp t;
    Polarity polarity = Polarity::Unclear;
};
struct EvVerificationTimeout {
    Timestamp t;
};
struct EvRecoveryComplete {
    Timestamp t;
};
using LogicalEvent = std::variant<EvCandidate, EvExplicitReport, EvQueryAnswer,
                                  EvVerificationTimeout, EvRecoveryComplete>;

struct CoreConfig {
    Mode mode = Mode::Proactive;
    Duration verification_timeout_ms = 10000;
};

struct CoreState {
    Phase phase = Phase::Monitoring;
    bool paused = false;
    std::optional<PotentialError> pending;
    Timestamp query_sent_at{};
};

/// What one transition asked the outside world to do.
struct CoreEffects {
    std::vector<Command> commands;
    std::optional<DetectionEvent> detection;
    std::optional<QueryOutcome> verification_closed;
    std::optional<std::string> query_text;  // set when commands include Say(query)
    bool candidate_ignored = false;         // failed the context gate
    bool candidate_dropped = false;         // arrived while busy
};

/// Detect-then-verify state machine.  One verification in flight at most;
/// candidates raised while busy are dropped, not queued -- the human is
/// still reacting to the same suspicion.  Explicit reports are trusted
/// outright and preempt whatever phase we're in.  Reactive mode never
/// leaves Monitoring except through an explicit report.
class DetectionCore {
public:
    DetectionCore(CoreConfig cfg, QueryPool pool, std::uint64_t seed)
        : cfg_(cfg), pool_(std::move(pool)), rng_(seed) {
        pool_.validate();
        if (cfg_.verification_timeout_ms <= 0)
            throw std::invalid_argument("verification timeout must be positive");
    }

    CoreState state;

    CoreEffects step(const LogicalEvent& event) {
        CoreEffects fx;
        std::visit([&](const auto& ev) { handle(ev, fx); }, event);
        return fx;
    }

    const CoreConfig& config() const { return cfg_; }
    Timestamp verification_deadline() const {
        return state.query_sent_at + cfg_.verification_timeout_ms;
    }
    const std::vector<std::string>& query_history() const { return history_; }

private:
    void handle(const EvCandidate& ev, CoreEffects& fx) {
        if (cfg_.mode != Mode::Proactive) return;  // implicit channel disabled
        if (state.phase != Phase::Monitoring) {
            fx.candidate_dropped = true;
            return;
        }
        if (context_gate(ev.potential) == GateDecision::Ignore) {
            fx.candidate_ignored = true;
            return;
        }
        const Timestamp t = ev.potential.t_signal;
        std::string query = generate_query(rng_, pool_, history_);
        history_.push_back(query);
        fx.commands.push_back({CommandKind::Pause, t, {}});
        fx.commands.push_back({CommandKind::Say, t, query});
        fx.query_text = std::move(query);
        state.phase = Phase::AwaitingVerification;
        state.paused = true;
        state.pending = ev.potential;
        state.query_sent_at = t;
    }

    void handle(const EvExplicitReport& ev, CoreEffects& fx) {
        if (state.phase == Phase::AwaitingVerification)
            fx.verification_closed = QueryOutcome::Preempted;
        if (!state.paused) {
            fx.commands.push_back({CommandKind::Pause, ev.t, {}});
            state.paused = true;
        }
        fx.commands.push_back({CommandKind::Say, ev.t, kApologyText});
        fx.commands.push_back({CommandKind::Recover, ev.t, {}});
        fx.detection = DetectionEvent{ev.t, DetectionMethod::Explicit, ev.t, false, std::nullopt};
        state.phase = Phase::Recovering;
        state.pending.reset();
    }

    void handle(const EvQueryAnswer& ev, CoreEffects& fx) {
        if (state.phase != Phase::AwaitingVerification) return;
        if (ev.polarity == Polarity::Unclear) return;  // keep waiting for something readable
        if (ev.polarity == Polarity::Negative) {
            fx.verification_closed = QueryOutcome::Negative;
            fx.detection = DetectionEvent{
                ev.t,
                state.pending->modality == SignalModality::Au ? DetectionMethod::ImplicitAu
                                                              : DetectionMethod::ImplicitSpeech,
                state.pending->t_signal, true, std::nullopt};
            fx.commands.push_back({CommandKind::Say, ev.t, kApologyText});
            fx.commands.push_back({CommandKind::Recover, ev.t, {}});
            state.phase = Phase::Recovering;
            state.pending.reset();
            return;
        }
        // Affirmative: human says all is well, so resume and raise the bar.
        fx.verification_closed = QueryOutcome::Affirmative;
        fx.commands.push_back({CommandKind::Resume, ev.t, {}});
        state.phase = Phase::Monitoring;
        state.paused = false;
        state.pending.reset();
    }

    void handle(const EvVerificationTimeout& ev, CoreEffects& fx) {
        if (state.phase != Phase::AwaitingVerification) return;
        fx.verification_closed = QueryOutcome::Timeout;
        fx.commands.push_back({CommandKind::Resume, ev.t, {}});
        state.phase = Phase::Monitoring;
        state.paused = false;
        state.pending.reset();
    }

    void handle(const EvRecoveryComplete& ev, CoreEffects& fx) {
        if (state.phase != Phase::Recovering) return;
        fx.commands.push_back({CommandKind::Resume, ev.t, {}});
        state.phase = Phase::Monitoring;
        state.paused = false;
    }

    CoreConfig cfg_;
    QueryPool pool_;
    std::mt19937_64 rng_;
    std::vector<std::string> history_;
};

}  // namespace errsense
