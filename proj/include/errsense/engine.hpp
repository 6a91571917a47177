#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "errsense/detector.hpp"
#include "errsense/events.hpp"
#include "errsense/intent.hpp"
#include "errsense/json_io.hpp"
#include "errsense/orchestrator.hpp"

namespace errsense {

class EngineConfigError : public std::runtime_error {
public:
    explicit EngineConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct IntentBackendConfig {
    std::string kind = "rules";  // "rules" or "http"
    std::string base_url;
    std::string path = "/classify";
    Duration timeout_ms = 2000;
};

struct EngineConfig {
    Mode mode = Mode::Proactive;
    Duration verification_timeout_ms = 10000;
    std::string query_pool_path;
    std::string lexicon_dir;
    DetectorConfig detector;
    std::uint64_t seed = 0;
    IntentBackendConfig intent_backend;
    std::string label;  // config file stem, used in reports

    /// Reads a config file; query_pool_path and lexicon_dir resolve
    /// relative to the file's own directory.
    static EngineConfig load(const std::string& path) {
        json j;
        try {
            j = load_json_file(path);
        } catch (const TraceFormatError& e) {
            throw EngineConfigError(e.what());
        }
        EngineConfig cfg;
        try {
            const std::string mode = j.at("mode").get<std::string>();
            if (mode == "proactive") cfg.mode = Mode::Proactive;
            else if (mode == "reactive") cfg.mode = Mode::Reactive;
            else throw EngineConfigError("mode must be proactive or reactive");
            cfg.verification_timeout_ms =
                j.value("verification_timeout_ms", cfg.verification_timeout_ms);
            cfg.query_pool_path = j.at("query_pool_path").get<std::string>();
            cfg.lexicon_dir = j.value("lexicon_dir", std::string("lexicons"));
            if (j.contains("detector")) cfg.detector = DetectorConfig::from_json(j.at("detector"));
            else cfg.detector.validate();
            cfg.seed = j.value("seed", std::uint64_t{0});
            if (j.contains("intent_backend")) {
                const auto& b = j.at("intent_backend");
                cfg.intent_backend.kind = b.value("kind", std::string("rules"));
                cfg.intent_backend.base_url = b.value("base_url", std::string{});
                cfg.intent_backend.path = b.value("path", std::string("/classify"));
                cfg.intent_backend.timeout_ms = b.value("timeout_ms", Duration{2000});
                if (cfg.intent_backend.kind != "rules" && cfg.intent_backend.kind != "http")
                    throw EngineConfigError("intent_backend.kind must be rules or http");
                if (cfg.intent_backend.kind == "http" && cfg.intent_backend.base_url.empty())
                    throw EngineConfigError("intent_backend.kind http needs base_url");
            }
        } catch (const json::exception& e) {
            throw EngineConfigError(std::string("bad engine config: ") + e.what());
        } catch (const DetectorConfigError& e) {
            throw EngineConfigError(e.what());
        }
        if (cfg.verification_timeout_ms <= 0)
            throw EngineConfigError("verification_timeout_ms must be positive");

        const auto dir = std::filesystem::path(path).parent_path();
        auto resolve = [&](const std::string& p) {
            std::filesystem::path fp(p);
            return fp.is_absolute() ? fp.string() : (dir / fp).lexically_normal().string();
        };
        cfg.query_pool_path = resolve(cfg.query_pool_path);
        cfg.lexicon_dir = resolve(cfg.lexicon_dir);
        cfg.label = std::filesystem::path(path).stem().string();
        return cfg;
    }
};

struct DetectorTraceRow {
    Timestamp t;
    double score = 0.0;
    bool flagged = false;
    double vote_fraction = 0.0;
};

/// Everything one engine step produced, in emission order.
struct StepOutput {
    std::vector<Command> commands;
    std::optional<DetectionEvent> detection;
    std::optional<QueryExchange> exchange;
    std::optional<Command> query_said;  // the Say that opened a verification
    std::optional<DetectorTraceRow> detector_row;
    std::optional<Intent> intent;
};

/// Front door of the error-detection pipeline: consumes the merged event
/// timeline one envelope at a time, runs the AU detector and intent
/// classifier, and drives the detect-then-verify core.  Commands flow out
/// through StepOutput for the caller (robot or simulator) to act on.
class Engine {
public:
    Engine(EngineConfig cfg, TaskLexicon lexicon, QueryPool pool,
           std::unique_ptr<IntentBackend> backend = nullptr)
        : cfg_(std::move(cfg)),
          lexicon_(std::move(lexicon)),
          detector_(cfg_.detector),
          core_({cfg_.mode, cfg_.verification_timeout_ms}, std::move(pool), cfg_.seed),
          backend_(backend ? std::move(backend) : std::make_unique<RuleIntentBackend>()) {}

    StepOutput step(const EventEnvelope& env) {
        StepOutput out;
        if (last_t_ && env.t < *last_t_)
            diagnostics_.push_back("event timestamp regressed at t=" +
                                   std::to_string(env.t.millis));
        last_t_ = env.t;

        // A silent human is an answer too: past the deadline the query is
        // closed as timed out (stamped at the deadline) before the new
        // event is considered.
        if (core_.state.phase == Phase::AwaitingVerification) {
            const Timestamp deadline = core_.verification_deadline();
            if (env.t > deadline) apply(core_.step(EvVerificationTimeout{deadline}), deadline, out);
        }

        std::visit([&](const auto& payload) { dispatch(payload, out); }, env.payload);
        return out;
    }

    Phase phase() const { return core_.state.phase; }
    Mode mode() const { return cfg_.mode; }
    double vote_fraction_now() const { return detector_.vote_fraction_now(); }
    const EngineConfig& config() const { return cfg_; }
    const std::vector<std::string>& diagnostics() const { return diagnostics_; }
    std::size_t candidates_dropped() const { return candidates_dropped_; }
    std::size_t candidates_ignored() const { return candidates_ignored_; }

    /// Close a still-pending verification at end of input.
    std::optional<QueryExchange> flush(Timestamp end) {
        if (core_.state.phase != Phase::AwaitingVerification) return std::nullopt;
        const Timestamp deadline = std::min(core_.verification_deadline(), end);
        StepOutput out;
        apply(core_.step(EvVerificationTimeout{deadline}), deadline, out);
        return out.exchange;
    }

private:
    void dispatch(const RobotStatus& st, StepOutput& out) {
        last_status_ = st;
        if (st.recovery_complete) apply(core_.step(EvRecoveryComplete{st.t}), st.t, out);
    }

    void dispatch(const AuFrame& frame, StepOutput& out) {
        if (cfg_.mode != Mode::Proactive) return;
        auto res = detector_.process_frame(frame);
        out.detector_row =
            DetectorTraceRow{frame.t, res.flag.score, res.flag.flagged, res.vote_fraction};
        if (res.candidate_at) {
            apply(core_.step(EvCandidate{make_potential(*res.candidate_at, SignalModality::Au)}),
                  *res.candidate_at, out);
        }
    }

    void dispatch(const Utterance& u, StepOutput& out) {
        if (u.speaker == Speaker::Robot) return;  // don't listen to ourselves
        const bool query_pending =
            cfg_.mode == Mode::Proactive && core_.state.phase == Phase::AwaitingVerification;
        Intent intent = backend_->classify(u, lexicon_, query_pending);
        out.intent = intent;
        switch (intent.category) {
            case IntentCategory::ExplicitErrorReport:
                apply(core_.step(EvExplicitReport{
                          u.t, std::get<ErrorReportPayload>(intent.payload).description}),
                      u.t, out);
                break;
            case IntentCategory::ImplicitErrorReaction:
                if (cfg_.mode == Mode::Proactive)
                    apply(core_.step(
                              EvCandidate{make_potential(u.t, SignalModality::Speech)}),
                          u.t, out);
                break;
            case IntentCategory::QueryResponse: {
                const auto& p = std::get<QueryResponsePayload>(intent.payload);
                apply(core_.step(EvQueryAnswer{u.t, p.polarity}), u.t, out);
                break;
            }
            case IntentCategory::ActionRequest:
            case IntentCategory::Irrelevant:
                break;
        }
    }

    // Engine outputs looping back in are a wiring bug upstream; note and drop.
    void dispatch(const Command&, StepOutput&) {
        diagnostics_.push_back("rejected input event kind: command");
    }
    void dispatch(const QueryExchange&, StepOutput&) {
        diagnostics_.push_back("rejected input event kind: query");
    }
    void dispatch(const DetectionEvent&, StepOutput&) {
        diagnostics_.push_back("rejected input event kind: detection");
    }

    PotentialError make_potential(Timestamp t, SignalModality modality) const {
        RobotStatus ctx;
        if (last_status_) {
            ctx = *last_status_;
        } else {
            ctx.t = t;  // no status yet: treat the robot as long idle
            ctx.millis_since_last_movement = t.millis;
        }
        return {t, modality, ctx};
    }

    void apply(CoreEffects fx, Timestamp now, StepOutput& out) {
        if (fx.candidate_dropped) ++candidates_dropped_;
        if (fx.candidate_ignored) ++candidates_ignored_;
        if (fx.query_text) {
            active_query_ = *fx.query_text;
            query_sent_at_ = now;
            out.query_said = Command{CommandKind::Say, now, active_query_};
        }
        if (fx.verification_closed) {
            QueryExchange ex;
            ex.t = now;
            ex.asked_at = query_sent_at_;
            ex.text = active_query_;
            ex.outcome = *fx.verification_closed;
            if (ex.outcome == QueryOutcome::Affirmative || ex.outcome == QueryOutcome::Negative)
                ex.answered_at = now;
            out.exchange = ex;
            if (ex.outcome == QueryOutcome::Affirmative)
                detector_.adapt_after_verification(VerificationOutcome::NoError, now);
            if (ex.outcome == QueryOutcome::Negative) {
                detector_.adapt_after_verification(VerificationOutcome::ErrorConfirmed, now);
                detector_.clear_window();  // confirmed: don't re-flag the same episode
            }
        }
        for (auto& c : fx.commands) out.commands.push_back(std::move(c));
        if (fx.detection) out.detection = fx.detection;
    }

    EngineConfig cfg_;
    TaskLexicon lexicon_;
    AuDetector detector_;
    DetectionCore core_;
    std::unique_ptr<IntentBackend> backend_;
    std::optional<RobotStatus> last_status_;
    std::optional<Timestamp> last_t_;
    std::string active_query_;
    Timestamp query_sent_at_{};
    std::vector<std::string> diagnostics_;
    std::size_t candidates_dropped_ = 0;
    std::size_t candidates_ignored_ = 0;
};

}  // namespace errsense
