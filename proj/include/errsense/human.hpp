#pragma once

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "errsense/scenario.hpp"

namespace errsense {

namespace detail {

/// Seeded sampling helpers on top of mt19937_64.  Distributions are done by
/// hand (not <random>'s, whose exact sequences vary across standard
/// libraries) so traces are byte-identical everywhere.
class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : rng_(seed) {}

    double uniform01() {  // [0,1) with 53-bit resolution
        return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Exponential gap in millis for an events-per-minute rate.
    Duration exp_gap_millis(double per_minute) {
        double u = uniform01();
        double gap = -std::log(1.0 - u) / per_minute * 60000.0;
        return static_cast<Duration>(gap) + 1;
    }

    Duration uniform_millis(Duration bound) {  // [0, bound)
        if (bound <= 0) return 0;
        return static_cast<Duration>(uniform01() * static_cast<double>(bound));
    }

    std::uint64_t raw() { return rng_(); }

private:
    std::mt19937_64 rng_;
};

}  // namespace detail

enum class UtteranceTag { Reaction, Report, Response, Distractor };

struct ScheduledUtterance {
    Timestamp t;
    std::string text;
    UtteranceTag tag = UtteranceTag::Distractor;
    std::string error_id;  // for reactions/reports: what triggered it
};

/// Scripted human observer.  Perceived robot errors trigger a facial-AU
/// burst, maybe a short spoken reaction, and maybe a delayed explicit
/// report; the report is withheld if the robot has resolved the error by
/// the time it would be spoken.  Verification queries get answered per the
/// scenario policy.  All sampling comes from one seeded stream, so a given
/// scenario replays identically.
class HumanActor {
public:
    explicit HumanActor(const Scenario& scenario, Timestamp noise_horizon)
        : sc_(&scenario), sampler_(scenario.seed) {
        // Everyone's resting face: a handful of AUs at low, steady intensity.
        baseline_ = {{1, 0.2}, {2, 0.1}, {4, 0.3}, {6, 0.2},  {9, 0.1},
                     {12, 0.4}, {15, 0.2}, {20, 0.1}, {25, 0.3}, {45, 0.2}};
        presample_noise(noise_horizon);
    }

    /// AU intensities at time t: baseline plus any active bursts, clamped
    /// to the 0..5 intensity scale.
    AuFrame au_frame_at(Timestamp t) const {
        AuFrame f;
        f.t = t;
        f.intensities = baseline_;
        for (const auto& b : bursts_) {
            if (b.start.millis <= t.millis && t.millis < (b.start + b.duration).millis) {
                for (auto& [au, v] : f.intensities)
                    v = std::min(5.0, std::max(0.0, v + b.magnitude));
            }
        }
        return f;
    }

    /// The human notices an error that just happened (real time t_real).
    /// Returns the utterances this schedules; AU bursts are absorbed into
    /// future au_frame_at calls.
    std::vector<ScheduledUtterance> on_error_occurred(const std::string& error_id,
                                                      Timestamp t_real) {
        if (!sc_->human.perceives(error_id)) return {};
        perceived_at_[error_id] = t_real;

        const auto& h = sc_->human;
        // Fixed draw order per error keeps the stream stable.
        const bool speak = sampler_.bernoulli(h.speech_reaction.probability);
        const Duration speech_jitter =
            h.speech_reaction.latency_jitter_millis > 0
                ? sampler_.uniform_millis(h.speech_reaction.latency_jitter_millis)
                : 0;
        const bool report = sampler_.bernoulli(h.explicit_report.probability);
        const Duration report_jitter =
            h.explicit_report.latency_jitter_millis > 0
                ? sampler_.uniform_millis(h.explicit_report.latency_jitter_millis)
                : 0;
        const Duration au_jitter = h.au_reaction.latency_jitter_millis > 0
                                       ? sampler_.uniform_millis(h.au_reaction.latency_jitter_millis)
                                       : 0;

        bursts_.push_back({t_real + h.au_reaction.latency_millis + au_jitter,
                           h.au_reaction.duration_millis, h.au_reaction.magnitude});

        std::vector<ScheduledUtterance> out;
        if (speak && !h.speech_reaction.text.empty())
            out.push_back({t_real + h.speech_reaction.latency_millis + speech_jitter,
                           h.speech_reaction.text, UtteranceTag::Reaction, error_id});
        if (report && !h.explicit_report.text.empty())
            out.push_back({t_real + h.explicit_report.latency_millis + report_jitter,
                           h.explicit_report.text, UtteranceTag::Report, error_id});
        return out;
    }

    /// The robot asked a verification query at t_say.  Returns the reply to
    /// schedule, if the policy produces one.
    std::optional<ScheduledUtterance> on_query(Timestamp t_say) {
        const auto& h = sc_->human;
        if (h.query_response_policy == QueryPolicy::Silent) return std::nullopt;
        const Timestamp reply_at = t_say + h.query_response_latency_millis;
        if (h.query_response_policy == QueryPolicy::AlwaysFine)
            return ScheduledUtterance{reply_at, "yes all good", UtteranceTag::Response, {}};
        // Truthful: negative iff some perceived error is still unresolved.
        if (has_unresolved_perceived(t_say))
            return ScheduledUtterance{reply_at, "no something seems off", UtteranceTag::Response,
                                      {}};
        return ScheduledUtterance{reply_at, "yes all good", UtteranceTag::Response, {}};
    }

    void on_resolved(const std::string& error_id) { resolved_.insert(error_id); }

    /// Reports die on the vine if the error got resolved first.
    bool report_still_due(const ScheduledUtterance& u) const {
        return u.tag != UtteranceTag::Report || !resolved_.count(u.error_id);
    }

    bool has_unresolved_perceived(Timestamp now) const {
        for (const auto& [id, at] : perceived_at_)
            if (at <= now && !resolved_.count(id)) return true;
        return false;
    }

    const std::vector<ScheduledUtterance>& noise_utterances() const { return noise_utterances_; }
    const std::map<int, double>& baseline_face() const { return baseline_; }

private:
    struct Burst {
        Timestamp start;
        Duration duration;
        double magnitude;
    };

    void presample_noise(Timestamp horizon) {
        const auto& n = sc_->noise;
        if (n.spontaneous_au_burst_rate > 0.0 && n.burst_duration_millis > 0) {
            Timestamp t{0};
            while (true) {
                t = t + sampler_.exp_gap_millis(n.spontaneous_au_burst_rate);
                if (t >= horizon) break;
                bursts_.push_back({t, n.burst_duration_millis, n.burst_magnitude});
            }
        }
        if (n.distractor_utterance_rate > 0.0 && !n.distractor_texts.empty()) {
            Timestamp t{0};
            while (true) {
                t = t + sampler_.exp_gap_millis(n.distractor_utterance_rate);
                if (t >= horizon) break;
                const auto& text =
                    n.distractor_texts[sampler_.raw() % n.distractor_texts.size()];
                noise_utterances_.push_back({t, text, UtteranceTag::Distractor, {}});
            }
        }
    }

    const Scenario* sc_;
    detail::Sampler sampler_;
    std::map<int, double> baseline_;
    std::vector<Burst> bursts_;
    std::vector<ScheduledUtterance> noise_utterances_;
    std::map<std::string, Timestamp> perceived_at_;
    std::set<std::string> resolved_;
};

/// Offline preview of what the scripted human would emit if the robot never
/// paused and asked queries at the given times: AU frames on the nominal
/// 10 Hz grid plus all scheduled utterances, ordered by time.
struct SynthesizedHuman {
    std::vector<AuFrame> frames;
    std::vector<ScheduledUtterance> utterances;
};

inline SynthesizedHuman synthesize_human_events(const Scenario& scenario,
                                                const std::vector<Timestamp>& query_times,
                                                Duration tail_millis = 10000) {
    const Timestamp horizon = scenario.script.end() + tail_millis;
    HumanActor actor(scenario, horizon);
    SynthesizedHuman out;
    out.utterances = actor.noise_utterances();

    for (const auto& err : scenario.errors) {
        const RobotAction* a = scenario.script.find(err.action_id);
        for (auto& u : actor.on_error_occurred(err.error_id, a->start))
            out.utterances.push_back(std::move(u));
    }
    for (Timestamp q : query_times) {
        if (auto reply = actor.on_query(q)) out.utterances.push_back(std::move(*reply));
    }
    for (Timestamp t{0}; t < horizon; t = t + 100) out.frames.push_back(actor.au_frame_at(t));

    std::stable_sort(out.utterances.begin(), out.utterances.end(),
                     [](const ScheduledUtterance& a, const ScheduledUtterance& b) {
                         return a.t < b.t;
                     });
    return out;
}

}  // namespace errsense
