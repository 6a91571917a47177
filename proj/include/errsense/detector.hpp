#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "errsense/events.hpp"

namespace errsense {

class DetectorConfigError : public std::runtime_error {
public:
    explicit DetectorConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// An AU frame didn't match the key set the classifier calibrated on.
class MalformedStreamError : public std::runtime_error {
public:
    explicit MalformedStreamError(const std::string& what) : std::runtime_error(what) {}
};

struct DetectorConfig {
    Duration window_millis = 4000;
    double vote_fraction_base = 0.5;
    double frame_theta_base = 0.5;
    double boost_delta = 0.25;
    double boost_cap = 0.9;
    Duration decay_millis = 60000;
    double baseline_alpha = 0.05;
    double frame_rate_hz = 10.0;

    int window_capacity() const {
        return static_cast<int>(static_cast<double>(window_millis) * frame_rate_hz / 1000.0);
    }

    void validate() const {
        if (window_millis <= 0) throw DetectorConfigError("window_millis must be positive");
        if (frame_rate_hz <= 0) throw DetectorConfigError("frame_rate_hz must be positive");
        if (window_capacity() < 2)
            throw DetectorConfigError("window must span at least two frames");
        if (vote_fraction_base <= 0.0 || vote_fraction_base >= 1.0)
            throw DetectorConfigError("vote_fraction_base must be in (0,1)");
        if (boost_cap < vote_fraction_base || boost_cap >= 1.0)
            throw DetectorConfigError("need vote_fraction_base <= boost_cap < 1");
        if (boost_delta < 0.0) throw DetectorConfigError("boost_delta must be non-negative");
        if (decay_millis <= 0) throw DetectorConfigError("decay_millis must be positive");
        if (baseline_alpha <= 0.0 || baseline_alpha > 1.0)
            throw DetectorConfigError("baseline_alpha must be in (0,1]");
        if (frame_theta_base <= 0.0) throw DetectorConfigError("frame_theta_base must be positive");
    }

    static DetectorConfig from_json(const nlohmann::json& j) {
        DetectorConfig c;
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("window_millis", c.window_millis);
        get("vote_fraction_base", c.vote_fraction_base);
        get("frame_theta_base", c.frame_theta_base);
        get("boost_delta", c.boost_delta);
        get("boost_cap", c.boost_cap);
        get("decay_millis", c.decay_millis);
        get("baseline_alpha", c.baseline_alpha);
        get("frame_rate_hz", c.frame_rate_hz);
        c.validate();
        return c;
    }

    nlohmann::json to_json() const {
        return {{"window_millis", window_millis},
                {"vote_fraction_base", vote_fraction_base},
                {"frame_theta_base", frame_theta_base},
                {"boost_delta", boost_delta},
                {"boost_cap", boost_cap},
                {"decay_millis", decay_millis},
                {"baseline_alpha", baseline_alpha},
                {"frame_rate_hz", frame_rate_hz}};
    }
};

struct FrameFlag {
    Timestamp t;
    bool flagged = false;
    double score = 0.0;
};

/// Per-frame anomaly scorer.  Implementations keep whatever per-person
/// calibration they need; swapping one in must not touch the window logic.
class FrameClassifier {
public:
    virtual ~FrameClassifier() = default;
    virtual FrameFlag score_frame(const AuFrame& frame, double theta) = 0;
    virtual void reset() = 0;
};

/// Scores a frame by mean absolute deviation from an exponential moving
/// average of each AU, so a person's resting face calibrates away and only
/// departures from it score high.  The baseline updates after scoring:
///   score = mean_i |x_i - ema_i|;  ema_i' = (1-alpha)*ema_i + alpha*x_i
/// The first frame becomes the baseline and scores zero.
class EmaBaselineClassifier final : public FrameClassifier {
public:
    explicit EmaBaselineClassifier(double alpha) : alpha_(alpha) {}

    FrameFlag score_frame(const AuFrame& frame, double theta) override {
        if (!baseline_) {
            baseline_ = frame.intensities;
            return {frame.t, false, 0.0};
        }
        if (frame.intensities.size() != baseline_->size())
            throw MalformedStreamError("au frame key count changed mid-stream");
        double sum = 0.0;
        auto it = baseline_->begin();
        for (const auto& [au, x] : frame.intensities) {
            if (it->first != au)
                throw MalformedStreamError("au frame keys changed mid-stream (au " +
                                           std::to_string(au) + ")");
            sum += std::abs(x - it->second);
            it->second = (1.0 - alpha_) * it->second + alpha_ * x;
            ++it;
        }
        double score = sum / static_cast<double>(frame.intensities.size());
        return {frame.t, score > theta, score};
    }

    void reset() override { baseline_.reset(); }

private:
    double alpha_;
    std::optional<std::map<int, double>> baseline_;
};

/// Time-bounded flag buffer with a majority vote.  Holds the flags whose
/// timestamps fall in (newest - span, newest]; capacity is the frame count
/// the span would hold at the nominal rate, and stays the denominator even
/// when the stream has gaps.
class VoteWindow {
public:
    VoteWindow(Duration span_millis, int capacity) : span_(span_millis), capacity_(capacity) {}

    void push(const FrameFlag& flag) {
        window_.push_back(flag);
        if (flag.flagged) ++flagged_;
        evict(flag.t);
    }

    /// Emits the newest timestamp when flagged frames exceed
    /// fraction * capacity (strictly).  Clears on emission so one sustained
    /// expression can't emit again every frame; the window re-arms as new
    /// frames come in.
    std::optional<Timestamp> vote(double fraction) {
        if (window_.empty()) return std::nullopt;
        if (static_cast<double>(flagged_) > fraction * static_cast<double>(capacity_)) {
            Timestamp at = window_.back().t;
            clear();
            return at;
        }
        return std::nullopt;
    }

    void clear() {
        window_.clear();
        flagged_ = 0;
    }

    int flagged_count() const { return flagged_; }
    std::size_t size() const { return window_.size(); }
    int capacity() const { return capacity_; }

private:
    void evict(Timestamp newest) {
        while (!window_.empty() && window_.front().t.millis <= newest.millis - span_) {
            if (window_.front().flagged) --flagged_;
            window_.pop_front();
        }
    }

    Duration span_;
    int capacity_;
    std::deque<FrameFlag> window_;
    int flagged_ = 0;
};

enum class VerificationOutcome { ErrorConfirmed, NoError };

/// Streams AU frames through the classifier and the vote window, and owns
/// the adaptive vote threshold: a "no error" verification outcome boosts the
/// required fraction, which then decays linearly back to base.
class AuDetector {
public:
    explicit AuDetector(DetectorConfig cfg, std::unique_ptr<FrameClassifier> classifier = nullptr)
        : cfg_(cfg),
          classifier_(classifier ? std::move(classifier)
                                 : std::make_unique<EmaBaselineClassifier>(cfg.baseline_alpha)),
          window_(cfg.window_millis, cfg.window_capacity()),
          vote_fraction_(cfg.vote_fraction_base) {
        cfg_.validate();
    }

    struct FrameResult {
        FrameFlag flag;
        double vote_fraction;
        std::optional<Timestamp> candidate_at;
    };

    FrameResult process_frame(const AuFrame& frame) {
        decay_threshold(frame.t);
        FrameFlag flag = classifier_->score_frame(frame, cfg_.frame_theta_base);
        window_.push(flag);
        return {flag, vote_fraction_, window_.vote(vote_fraction_)};
    }

    /// Walk the boosted vote fraction linearly back toward base.  At or past
    /// decay_millis the fraction is set to base exactly (no float residue).
    void decay_threshold(Timestamp now) {
        if (!boosted_at_) return;
        Duration elapsed = std::max<Duration>(0, now - *boosted_at_);
        if (elapsed >= cfg_.decay_millis) {
            vote_fraction_ = cfg_.vote_fraction_base;
            boosted_at_.reset();
            return;
        }
        double ratio = static_cast<double>(elapsed) / static_cast<double>(cfg_.decay_millis);
        vote_fraction_ = boost_value_ - (boost_value_ - cfg_.vote_fraction_base) * ratio;
    }

    void adapt_after_verification(VerificationOutcome outcome, Timestamp now) {
        decay_threshold(now);
        if (outcome != VerificationOutcome::NoError) return;  // confirmed errors change nothing
        vote_fraction_ = std::min(cfg_.boost_cap, vote_fraction_ + cfg_.boost_delta);
        boost_value_ = vote_fraction_;
        boosted_at_ = now;
    }

    void clear_window() { window_.clear(); }
    void reset() {
        classifier_->reset();
        window_.clear();
        vote_fraction_ = cfg_.vote_fraction_base;
        boosted_at_.reset();
    }

    double vote_fraction_now() const { return vote_fraction_; }
    const DetectorConfig& config() const { return cfg_; }
    const VoteWindow& window() const { return window_; }

private:
    DetectorConfig cfg_;
    std::unique_ptr<FrameClassifier> classifier_;
    VoteWindow window_;
    double vote_fraction_;
    double boost_value_ = 0.0;
    std::optional<Timestamp> boosted_at_;
};

}  // namespace errsense
