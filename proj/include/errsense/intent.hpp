#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "errsense/events.hpp"

namespace errsense {

class LexiconError : public std::runtime_error {
public:
    explicit LexiconError(const std::string& what) : std::runtime_error(what) {}
};

enum class IntentCategory {
    ActionRequest,
    ExplicitErrorReport,
    QueryResponse,
    ImplicitErrorReaction,
    Irrelevant
};

enum class Polarity { Affirmative, Negative, Unclear };

struct ActionRequestPayload {
    std::string action;
    std::map<std::string, std::string> parameters;

    friend bool operator==(const ActionRequestPayload&, const ActionRequestPayload&) = default;
};

struct ErrorReportPayload {
    std::string description;  // normalized utterance text

    friend bool operator==(const ErrorReportPayload&, const ErrorReportPayload&) = default;
};

struct QueryResponsePayload {
    Polarity polarity = Polarity::Unclear;
    std::optional<std::string> supplemental;  // text left after the polarity marker

    friend bool operator==(const QueryResponsePayload&, const QueryResponsePayload&) = default;
};

struct Intent {
    IntentCategory category = IntentCategory::Irrelevant;
    std::variant<std::monostate, ActionRequestPayload, ErrorReportPayload, QueryResponsePayload>
        payload;
};

/// Lowercase, drop apostrophes ("don't" -> "dont"), map other punctuation to
/// spaces, collapse whitespace.
inline std::string normalize_text(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (unsigned char c : raw) {
        if (c == '\'' || c == 0xE2) continue;  // ascii + utf-8 right-quote lead byte
        if (c == 0x80 || c == 0x99) continue;  // remaining utf-8 quote bytes
        if (std::isalnum(c)) {
            if (pending_space && !out.empty()) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        } else {
            pending_space = true;
        }
    }
    return out;
}

inline std::vector<std::string> tokenize(const std::string& normalized) {
    std::vector<std::string> tokens;
    std::istringstream in(normalized);
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

/// Consecutive-token containment; returns the start index of the first match.
inline std::optional<std::size_t> find_phrase(const std::vector<std::string>& tokens,
                                              const std::vector<std::string>& phrase) {
    if (phrase.empty() || phrase.size() > tokens.size()) return std::nullopt;
    for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
        bool hit = true;
        for (std::size_t k = 0; k < phrase.size(); ++k) {
            if (tokens[i + k] != phrase[k]) {
                hit = false;
                break;
            }
        }
        if (hit) return i;
    }
    return std::nullopt;
}

struct ActionTemplate {
    std::string name;
    std::string object;  // normalized phrase that names the target
    std::map<std::string, std::vector<std::string>> parameters;
};

/// Task-specific vocabulary.  The four marker sets must be pairwise disjoint
/// so classification priority, not lexicon overlap, decides the category.
struct TaskLexicon {
    std::string task_name;
    std::vector<std::string> action_verbs;
    std::vector<std::string> object_vocabulary;
    std::vector<std::string> error_report_markers;
    std::vector<std::string> reaction_markers;
    std::vector<std::string> affirmative_markers;
    std::vector<std::string> negative_markers;
    std::vector<ActionTemplate> actions;

    void validate() const {
        const std::vector<std::pair<const char*, const std::vector<std::string>*>> sets = {
            {"error_report_markers", &error_report_markers},
            {"reaction_markers", &reaction_markers},
            {"affirmative_markers", &affirmative_markers},
            {"negative_markers", &negative_markers}};
        for (std::size_t a = 0; a < sets.size(); ++a) {
            for (std::size_t b = a + 1; b < sets.size(); ++b) {
                for (const auto& pa : *sets[a].second) {
                    for (const auto& pb : *sets[b].second) {
                        if (normalize_text(pa) == normalize_text(pb))
                            throw LexiconError(std::string("marker \"") + pa + "\" appears in " +
                                               sets[a].first + " and " + sets[b].first);
                    }
                }
            }
        }
    }

    static TaskLexicon from_json(const nlohmann::json& j) {
        TaskLexicon lex;
        try {
            lex.task_name = j.at("task_name").get<std::string>();
            auto strings = [&](const char* key) {
                return j.at(key).get<std::vector<std::string>>();
            };
            lex.action_verbs = strings("action_verbs");
            lex.object_vocabulary = strings("object_vocabulary");
            lex.error_report_markers = strings("error_report_markers");
            lex.reaction_markers = strings("reaction_markers");
            lex.affirmative_markers = strings("affirmative_markers");
            lex.negative_markers = strings("negative_markers");
            if (j.contains("actions")) {
                for (const auto& a : j.at("actions")) {
                    ActionTemplate t;
                    t.name = a.at("name").get<std::string>();
                    t.object = normalize_text(a.at("object").get<std::string>());
                    if (a.contains("parameters")) {
                        for (const auto& [param, vals] : a.at("parameters").items())
                            t.parameters[param] = vals.get<std::vector<std::string>>();
                    }
                    lex.actions.push_back(std::move(t));
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw LexiconError(std::string("bad lexicon: ") + e.what());
        }
        lex.validate();
        return lex;
    }
};

namespace detail {

inline std::optional<std::pair<std::size_t, std::size_t>> first_marker(
    const std::vector<std::string>& tokens, const std::vector<std::string>& markers) {
    std::optional<std::pair<std::size_t, std::size_t>> best;  // (start, len)
    for (const auto& m : markers) {
        auto phrase = tokenize(normalize_text(m));
        if (auto at = find_phrase(tokens, phrase)) {
            if (!best || *at < best->first) best = {{*at, phrase.size()}};
        }
    }
    return best;
}

inline bool any_marker(const std::vector<std::string>& tokens,
                       const std::vector<std::string>& markers) {
    return first_marker(tokens, markers).has_value();
}

inline const char* const kNegators[] = {"not", "no", "never", "dont", "isnt", "didnt",
                                        "wasnt", "wont", "hardly", "barely"};

inline bool negated_before(const std::vector<std::string>& tokens, std::size_t at) {
    std::size_t from = at >= 2 ? at - 2 : 0;
    for (std::size_t i = from; i < at; ++i)
        for (const char* n : kNegators)
            if (tokens[i] == n) return true;
    return false;
}

inline std::string join_excluding(const std::vector<std::string>& tokens, std::size_t start,
                                  std::size_t len) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i >= start && i < start + len) continue;
        if (!out.empty()) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

}  // namespace detail

/// Polarity of a reply to a yes/no query.  Negative markers win outright;
/// an affirmative marker counts unless a negator sits within the two
/// preceding tokens ("not really great" reads negative).
inline Polarity polarity_of_response(const std::string& text, const TaskLexicon& lex) {
    auto tokens = tokenize(normalize_text(text));
    if (detail::any_marker(tokens, lex.negative_markers)) return Polarity::Negative;
    if (auto hit = detail::first_marker(tokens, lex.affirmative_markers)) {
        if (detail::negated_before(tokens, hit->first)) return Polarity::Negative;
        return Polarity::Affirmative;
    }
    return Polarity::Unclear;
}

/// Rule-based intent classifier.  Precedence when several patterns match:
/// pending-query responses, then explicit reports, then action requests,
/// then reactions, and Irrelevant only when nothing fits.  An error marker
/// with a definite description (action verb + known object) is an explicit
/// report; an error or reaction marker without one only flags a possible
/// error, which is what the implicit path exists to chase down.
inline Intent classify_intent(const Utterance& utterance, const TaskLexicon& lex,
                              bool query_pending) {
    const std::string norm = normalize_text(utterance.text);
    const auto tokens = tokenize(norm);

    if (query_pending) {
        auto answer = [&](Polarity pol,
                          std::optional<std::pair<std::size_t, std::size_t>> marker) -> Intent {
            QueryResponsePayload p;
            p.polarity = pol;
            if (marker) {
                std::string rest = detail::join_excluding(tokens, marker->first, marker->second);
                if (!rest.empty()) p.supplemental = rest;
            } else if (!norm.empty()) {
                p.supplemental = norm;
            }
            return {IntentCategory::QueryResponse, p};
        };
        if (auto neg = detail::first_marker(tokens, lex.negative_markers))
            return answer(Polarity::Negative, neg);
        if (auto aff = detail::first_marker(tokens, lex.affirmative_markers)) {
            if (detail::negated_before(tokens, aff->first)) return answer(Polarity::Negative, aff);
            return answer(Polarity::Affirmative, aff);
        }
    }

    bool has_verb = false;
    for (const auto& v : lex.action_verbs)
        if (find_phrase(tokens, tokenize(normalize_text(v)))) {
            has_verb = true;
            break;
        }
    bool has_object = false;
    for (const auto& o : lex.object_vocabulary)
        if (find_phrase(tokens, tokenize(normalize_text(o)))) {
            has_object = true;
            break;
        }
    bool has_error_marker = detail::any_marker(tokens, lex.error_report_markers);

    if (has_error_marker && has_verb && has_object)
        return {IntentCategory::ExplicitErrorReport, ErrorReportPayload{norm}};

    if (has_verb && has_object) {
        ActionRequestPayload p;
        for (const auto& t : lex.actions) {
            if (!find_phrase(tokens, tokenize(t.object))) continue;
            p.action = t.name;
            for (const auto& [param, vocab] : t.parameters) {
                for (const auto& value : vocab) {
                    if (find_phrase(tokens, tokenize(normalize_text(value)))) {
                        p.parameters[param] = value;
                        break;
                    }
                }
            }
            break;
        }
        if (p.action.empty()) p.action = "unspecified";
        return {IntentCategory::ActionRequest, p};
    }

    if (detail::any_marker(tokens, lex.reaction_markers) || has_error_marker)
        return {IntentCategory::ImplicitErrorReaction, {}};

    if (query_pending) {
        QueryResponsePayload p;  // heard something, can't read it as yes or no
        if (!norm.empty()) p.supplemental = norm;
        return {IntentCategory::QueryResponse, p};
    }
    return {IntentCategory::Irrelevant, {}};
}

/// Classification backends share this so the rule engine can be swapped for
/// a remote model without touching callers.
class IntentBackend {
public:
    virtual ~IntentBackend() = default;
    virtual Intent classify(const Utterance& utterance, const TaskLexicon& lex,
                            bool query_pending) = 0;
};

class RuleIntentBackend final : public IntentBackend {
public:
    Intent classify(const Utterance& u, const TaskLexicon& lex, bool query_pending) override {
        return classify_intent(u, lex, query_pending);
    }
};

}  // namespace errsense
