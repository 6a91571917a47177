#pragma once

#include <memory>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "errsense/intent.hpp"

namespace errsense {

/// Remote classifier adapter.  POSTs {text, task, query_pending} to an
/// HTTP endpoint and expects {category, payload} back.  Any failure --
/// connection refused, timeout, malformed reply, unknown category -- falls
/// back to the rule engine so the pipeline never stalls on the network.
class HttpIntentBackend final : public IntentBackend {
public:
    HttpIntentBackend(std::string base_url, std::string path, Duration timeout_ms = 2000)
        : base_url_(std::move(base_url)), path_(std::move(path)), timeout_ms_(timeout_ms) {}

    Intent classify(const Utterance& u, const TaskLexicon& lex, bool query_pending) override {
        httplib::Client client(base_url_);
        client.set_connection_timeout(0, timeout_ms_ * 1000);
        client.set_read_timeout(0, timeout_ms_ * 1000);
        client.set_write_timeout(0, timeout_ms_ * 1000);

        nlohmann::json req = {
            {"text", u.text}, {"task", lex.task_name}, {"query_pending", query_pending}};
        auto res = client.Post(path_, req.dump(), "application/json");
        if (!res || res->status != 200) return fallback_.classify(u, lex, query_pending);

        nlohmann::json body = nlohmann::json::parse(res->body, nullptr, false);
        if (body.is_discarded() || !body.contains("category"))
            return fallback_.classify(u, lex, query_pending);
        auto parsed = parse_remote(body, u, lex, query_pending);
        if (!parsed) return fallback_.classify(u, lex, query_pending);
        return *parsed;
    }

private:
    std::optional<Intent> parse_remote(const nlohmann::json& body, const Utterance& u,
                                       const TaskLexicon& lex, bool query_pending) {
        const std::string cat = body.at("category").get<std::string>();
        const nlohmann::json payload =
            body.contains("payload") ? body.at("payload") : nlohmann::json::object();
        try {
            if (cat == "action_request") {
                ActionRequestPayload p;
                p.action = payload.value("action", "unspecified");
                if (payload.contains("parameters")) {
                    for (const auto& [k, v] : payload.at("parameters").items())
                        p.parameters[k] = v.get<std::string>();
                }
                return Intent{IntentCategory::ActionRequest, p};
            }
            if (cat == "explicit_error_report") {
                ErrorReportPayload p;
                p.description = payload.value("description", normalize_text(u.text));
                return Intent{IntentCategory::ExplicitErrorReport, p};
            }
            if (cat == "query_response") {
                QueryResponsePayload p;
                const std::string pol = payload.value("polarity", "unclear");
                if (pol == "affirmative") p.polarity = Polarity::Affirmative;
                else if (pol == "negative") p.polarity = Polarity::Negative;
                else if (pol == "unclear") p.polarity = Polarity::Unclear;
                else return std::nullopt;
                if (payload.contains("supplemental"))
                    p.supplemental = payload.at("supplemental").get<std::string>();
                return Intent{IntentCategory::QueryResponse, p};
            }
            if (cat == "implicit_error_reaction")
                return Intent{IntentCategory::ImplicitErrorReaction, {}};
            if (cat == "irrelevant") return Intent{IntentCategory::Irrelevant, {}};
        } catch (const nlohmann::json::exception&) {
            return std::nullopt;
        }
        (void)query_pending;
        return std::nullopt;
    }

    std::string base_url_;
    std::string path_;
    Duration timeout_ms_;
    RuleIntentBackend fallback_;
};

}  // namespace errsense
