#include "cltrust/http_api.hpp"

#include <atomic>
#include <sstream>
#include <thread>
#include <vector>

#include <httplib.h>

namespace cltrust {

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotFound: return 404;
        case ErrorCode::Stage:
        case ErrorCode::Protocol:
        case ErrorCode::Duplicate:
        case ErrorCode::Conflict: return 409;
        case ErrorCode::Io:
        case ErrorCode::Infeasible: return 500;
        default: return 400;
    }
}

nlohmann::json error_body(ErrorCode code, const std::string& message) {
    return {{"error", {{"code", std::string(to_string(code))}, {"message", message}}}};
}

namespace {

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::stringstream in(path);
    for (std::string part; std::getline(in, part, '/');) {
        if (!part.empty()) parts.push_back(part);
    }
    return parts;
}

nlohmann::json parse_body(const std::string& body) {
    if (body.empty()) return nlohmann::json::object();
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::Parse, "request body is not valid JSON");
    if (!j.is_object()) throw Error(ErrorCode::Parse, "request body must be a JSON object");
    return j;
}

template <typename T>
T field(const nlohmann::json& j, const char* name) {
    if (!j.contains(name)) throw Error(ErrorCode::InvalidArgument, std::string("missing field ") + name);
    try {
        return j.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::InvalidArgument, std::string("field ") + name + " has the wrong type");
    }
}

ApiResponse route(SessionService& service, const ApiRequest& req) {
    const auto parts = split_path(req.path);
    const auto& m = req.method;
    if (parts.size() == 1 && parts[0] == "sessions" && m == "POST") {
        auto body = parse_body(req.body);
        auto condition = strategy_from_string(field<std::string>(body, "condition"));
        std::uint64_t seed = body.contains("seed") ? field<std::uint64_t>(body, "seed") : 0;
        auto id = service.create_session(field<std::string>(body, "participant"), condition, seed);
        auto s = service.snapshot(id);
        return {201, {{"session_id", id}, {"condition", std::string(to_string(s->condition))},
                      {"stage", std::string(to_string(s->stage))}}};
    }
    if (parts.size() == 1 && parts[0] == "export" && m == "GET") {
        auto it = req.query.find("session");
        if (it != req.query.end() && !it->second.empty()) return {200, service.export_session(it->second)};
        return {200, service.export_all()};
    }
    if (parts.size() >= 3 && parts[0] == "sessions") {
        const auto& id = parts[1];
        const auto& leaf = parts[2];
        if (parts.size() == 3 && leaf == "next" && m == "GET") return {200, service.next_step(id)};
        if (parts.size() == 3 && leaf == "decisions" && m == "POST") {
            auto body = parse_body(req.body);
            DecisionSubmission sub;
            sub.case_id = field<std::int64_t>(body, "case_id");
            sub.decision = label_from_string(field<std::string>(body, "decision"));
            if (body.contains("phase")) sub.phase = field<std::string>(body, "phase");
            if (body.contains("perceived_higher") && !body["perceived_higher"].is_null()) {
                sub.perceived_higher = perceived_from_string(field<std::string>(body, "perceived_higher"));
            }
            return {200, service.submit_decision(id, sub)};
        }
        if (parts.size() == 3 && leaf == "rules" && m == "GET") return {200, service.get_rules(id)};
        if (parts.size() == 3 && leaf == "rules" && m == "PUT") {
            auto body = parse_body(req.body);
            return {200, service.put_edit(id, edit_from_json(body, service.schema()))};
        }
        if (parts.size() == 4 && leaf == "rules" && parts[3] == "check" && m == "POST") {
            auto body = parse_body(req.body);
            const auto& rule = body.contains("rule") ? body.at("rule") : body;
            return {200, to_json(service.check(id, rule_from_json(rule, service.schema())))};
        }
        if (parts.size() == 3 && leaf == "survey" && m == "POST") {
            auto body = parse_body(req.body);
            return {200, service.submit_survey(id, body.contains("answers") ? body.at("answers") : body)};
        }
        if (parts.size() == 3 && leaf == "state" && m == "GET") {
            auto s = service.snapshot(id);
            return {200, session_state_json(*s, service.schema())};
        }
    }
    throw Error(ErrorCode::NotFound, "no route for " + m + " " + req.path);
}

}  // namespace

ApiResponse dispatch(SessionService& service, const ApiRequest& request) {
    try {
        return route(service, request);
    } catch (const Error& e) {
        return {http_status(e.code()), error_body(e.code(), e.what())};
    } catch (const nlohmann::json::exception& e) {
        return {400, error_body(ErrorCode::Parse, e.what())};
    } catch (const std::exception& e) {
        return {500, error_body(ErrorCode::Io, e.what())};
    }
}

namespace {

std::atomic<httplib::Server*> active_server{nullptr};

}  // namespace

void run_server(SessionService& service, const std::string& host, int port, std::function<void(int)> on_ready) {
    httplib::Server server;
    auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
        ApiRequest api{req.method, req.path, {}, req.body};
        for (const auto& [k, v] : req.params) api.query[k] = v;
        auto out = dispatch(service, api);
        res.status = out.status;
        res.set_content(out.body.dump(), "application/json");
    };
    const std::string any = R"(/.*)";
    server.Get(any, handler);
    server.Post(any, handler);
    server.Put(any, handler);
    const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error(ErrorCode::Io, "cannot listen on " + host + ":" + std::to_string(port));
    active_server = &server;
    std::thread notifier;
    if (on_ready) {
        notifier = std::thread([&server, bound, cb = std::move(on_ready)] {
            server.wait_until_ready();
            if (server.is_running()) cb(bound);
        });
    }
    const bool ok = server.listen_after_bind();
    active_server = nullptr;
    if (notifier.joinable()) notifier.join();
    if (!ok) throw Error(ErrorCode::Io, "server on port " + std::to_string(bound) + " stopped with an error");
}

void stop_server() {
    if (auto* s = active_server.load()) s->stop();
}

}  // namespace cltrust
