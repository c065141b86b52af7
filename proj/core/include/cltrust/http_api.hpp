#pragma once

#include <functional>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "cltrust/error.hpp"
#include "cltrust/service.hpp"

namespace cltrust {

struct ApiRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
};

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

int http_status(ErrorCode code);
nlohmann::json error_body(ErrorCode code, const std::string& message);

// Routes a request without any transport; the HTTP server delegates here.
ApiResponse dispatch(SessionService& service, const ApiRequest& request);

// Blocks until stop_server is called. Port 0 binds an ephemeral port; on_ready
// receives the bound port once the socket accepts connections.
void run_server(SessionService& service, const std::string& host, int port,
                std::function<void(int)> on_ready = {});
void stop_server();

}  // namespace cltrust
