#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "ldsim/gateway.hpp"

namespace ldsim {

using nlohmann::json;

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) {
        throw ConfigError("http backend requires a base_url");
    }
    if (!config_.api_key_env.empty()) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        api_key_ = key ? key : "";
    }
}

std::string HttpBackend::complete(TemplateId /*id*/, const PromptArgs& /*args*/,
                                  const std::string& rendered_prompt) {
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);

    httplib::Headers headers;
    if (!api_key_.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key_);
    }
    json body{
        {"model", config_.model},
        {"messages", json::array({json{{"role", "user"}, {"content", rendered_prompt}}})},
        {"temperature", config_.temperature},
    };
    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) {
        throw TransportError("http request failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw TransportError("http status " + std::to_string(res->status) + ": " +
                             res->body.substr(0, 200));
    }
    try {
        json doc = json::parse(res->body);
        return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("unexpected completion payload: ") + e.what());
    }
}

}  // namespace ldsim
