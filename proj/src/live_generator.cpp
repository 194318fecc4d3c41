// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

#include <json.hpp>

#include "tracescale/generator.hpp"

namespace tracescale {
namespace {

class ChatCompletionsGenerator final : public Generator {
 public:
  ChatCompletionsGenerator(LiveBackendConfig config, std::string key)
      : config_(std::move(config)), key_(std::move(key)) {
    const auto scheme_end = config_.endpoint.find("://");
    const auto host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_begin = config_.endpoint.find('/', host_begin);
    origin_ = config_.endpoint.substr(0, path_begin);
    base_path_ = path_begin == std::string::npos ? std::string() : config_.endpoint.substr(path_begin);
    while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
  }

  std::string name() const override { return config_.name; }

 protected:
  std::vector<std::string> do_generate(const GenerationRequest& request) override {
    nlohmann::json body{{"model", config_.model},
                        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
                        {"temperature", request.temperature},
                        {"n", request.n},
                        {"seed", request.seed}};
    httplib::Client client(origin_);
    const auto secs = static_cast<time_t>(config_.timeout_seconds);
    client.set_read_timeout(secs, 0);
    client.set_connection_timeout(30, 0);
    httplib::Headers headers{{"Authorization", "Bearer " + key_}};
    auto res = client.Post(base_path_ + "/chat/completions", headers, body.dump(), "application/json");
    if (!res) throw GeneratorError(config_.name + ": transport error: " + httplib::to_string(res.error()));
    if (res->status != 200) {
      throw GeneratorError(config_.name + ": HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 512));
    }
    std::vector<std::string> out;
    try {
      const auto j = nlohmann::json::parse(res->body);
      for (const auto& choice : j.at("choices")) {
        const auto& content = choice.at("message").at("content");
        out.push_back(content.is_string() ? content.get<std::string>() : std::string());
      }
    } catch (const nlohmann::json::exception& e) {
      throw GeneratorError(config_.name + ": malformed response: " + e.what());
    }
    return out;
  }

 private:
  LiveBackendConfig config_;
  std::string key_;
  std::string origin_;
  std::string base_path_;
};

}  // namespace

std::unique_ptr<Generator> make_live_generator(const LiveBackendConfig& config) {
  if (config.endpoint.empty()) throw ConfigError("live backend '" + config.name + "' has no endpoint");
  if (config.model.empty()) throw ConfigError("live backend '" + config.name + "' has no model");
  if (config.api_key_env.empty()) throw ConfigError("live backend '" + config.name + "' names no key variable");
  const char* key = std::getenv(config.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw ConfigError("environment variable " + config.api_key_env + " is not set");
  }
  return std::make_unique<ChatCompletionsGenerator>(config, key);
}

}  // namespace tracescale
