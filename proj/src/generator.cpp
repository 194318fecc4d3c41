// Copyright 2026 The tracescale Authors
// SPDX-License-Identifier: Apache-2.0

#include "tracescale/generator.hpp"

#include <algorithm>

#include <json.hpp>

#include "tracescale/rng.hpp"
#include "tracescale/text.hpp"

namespace tracescale {

std::vector<std::string> Generator::generate(const GenerationRequest& request) {
  calls_.fetch_add(1);
  auto out = do_generate(request);
  if (out.size() != request.n) {
    throw GeneratorError(name() + ": expected " + std::to_string(request.n) + " completions, got " +
                         std::to_string(out.size()));
  }
  return out;
}

namespace {

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return {};
  const auto& v = j.at(key);
  if (v.is_string()) return {v.get<std::string>()};
  return v.get<std::vector<std::string>>();
}

StochasticReply parse_stochastic(const nlohmann::json& j) {
  StochasticReply s;
  s.success_probability = j.at("success_probability").get<double>();
  if (s.success_probability < 0.0 || s.success_probability > 1.0) {
    throw std::invalid_argument("success_probability must lie in [0, 1]");
  }
  const auto g = j.value("granularity", std::string("per_sample"));
  if (g == "per_sample") {
    s.granularity = StochasticReply::Granularity::per_sample;
  } else if (g == "per_call") {
    s.granularity = StochasticReply::Granularity::per_call;
  } else {
    throw std::invalid_argument("unknown granularity: " + g);
  }
  s.success = j.at("success").get<std::string>();
  for (const auto& f : j.value("failures", nlohmann::json::array())) {
    FailureOption opt;
    opt.reply = f.at("reply").get<std::string>();
    if (f.contains("weight_by_round")) opt.weight_by_round = f.at("weight_by_round").get<std::vector<double>>();
    if (f.contains("weight")) opt.weight_by_round = {f.at("weight").get<double>()};
    if (opt.weight_by_round.empty()) throw std::invalid_argument("failure option needs a weight");
    s.failures.push_back(std::move(opt));
  }
  if (s.failures.empty()) throw std::invalid_argument("stochastic reply needs at least one failure option");
  return s;
}

bool rule_matches(const ScriptRule& rule, std::string_view prompt, int round) {
  if (round < rule.min_round || round > rule.max_round) return false;
  for (const auto& s : rule.all_of) {
    if (!text::contains(prompt, s)) return false;
  }
  for (const auto& s : rule.none_of) {
    if (text::contains(prompt, s)) return false;
  }
  return true;
}

const std::string& pick_failure(const StochasticReply& s, int round, rng::Stream& stream) {
  const auto idx = static_cast<std::size_t>(std::max(round, 1) - 1);
  std::vector<double> weights;
  double total = 0.0;
  for (const auto& f : s.failures) {
    const double w = f.weight_by_round[std::min(idx, f.weight_by_round.size() - 1)];
    weights.push_back(std::max(w, 0.0));
    total += weights.back();
  }
  if (total <= 0.0) return s.failures.back().reply;
  double u = stream.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return s.failures[i].reply;
    u -= weights[i];
  }
  return s.failures.back().reply;
}

}  // namespace

Script parse_script(std::string_view json_text) {
  const auto j = nlohmann::json::parse(json_text);
  Script script;
  script.round_marker = j.value("round_marker", script.round_marker);
  script.default_reply = j.value("default_reply", std::string());
  for (const auto& r : j.value("rules", nlohmann::json::array())) {
    ScriptRule rule;
    rule.all_of = string_list(r, "all_of");
    rule.none_of = string_list(r, "none_of");
    rule.min_round = r.value("min_round", 1);
    rule.max_round = r.value("max_round", INT_MAX);
    rule.replies = string_list(r, "replies");
    if (r.contains("reply")) rule.replies.push_back(r.at("reply").get<std::string>());
    if (r.contains("stochastic")) rule.stochastic = parse_stochastic(r.at("stochastic"));
    if (rule.replies.empty() && !rule.stochastic) {
      throw std::invalid_argument("script rule needs replies or a stochastic reply");
    }
    script.rules.push_back(std::move(rule));
  }
  return script;
}

ScriptedGenerator::ScriptedGenerator(Script script, std::string name)
    : script_(std::move(script)), name_(std::move(name)) {}

int ScriptedGenerator::round_of(std::string_view prompt) const {
  return 1 + static_cast<int>(text::count_occurrences(prompt, script_.round_marker));
}

std::vector<std::string> ScriptedGenerator::do_generate(const GenerationRequest& request) {
  const int round = round_of(request.prompt);
  const ScriptRule* rule = nullptr;
  for (const auto& r : script_.rules) {
    if (rule_matches(r, request.prompt, round)) {
      rule = &r;
      break;
    }
  }
  std::vector<std::string> out;
  out.reserve(request.n);
  const std::uint64_t prompt_key = rng::fnv1a(request.prompt);
  bool call_success = false;
  if (rule && rule->stochastic && rule->stochastic->granularity == StochasticReply::Granularity::per_call) {
    rng::Stream call_stream(rng::derive({request.seed, prompt_key}));
    call_success = call_stream.uniform() < rule->stochastic->success_probability;
  }
  for (std::size_t i = 0; i < request.n; ++i) {
    if (rule == nullptr) {
      out.push_back(script_.default_reply);
      continue;
    }
    if (!rule->stochastic) {
      out.push_back(rule->replies[i % rule->replies.size()]);
      continue;
    }
    const auto& s = *rule->stochastic;
    rng::Stream stream(rng::derive({request.seed, prompt_key, i}));
    bool success = false;
    if (s.granularity == StochasticReply::Granularity::per_sample) {
      success = stream.uniform() < s.success_probability;
    } else {
      success = call_success && i == 0;
    }
    out.push_back(success ? s.success : pick_failure(s, round, stream));
  }
  return out;
}

}  // namespace tracescale
