#pragma once

// Local completions server speaking the echo + logprobs wire format.

#include <atomic>
#include <cmath>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

namespace camab::testing {

class StubServer {
 public:
  enum class Mode {
    kNormal,
    kSplitResponse,  // tokenizes the first response word as two tokens
    kStraddle,       // glues the last prompt char onto the first response token
    kMalformed,
    kServerError,    // 500 for the first `failures` requests
    kUnauthorized,
  };

  StubServer() {
    server_.Post("/v1/completions",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   Handle(req, res);
                 });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_);
  }

  void set_mode(Mode mode, int failures = 0) {
    std::lock_guard lock(mu_);
    mode_ = mode;
    failures_ = failures;
  }
  void set_generation(std::string text, std::string finish_reason) {
    std::lock_guard lock(mu_);
    generation_ = std::move(text);
    finish_reason_ = std::move(finish_reason);
  }
  int requests() const { return requests_.load(); }
  nlohmann::json last_request() const {
    std::lock_guard lock(mu_);
    return last_request_;
  }
  nlohmann::json last_response() const {
    std::lock_guard lock(mu_);
    return last_response_;
  }

  // Deterministic logprob for a token at a position. The magnitude shrinks
  // as more text precedes the token, so adding context never hurts.
  static double LogProb(const std::string& token, size_t position) {
    const size_t h = std::hash<std::string>{}(token);
    const double base = 0.05 + static_cast<double>(h % 1000) / 400.0;
    return -base * 8.0 / (8.0 + static_cast<double>(position));
  }

  // Words with their leading spaces; newlines and other whitespace become
  // tokens of their own. Offsets count characters (ASCII input).
  static void Tokenize(const std::string& text, std::vector<std::string>& tokens,
                       std::vector<size_t>& offsets) {
    size_t i = 0;
    while (i < text.size()) {
      const size_t start = i;
      if (text[i] != ' ' && std::isspace(static_cast<unsigned char>(text[i]))) {
        ++i;
      } else {
        while (i < text.size() && text[i] == ' ') ++i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      }
      tokens.push_back(text.substr(start, i - start));
      offsets.push_back(start);
    }
  }

 private:
  void Handle(const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    std::lock_guard lock(mu_);
    const auto body = nlohmann::json::parse(req.body);
    last_request_ = body;
    if (mode_ == Mode::kUnauthorized) {
      res.status = 401;
      return;
    }
    if (mode_ == Mode::kServerError && failures_ > 0) {
      --failures_;
      res.status = 500;
      return;
    }
    if (mode_ == Mode::kMalformed) {
      res.set_content("{\"choices\": [", "application/json");
      return;
    }
    nlohmann::json out;
    if (!body.value("echo", false)) {
      out = {{"choices",
              {{{"text", generation_}, {"finish_reason", finish_reason_}}}}};
      last_response_ = out;
      res.set_content(out.dump(), "application/json");
      return;
    }
    const std::string text = body.at("prompt").get<std::string>();
    std::vector<std::string> tokens;
    std::vector<size_t> offsets;
    Tokenize(text, tokens, offsets);
    if (mode_ == Mode::kSplitResponse || mode_ == Mode::kStraddle) {
      // The response starts after the last newline of the prompt.
      const size_t response_start = text.rfind('\n') + 1;
      for (size_t i = 0; i < tokens.size(); ++i) {
        if (offsets[i] != response_start) continue;
        if (mode_ == Mode::kSplitResponse && tokens[i].size() > 1) {
          tokens.insert(tokens.begin() + i + 1, tokens[i].substr(1));
          offsets.insert(offsets.begin() + i + 1, offsets[i] + 1);
          tokens[i] = tokens[i].substr(0, 1);
        } else if (mode_ == Mode::kStraddle && i > 0) {
          tokens[i - 1] += tokens[i];
          tokens.erase(tokens.begin() + i);
          offsets.erase(offsets.begin() + i);
        }
        break;
      }
    }
    std::vector<nlohmann::json> logprobs;
    for (size_t i = 0; i < tokens.size(); ++i) {
      if (i == 0) {
        logprobs.push_back(nullptr);  // first token has no logprob
      } else {
        logprobs.push_back(LogProb(tokens[i], i));
      }
    }
    out = {{"choices",
            {{{"text", text},
              {"logprobs",
               {{"tokens", tokens},
                {"text_offset", offsets},
                {"token_logprobs", logprobs}}}}}}};
    last_response_ = out;
    res.set_content(out.dump(), "application/json");
  }

  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  mutable std::mutex mu_;
  Mode mode_ = Mode::kNormal;
  int failures_ = 0;
  std::atomic<int> requests_{0};
  std::string generation_ = "canned reply";
  std::string finish_reason_ = "stop";
  nlohmann::json last_request_;
  nlohmann::json last_response_;
};

}  // namespace camab::testing
