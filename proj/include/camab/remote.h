#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "camab/oracle.h"
#include "json.hpp"

namespace camab {

inline constexpr const char* kApiBaseEnv = "CAMAB_API_BASE";
inline constexpr const char* kApiKeyEnv = "CAMAB_API_KEY";

struct RemoteOptions {
  // Base URL; requests go to {endpoint}/v1/completions.
  std::string endpoint;
  std::string model;
  std::string api_key;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  std::chrono::milliseconds timeout{60000};
};

// Endpoint from CAMAB_API_BASE and key from CAMAB_API_KEY. Throws Error
// naming the variable when the base URL is unset.
RemoteOptions RemoteOptionsFromEnv(std::string model);

// Request body for echo scoring of `full_text`.
nlohmann::json EchoScoringRequest(const std::string& model,
                                  const std::string& full_text);

// Number of Unicode code points; server text offsets count code points.
size_t Utf8Length(std::string_view text);

// Pulls the response-token likelihoods out of an echo completion body.
// Tokens whose text offset is at or past `prompt_length` form the response
// region, which must hold exactly instance.n_tokens() tokens and must not
// start inside a token that straddles the prompt boundary. Throws
// AlignmentError on mismatch and TransportError on a malformed body.
TokenLikelihoods ExtractResponseLikelihoods(const nlohmann::json& body,
                                            size_t prompt_length,
                                            const Instance& instance);

// OpenAI-compatible completions client. Score renders the masked prompt,
// appends the response text, and requests echoed log-probabilities.
class RemoteOracle : public LikelihoodOracle, public ResponseGenerator {
 public:
  RemoteOracle(RemoteOptions options, std::shared_ptr<BudgetLedger> ledger);
  ~RemoteOracle() override;

  TokenLikelihoods Score(const Instance& instance,
                         const SubsetMask& mask) override;
  BudgetLedger& ledger() override { return *ledger_; }

  Generation Generate(const std::string& prompt, size_t max_tokens) override;

  // POSTs `body` to /v1/completions with bounded retries; returns the
  // parsed JSON body.
  nlohmann::json Post(const nlohmann::json& body);

 private:
  struct Transport;

  RemoteOptions options_;
  std::shared_ptr<BudgetLedger> ledger_;
  std::unique_ptr<Transport> transport_;
};

}  // namespace camab
