#include "camab/remote.h"

#include <cmath>
#include <cstdlib>
#include <thread>

#include "camab/errors.h"
#include "httplib.h"

namespace camab {

using nlohmann::json;

size_t Utf8Length(std::string_view text) {
  size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

RemoteOptions RemoteOptionsFromEnv(std::string model) {
  RemoteOptions options;
  const char* base = std::getenv(kApiBaseEnv);
  if (base == nullptr || *base == '\0') {
    throw Error(std::string("remote oracle requires ") + kApiBaseEnv +
                " to be set");
  }
  options.endpoint = base;
  if (const char* key = std::getenv(kApiKeyEnv)) options.api_key = key;
  options.model = std::move(model);
  return options;
}

json EchoScoringRequest(const std::string& model,
                        const std::string& full_text) {
  return {{"model", model},
          {"prompt", full_text},
          {"max_tokens", 0},
          {"echo", true},
          {"logprobs", 0}};
}

TokenLikelihoods ExtractResponseLikelihoods(const json& body,
                                            size_t prompt_length,
                                            const Instance& instance) {
  std::vector<double> offsets;
  std::vector<json> logprobs;
  std::vector<std::string> tokens;
  try {
    const json& lp = body.at("choices").at(0).at("logprobs");
    for (const json& o : lp.at("text_offset")) offsets.push_back(o.get<double>());
    for (const json& l : lp.at("token_logprobs")) logprobs.push_back(l);
    if (auto it = lp.find("tokens"); it != lp.end() && it->is_array()) {
      tokens = it->get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed completion body: ") + e.what(),
                         1);
  }
  if (offsets.size() != logprobs.size() ||
      (!tokens.empty() && tokens.size() != offsets.size())) {
    throw TransportError("completion body has inconsistent logprob arrays", 1);
  }

  size_t first = offsets.size();
  for (size_t i = 0; i < offsets.size(); ++i) {
    if (offsets[i] >= static_cast<double>(prompt_length)) {
      first = i;
      break;
    }
  }
  std::vector<std::string> region;
  for (size_t i = first; i < offsets.size(); ++i) {
    region.push_back(tokens.empty() ? std::string() : tokens[i]);
  }

  const bool straddles =
      first > 0 && !tokens.empty() &&
      offsets[first - 1] + static_cast<double>(Utf8Length(tokens[first - 1])) >
          static_cast<double>(prompt_length);
  if (straddles || region.size() != instance.n_tokens()) {
    throw AlignmentError(
        "response region of instance '" + instance.id + "' has " +
            std::to_string(region.size()) + " server tokens, expected " +
            std::to_string(instance.n_tokens()) +
            (straddles ? " (a token straddles the prompt boundary)" : ""),
        instance.response_tokens, region);
  }

  TokenLikelihoods out;
  for (size_t i = first; i < logprobs.size(); ++i) {
    if (!logprobs[i].is_number()) {
      throw TransportError("missing logprob for response token " +
                               std::to_string(i - first),
                           1);
    }
    out.values.push_back(ClampLikelihood(std::exp(logprobs[i].get<double>())));
  }
  return out;
}

// ----------------------------------------------------------------- transport

struct RemoteOracle::Transport {
  std::string scheme_host_port;
  std::string path;
};

namespace {

// Splits "scheme://host[:port][/prefix]" into the client address and the
// completions path.
std::pair<std::string, std::string> SplitEndpoint(const std::string& endpoint) {
  const size_t scheme_end = endpoint.find("://");
  const size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const size_t path_start = endpoint.find('/', host_start);
  std::string address = endpoint.substr(0, path_start);
  std::string prefix =
      path_start == std::string::npos ? "" : endpoint.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {address, prefix + "/v1/completions"};
}

bool Retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

RemoteOracle::RemoteOracle(RemoteOptions options,
                           std::shared_ptr<BudgetLedger> ledger)
    : options_(std::move(options)), ledger_(std::move(ledger)) {
  if (!ledger_) ledger_ = std::make_shared<BudgetLedger>();
  if (options_.endpoint.empty()) {
    throw ContractError("remote oracle endpoint is empty");
  }
  if (options_.max_attempts < 1) options_.max_attempts = 1;
  auto [address, path] = SplitEndpoint(options_.endpoint);
  transport_ = std::make_unique<Transport>(Transport{address, path});
}

RemoteOracle::~RemoteOracle() = default;

json RemoteOracle::Post(const json& body) {
  const std::string payload = body.dump();
  auto backoff = options_.initial_backoff;
  std::string last_failure;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    httplib::Client client(transport_->scheme_host_port);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    if (!options_.api_key.empty()) {
      client.set_bearer_token_auth(options_.api_key);
    }
    auto res = client.Post(transport_->path, payload, "application/json");
    if (!res) {
      last_failure = "request to " + options_.endpoint + " failed: " +
                     httplib::to_string(res.error());
    } else if (res->status == 401 || res->status == 403) {
      throw TransportError("authentication failed (HTTP " +
                               std::to_string(res->status) + "); check " +
                               kApiKeyEnv,
                           attempt);
    } else if (res->status < 200 || res->status >= 300) {
      last_failure = "HTTP " + std::to_string(res->status) + " from " +
                     options_.endpoint;
      if (!Retryable(res->status)) throw TransportError(last_failure, attempt);
    } else {
      try {
        return json::parse(res->body);
      } catch (const json::parse_error&) {
        throw TransportError("malformed JSON body from " + options_.endpoint,
                             attempt);
      }
    }
    if (attempt < options_.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw TransportError(last_failure, options_.max_attempts);
}

TokenLikelihoods RemoteOracle::Score(const Instance& instance,
                                     const SubsetMask& mask) {
  const std::string prompt = RenderPrompt(instance, mask);
  ledger_->Charge(mask.empty_set() || mask.full_set());
  const json body =
      Post(EchoScoringRequest(options_.model, prompt + instance.ResponseText()));
  return ExtractResponseLikelihoods(body, Utf8Length(prompt), instance);
}

Generation RemoteOracle::Generate(const std::string& prompt,
                                  size_t max_tokens) {
  const json request = {{"model", options_.model},
                        {"prompt", prompt},
                        {"max_tokens", max_tokens},
                        {"temperature", 0},
                        {"logprobs", 0}};
  const json body = Post(request);
  Generation out;
  try {
    const json& choice = body.at("choices").at(0);
    out.tokens = WhitespaceTokenize(choice.at("text").get<std::string>());
    if (auto it = choice.find("finish_reason");
        it != choice.end() && it->is_string()) {
      out.capped = it->get<std::string>() == "length";
    }
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed completion body: ") + e.what(),
                         1);
  }
  return out;
}

}  // namespace camab
