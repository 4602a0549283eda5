#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <semaphore>
#include <string>

#include <json.hpp>

#include "t2sgrid/image.hpp"
#include "t2sgrid/prompt.hpp"

namespace t2sgrid {

struct BackendConfig {
  std::string endpoint_url;  // full chat-completions URL, http:// or https://
  std::string model_name;
  std::string auth_token_env = "OPENAI_API_KEY";
  int max_concurrent = 1;
  double timeout_s = 60.0;
  int retries = 2;
  double temperature = 0.0;
  int max_tokens = 256;
  double backoff_base_s = 1.0;
  double backoff_factor = 2.0;
  double backoff_jitter = 0.25;  // fraction of each delay, applied symmetrically
  std::uint64_t seed = 0;
  bool inline_images = true;  // base64 data URLs; otherwise file:// references
  std::filesystem::path audit_log;  // JSON-lines, one record per call; empty disables

  void validate() const;
};

struct TokenUsage {
  long long prompt = 0;
  long long completion = 0;
};

struct ModelReply {
  std::string text;
  double latency_s = 0.0;
  std::optional<TokenUsage> token_usage;
  int attempts = 1;
  bool no_target = false;  // mock backend only: no marker cell was found
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual ModelReply send(const PromptSequence& seq) = 0;
};

// OpenAI-style chat completion body: one user message whose content parts follow the
// prompt's element order, then the query.
nlohmann::json build_chat_request(const PromptSequence& seq, const BackendConfig& cfg);

std::string base64_encode(std::span<const std::uint8_t> bytes);

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendConfig cfg);

  ModelReply send(const PromptSequence& seq) override;

  int peak_in_flight() const noexcept { return peak_in_flight_.load(); }
  const BackendConfig& config() const noexcept { return cfg_; }

 private:
  double next_delay(int attempt);
  void audit(const nlohmann::json& record);

  BackendConfig cfg_;
  std::counting_semaphore<1024> slots_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_in_flight_{0};
  std::mutex rng_mutex_;
  std::mt19937_64 rng_;
  std::mutex audit_mutex_;
};

ModelReply send_prompt(const PromptSequence& seq, const BackendConfig& cfg);

inline constexpr Rgb kDefaultMarker{255, 0, 255};

// Marker colour named in the query as "#rrggbb", or kDefaultMarker.
Rgb marker_from_query(std::string_view query);

// Decodes each grid cell-by-cell using its window metadata and answers with the span of
// global frames whose cells are solid marker colour.
ModelReply mock_vtg_backend(const PromptSequence& seq);

class MockBackend final : public Backend {
 public:
  ModelReply send(const PromptSequence& seq) override { return mock_vtg_backend(seq); }
};

}  // namespace t2sgrid
