#include "t2sgrid/model_client.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>

#include <httplib.h>

#include "t2sgrid/error.hpp"
#include "t2sgrid/log.hpp"

namespace t2sgrid {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

void BackendConfig::validate() const {
  if (max_concurrent < 1 || max_concurrent > 1024) {
    throw Error(Errc::kConfigError, "max_concurrent must be in [1, 1024]");
  }
  if (!(timeout_s > 0.0)) throw Error(Errc::kConfigError, "timeout must be > 0");
  if (retries < 0) throw Error(Errc::kConfigError, "retries must be >= 0");
  if (backoff_base_s < 0.0 || backoff_factor < 1.0 || backoff_jitter < 0.0 || backoff_jitter >= 1.0) {
    throw Error(Errc::kConfigError, "invalid backoff settings");
  }
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i < bytes.size()) {
    std::uint32_t v = bytes[i] << 16;
    if (i + 1 < bytes.size()) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += (i + 1 < bytes.size()) ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

namespace {

json image_part(const PromptElement& e, bool inline_images) {
  std::string url;
  if (inline_images) {
    const Image image = e.inline_image ? *e.inline_image : read_image(e.image_path);
    url = "data:image/png;base64," + base64_encode(encode_png(image));
  } else {
    if (e.image_path.empty()) throw Error(Errc::kBackendError, "file reference requested for inline image");
    url = "file://" + std::filesystem::absolute(e.image_path).string();
  }
  return {{"type", "image_url"}, {"image_url", {{"url", url}}}};
}

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

Endpoint split_url(const std::string& url) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) throw Error(Errc::kConfigError, "bad endpoint url '" + url + "'");
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

std::string extract_reply_text(const json& body) {
  const json& content = body.at("choices").at(0).at("message").at("content");
  if (content.is_string()) return content.get<std::string>();
  std::string text;
  for (const json& part : content) {
    if (part.value("type", "") == "text") text += part.value("text", "");
  }
  return text;
}

bool is_transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

json build_chat_request(const PromptSequence& seq, const BackendConfig& cfg) {
  seq.validate();
  json content = json::array();
  for (const PromptElement& e : seq.elements) {
    if (e.is_text()) {
      content.push_back({{"type", "text"}, {"text", e.text}});
    } else {
      content.push_back(image_part(e, cfg.inline_images));
    }
  }
  content.push_back({{"type", "text"}, {"text", seq.query_text}});
  json messages = json::array();
  if (seq.system_text) messages.push_back({{"role", "system"}, {"content", *seq.system_text}});
  messages.push_back({{"role", "user"}, {"content", std::move(content)}});
  return {{"model", cfg.model_name},
          {"messages", std::move(messages)},
          {"temperature", cfg.temperature},
          {"max_tokens", cfg.max_tokens}};
}

HttpBackend::HttpBackend(BackendConfig cfg)
    : cfg_(std::move(cfg)), slots_(cfg_.max_concurrent), rng_(cfg_.seed) {
  cfg_.validate();
}

double HttpBackend::next_delay(int attempt) {
  const double base = cfg_.backoff_base_s * std::pow(cfg_.backoff_factor, attempt);
  std::lock_guard<std::mutex> lock(rng_mutex_);
  std::uniform_real_distribution<double> jitter(-cfg_.backoff_jitter, cfg_.backoff_jitter);
  return base * (1.0 + jitter(rng_));
}

void HttpBackend::audit(const json& record) {
  if (cfg_.audit_log.empty()) return;
  std::lock_guard<std::mutex> lock(audit_mutex_);
  std::ofstream out(cfg_.audit_log, std::ios::app);
  if (!out) {
    log::warn("cannot append to audit log " + cfg_.audit_log.string());
    return;
  }
  out << record.dump() << '\n';
}

ModelReply HttpBackend::send(const PromptSequence& seq) {
  const std::string body = build_chat_request(seq, cfg_).dump();
  const Endpoint endpoint = split_url(cfg_.endpoint_url);

  slots_.acquire();
  const int now = ++in_flight_;
  for (int peak = peak_in_flight_.load(); now > peak && !peak_in_flight_.compare_exchange_weak(peak, now);) {
  }
  struct Release {
    HttpBackend* self;
    ~Release() {
      --self->in_flight_;
      self->slots_.release();
    }
  } release{this};

  httplib::Headers headers;
  if (!cfg_.auth_token_env.empty()) {
    if (const char* token = std::getenv(cfg_.auth_token_env.c_str()); token && *token) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }

  const auto seconds = std::chrono::duration<double>(cfg_.timeout_s);
  const auto call_start = Clock::now();
  json attempts_log = json::array();
  std::string last_error;
  bool last_was_timeout = false;

  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(next_delay(attempt - 1)));
    }
    httplib::Client client(endpoint.scheme_host_port);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(seconds));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(seconds));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(seconds));

    const auto attempt_start = Clock::now();
    auto res = client.Post(endpoint.path, headers, body, "application/json");
    const double elapsed = std::chrono::duration<double>(Clock::now() - attempt_start).count();

    if (!res) {
      const auto err = res.error();
      last_was_timeout = err == httplib::Error::ConnectionTimeout ||
                         (err == httplib::Error::Read && elapsed >= cfg_.timeout_s * 0.95);
      last_error = httplib::to_string(err);
      attempts_log.push_back({{"attempt", attempt + 1}, {"error", last_error}});
      continue;
    }
    attempts_log.push_back({{"attempt", attempt + 1}, {"status", res->status}});
    if (res->status == 200) {
      ModelReply reply;
      try {
        const json parsed = json::parse(res->body);
        reply.text = extract_reply_text(parsed);
        if (parsed.contains("usage") && parsed["usage"].is_object()) {
          reply.token_usage = TokenUsage{parsed["usage"].value("prompt_tokens", 0LL),
                                         parsed["usage"].value("completion_tokens", 0LL)};
        }
      } catch (const json::exception& e) {
        audit({{"endpoint", cfg_.endpoint_url}, {"model", cfg_.model_name}, {"attempts", attempts_log},
               {"error", std::string("malformed response: ") + e.what()}});
        throw Error(Errc::kBackendError, cfg_.endpoint_url + ": malformed response: " + e.what());
      }
      reply.latency_s = std::chrono::duration<double>(Clock::now() - call_start).count();
      reply.attempts = attempt + 1;
      audit({{"endpoint", cfg_.endpoint_url}, {"model", cfg_.model_name}, {"attempts", attempts_log},
             {"n_images", seq.image_count()}, {"latency_s", reply.latency_s}, {"reply", reply.text}});
      return reply;
    }
    last_was_timeout = res->status == 408;
    last_error = "HTTP " + std::to_string(res->status);
    if (!is_transient_status(res->status)) break;
  }

  audit({{"endpoint", cfg_.endpoint_url}, {"model", cfg_.model_name}, {"attempts", attempts_log},
         {"n_images", seq.image_count()}, {"error", last_error}});
  const std::string what = cfg_.endpoint_url + ": " + last_error + " after " +
                           std::to_string(attempts_log.size()) + " attempt(s)";
  throw Error(last_was_timeout ? Errc::kTimeoutError : Errc::kBackendError, what);
}

ModelReply send_prompt(const PromptSequence& seq, const BackendConfig& cfg) {
  HttpBackend backend(cfg);
  return backend.send(seq);
}

Rgb marker_from_query(std::string_view query) {
  static const std::regex kHex(R"(#([0-9a-fA-F]{6})\b)");
  const std::string q(query);
  std::smatch m;
  if (!std::regex_search(q, m, kHex)) return kDefaultMarker;
  const unsigned long v = std::stoul(m[1].str(), nullptr, 16);
  return {static_cast<std::uint8_t>((v >> 16) & 0xFF), static_cast<std::uint8_t>((v >> 8) & 0xFF),
          static_cast<std::uint8_t>(v & 0xFF)};
}

ModelReply mock_vtg_backend(const PromptSequence& seq) {
  const auto start = Clock::now();
  seq.validate();
  const Rgb marker = marker_from_query(seq.query_text);

  int lo = -1, hi = -1;
  for (const PromptElement& e : seq.elements) {
    if (!e.is_image()) continue;
    if (!e.grid) throw Error(Errc::kBackendError, "mock backend needs grid metadata on every image");
    const GridRecord& rec = *e.grid;
    GridImage grid;
    grid.image = e.inline_image ? *e.inline_image : read_image(e.image_path);
    GridConfig layout{rec.cols, rec.rows, rec.cols * rec.rows, rec.gutter_px};
    grid.cell_size = {(grid.image.width() - (rec.cols - 1) * rec.gutter_px) / rec.cols,
                      (grid.image.height() - (rec.rows - 1) * rec.gutter_px) / rec.rows};
    const int real = rec.cols * rec.rows - rec.pad_count;
    for (int local = 0; local < real; ++local) {
      const Image cell = extract_cell(grid, local / rec.cols, local % rec.cols, layout);
      Rgb colour;
      if (cell.is_solid(&colour) && colour == marker) {
        const int global = rec.start_frame + local;
        lo = lo < 0 ? global : std::min(lo, global);
        hi = std::max(hi, global);
      }
    }
  }

  ModelReply reply;
  if (lo < 0) {
    reply.text = render_answer(0, 0);
    reply.no_target = true;
  } else {
    reply.text = render_answer(lo, hi);
  }
  reply.latency_s = std::chrono::duration<double>(Clock::now() - start).count();
  return reply;
}

}  // namespace t2sgrid
