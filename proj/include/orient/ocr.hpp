#pragma once

#include <array>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

// resolv.h (pulled in by httplib) defines _res, which Eigen uses as a
// parameter name. httplib itself never refers to it.
#undef _res

#include "orient/dataset.hpp"
#include "orient/error.hpp"
#include "orient/image.hpp"
#include "orient/image_io.hpp"
#include "orient/metrics.hpp"
#include "orient/rng.hpp"
#include "orient/synth.hpp"

namespace orient {

inline constexpr const char* kOcrPrompt =
    "You are an OCR engine. You job is to extract the exact text from the given image. Preserve the text "
    "formatting, including line breaks, spaces, and any symbols or special characters. Respond in plain text "
    "format.";

enum class EngineKind { mock, http };

struct OcrEngineSpec {
  EngineKind kind = EngineKind::mock;
  std::string endpoint;       // http only, e.g. http://127.0.0.1:8080/ocr
  std::string auth_env;       // name of the env var holding a bearer token; empty for none
  std::string prompt = kOcrPrompt;
  double timeout_s = 30.0;    // per attempt
  int max_retries = 2;
  double backoff_s = 0.25;    // first retry delay, doubled each time
  std::array<double, 4> corruption{0.5, 0.0, 0.5, 0.4};  // mock, indexed by label

  void validate() const {
    if (kind == EngineKind::http && endpoint.empty()) throw InputError("http OCR engine needs an endpoint");
    if (!(timeout_s > 0) || max_retries < 0 || backoff_s < 0) {
      throw InputError("OCR engine: timeout must be positive, retries and backoff non-negative");
    }
    for (double q : corruption) {
      if (!(q >= 0.0 && q <= 1.0)) throw InputError("OCR engine: corruption rates must lie in [0, 1]");
    }
  }
};

// Engine failures. The bench excludes samples that raise these.
class OcrError : public Error {
 public:
  using Error::Error;
};
class OcrTimeoutError : public OcrError {
 public:
  using OcrError::OcrError;
};
class OcrStatusError : public OcrError {
 public:
  OcrStatusError(int status, const std::string& msg) : OcrError(msg), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};
class OcrMalformedResponse : public OcrError {
 public:
  OcrMalformedResponse() : OcrError("malformed OCR response") {}
};

struct OcrResult {
  std::string text;
  int retries = 0;
};

class OcrEngine {
 public:
  virtual ~OcrEngine() = default;
  // `image` is what the engine sees; `presented` is its orientation
  // relative to upright.
  virtual OcrResult recognize(const SampleRecord& record, const ImageBuffer& image, RotationClass presented) const = 0;
  virtual nlohmann::json describe() const = 0;
};

inline const std::u32string& mock_substitution_alphabet() {
  static const std::u32string a = U"abcdefghijklmnopqrstuvwxyz0123456789#@%&";
  return a;
}

// Deterministic stand-in for an OCR model: exact on upright input,
// otherwise per-code-point substitutions at rate q(presented) followed by a
// repeated tail of up to 10 code points.
inline std::string mock_ocr(const SampleRecord& record, RotationClass presented, const OcrEngineSpec& spec) {
  if (!record.gt_text) throw InputError("mock OCR: record " + record.id + " has no gt_text");
  if (presented.is_upright()) return *record.gt_text;
  const double q = spec.corruption[static_cast<std::size_t>(presented.label())];
  Rng rng = derive_rng(mix_seed(fnv1a(record.id), static_cast<std::uint64_t>(presented.label())), "mock-ocr");
  const auto& alphabet = mock_substitution_alphabet();
  std::u32string text = utf8_code_points(*record.gt_text);
  for (char32_t& c : text) {
    if (!bernoulli(rng, q)) continue;
    auto pick = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(alphabet.size()) - 1));
    if (alphabet[pick] == c) pick = (pick + 1) % alphabet.size();
    c = alphabet[pick];
  }
  const std::size_t tail = std::min<std::size_t>(10, text.size());
  text += text.substr(text.size() - tail);
  return detail::to_utf8(text);
}

class MockOcrEngine final : public OcrEngine {
 public:
  explicit MockOcrEngine(OcrEngineSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

  OcrResult recognize(const SampleRecord& record, const ImageBuffer&, RotationClass presented) const override {
    return {mock_ocr(record, presented, spec_), 0};
  }

  nlohmann::json describe() const override {
    return {{"kind", "mock"}, {"corruption", spec_.corruption}};
  }

 private:
  OcrEngineSpec spec_;
};

struct ParsedEndpoint {
  std::string scheme_host_port;
  std::string path;
};

inline ParsedEndpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InputError("OCR endpoint must be an absolute URL: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http") throw InputError("OCR endpoint scheme '" + scheme + "' is not supported (use http)");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

// Generic JSON-over-HTTP OCR client: POST {prompt, image (base64 PNG)},
// expects {text}. Retries transport errors, 429 and 5xx with exponential
// backoff; the whole call is bounded by timeout * (retries + 1).
class HttpOcrEngine final : public OcrEngine {
 public:
  explicit HttpOcrEngine(OcrEngineSpec spec) : spec_(std::move(spec)), target_(parse_endpoint(spec_.endpoint)) {
    spec_.validate();
  }

  OcrResult recognize(const SampleRecord&, const ImageBuffer& image, RotationClass) const override {
    return recognize_image(image);
  }

  OcrResult recognize_image(const ImageBuffer& image) const {
    const auto png = encode_png(image);
    const nlohmann::json body{{"prompt", spec_.prompt},
                              {"image", httplib::detail::base64_encode(std::string(png.begin(), png.end()))}};
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!spec_.auth_env.empty()) {
      const char* token = std::getenv(spec_.auth_env.c_str());
      if (!token || !*token) throw InputError("OCR auth variable " + spec_.auth_env + " is not set");
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    using clock = std::chrono::steady_clock;
    const auto per_attempt = std::chrono::duration<double>(spec_.timeout_s);
    const auto deadline = clock::now() + per_attempt * (spec_.max_retries + 1);
    double backoff = spec_.backoff_s;
    std::string last_failure = "no attempt made";
    bool last_was_timeout = false;
    int last_status = 0;

    for (int attempt = 0; attempt <= spec_.max_retries; ++attempt) {
      if (attempt > 0) {
        const auto wait = std::chrono::duration<double>(backoff);
        if (clock::now() + wait >= deadline) break;
        std::this_thread::sleep_for(wait);
        backoff *= 2.0;
      }
      const std::chrono::duration<double> left = deadline - clock::now();
      if (left.count() <= 0) break;
      const auto budget = std::chrono::duration_cast<std::chrono::microseconds>(std::min(left, per_attempt));

      httplib::Client client(target_.scheme_host_port);
      client.set_connection_timeout(budget);
      client.set_read_timeout(budget);
      client.set_write_timeout(budget);
      auto res = client.Post(target_.path, headers, payload, "application/json");
      if (!res) {
        const auto err = res.error();
        last_was_timeout = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout;
        last_status = 0;
        last_failure = "transport error: " + httplib::to_string(err);
        continue;
      }
      last_was_timeout = false;
      if (res->status >= 200 && res->status < 300) return {parse_text(res->body), attempt};
      last_status = res->status;
      last_failure = "OCR endpoint returned HTTP " + std::to_string(res->status);
      if (res->status != 429 && res->status < 500) throw OcrStatusError(res->status, last_failure);
    }
    if (last_was_timeout || (last_status == 0 && clock::now() >= deadline)) {
      throw OcrTimeoutError("OCR request timed out (" + last_failure + ")");
    }
    if (last_status != 0) throw OcrStatusError(last_status, last_failure + " after retries");
    throw OcrError("OCR request failed: " + last_failure);
  }

  nlohmann::json describe() const override {
    return {{"kind", "http"},
            {"endpoint", spec_.endpoint},
            {"auth_env", spec_.auth_env},
            {"timeout_s", spec_.timeout_s},
            {"max_retries", spec_.max_retries}};
  }

 private:
  static std::string parse_text(const std::string& body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      throw OcrMalformedResponse();
    }
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) throw OcrMalformedResponse();
    return j["text"].get<std::string>();
  }

  OcrEngineSpec spec_;
  ParsedEndpoint target_;
};

inline std::unique_ptr<OcrEngine> make_engine(const OcrEngineSpec& spec) {
  if (spec.kind == EngineKind::http) return std::make_unique<HttpOcrEngine>(spec);
  return std::make_unique<MockOcrEngine>(spec);
}

inline EngineKind parse_engine_kind(const std::string& s) {
  if (s == "mock") return EngineKind::mock;
  if (s == "http") return EngineKind::http;
  throw InputError("unknown OCR engine '" + s + "' (expected mock or http)");
}

}  // namespace orient
