#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <string>
#include <string_view>

namespace shortlens {

/// Fixed route names; every model endpoint lives under one base URL.
namespace routes {
inline constexpr std::string_view kProbe = "/probe";
inline constexpr std::string_view kTranscribe = "/transcribe";
inline constexpr std::string_view kParse = "/parse";
inline constexpr std::string_view kAbsa = "/absa";
inline constexpr std::string_view kScene = "/scene";
inline constexpr std::string_view kInfo = "/info";
}  // namespace routes

struct HttpReply {
  int status = 0;
  std::string body;
  std::string content_type;
  std::map<std::string, std::string> headers;

  bool ok() const { return status >= 200 && status < 300; }
  std::string header(const std::string& name) const;
};

/// Request/response channel to the model backend. Implementations must be
/// safe to call from several threads at once.
class Transport {
 public:
  virtual ~Transport() = default;
  /// Throws TransportError when no reply could be obtained at all.
  virtual HttpReply post(std::string_view route, const std::string& body,
                         std::string_view content_type = "application/json") = 0;
  virtual HttpReply get(std::string_view route) = 0;
};

struct BaseUrl {
  std::string scheme;
  std::string host;
  int port = 80;
  std::string path_prefix;

  /// Accepts http://host[:port][/prefix]. Throws UsageError otherwise.
  static BaseUrl parse(std::string_view url);
  std::string to_string() const;
};

/// One attempt per call over plain HTTP.
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(std::string_view base_url, std::chrono::seconds timeout = std::chrono::seconds(300));

  HttpReply post(std::string_view route, const std::string& body, std::string_view content_type) override;
  HttpReply get(std::string_view route) override;

 private:
  BaseUrl url_;
  std::chrono::seconds timeout_;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{1000};
};

/// Retries transport failures and 429/5xx replies with exponential backoff
/// (base, 2*base, 4*base, ...). After the budget is spent a TransportError
/// is raised.
class RetryingTransport : public Transport {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  RetryingTransport(Transport& inner, RetryPolicy policy, Sleeper sleeper = {});

  HttpReply post(std::string_view route, const std::string& body, std::string_view content_type) override;
  HttpReply get(std::string_view route) override;

 private:
  template <class Fn>
  HttpReply with_retry(std::string_view route, Fn&& attempt);

  Transport& inner_;
  RetryPolicy policy_;
  Sleeper sleeper_;
};

}  // namespace shortlens
