#include "shortlens/backend.hpp"

#include <charconv>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "shortlens/errors.hpp"
#include "shortlens/util.hpp"

namespace shortlens {

std::string HttpReply::header(const std::string& name) const {
  std::string want = to_lower_ascii(name);
  for (const auto& [k, v] : headers)
    if (to_lower_ascii(k) == want) return v;
  return {};
}

BaseUrl BaseUrl::parse(std::string_view url) {
  BaseUrl out;
  auto sep = url.find("://");
  if (sep == std::string_view::npos) throw UsageError("backend URL '" + std::string(url) + "' lacks a scheme");
  out.scheme = std::string(url.substr(0, sep));
  if (out.scheme != "http")
    throw UsageError("backend URL '" + std::string(url) + "': only http:// is supported (put TLS in a local proxy)");
  auto rest = url.substr(sep + 3);
  auto slash = rest.find('/');
  auto hostport = rest.substr(0, slash);
  if (slash != std::string_view::npos) out.path_prefix = std::string(rest.substr(slash));
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  auto colon = hostport.rfind(':');
  if (colon != std::string_view::npos) {
    auto p = hostport.substr(colon + 1);
    int port = 0;
    auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), port);
    if (ec != std::errc() || ptr != p.data() + p.size() || port <= 0 || port > 65535)
      throw UsageError("backend URL '" + std::string(url) + "' has an invalid port");
    out.port = port;
    hostport = hostport.substr(0, colon);
  }
  if (hostport.empty()) throw UsageError("backend URL '" + std::string(url) + "' has no host");
  out.host = std::string(hostport);
  return out;
}

std::string BaseUrl::to_string() const { return scheme + "://" + host + ":" + std::to_string(port) + path_prefix; }

HttpTransport::HttpTransport(std::string_view base_url, std::chrono::seconds timeout)
    : url_(BaseUrl::parse(base_url)), timeout_(timeout) {}

namespace {

HttpReply to_reply(const httplib::Result& res, std::string_view route) {
  if (!res) throw TransportError(std::string(route) + ": " + httplib::to_string(res.error()));
  HttpReply reply;
  reply.status = res->status;
  reply.body = res->body;
  reply.content_type = res->get_header_value("Content-Type");
  for (const auto& [k, v] : res->headers) reply.headers[k] = v;
  return reply;
}

}  // namespace

HttpReply HttpTransport::post(std::string_view route, const std::string& body, std::string_view content_type) {
  httplib::Client client(url_.host, url_.port);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  std::string path = url_.path_prefix + std::string(route);
  return to_reply(client.Post(path, body, std::string(content_type)), route);
}

HttpReply HttpTransport::get(std::string_view route) {
  httplib::Client client(url_.host, url_.port);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(timeout_);
  return to_reply(client.Get(url_.path_prefix + std::string(route)), route);
}

RetryingTransport::RetryingTransport(Transport& inner, RetryPolicy policy, Sleeper sleeper)
    : inner_(inner), policy_(policy), sleeper_(std::move(sleeper)) {
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

template <class Fn>
HttpReply RetryingTransport::with_retry(std::string_view route, Fn&& attempt) {
  std::string last_error;
  for (int i = 0;; ++i) {
    try {
      HttpReply reply = attempt();
      if (reply.status != 429 && reply.status < 500) return reply;
      last_error = std::string(route) + ": HTTP " + std::to_string(reply.status);
    } catch (const TransportError& e) {
      last_error = e.what();
    }
    if (i >= policy_.max_retries) break;
    auto delay = policy_.base_delay * (1LL << i);
    spdlog::warn("{} (attempt {}/{}), retrying in {} ms", last_error, i + 1, policy_.max_retries + 1, delay.count());
    sleeper_(delay);
  }
  throw TransportError(last_error + " (retry budget exhausted)");
}

HttpReply RetryingTransport::post(std::string_view route, const std::string& body, std::string_view content_type) {
  return with_retry(route, [&] { return inner_.post(route, body, content_type); });
}

HttpReply RetryingTransport::get(std::string_view route) {
  return with_retry(route, [&] { return inner_.get(route); });
}

}  // namespace shortlens
