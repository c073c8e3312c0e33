#include <doctest.h>

#include <chrono>
#include <vector>

#include "shortlens/backend.hpp"
#include "shortlens/errors.hpp"
#include "shortlens/stub_backend.hpp"
#include "shortlens/util.hpp"

using namespace shortlens;
using namespace std::chrono_literals;

namespace {

// Fails the first `failures` calls, by status or by throwing.
class FlakyTransport : public Transport {
 public:
  FlakyTransport(int failures, int status) : failures_(failures), status_(status) {}
  HttpReply post(std::string_view, const std::string&, std::string_view) override { return next(); }
  HttpReply get(std::string_view) override { return next(); }
  int calls = 0;

 private:
  HttpReply next() {
    ++calls;
    if (calls <= failures_) {
      if (status_ == 0) throw TransportError("connection refused");
      return {status_, "{}", "application/json", {}};
    }
    return {200, "{\"ok\":true}", "application/json", {}};
  }
  int failures_;
  int status_;
};

}  // namespace

TEST_CASE("base url parsing") {
  auto u = BaseUrl::parse("http://gpu-box:8000/models/");
  CHECK(u.host == "gpu-box");
  CHECK(u.port == 8000);
  CHECK(u.path_prefix == "/models");
  CHECK(BaseUrl::parse("http://localhost").port == 80);
  CHECK_THROWS_AS(BaseUrl::parse("localhost:8000"), UsageError);
  CHECK_THROWS_AS(BaseUrl::parse("https://x:1"), UsageError);
  CHECK_THROWS_AS(BaseUrl::parse("http://x:0"), UsageError);
  CHECK_THROWS_AS(BaseUrl::parse("http://x:70000"), UsageError);
  CHECK_THROWS_AS(BaseUrl::parse("http://:80"), UsageError);
}

TEST_CASE("reply headers are case insensitive") {
  HttpReply r;
  r.headers["X-Model-Version"] = "m7";
  CHECK(r.header("x-model-version") == "m7");
  CHECK(r.header("missing").empty());
}

TEST_CASE("retry uses exponential backoff") {
  for (int status : {0, 429, 500, 503}) {
    FlakyTransport inner(2, status);
    std::vector<std::chrono::milliseconds> delays;
    RetryingTransport t(inner, {3, 1000ms}, [&](auto d) { delays.push_back(d); });
    auto r = t.post("/absa", "{}", "application/json");
    CHECK(r.status == 200);
    CHECK(inner.calls == 3);
    CHECK(delays == std::vector<std::chrono::milliseconds>{1000ms, 2000ms});
  }
}

TEST_CASE("retry budget exhaustion raises TransportError") {
  FlakyTransport inner(10, 502);
  std::vector<std::chrono::milliseconds> delays;
  RetryingTransport t(inner, {3, 1000ms}, [&](auto d) { delays.push_back(d); });
  CHECK_THROWS_AS(t.get("/info"), TransportError);
  CHECK(inner.calls == 4);
  CHECK(delays == std::vector<std::chrono::milliseconds>{1000ms, 2000ms, 4000ms});
}

TEST_CASE("client errors are not retried") {
  for (int status : {400, 404, 413, 422}) {
    FlakyTransport inner(1, status);
    RetryingTransport t(inner, {3, 1ms}, [](auto) {});
    CHECK(t.post("/scene", "{}", "application/json").status == status);
    CHECK(inner.calls == 1);
  }
}

TEST_CASE("stub routes") {
  StubModels models;
  CHECK(models.handle("GET", "/info", "").status == 200);
  CHECK(models.handle("GET", "/nope", "").status == 404);
  CHECK(models.handle("POST", "/nope", "{}").status == 404);
  auto bad = models.handle("POST", "/absa", "[1,2]");
  CHECK(bad.status == 400);
  auto j = json::parse(bad.body);
  CHECK(j.contains("error"));
  CHECK(j.contains("schema"));
  CHECK(models.handle("POST", "/absa", R"({"text":"x"})").status == 400);
  CHECK(models.handle("POST", "/scene", R"({"prompt":"p"})").status == 400);

  auto a = models.handle("POST", "/absa", R"({"text":"Israel said","aspect":"Israel"})");
  auto b = models.handle("POST", "/absa", R"({"text":"Israel said","aspect":"Israel"})");
  CHECK(a.body == b.body);
  CHECK(models.calls("/absa") == 4);

  models.inject_failures("/absa", 503, 2);
  CHECK(models.handle("POST", "/absa", R"({"text":"Israel said","aspect":"Israel"})").status == 503);
  CHECK(models.handle("POST", "/absa", R"({"text":"Israel said","aspect":"Israel"})").status == 503);
  CHECK(models.handle("POST", "/absa", R"({"text":"Israel said","aspect":"Israel"})").status == 200);
}

TEST_CASE("stub server speaks HTTP") {
  StubModels models;
  StubServer server(models);
  int port = server.start(0);
  REQUIRE(port > 0);
  HttpTransport http(server.base_url(), 10s);
  auto info = http.get("/info");
  CHECK(info.status == 200);
  auto j = json::parse(info.body);
  CHECK(j["models"]["absa"] == StubModels::kAbsaVersion);

  auto r = http.post("/absa", R"({"text":"Hamas said","aspect":"Hamas"})", "application/json");
  CHECK(r.status == 200);
  CHECK(r.body == models.handle("POST", "/absa", R"({"text":"Hamas said","aspect":"Hamas"})").body);

  auto scene = http.post("/scene", json{{"image_b64", base64_encode(std::string_view("img"))}, {"prompt", "p"}}.dump(),
                         "application/json");
  CHECK(scene.status == 200);
  CHECK(scene.header("x-model-version") == StubModels::kSceneVersion);
  server.stop();

  HttpTransport dead("http://127.0.0.1:" + std::to_string(port), 1s);
  CHECK_THROWS_AS(dead.get("/info"), TransportError);
}
