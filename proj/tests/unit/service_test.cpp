#include <thread>

#include <gtest/gtest.h>

#include "httplib.h"
#include "json.hpp"
#include "sherlock/checkpoint.hpp"
#include "sherlock/errors.hpp"
#include "sherlock/service.hpp"

namespace sherlock {
namespace {

using nlohmann::json;

std::shared_ptr<const SavedModel> tiny_model() {
  auto vocab = build_vocabulary(std::vector<TokenStream>{lex("strcpy(buf, src);")}, 10);
  Hyperparams hp;
  hp.embed_dim = 3;
  hp.conv_filters = 4;
  hp.kernel_size = 3;
  hp.dense1 = 4;
  hp.dense2 = 3;
  hp.max_len = 32;
  hp.vocab_size = vocab.size();
  return std::make_shared<const SavedModel>(SavedModel{init_model(hp, 1), std::move(vocab)});
}

TEST(ScanService, HappyPath) {
  const ScanService svc(tiny_model());
  const auto reply = svc.scan(R"({"code": "void f(char *s) { strcpy(b, s); }"})");
  ASSERT_EQ(reply.status, 200) << reply.body;
  const auto j = json::parse(reply.body);
  for (auto name : kHeadNames) {
    const double p = j["probabilities"][std::string(name)];
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
  EXPECT_EQ(j["probabilities"].size(), kHeadCount);
  EXPECT_EQ(j["token_count"], 16);
  EXPECT_EQ(j["model_format_version"], kModelFormatVersion);
}

TEST(ScanService, EmptyCode) {
  const ScanService svc(tiny_model());
  const auto reply = svc.scan(R"({"code": ""})");
  ASSERT_EQ(reply.status, 200);
  EXPECT_EQ(json::parse(reply.body)["token_count"], 0);
}

TEST(ScanService, MalformedBodies) {
  const ScanService svc(tiny_model());
  for (const char* body : {"{", "", "[1,2]", R"({"source": "x"})", R"({"code": 5})"}) {
    const auto reply = svc.scan(body);
    EXPECT_EQ(reply.status, 400) << body;
    EXPECT_TRUE(json::parse(reply.body).contains("error")) << body;
  }
}

TEST(ScanService, OversizeBody) {
  const ScanService svc(tiny_model(), {.max_body_bytes = 64});
  const auto reply = svc.scan(json{{"code", std::string(100, 'x')}}.dump());
  EXPECT_EQ(reply.status, 413);
}

TEST(ScanService, ReferentiallyTransparent) {
  const ScanService svc(tiny_model());
  const std::string body = R"({"code": "int main() { return strcpy(a, b); }"})";
  EXPECT_EQ(svc.scan(body).body, svc.scan(body).body);
}

TEST(ScanService, Health) {
  const auto model = tiny_model();
  const ScanService svc(model);
  const auto j = json::parse(svc.health().body);
  EXPECT_EQ(j["status"], "ok");
  EXPECT_EQ(j["vocab_size"], model->vocab.size());
}

TEST(ScanService, RequiresModel) { EXPECT_THROW(ScanService(nullptr), ConfigError); }

class HttpFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    service_ = std::make_shared<const ScanService>(tiny_model(), ServiceOptions{.max_body_bytes = 4096});
    server_ = std::make_unique<ScanServer>(service_);
    port_ = server_->bind("127.0.0.1", 0);
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_->listen(); });
    server_->wait_until_ready();
  }
  void TearDown() override {
    server_->stop();
    if (thread_.joinable()) thread_.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

  std::shared_ptr<const ScanService> service_;
  std::unique_ptr<ScanServer> server_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(HttpFixture, ScanOverHttp) {
  auto cli = client();
  const std::string body = R"({"code": "char b[4]; strcpy(b, s);"})";
  const auto res = cli.Post("/scan", body, "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, service_->scan(body).body);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST_F(HttpFixture, ErrorsOverHttp) {
  auto cli = client();
  const auto bad = cli.Post("/scan", "{", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  const auto big = cli.Post("/scan", json{{"code", std::string(10000, 'x')}}.dump(), "application/json");
  ASSERT_TRUE(big);
  EXPECT_EQ(big->status, 413);
  const auto missing = cli.Get("/nope");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_TRUE(json::parse(missing->body).contains("error"));
}

TEST_F(HttpFixture, HealthAndPreflight) {
  auto cli = client();
  const auto health = cli.Get("/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(json::parse(health->body)["status"], "ok");
  const auto pre = cli.Options("/scan");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
  EXPECT_NE(pre->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
}

TEST_F(HttpFixture, ConcurrentIdenticalRequests) {
  const std::string body = R"({"code": "int f(int x) { return x * 2; }"})";
  std::vector<std::string> bodies(4);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    threads.emplace_back([&, i] {
      auto cli = client();
      if (auto res = cli.Post("/scan", body, "application/json")) bodies[i] = res->body;
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& b : bodies) EXPECT_EQ(b, bodies[0]);
  EXPECT_FALSE(bodies[0].empty());
}

}  // namespace
}  // namespace sherlock
