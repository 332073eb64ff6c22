#include <doctest.h>

#include <thread>

#include "groundchat/cli/config.hpp"
#include "groundchat/media/image.hpp"
#include "groundchat/service/http.hpp"
#include "support.hpp"

// After Eigen: <resolv.h> defines a _res macro that breaks Eigen headers.
#include <httplib.h>

using namespace groundchat;

namespace {

struct Running {
    service::ChatService chat;
    service::HttpServer server;
    std::thread thread;

    Running(service::Backend backend, service::ServiceConfig config)
        : chat(std::move(backend), std::move(config)), server(chat) {
        REQUIRE(server.bind("127.0.0.1", 0));
        thread = std::thread([this] { server.serve(); });
    }
    ~Running() {
        server.stop();
        thread.join();
    }
};

service::Backend backend_from_fixtures(const testing::TempDir& dir) {
    const auto paths = fixtures::write_fixtures(testing::fixture_set(), dir.path());
    return cli::make_backend(cli::load_cli_config(paths.config.string()));
}

std::string bytes_of(const ModalityInput& in) { return {in.payload().begin(), in.payload().end()}; }

} // namespace

TEST_CASE("HTTP routes end to end") {
    testing::TempDir dir;
    service::ServiceConfig cfg;
    cfg.max_upload_bytes = 256 * 1024;
    Running run(backend_from_fixtures(dir), cfg);
    httplib::Client client("127.0.0.1", run.server.port());

    auto health = client.Get("/v1/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(nlohmann::json::parse(health->body).at("status") == "ok");

    auto created = client.Post("/v1/sessions");
    REQUIRE(created);
    CHECK(created->status == 201);
    const std::string id = nlohmann::json::parse(created->body).at("id");

    const httplib::MultipartFormDataItems form = {
        {"text", "What is the image?", "", ""},
        {"image", bytes_of(testing::fixture_set().dog_image), "dog.png", "image/png"},
    };
    auto msg = client.Post("/v1/sessions/" + id + "/messages", form);
    REQUIRE(msg);
    CHECK(msg->status == 200);
    const auto reply = nlohmann::json::parse(msg->body);
    CHECK(reply.at("text") == fixtures::kDogReply);
    CHECK(reply.at("grounding").at("entities").size() == 2);
    REQUIRE(reply.at("mask_ids").size() == 2);

    const std::string mask_id = reply.at("mask_ids")[0];
    auto mask = client.Get("/v1/sessions/" + id + "/masks/" + mask_id);
    REQUIRE(mask);
    CHECK(mask->status == 200);
    CHECK(mask->get_header_value("Content-Type") == "image/png");
    const std::vector<std::uint8_t> png(mask->body.begin(), mask->body.end());
    CHECK(media::decode_mask_png(png).area() == static_cast<std::size_t>(fixtures::kDogBox.area()));

    auto follow = client.Post("/v1/sessions/" + id + "/messages", R"({"text":"Tell me more."})", "application/json");
    REQUIRE(follow);
    CHECK(follow->status == 200);

    auto session = client.Get("/v1/sessions/" + id);
    REQUIRE(session);
    CHECK(nlohmann::json::parse(session->body).at("turns").size() == 4);

    auto missing = client.Post("/v1/sessions/nope/messages", form);
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(nlohmann::json::parse(missing->body).at("code") == "not_found");

    const httplib::MultipartFormDataItems junk = {{"text", "What is the image?", "", ""},
                                                  {"image", "not an image at all", "x.png", "image/png"}};
    auto bad = client.Post("/v1/sessions/" + id + "/messages", junk);
    REQUIRE(bad);
    CHECK(bad->status == 422);

    const httplib::MultipartFormDataItems big = {{"text", "What is the image?", "", ""},
                                                 {"image", std::string(cfg.max_upload_bytes + 10, 'x'), "b.png", ""}};
    auto too_big = client.Post("/v1/sessions/" + id + "/messages", big);
    REQUIRE(too_big);
    CHECK(too_big->status == 413);

    auto unknown_mask = client.Get("/v1/sessions/" + id + "/masks/t99-e0");
    REQUIRE(unknown_mask);
    CHECK(unknown_mask->status == 404);
}

TEST_CASE("HTTP reports an unavailable LLM as 503") {
    testing::TempDir dir;
    auto backend = backend_from_fixtures(dir);
    const auto* sw = dynamic_cast<const model::SwitchableLLM*>(&backend.model->llm());
    REQUIRE(sw);
    Running run(backend, {});
    httplib::Client client("127.0.0.1", run.server.port());
    const std::string id = nlohmann::json::parse(client.Post("/v1/sessions")->body).at("id");
    sw->set_available(false);
    const httplib::MultipartFormDataItems form = {
        {"text", "What is the image?", "", ""},
        {"image", bytes_of(testing::fixture_set().dog_image), "dog.png", "image/png"},
    };
    auto res = client.Post("/v1/sessions/" + id + "/messages", form);
    REQUIRE(res);
    CHECK(res->status == 503);
    CHECK(nlohmann::json::parse(res->body).at("code") == "adapter");
    CHECK(nlohmann::json::parse(client.Get("/v1/sessions/" + id)->body).at("turns").empty());
}

TEST_CASE("binding a taken port fails") {
    testing::TempDir dir;
    Running run(backend_from_fixtures(dir), {});
    service::ChatService other(backend_from_fixtures(dir), {});
    service::HttpServer second(other);
    CHECK_FALSE(second.bind("127.0.0.1", run.server.port()));
}
