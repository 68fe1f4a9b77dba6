// llmfp-mockapp: serves a synthetic LLM-integrated application over the
// chat-completions wire format, for exercising scans end to end without a
// real target.

#include <iostream>

#include <CLI11.hpp>
#include "llmfp/http.hpp"

#include "llmfp/probe.hpp"
#include "llmfp/simenv.hpp"
#include "llmfp/strategy.hpp"

using namespace llmfp;

int main(int argc, char** argv) {
    CLI::App app{"Synthetic LLM application server"};
    int model_index = 0;
    std::uint64_t config_seed = 0;
    int port = 0;  // 0 = pick a free port
    std::string host = "127.0.0.1";
    std::string split = "full";
    app.add_option("--model", model_index, "Synthetic model index")->check(CLI::Range(0, 9));
    app.add_option("--config-seed", config_seed, "Prompting configuration seed");
    app.add_option("--split", split, "Sample the configuration from this pool half")
        ->check(CLI::IsMember({"full", "train", "test"}));
    app.add_option("--port", port, "Port (0 picks a free one)");
    app.add_option("--host", host, "Bind address");
    CLI11_PARSE(app, argc, argv);

    ConfigPool pool = default_config_pool();
    if (split == "train")
        pool = split_pools(pool, config_seed ^ 0x5eedull).first;
    else if (split == "test")
        pool = split_pools(pool, config_seed ^ 0x5eedull).second;

    auto models = make_default_family(10);
    SyntheticOracle oracle(models[static_cast<std::size_t>(model_index)],
                           sample_config(pool, config_seed));

    httplib::Server server;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.contains("messages") || body["messages"].empty()) {
            res.status = 400;
            res.set_content(json{{"error", "expected {messages:[{content}]}"}}.dump(),
                            "application/json");
            return;
        }
        const std::string text = body["messages"].back().value("content", std::string());
        OracleAttempt out = oracle.ask(identify_query(text));
        res.set_content(
            json{{"choices",
                  json::array({json{{"message",
                                     json{{"role", "assistant"}, {"content", out.text}}}}})}}
                .dump(),
            "application/json");
    });

    if (port == 0) {
        port = server.bind_to_any_port(host);
        if (port < 0) {
            std::cerr << "failed to bind\n";
            return 1;
        }
        std::cout << "listening on http://" << host << ":" << port << std::endl;
        return server.listen_after_bind() ? 0 : 1;
    }
    std::cout << "listening on http://" << host << ":" << port << std::endl;
    return server.listen(host, port) ? 0 : 1;
}
