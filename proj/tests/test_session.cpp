#include "knobtune/error.hpp"
#include "knobtune/session.hpp"

#include <doctest.h>

#include <algorithm>
#include <mutex>
#include <thread>

using namespace knobtune;
using namespace std::chrono_literals;

namespace {

ServerConfig server_config(int n)
{
    ServerConfig c;
    c.total_rounds = n;
    c.seed = 11;
    c.reply_timeout = 5s;
    return c;
}

struct Pair {
    ServerSessionResult server;
    ClientResult client;
};

Pair run_in_process(const Scenario& sc, const ServerConfig& cfg, std::uint64_t client_seed)
{
    auto [s, c] = make_channel_pair();
    Pair p;
    std::thread t([&] { p.server = serve_session(*s, cfg); });
    p.client = run_simulated_client(*c, sc, client_seed, 5s);
    t.join();
    return p;
}

std::vector<MessageKind> kinds(const std::vector<std::string>& lines)
{
    std::vector<MessageKind> out;
    for (const auto& l : lines) out.push_back(kind_of(decode(l)));
    return out;
}

}  // namespace

TEST_CASE("in-process session")
{
    const auto sc = resolve_scenario("two-phase-video");
    const auto p = run_in_process(sc, server_config(8), 3);

    CHECK(p.client.clean);
    CHECK(p.server.transcript == p.client.transcript);
    CHECK(transcript_matches_grammar(p.server.transcript, 8));
    CHECK(p.server.hello->space == sc.space);
    CHECK(p.client.timeline.size() == static_cast<std::size_t>(sc.total_intervals()));
    CHECK_FALSE(p.server.log.aborted);

    // The timeline matches what the server sent.
    int sampling = 0;
    for (const auto& r : p.client.timeline) sampling += r.sampling;
    const auto k = kinds(p.server.transcript);
    CHECK(sampling == std::count(k.begin(), k.end(), MessageKind::Report));
    for (std::size_t i = 0; i < p.client.timeline.size(); ++i) CHECK(p.client.timeline[i].interval == static_cast<int>(i));
}

TEST_CASE("server rejects bad input with a Bye")
{
    const auto sc = resolve_scenario("bumpy");
    const auto hello = encode(Hello{sc.spec(), sc.space});

    SUBCASE("malformed line")
    {
        auto [s, c] = make_channel_pair();
        ServerSessionResult res;
        std::thread t([&] { res = serve_session(*s, server_config(6)); });
        c->send(hello);
        auto r = c->receive(5s);
        REQUIRE(r.status == Received::Status::Line);
        CHECK(kind_of(decode(r.line)) == MessageKind::SetKnob);
        c->send("{\"kind\":\"report\",\"o\":");
        r = c->receive(5s);
        REQUIRE(r.status == Received::Status::Line);
        const auto bye = decode(r.line);
        REQUIRE(kind_of(bye) == MessageKind::Bye);
        CHECK_FALSE(std::get<Bye>(bye).reason.empty());
        t.join();
        CHECK_FALSE(res.close_reason.empty());
    }
    SUBCASE("out-of-order message")
    {
        auto [s, c] = make_channel_pair();
        ServerSessionResult res;
        std::thread t([&] { res = serve_session(*s, server_config(6)); });
        c->send(hello);
        (void)c->receive(5s);
        c->send(encode(Monitor{1.0, {}, 0}));
        const auto r = c->receive(5s);
        REQUIRE(r.status == Received::Status::Line);
        CHECK(kind_of(decode(r.line)) == MessageKind::Bye);
        t.join();
    }
    SUBCASE("knob space smaller than the budget")
    {
        auto [s, c] = make_channel_pair();
        ServerSessionResult res;
        std::thread t([&] { res = serve_session(*s, server_config(6)); });
        c->send(encode(Hello{{{"o", Goal::Maximize}, {}}, KnobSpace({KnobDimension{"a", {1, 2, 3}}})}));
        const auto r = c->receive(5s);
        REQUIRE(r.status == Received::Status::Line);
        CHECK(kind_of(decode(r.line)) == MessageKind::Bye);
        t.join();
    }
    SUBCASE("report with the wrong metric count")
    {
        auto [s, c] = make_channel_pair();
        ServerSessionResult res;
        std::thread t([&] { res = serve_session(*s, server_config(6)); });
        c->send(hello);
        (void)c->receive(5s);
        c->send(encode(Report{1.0, {2.0}, 1}));
        const auto r = c->receive(5s);
        REQUIRE(r.status == Received::Status::Line);
        CHECK(kind_of(decode(r.line)) == MessageKind::Bye);
        t.join();
    }
}

TEST_CASE("timeouts")
{
    SUBCASE("silent client")
    {
        auto [s, c] = make_channel_pair();
        auto cfg = server_config(6);
        cfg.reply_timeout = 50ms;
        const auto res = serve_session(*s, cfg);
        CHECK(res.close_reason.find("timeout") != std::string::npos);
        const auto r = c->receive(1s);
        REQUIRE(r.status == Received::Status::Line);
        CHECK(kind_of(decode(r.line)) == MessageKind::Bye);
    }
    SUBCASE("client goes quiet after a few reports")
    {
        const auto sc = resolve_scenario("bumpy");
        auto [s, c] = make_channel_pair();
        auto cfg = server_config(6);
        cfg.reply_timeout = 50ms;
        ServerSessionResult res;
        std::thread t([&] { res = serve_session(*s, cfg); });
        c->send(encode(Hello{sc.spec(), sc.space}));
        const auto r = c->receive(1s);
        const auto knob = std::get<SetKnob>(decode(r.line));
        const auto v = evaluate_true(sc, 0, knob.knob);
        c->send(encode(Report{v.objective, v.constraints, 1}));
        (void)c->receive(1s);
        t.join();
        CHECK(res.close_reason.find("timeout") != std::string::npos);
        CHECK(res.log.phase_histories.at(0).size() == 1);
        CHECK(res.transcript.back().find("\"bye\"") != std::string::npos);
    }
    SUBCASE("silent server")
    {
        const auto sc = resolve_scenario("bumpy");
        auto [s, c] = make_channel_pair();
        const auto res = run_simulated_client(*c, sc, 1, 50ms);
        CHECK_FALSE(res.clean);
        CHECK(res.close_reason.find("timeout") != std::string::npos);
    }
}

TEST_CASE("client disconnect")
{
    auto [s, c] = make_channel_pair();
    ServerSessionResult res;
    std::thread t([&] { res = serve_session(*s, server_config(6)); });
    const auto sc = resolve_scenario("bumpy");
    c->send(encode(Hello{sc.spec(), sc.space}));
    (void)c->receive(5s);
    c->close();
    t.join();
    CHECK_FALSE(res.close_reason.empty());
}

TEST_CASE("tcp: concurrent sessions are isolated")
{
    const auto sc = resolve_scenario("two-phase-video");
    const auto cfg = server_config(8);
    constexpr int kClients = 8;

    std::mutex mu;
    std::vector<ServerSessionResult> served;
    TcpServer server(0, cfg, [&](const ServerSessionResult& r) {
        std::lock_guard lock(mu);
        served.push_back(r);
    });
    std::thread srv([&] { server.run(kClients); });

    std::vector<ClientResult> remote(kClients);
    std::vector<std::thread> clients;
    for (int i = 0; i < kClients; ++i) {
        clients.emplace_back([&, i] {
            auto ch = tcp_connect("127.0.0.1", server.port());
            remote[i] = run_simulated_client(*ch, sc, 100 + i, 5s);
        });
    }
    for (auto& t : clients) t.join();
    srv.join();

    REQUIRE(served.size() == kClients);
    for (int i = 0; i < kClients; ++i) {
        CAPTURE(i);
        CHECK(remote[i].clean);
        const auto alone = run_in_process(sc, cfg, 100 + i);
        CHECK(remote[i].transcript == alone.client.transcript);
        CHECK(transcript_matches_grammar(remote[i].transcript, 8));
        const bool found = std::any_of(served.begin(), served.end(),
                                       [&](const auto& r) { return r.transcript == alone.server.transcript; });
        CHECK(found);
    }
}

TEST_CASE("tcp connect failure")
{
    std::uint16_t port;
    {
        TcpListener l(0);
        port = l.port();
    }
    CHECK_THROWS_AS(tcp_connect("127.0.0.1", port), SessionError);
}
