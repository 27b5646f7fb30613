// Regenerates the golden session transcripts in tests/golden.
//
//   knobtune_golden <out-dir>
//
// File names end in _n<N>, the sampling budget of the session.

#include "knobtune/session.hpp"
#include "knobtune/simulator.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

using namespace knobtune;

namespace {

struct Case {
    std::string scenario;
    int n;
    Strategy strategy;
    std::uint64_t seed;
};

std::vector<std::string> record(const Case& c)
{
    const Scenario sc = resolve_scenario(c.scenario);
    ServerConfig cfg;
    cfg.total_rounds = c.n;
    cfg.strategy = c.strategy;
    cfg.seed = c.seed;
    auto [server_end, client_end] = make_channel_pair();
    ServerSessionResult server;
    std::thread t([&] { server = serve_session(*server_end, cfg); });
    run_simulated_client(*client_end, sc, c.seed);
    t.join();
    return server.transcript;
}

}  // namespace

int main(int argc, char** argv)
{
    if (argc != 2) {
        std::cerr << "usage: knobtune_golden <out-dir>\n";
        return 2;
    }
    const std::filesystem::path dir = argv[1];
    std::filesystem::create_directories(dir);
    const std::vector<Case> cases{
        {"two-phase-video", 8, Strategy::Hybrid, 1},
        {"bumpy", 6, Strategy::BayesOptOnly, 2},
        {"big-server", 5, Strategy::GPRegressor, 3},
        {"energy-board", 12, Strategy::Hybrid, 4},
        {"heterogeneous-board", 10, Strategy::Random, 5},
    };
    for (const auto& c : cases) {
        const auto path = dir / (c.scenario + "_" + to_string(c.strategy) + "_n" + std::to_string(c.n) + ".jsonl");
        std::ofstream out(path, std::ios::binary);
        for (const auto& line : record(c)) out << line << '\n';
        std::cout << path.string() << '\n';
    }
}
