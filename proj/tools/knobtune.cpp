// knobtune command-line front end.

#include "knobtune/error.hpp"
#include "knobtune/harness.hpp"
#include "knobtune/session.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace knobtune;

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& text)
{
    // "40" means seeds 1..40; "a-b" a range; otherwise a comma list.
    std::vector<std::uint64_t> out;
    if (text.find(',') == std::string::npos && text.find('-') == std::string::npos) {
        const auto n = std::stoull(text);
        for (std::uint64_t i = 1; i <= n; ++i) out.push_back(i);
        return out;
    }
    if (auto dash = text.find('-'); dash != std::string::npos && text.find(',') == std::string::npos) {
        const auto a = std::stoull(text.substr(0, dash));
        const auto b = std::stoull(text.substr(dash + 1));
        if (b < a) throw ConfigError("empty seed range " + text);
        for (auto i = a; i <= b; ++i) out.push_back(i);
        return out;
    }
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(std::stoull(item));
    }
    return out;
}

std::vector<Strategy> parse_strategies(const std::string& text)
{
    std::vector<Strategy> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(parse_strategy(item));
    }
    return out;
}

void print_reports(const std::vector<QoSReport>& reports)
{
    write_summary_csv(std::cout, reports);
}

TcpServer* g_server = nullptr;

void on_signal(int)
{
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Online knob tuner: sampling server, simulated workloads, and benchmark harness"};
    app.require_subcommand(1);

    // serve
    auto* serve = app.add_subcommand("serve", "Run the sampling server");
    int port = 7070;
    int n_rounds = 12;
    int m_rounds = 0;
    std::string strategy = "hybrid";
    double delta = 0.10;
    int consecutive = 2;
    std::uint64_t seed = 0;
    int max_sessions = -1;
    std::string event_log;
    serve->add_option("--port", port, "TCP port (0 picks one)")->envname("KNOBTUNE_PORT");
    serve->add_option("--n", n_rounds, "Sampling rounds per phase")->envname("KNOBTUNE_N");
    serve->add_option("--m", m_rounds, "LHS rounds (0: max(3, round(N/3)))")->envname("KNOBTUNE_M");
    serve->add_option("--strategy", strategy, "hybrid, bo, gp, linear, random or lhs")
        ->envname("KNOBTUNE_STRATEGY");
    serve->add_option("--delta", delta, "Phase-change threshold")->envname("KNOBTUNE_DELTA");
    serve->add_option("--consecutive", consecutive, "Deviating intervals before a new phase")
        ->envname("KNOBTUNE_CONSECUTIVE");
    serve->add_option("--seed", seed, "Sampler seed")->envname("KNOBTUNE_SEED");
    serve->add_option("--sessions", max_sessions, "Exit after this many sessions (-1: forever)");
    serve->add_option("--event-log", event_log, "Append controller events here (one JSON object per line)")
        ->envname("KNOBTUNE_EVENT_LOG");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Run a simulated workload against a server");
    std::string scenario_name;
    std::string server_addr = "127.0.0.1:7070";
    std::uint64_t client_seed = 0;
    std::string timeline_out;
    simulate->add_option("--scenario", scenario_name, "Scenario name or JSON file")
        ->required()
        ->envname("KNOBTUNE_SCENARIO");
    simulate->add_option("--server", server_addr, "host:port")->envname("KNOBTUNE_SERVER");
    simulate->add_option("--seed", client_seed, "Noise seed")->envname("KNOBTUNE_SEED");
    simulate->add_option("--timeline", timeline_out, "Write the per-interval CSV here");

    // bench
    auto* bench = app.add_subcommand("bench", "Run seeded trials and report QoS");
    std::string bench_scenario;
    std::string strategies = "hybrid,bo,random";
    std::string seeds = "40";
    int bench_n = 12;
    int bench_m = 0;
    std::string out_dir = ".";
    unsigned threads = 0;
    bool warm = false;
    bench->add_option("--scenario", bench_scenario, "Scenario name or JSON file")
        ->required()
        ->envname("KNOBTUNE_SCENARIO");
    bench->add_option("--strategies", strategies, "Comma-separated strategies")->envname("KNOBTUNE_STRATEGIES");
    bench->add_option("--seeds", seeds, "Count, a-b range, or comma list")->envname("KNOBTUNE_SEEDS");
    bench->add_option("--n", bench_n, "Sampling rounds")->envname("KNOBTUNE_N");
    bench->add_option("--m", bench_m, "LHS rounds (0: default)")->envname("KNOBTUNE_M");
    bench->add_option("--out", out_dir, "Directory for trials.csv and summary.csv")->envname("KNOBTUNE_OUT");
    bench->add_option("--threads", threads, "Parallel trials (0: all cores)")->envname("KNOBTUNE_THREADS");
    bench->add_flag("--warm-start", warm, "Warm-start each trial from one prior trial");

    // oracle
    auto* oracle = app.add_subcommand("oracle", "Exhaustive search of the true surfaces");
    std::string oracle_scenario;
    std::size_t phase = 0;
    oracle->add_option("--scenario", oracle_scenario, "Scenario name or JSON file")
        ->required()
        ->envname("KNOBTUNE_SCENARIO");
    oracle->add_option("--phase", phase, "Scenario phase (0-based)");

    // qos
    auto* qos_cmd = app.add_subcommand("qos", "Recompute the summary of a trials.csv");
    std::string trials_csv;
    std::string qos_scenario;
    qos_cmd->add_option("--trials-csv", trials_csv, "trials.csv from bench")->required()->check(CLI::ExistingFile);
    qos_cmd->add_option("--scenario", qos_scenario, "Scenario (default: the one named in the file)")
        ->envname("KNOBTUNE_SCENARIO");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve) {
            ServerConfig config;
            config.total_rounds = n_rounds;
            config.init_rounds = m_rounds;
            config.strategy = parse_strategy(strategy);
            config.threshold = delta;
            config.consecutive_required = consecutive;
            config.seed = seed;
            config.schedule().validate();
            std::ofstream log_file;
            if (!event_log.empty()) log_file.open(event_log, std::ios::app);
            TcpServer server(static_cast<std::uint16_t>(port), config, [&](const ServerSessionResult& r) {
                std::cerr << "session closed: " << (r.close_reason.empty() ? "-" : r.close_reason) << "\n";
                if (log_file) {
                    write_event_log(log_file, r.log.events);
                    log_file.flush();
                }
            });
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on 127.0.0.1:" << server.port() << "\n";
            server.run(max_sessions);
            return 0;
        }
        if (*simulate) {
            const Scenario scenario = resolve_scenario(scenario_name);
            const auto colon = server_addr.rfind(':');
            if (colon == std::string::npos) throw ConfigError("--server must be host:port");
            auto channel = tcp_connect(server_addr.substr(0, colon),
                                       static_cast<std::uint16_t>(std::stoul(server_addr.substr(colon + 1))));
            const ClientResult r = run_simulated_client(*channel, scenario, client_seed);
            if (!timeline_out.empty()) {
                std::ofstream out(timeline_out);
                out << "interval,phase,knob,sampling,objective";
                for (std::size_t i = 0; i < scenario.spec().constraints.size(); ++i) out << ",c" << i;
                out << '\n';
                for (const auto& rec : r.timeline) {
                    out << rec.interval << ',' << rec.scenario_phase << ',' << to_string(rec.knob) << ','
                        << (rec.sampling ? 1 : 0) << ',' << rec.reading.objective;
                    for (double c : rec.reading.constraints) out << ',' << c;
                    out << '\n';
                }
            }
            std::cout << "intervals: " << r.timeline.size() << "\nclosed: " << r.close_reason << "\n";
            return r.clean ? 0 : 1;
        }
        if (*bench) {
            ExperimentConfig config;
            config.scenario = resolve_scenario(bench_scenario);
            config.strategies = parse_strategies(strategies);
            config.seeds = parse_seeds(seeds);
            config.total_rounds = bench_n;
            config.init_rounds = bench_m;
            config.threads = threads;
            config.warm_start_from_prior = warm;
            const ExperimentResult result = run_experiment(config);
            std::filesystem::create_directories(out_dir);
            std::ofstream trials(std::filesystem::path(out_dir) / "trials.csv");
            write_trials_csv(trials, result.trials);
            std::ofstream summary(std::filesystem::path(out_dir) / "summary.csv");
            write_summary_csv(summary, result.reports);
            print_reports(result.reports);
            return 0;
        }
        if (*oracle) {
            const Scenario scenario = resolve_scenario(oracle_scenario);
            const OracleResult r = brute_force_oracle(scenario, phase);
            std::cout << "knob " << to_string(r.knob);
            for (std::size_t d = 0; d < scenario.space.dimension_count(); ++d) {
                std::cout << ' ' << scenario.space.dimension(d).name << '=' << scenario.space.value(r.knob, d);
            }
            std::cout << "\nobjective " << r.value << '\n';
            for (std::size_t i = 0; i < r.reading.constraints.size(); ++i) {
                std::cout << "constraint " << scenario.spec().constraints[i].metric << ' ' << r.reading.constraints[i]
                          << '\n';
            }
            return 0;
        }
        if (*qos_cmd) {
            std::ifstream in(trials_csv);
            const auto rows = read_trials_csv(in);
            if (rows.empty()) throw ConfigError("trials csv has no rows");
            const Scenario scenario = resolve_scenario(qos_scenario.empty() ? rows.front().scenario : qos_scenario);
            print_reports(summarize_rows(rows, scenario));
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
