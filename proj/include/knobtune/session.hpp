#pragma once

#include "knobtune/controller.hpp"
#include "knobtune/protocol.hpp"
#include "knobtune/sampler.hpp"
#include "knobtune/simulator.hpp"
#include "knobtune/transport.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace knobtune {

struct ServerConfig {
    int total_rounds = 12;
    int init_rounds = 0;  // 0: default_init_rounds(total_rounds)
    Strategy strategy = Strategy::Hybrid;
    double threshold = 0.10;
    int consecutive_required = 2;
    std::uint64_t seed = 0;
    /// Give up on a reply after this long (ten measurement intervals).
    std::chrono::milliseconds reply_timeout{30'000};
    std::vector<Measurement> warm_start;

    SamplingSchedule schedule() const;
};

/// Server view of one finished session.
struct ServerSessionResult {
    std::vector<std::string> transcript;  // every line, both directions, in order
    ControllerLog log;
    std::optional<Hello> hello;
    std::string close_reason;
};

/// Runs the sampler side of one connection until the client says Bye or the
/// session breaks. Malformed or out-of-order input ends the session with a
/// Bye carrying the diagnostic.
ServerSessionResult serve_session(LineChannel& channel, const ServerConfig& config);

/// One interval as seen by the simulated client.
struct IntervalRecord {
    int interval = 0;
    std::size_t scenario_phase = 0;
    KnobSetting knob;
    bool sampling = false;  // run under a SetKnob rather than a Chosen knob
    Reading reading;
};

struct ClientResult {
    std::vector<std::string> transcript;
    std::vector<IntervalRecord> timeline;
    std::string close_reason;
    bool clean = false;  // finished the workload and said Bye
};

/// Workload side: sends Hello for the scenario, actuates every knob the
/// server sends, and reports one measurement per interval.
ClientResult run_simulated_client(LineChannel& channel, const Scenario& scenario,
                                  std::uint64_t seed,
                                  std::chrono::milliseconds reply_timeout = std::chrono::seconds(30));

/// Serves sessions on a listener, one thread per connection, until stop()
/// is called or `max_sessions` sessions have been accepted.
class TcpServer {
public:
    using SessionCallback = std::function<void(const ServerSessionResult&)>;

    TcpServer(std::uint16_t port, ServerConfig config, SessionCallback on_session = {});
    std::uint16_t port() const { return listener_.port(); }
    /// Blocks. max_sessions < 0 serves forever.
    void run(int max_sessions = -1);
    void stop() { stop_ = true; }

private:
    TcpListener listener_;
    ServerConfig config_;
    SessionCallback on_session_;
    std::atomic<bool> stop_{false};
};

}  // namespace knobtune
