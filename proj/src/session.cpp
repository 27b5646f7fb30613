#include "knobtune/session.hpp"

#include "knobtune/error.hpp"

#include <mutex>
#include <thread>

namespace knobtune {

namespace {

std::string strip_newline(std::string line)
{
    if (!line.empty() && line.back() == '\n') line.pop_back();
    return line;
}

// Server-side adapter: the controller drives it, it speaks the wire protocol.
class ConnectionWorkload : public ControlledWorkload {
public:
    ConnectionWorkload(LineChannel& channel, SessionState state, const Hello& hello,
                       std::chrono::milliseconds timeout, std::vector<std::string>& transcript)
        : channel_(channel), state_(state), hello_(hello), timeout_(timeout), transcript_(transcript)
    {
    }

    bool closed() const { return closed_; }
    const std::string& close_reason() const { return close_reason_; }

    void begin_new_phase() override
    {
        if (closed_) return;
        pending_ack_.reset();
        send(NewPhase{});
    }

    void apply_sample(const KnobSetting& knob, int round) override
    {
        if (closed_) return;
        send(SetKnob{knob, round});
    }

    void apply_chosen(const BestChoice& choice) override
    {
        if (closed_) return;
        send(Chosen{choice.knob, choice.o_ref, choice.c_ref});
    }

    IntervalResult measure() override
    {
        if (closed_) return {IntervalResult::Status::Ended, {}};
        if (pending_ack_) {
            send(*pending_ack_);
            pending_ack_.reset();
        }
        const Received rx = channel_.receive(timeout_);
        if (rx.status == Received::Status::Timeout) {
            if (++timeouts_ >= 2) {
                send(Bye{"timeout waiting for the client"});
            }
            return {IntervalResult::Status::Timeout, {}};
        }
        timeouts_ = 0;
        if (rx.status == Received::Status::Closed) {
            closed_ = true;
            close_reason_ = "client disconnected";
            throw SessionError(close_reason_);
        }
        transcript_.push_back(rx.line);

        WireMessage msg;
        try {
            msg = decode(rx.line);
            validate_message(msg, hello_.space, hello_.spec);
        } catch (const ProtocolError& e) {
            fail(e.what());
        }
        const StepResult r = step(state_, msg);
        if (r.bye) fail(r.bye->reason);
        state_ = r.state;

        if (const auto* bye = std::get_if<Bye>(&msg)) {
            closed_ = true;
            close_reason_ = bye->reason;
            return {IntervalResult::Status::Ended, {}};
        }
        if (const auto* rep = std::get_if<Report>(&msg)) {
            return {IntervalResult::Status::Ok, {rep->o, rep->c}};
        }
        if (const auto* mon = std::get_if<Monitor>(&msg)) {
            pending_ack_ = *mon;
            return {IntervalResult::Status::Ok, {mon->o, mon->c}};
        }
        fail("unexpected " + to_string(kind_of(msg)));
    }

private:
    void send(const WireMessage& m)
    {
        const StepResult r = step(state_, m);
        if (r.bye) throw ContractViolation("server tried to send an out-of-order " + to_string(kind_of(m)));
        state_ = r.state;
        const std::string line = encode(m);
        transcript_.push_back(strip_newline(line));
        channel_.send(line);
        if (std::holds_alternative<Bye>(m)) {
            closed_ = true;
            close_reason_ = std::get<Bye>(m).reason;
            channel_.close();
        }
    }

    [[noreturn]] void fail(const std::string& reason)
    {
        try {
            const std::string line = encode(Bye{reason});
            transcript_.push_back(strip_newline(line));
            channel_.send(line);
        } catch (const SessionError&) {
        }
        channel_.close();
        closed_ = true;
        close_reason_ = reason;
        throw SessionError(reason);
    }

    LineChannel& channel_;
    SessionState state_;
    const Hello& hello_;
    std::chrono::milliseconds timeout_;
    std::vector<std::string>& transcript_;
    std::optional<Monitor> pending_ack_;
    bool closed_ = false;
    int timeouts_ = 0;
    std::string close_reason_;
};

void send_bye(LineChannel& channel, std::vector<std::string>& transcript, const std::string& reason)
{
    const std::string line = encode(Bye{reason});
    transcript.push_back(strip_newline(line));
    try {
        channel.send(line);
    } catch (const SessionError&) {
    }
    channel.close();
}

}  // namespace

SamplingSchedule ServerConfig::schedule() const
{
    SamplingSchedule s = SamplingSchedule::with_default_init(total_rounds, strategy);
    if (init_rounds > 0) s.init_rounds = init_rounds;
    return s;
}

ServerSessionResult serve_session(LineChannel& channel, const ServerConfig& config)
{
    ServerSessionResult result;
    SessionState state = SessionState::server(config.total_rounds);

    const Received first = channel.receive(config.reply_timeout);
    if (first.status != Received::Status::Line) {
        result.close_reason = first.status == Received::Status::Timeout ? "timeout waiting for hello"
                                                                         : "client disconnected";
        if (first.status == Received::Status::Timeout) send_bye(channel, result.transcript, result.close_reason);
        return result;
    }
    result.transcript.push_back(first.line);

    Hello hello;
    try {
        WireMessage msg = decode(first.line);
        const StepResult r = step(state, msg);
        if (r.bye) throw ProtocolError(r.bye->reason);
        state = r.state;
        hello = std::get<Hello>(std::move(msg));
        const SamplingSchedule schedule = config.schedule();
        schedule.validate();
        if (static_cast<std::uint64_t>(schedule.total_rounds) > hello.space.size()) {
            throw ProtocolError("sampling budget exceeds the knob space size");
        }
    } catch (const std::exception& e) {
        result.close_reason = e.what();
        send_bye(channel, result.transcript, result.close_reason);
        return result;
    }
    result.hello = hello;

    ConnectionWorkload workload(channel, state, *result.hello, config.reply_timeout, result.transcript);
    ControllerConfig cc{config.schedule(), config.threshold, config.consecutive_required, config.seed,
                        config.warm_start};
    try {
        result.log = control_loop(workload, hello.space, hello.spec, cc);
        result.close_reason = workload.close_reason();
    } catch (const std::exception& e) {
        result.log.aborted = true;
        result.log.error = e.what();
        result.close_reason = std::string("internal error: ") + e.what();
        if (!workload.closed()) send_bye(channel, result.transcript, result.close_reason);
    }
    channel.close();
    return result;
}

ClientResult run_simulated_client(LineChannel& channel, const Scenario& scenario, std::uint64_t seed,
                                  std::chrono::milliseconds reply_timeout)
{
    ClientResult result;
    SessionState state = SessionState::client();
    const OptimizationSpec spec = scenario.spec();
    SimulatedWorkload sim(scenario, mix_seed(scenario.seed, seed));

    bool open = true;
    const auto send = [&](const WireMessage& m) {
        state = step(state, m).state;
        const std::string line = encode(m);
        result.transcript.push_back(strip_newline(line));
        channel.send(line);
        if (std::holds_alternative<Bye>(m)) {
            open = false;
            result.close_reason = std::get<Bye>(m).reason;
            channel.close();
        }
    };

    KnobSetting knob;
    bool sampling = true;
    // Runs one interval and reports it, or says Bye when the workload is over.
    const auto run = [&](int round) {
        if (sim.finished()) {
            result.clean = true;
            send(Bye{"finished"});
            return;
        }
        IntervalRecord rec{sim.interval(), sim.current_phase(), knob, sampling, sim.run_interval(knob)};
        const Reading reading = rec.reading;
        result.timeline.push_back(std::move(rec));
        if (sampling) {
            send(Report{reading.objective, reading.constraints, round});
        } else {
            send(Monitor{reading.objective, reading.constraints, result.timeline.back().interval});
        }
    };

    try {
        send(Hello{spec, scenario.space});
        while (open) {
            const Received rx = channel.receive(reply_timeout);
            if (rx.status == Received::Status::Timeout) {
                send(Bye{"timeout waiting for the server"});
                break;
            }
            if (rx.status == Received::Status::Closed) {
                result.close_reason = "server disconnected";
                break;
            }
            result.transcript.push_back(rx.line);
            WireMessage msg;
            try {
                msg = decode(rx.line);
                validate_message(msg, scenario.space, spec);
            } catch (const ProtocolError& e) {
                send(Bye{e.what()});
                break;
            }
            const StepResult r = step(state, msg);
            if (r.bye) {
                send(*r.bye);
                break;
            }
            state = r.state;
            if (const auto* bye = std::get_if<Bye>(&msg)) {
                result.close_reason = bye->reason;
                channel.close();
                break;
            }
            switch (r.action) {
            case SessionAction::RunSample:
                knob = std::get<SetKnob>(msg).knob;
                sampling = true;
                run(std::get<SetKnob>(msg).round);
                break;
            case SessionAction::RunChosen:
                knob = std::get<Chosen>(msg).knob;
                sampling = false;
                run(0);
                break;
            case SessionAction::RunMonitor:
                run(0);
                break;
            default:
                break;
            }
        }
    } catch (const SessionError& e) {
        result.close_reason = e.what();
    }
    return result;
}

TcpServer::TcpServer(std::uint16_t port, ServerConfig config, SessionCallback on_session)
    : listener_(port), config_(std::move(config)), on_session_(std::move(on_session))
{
}

void TcpServer::run(int max_sessions)
{
    std::vector<std::thread> workers;
    std::mutex callback_mutex;
    int accepted = 0;
    while (!stop_ && (max_sessions < 0 || accepted < max_sessions)) {
        auto channel = listener_.accept(std::chrono::milliseconds(200));
        if (!channel) continue;
        ++accepted;
        workers.emplace_back([this, &callback_mutex, ch = std::move(channel)]() mutable {
            ServerSessionResult r = serve_session(*ch, config_);
            if (on_session_) {
                std::lock_guard lock(callback_mutex);
                on_session_(r);
            }
        });
    }
    for (auto& t : workers) t.join();
}

}  // namespace knobtune
