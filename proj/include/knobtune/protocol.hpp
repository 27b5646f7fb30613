#pragma once

#include "knobtune/knob_space.hpp"
#include "knobtune/optimization.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace knobtune {

// Client -> server: Hello, Report, Monitor, Bye.
// Server -> client: SetKnob, Chosen, NewPhase, Bye, and Monitor echoed back
// as the "keep running" acknowledgement of a monitoring report.

struct Hello {
    OptimizationSpec spec;
    KnobSpace space;
    bool operator==(const Hello&) const = default;
};

struct SetKnob {
    KnobSetting knob;
    int round = 1;
    bool operator==(const SetKnob&) const = default;
};

struct Report {
    double o = 0.0;
    std::vector<double> c;
    int round = 1;
    bool operator==(const Report&) const = default;
};

struct Chosen {
    KnobSetting knob;
    double o_ref = 0.0;
    std::vector<double> c_ref;
    bool operator==(const Chosen&) const = default;
};

struct Monitor {
    double o = 0.0;
    std::vector<double> c;
    int interval = 0;
    bool operator==(const Monitor&) const = default;
};

struct NewPhase {
    bool operator==(const NewPhase&) const = default;
};

struct Bye {
    std::string reason;
    bool operator==(const Bye&) const = default;
};

using WireMessage = std::variant<Hello, SetKnob, Report, Chosen, Monitor, NewPhase, Bye>;

enum class MessageKind { Hello, SetKnob, Report, Chosen, Monitor, NewPhase, Bye };

MessageKind kind_of(const WireMessage& m);
/// Wire spelling: hello, set_knob, report, chosen, monitor, new_phase, bye.
std::string to_string(MessageKind k);

/// One JSON object terminated by '\n'. Keys are emitted in sorted order so
/// the encoding of a message is unique.
std::string encode(const WireMessage& m);

/// Parses one line (trailing newline optional). Throws ProtocolError on
/// malformed JSON, unknown kinds, unknown keys, or missing fields (the error
/// names the field). Never throws anything else.
WireMessage decode(std::string_view line);

/// Checks knob indices and metric counts against the negotiated session.
/// Throws ProtocolError.
void validate_message(const WireMessage& m, const KnobSpace& space, const OptimizationSpec& spec);

enum class Side { Client, Server };

enum class SessionPhase { AwaitHello, Sampling, Monitoring, Closed };

/// What a side has to do after a message went by.
enum class SessionAction {
    None,
    PickSample,      // server: send the next SetKnob
    PickChosen,      // server: send Chosen
    EvaluateMonitor, // server: run the phase detector, reply ack or NewPhase
    RunSample,       // client: apply knob, measure, send Report
    RunChosen,       // client: apply chosen knob, measure, send Monitor
    RunMonitor,      // client: measure, send Monitor
    AwaitKnob,       // client: wait for SetKnob after NewPhase
    Teardown         // send Bye (if the peer did not) and close
};

struct SessionState {
    Side side = Side::Server;
    SessionPhase phase = SessionPhase::AwaitHello;
    /// Sampling budget N; 0 when unknown (the client is never told N).
    int total_rounds = 0;
    int round = 0;
    enum class Expect { Hello, SetKnob, Report, ChosenOrSetKnob, Chosen, MonitorReport, MonitorReply, Nothing };
    Expect expect = Expect::Hello;
    int last_interval = -1;

    static SessionState server(int total_rounds);
    static SessionState client();

    bool operator==(const SessionState&) const = default;
};

struct StepResult {
    SessionState state;
    SessionAction action = SessionAction::None;
    /// Set when the message broke the ladder; the side should send it.
    std::optional<Bye> bye;
};

/// Advances the session over one message, in transcript order (both
/// directions). Illegal transitions close the session and return a Bye with
/// a diagnostic.
StepResult step(const SessionState& state, const WireMessage& m);

/// Kind sequence check: Hello (SetKnob Report){N} Chosen
/// (Monitor | NewPhase (SetKnob Report){N} Chosen)* Bye.
bool matches_trace_grammar(std::span<const MessageKind> kinds, int total_rounds);
/// Decodes every line of a transcript and checks the grammar.
bool transcript_matches_grammar(std::span<const std::string> lines, int total_rounds);

}  // namespace knobtune
