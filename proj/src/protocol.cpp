#include "knobtune/protocol.hpp"

#include "knobtune/error.hpp"
#include "knobtune/json_io.hpp"

#include <cmath>
#include <limits>

namespace knobtune {

namespace {

using Expect = SessionState::Expect;

const Json& field(const Json& j, const char* key)
{
    auto it = j.find(key);
    if (it == j.end()) throw ProtocolError(std::string("missing field '") + key + "'");
    return *it;
}

void only_keys(const Json& j, std::initializer_list<const char*> allowed)
{
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* a : allowed) known = known || it.key() == a;
        if (!known) throw ProtocolError("unknown field '" + it.key() + "'");
    }
}

double real(const Json& j, const char* key)
{
    const Json& v = field(j, key);
    if (!v.is_number()) throw ProtocolError(std::string("field '") + key + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ProtocolError(std::string("field '") + key + "' must be finite");
    return d;
}

std::vector<double> reals(const Json& j, const char* key)
{
    const Json& v = field(j, key);
    if (!v.is_array()) throw ProtocolError(std::string("field '") + key + "' must be an array");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw ProtocolError(std::string("field '") + key + "' must hold numbers");
        out.push_back(e.get<double>());
        if (!std::isfinite(out.back())) throw ProtocolError(std::string("field '") + key + "' must be finite");
    }
    return out;
}

int count(const Json& j, const char* key, int min)
{
    const Json& v = field(j, key);
    if (!v.is_number_integer()) throw ProtocolError(std::string("field '") + key + "' must be an integer");
    const auto n = v.get<std::int64_t>();
    if (n < min || n > std::numeric_limits<int>::max()) {
        throw ProtocolError(std::string("field '") + key + "' is out of range");
    }
    return static_cast<int>(n);
}

KnobSetting knob(const Json& j)
{
    const Json& v = field(j, "knob");
    if (!v.is_array()) throw ProtocolError("field 'knob' must be an index array");
    KnobSetting k;
    for (const auto& e : v) {
        if (!e.is_number_integer()) throw ProtocolError("field 'knob' must hold integers");
        const auto i = e.get<std::int64_t>();
        if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) {
            throw ProtocolError("knob index out of range");
        }
        k.indices.push_back(static_cast<int>(i));
    }
    return k;
}

WireMessage decode_json(const Json& j)
{
    if (!j.is_object()) throw ProtocolError("message must be a JSON object");
    const Json& kind = field(j, "kind");
    if (!kind.is_string()) throw ProtocolError("field 'kind' must be a string");
    const std::string k = kind.get<std::string>();

    if (k == "hello") {
        only_keys(j, {"kind", "spec", "space"});
        Hello h;
        try {
            h.spec = spec_from_json(field(j, "spec"));
            h.space = space_from_json(field(j, "space"));
        } catch (const ConfigError& e) {
            throw ProtocolError(std::string("invalid hello: ") + e.what());
        }
        return h;
    }
    if (k == "set_knob") {
        only_keys(j, {"kind", "knob", "round"});
        return SetKnob{knob(j), count(j, "round", 1)};
    }
    if (k == "report") {
        only_keys(j, {"kind", "o", "c", "round"});
        return Report{real(j, "o"), reals(j, "c"), count(j, "round", 1)};
    }
    if (k == "chosen") {
        only_keys(j, {"kind", "knob", "o_ref", "c_ref"});
        return Chosen{knob(j), real(j, "o_ref"), reals(j, "c_ref")};
    }
    if (k == "monitor") {
        only_keys(j, {"kind", "o", "c", "interval"});
        return Monitor{real(j, "o"), reals(j, "c"), count(j, "interval", 0)};
    }
    if (k == "new_phase") {
        only_keys(j, {"kind"});
        return NewPhase{};
    }
    if (k == "bye") {
        only_keys(j, {"kind", "reason"});
        const Json& r = field(j, "reason");
        if (!r.is_string()) throw ProtocolError("field 'reason' must be a string");
        return Bye{r.get<std::string>()};
    }
    throw ProtocolError("unknown message kind '" + k + "'");
}

StepResult illegal(const SessionState& s, const WireMessage& m)
{
    StepResult r{s, SessionAction::Teardown, Bye{"protocol violation: unexpected " + to_string(kind_of(m))}};
    r.state.phase = SessionPhase::Closed;
    r.state.expect = Expect::Nothing;
    return r;
}

}  // namespace

MessageKind kind_of(const WireMessage& m)
{
    return static_cast<MessageKind>(m.index());
}

std::string to_string(MessageKind k)
{
    switch (k) {
    case MessageKind::Hello: return "hello";
    case MessageKind::SetKnob: return "set_knob";
    case MessageKind::Report: return "report";
    case MessageKind::Chosen: return "chosen";
    case MessageKind::Monitor: return "monitor";
    case MessageKind::NewPhase: return "new_phase";
    case MessageKind::Bye: return "bye";
    }
    return "?";
}

std::string encode(const WireMessage& m)
{
    Json j{{"kind", to_string(kind_of(m))}};
    std::visit(
        [&j](const auto& msg) {
            using T = std::decay_t<decltype(msg)>;
            if constexpr (std::is_same_v<T, Hello>) {
                j["spec"] = spec_to_json(msg.spec);
                j["space"] = space_to_json(msg.space);
            } else if constexpr (std::is_same_v<T, SetKnob>) {
                j["knob"] = setting_to_json(msg.knob);
                j["round"] = msg.round;
            } else if constexpr (std::is_same_v<T, Report>) {
                j["o"] = msg.o;
                j["c"] = msg.c;
                j["round"] = msg.round;
            } else if constexpr (std::is_same_v<T, Chosen>) {
                j["knob"] = setting_to_json(msg.knob);
                j["o_ref"] = msg.o_ref;
                j["c_ref"] = msg.c_ref;
            } else if constexpr (std::is_same_v<T, Monitor>) {
                j["o"] = msg.o;
                j["c"] = msg.c;
                j["interval"] = msg.interval;
            } else if constexpr (std::is_same_v<T, Bye>) {
                j["reason"] = msg.reason;
            }
        },
        m);
    return j.dump() + '\n';
}

WireMessage decode(std::string_view line)
{
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    try {
        return decode_json(Json::parse(line));
    } catch (const ProtocolError&) {
        throw;
    } catch (const std::exception& e) {
        throw ProtocolError(std::string("malformed message: ") + e.what());
    } catch (...) {
        throw ProtocolError("malformed message");
    }
}

void validate_message(const WireMessage& m, const KnobSpace& space, const OptimizationSpec& spec)
{
    const auto check_knob = [&](const KnobSetting& k) {
        if (!space.contains(k)) throw ProtocolError("knob " + to_string(k) + " is out of range");
    };
    const auto check_metrics = [&](const std::vector<double>& c) {
        if (c.size() != spec.constraints.size()) {
            throw ProtocolError("expected " + std::to_string(spec.constraints.size()) +
                                " constraint values, got " + std::to_string(c.size()));
        }
    };
    std::visit(
        [&](const auto& msg) {
            using T = std::decay_t<decltype(msg)>;
            if constexpr (std::is_same_v<T, SetKnob>) {
                check_knob(msg.knob);
            } else if constexpr (std::is_same_v<T, Chosen>) {
                check_knob(msg.knob);
                check_metrics(msg.c_ref);
            } else if constexpr (std::is_same_v<T, Report> || std::is_same_v<T, Monitor>) {
                check_metrics(msg.c);
            }
        },
        m);
}

SessionState SessionState::server(int total_rounds)
{
    SessionState s;
    s.side = Side::Server;
    s.total_rounds = total_rounds;
    return s;
}

SessionState SessionState::client()
{
    SessionState s;
    s.side = Side::Client;
    return s;
}

StepResult step(const SessionState& state, const WireMessage& m)
{
    if (state.phase == SessionPhase::Closed) return illegal(state, m);

    StepResult r{state, SessionAction::None, std::nullopt};
    SessionState& s = r.state;
    // Action for the side that received the message; None for the sender.
    const auto for_receiver = [&](Side receiver, SessionAction a) {
        r.action = state.side == receiver ? a : SessionAction::None;
    };

    const MessageKind kind = kind_of(m);
    if (kind == MessageKind::Bye) {
        s.phase = SessionPhase::Closed;
        s.expect = Expect::Nothing;
        return r;
    }

    switch (state.expect) {
    case Expect::Hello:
        if (kind != MessageKind::Hello) return illegal(state, m);
        s.phase = SessionPhase::Sampling;
        s.round = 1;
        s.expect = Expect::SetKnob;
        for_receiver(Side::Server, SessionAction::PickSample);
        return r;

    case Expect::SetKnob:
    case Expect::ChosenOrSetKnob:
        if (kind == MessageKind::SetKnob) {
            if (std::get<SetKnob>(m).round != state.round) return illegal(state, m);
            s.expect = Expect::Report;
            for_receiver(Side::Client, SessionAction::RunSample);
            return r;
        }
        if (kind == MessageKind::Chosen && state.expect == Expect::ChosenOrSetKnob) break;
        return illegal(state, m);

    case Expect::Report: {
        if (kind != MessageKind::Report || std::get<Report>(m).round != state.round) {
            return illegal(state, m);
        }
        if (state.total_rounds > 0 && state.round >= state.total_rounds) {
            s.expect = Expect::Chosen;
            for_receiver(Side::Server, SessionAction::PickChosen);
        } else {
            s.round = state.round + 1;
            s.expect = Expect::ChosenOrSetKnob;
            for_receiver(Side::Server, SessionAction::PickSample);
        }
        return r;
    }

    case Expect::Chosen:
        if (kind != MessageKind::Chosen) return illegal(state, m);
        break;

    case Expect::MonitorReport:
        if (kind != MessageKind::Monitor || std::get<Monitor>(m).interval <= state.last_interval) {
            return illegal(state, m);
        }
        s.last_interval = std::get<Monitor>(m).interval;
        s.expect = Expect::MonitorReply;
        for_receiver(Side::Server, SessionAction::EvaluateMonitor);
        return r;

    case Expect::MonitorReply:
        if (kind == MessageKind::Monitor && std::get<Monitor>(m).interval == state.last_interval) {
            s.expect = Expect::MonitorReport;
            for_receiver(Side::Client, SessionAction::RunMonitor);
            return r;
        }
        if (kind == MessageKind::NewPhase) {
            s.phase = SessionPhase::Sampling;
            s.round = 1;
            s.expect = Expect::SetKnob;
            for_receiver(Side::Client, SessionAction::AwaitKnob);
            return r;
        }
        return illegal(state, m);

    case Expect::Nothing:
        return illegal(state, m);
    }

    // Chosen accepted: sampling phase ends.
    s.phase = SessionPhase::Monitoring;
    s.expect = Expect::MonitorReport;
    for_receiver(Side::Client, SessionAction::RunChosen);
    return r;
}

bool matches_trace_grammar(std::span<const MessageKind> kinds, int total_rounds)
{
    if (total_rounds < 1) return false;
    std::size_t pos = 0;
    const auto take = [&](MessageKind k) {
        if (pos < kinds.size() && kinds[pos] == k) {
            ++pos;
            return true;
        }
        return false;
    };
    const auto sampling_phase = [&] {
        for (int r = 0; r < total_rounds; ++r) {
            if (!take(MessageKind::SetKnob) || !take(MessageKind::Report)) return false;
        }
        return take(MessageKind::Chosen);
    };
    if (!take(MessageKind::Hello) || !sampling_phase()) return false;
    for (;;) {
        if (take(MessageKind::Monitor)) continue;
        if (take(MessageKind::NewPhase)) {
            if (!sampling_phase()) return false;
            continue;
        }
        return take(MessageKind::Bye) && pos == kinds.size();
    }
}

bool transcript_matches_grammar(std::span<const std::string> lines, int total_rounds)
{
    std::vector<MessageKind> kinds;
    try {
        for (const auto& l : lines) kinds.push_back(kind_of(decode(l)));
    } catch (const ProtocolError&) {
        return false;
    }
    return matches_trace_grammar(kinds, total_rounds);
}

}  // namespace knobtune
