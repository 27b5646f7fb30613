#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>

namespace knobtune {

struct Received {
    enum class Status { Line, Timeout, Closed };
    Status status = Status::Closed;
    std::string line;  // without the trailing newline
};

/// Bidirectional line stream. One owner per end; not thread-safe per end.
class LineChannel {
public:
    virtual ~LineChannel() = default;
    /// Sends one line; a trailing newline is added if missing. Throws
    /// SessionError once the channel is closed.
    virtual void send(const std::string& line) = 0;
    virtual Received receive(std::chrono::milliseconds timeout) = 0;
    virtual void close() = 0;
};

/// Two connected in-process ends backed by blocking queues.
std::pair<std::unique_ptr<LineChannel>, std::unique_ptr<LineChannel>> make_channel_pair();

/// Blocking TCP client connection. Throws SessionError on failure.
std::unique_ptr<LineChannel> tcp_connect(const std::string& host, std::uint16_t port);

/// Listening TCP socket.
class TcpListener {
public:
    /// Port 0 binds an ephemeral port; see port().
    explicit TcpListener(std::uint16_t port, const std::string& bind_address = "127.0.0.1");
    ~TcpListener();
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    std::uint16_t port() const { return port_; }
    /// Waits up to `timeout` for a connection; nullptr on timeout or after close().
    std::unique_ptr<LineChannel> accept(std::chrono::milliseconds timeout);
    void close();

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

}  // namespace knobtune
