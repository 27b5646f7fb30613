#include "knobtune/transport.hpp"

#include "knobtune/error.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>

namespace knobtune {

namespace {

std::string with_newline(const std::string& line)
{
    if (!line.empty() && line.back() == '\n') return line;
    return line + '\n';
}

std::string strip_newline(std::string line)
{
    if (!line.empty() && line.back() == '\n') line.pop_back();
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

// One direction of an in-process channel.
struct Pipe {
    std::mutex mutex;
    std::condition_variable ready;
    std::deque<std::string> lines;
    bool closed = false;
};

class QueueChannel : public LineChannel {
public:
    QueueChannel(std::shared_ptr<Pipe> in, std::shared_ptr<Pipe> out)
        : in_(std::move(in)), out_(std::move(out))
    {
    }
    ~QueueChannel() override { close(); }

    void send(const std::string& line) override
    {
        std::lock_guard lock(out_->mutex);
        if (out_->closed) throw SessionError("channel closed");
        out_->lines.push_back(strip_newline(line));
        out_->ready.notify_one();
    }

    Received receive(std::chrono::milliseconds timeout) override
    {
        std::unique_lock lock(in_->mutex);
        if (!in_->ready.wait_for(lock, timeout, [&] { return !in_->lines.empty() || in_->closed; })) {
            return {Received::Status::Timeout, {}};
        }
        if (in_->lines.empty()) return {Received::Status::Closed, {}};
        Received r{Received::Status::Line, std::move(in_->lines.front())};
        in_->lines.pop_front();
        return r;
    }

    void close() override
    {
        for (auto* p : {out_.get(), in_.get()}) {
            std::lock_guard lock(p->mutex);
            p->closed = true;
            p->ready.notify_all();
        }
    }

private:
    std::shared_ptr<Pipe> in_;
    std::shared_ptr<Pipe> out_;
};

class TcpChannel : public LineChannel {
public:
    explicit TcpChannel(int fd) : fd_(fd)
    {
        int one = 1;
        ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    }
    ~TcpChannel() override { close(); }

    void send(const std::string& line) override
    {
        if (fd_ < 0) throw SessionError("connection closed");
        const std::string data = with_newline(line);
        std::size_t sent = 0;
        while (sent < data.size()) {
            const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw SessionError(std::string("send failed: ") + std::strerror(errno));
            }
            sent += static_cast<std::size_t>(n);
        }
    }

    Received receive(std::chrono::milliseconds timeout) override
    {
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        for (;;) {
            if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
                std::string line = buffer_.substr(0, pos);
                buffer_.erase(0, pos + 1);
                return {Received::Status::Line, strip_newline(std::move(line))};
            }
            if (fd_ < 0 || eof_) return {Received::Status::Closed, {}};
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) return {Received::Status::Timeout, {}};
            pollfd p{fd_, POLLIN, 0};
            const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
            if (rc < 0) {
                if (errno == EINTR) continue;
                throw SessionError(std::string("poll failed: ") + std::strerror(errno));
            }
            if (rc == 0) return {Received::Status::Timeout, {}};
            char chunk[4096];
            const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
            if (n < 0) {
                if (errno == EINTR) continue;
                eof_ = true;
            } else if (n == 0) {
                eof_ = true;
            } else {
                buffer_.append(chunk, static_cast<std::size_t>(n));
            }
        }
    }

    void close() override
    {
        if (fd_ >= 0) {
            ::shutdown(fd_, SHUT_RDWR);
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    int fd_;
    std::string buffer_;
    bool eof_ = false;
};

}  // namespace

std::pair<std::unique_ptr<LineChannel>, std::unique_ptr<LineChannel>> make_channel_pair()
{
    auto a_to_b = std::make_shared<Pipe>();
    auto b_to_a = std::make_shared<Pipe>();
    return {std::make_unique<QueueChannel>(b_to_a, a_to_b), std::make_unique<QueueChannel>(a_to_b, b_to_a)};
}

std::unique_ptr<LineChannel> tcp_connect(const std::string& host, std::uint16_t port)
{
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port);
    if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
        throw SessionError("cannot resolve " + host + ": " + ::gai_strerror(rc));
    }
    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw SessionError("cannot connect to " + host + ":" + service);
    return std::make_unique<TcpChannel>(fd);
}

TcpListener::TcpListener(std::uint16_t port, const std::string& bind_address)
{
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw SessionError(std::string("socket failed: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, bind_address.c_str(), &addr.sin_addr) != 1) {
        ::close(fd_);
        throw SessionError("invalid bind address " + bind_address);
    }
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 64) != 0) {
        const std::string err = std::strerror(errno);
        ::close(fd_);
        throw SessionError("cannot listen on port " + std::to_string(port) + ": " + err);
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener()
{
    close();
}

std::unique_ptr<LineChannel> TcpListener::accept(std::chrono::milliseconds timeout)
{
    if (fd_ < 0) return nullptr;
    pollfd p{fd_, POLLIN, 0};
    if (::poll(&p, 1, static_cast<int>(timeout.count())) <= 0) return nullptr;
    const int conn = ::accept(fd_, nullptr, nullptr);
    if (conn < 0) return nullptr;
    return std::make_unique<TcpChannel>(conn);
}

void TcpListener::close()
{
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

}  // namespace knobtune
