#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>

namespace treeplan {

/// Newline-delimited message stream. Both wire protocols (external envs,
/// model endpoints) run over this.
class LineChannel {
public:
    virtual ~LineChannel() = default;
    /// Next line without the trailing newline; nullopt at EOF.
    virtual std::optional<std::string> read_line() = 0;
    virtual void write_line(std::string_view line) = 0;
};

/// Buffered line IO over an owned file descriptor (socket or pipe).
class FdChannel : public LineChannel {
public:
    explicit FdChannel(int fd);
    ~FdChannel() override;
    FdChannel(const FdChannel&) = delete;
    FdChannel& operator=(const FdChannel&) = delete;

    std::optional<std::string> read_line() override;
    void write_line(std::string_view line) override;

private:
    int fd_;
    std::string buffer_;
    bool eof_ = false;
};

/// Connect to "host:port". Throws ProtocolError on failure.
std::unique_ptr<LineChannel> tcp_connect(const std::string& endpoint);

/// Minimal line server on 127.0.0.1, one connection at a time, running on a
/// background thread. Each connection gets a fresh session handler; a
/// nullopt reply closes the connection.
class LineServer {
public:
    using SessionHandler = std::function<std::optional<std::string>(const std::string& line)>;
    using HandlerFactory = std::function<SessionHandler()>;

    explicit LineServer(HandlerFactory factory, int port = 0);
    ~LineServer();

    int port() const { return port_; }
    std::string endpoint() const { return "127.0.0.1:" + std::to_string(port_); }
    void stop();

private:
    void serve();

    HandlerFactory factory_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace treeplan
