#include "treeplan/net.hpp"

#include "treeplan/errors.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace treeplan {

FdChannel::FdChannel(int fd) : fd_(fd) {
    if (fd_ < 0) throw ProtocolError("FdChannel: bad file descriptor");
}

FdChannel::~FdChannel() {
    if (fd_ >= 0) ::close(fd_);
}

std::optional<std::string> FdChannel::read_line() {
    while (true) {
        size_t nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        if (eof_) {
            if (buffer_.empty()) return std::nullopt;
            std::string line = std::move(buffer_);
            buffer_.clear();
            return line;
        }
        char chunk[4096];
        ssize_t n = ::read(fd_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError(std::string("read failed: ") + std::strerror(errno));
        }
        if (n == 0) {
            eof_ = true;
            continue;
        }
        buffer_.append(chunk, static_cast<size_t>(n));
    }
}

void FdChannel::write_line(std::string_view line) {
    std::string out(line);
    out += '\n';
    size_t written = 0;
    while (written < out.size()) {
        ssize_t n = ::write(fd_, out.data() + written, out.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError(std::string("write failed: ") + std::strerror(errno));
        }
        written += static_cast<size_t>(n);
    }
}

std::unique_ptr<LineChannel> tcp_connect(const std::string& endpoint) {
    const size_t colon = endpoint.rfind(':');
    if (colon == std::string::npos)
        throw ProtocolError("bad endpoint (expected host:port): " + endpoint);
    const std::string host = endpoint.substr(0, colon);
    const std::string port = endpoint.substr(colon + 1);

    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res);
    if (rc != 0) throw ProtocolError("cannot resolve " + endpoint + ": " + gai_strerror(rc));

    int fd = -1;
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw ProtocolError("cannot connect to " + endpoint);
    return std::make_unique<FdChannel>(fd);
}

LineServer::LineServer(HandlerFactory factory, int port) : factory_(std::move(factory)) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw ProtocolError("cannot create server socket");
    int opt = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &opt, sizeof opt);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<uint16_t>(port));
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(listen_fd_);
        throw ProtocolError(std::string("cannot bind server socket: ") + std::strerror(errno));
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    if (::listen(listen_fd_, 8) != 0) {
        ::close(listen_fd_);
        throw ProtocolError("cannot listen on server socket");
    }
    thread_ = std::thread([this] { serve(); });
}

LineServer::~LineServer() { stop(); }

void LineServer::stop() {
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    if (thread_.joinable()) thread_.join();
}

void LineServer::serve() {
    while (true) {
        int client = ::accept(listen_fd_, nullptr, nullptr);
        if (client < 0) return;  // listener closed
        try {
            FdChannel channel(client);
            SessionHandler handler = factory_();
            while (auto line = channel.read_line()) {
                std::optional<std::string> reply = handler(*line);
                if (!reply) break;
                channel.write_line(*reply);
            }
        } catch (const Error&) {
            // drop the connection, keep serving
        }
    }
}

}  // namespace treeplan
