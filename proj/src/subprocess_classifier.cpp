#include <cerrno>
#include <charconv>
#include <csignal>
#include <cstring>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "mlrel/classifier.hpp"
#include "mlrel/error.hpp"

namespace mlrel {

namespace {

constexpr std::size_t kChunk = 512;

void write_all(int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t w = ::write(fd, data.data() + off, data.size() - off);
        if (w < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorCode::SubprocessFailure,
                        std::string("write to model process failed: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(w);
    }
}

}  // namespace

SubprocessClassifier::SubprocessClassifier(std::string command, std::size_t dim)
    : command_(std::move(command)), dim_(dim) {
    std::signal(SIGPIPE, SIG_IGN);
    int in_pipe[2], out_pipe[2];
    if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0)
        throw Error(ErrorCode::SubprocessFailure, "pipe() failed");
    pid_ = ::fork();
    if (pid_ < 0) throw Error(ErrorCode::SubprocessFailure, "fork() failed");
    if (pid_ == 0) {
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
}

SubprocessClassifier::~SubprocessClassifier() {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    if (pid_ > 0) {
        int status = 0;
        ::waitpid(pid_, &status, 0);
    }
}

ClassId SubprocessClassifier::predict(std::span<const double> x) const {
    ClassId out = 0;
    predict_batch(x, {&out, 1});
    return out;
}

void SubprocessClassifier::predict_batch(std::span<const double> xs, std::span<ClassId> out) const {
    std::lock_guard lock(mutex_);
    for (std::size_t begin = 0; begin < out.size(); begin += kChunk) {
        const std::size_t count = std::min(kChunk, out.size() - begin);
        exchange(xs.subspan(begin * dim_, count * dim_), out.subspan(begin, count));
    }
}

void SubprocessClassifier::exchange(std::span<const double> xs, std::span<ClassId> out) const {
    std::string request;
    char buf[64];
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t a = 0; a < dim_; ++a) {
            if (a) request.push_back(',');
            const auto res = std::to_chars(buf, buf + sizeof buf, xs[i * dim_ + a]);
            request.append(buf, res.ptr);
        }
        request.push_back('\n');
    }
    write_all(to_child_, request);

    std::size_t got = 0;
    while (got < out.size()) {
        const std::size_t nl = read_buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string_view line(read_buffer_.data(), nl);
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
            ClassId y = 0;
            const auto [p, ec] = std::from_chars(line.data(), line.data() + line.size(), y);
            if (ec != std::errc() || p != line.data() + line.size())
                throw Error(ErrorCode::SubprocessFailure,
                            "model process answered '" + std::string(line) + "'");
            out[got++] = y;
            read_buffer_.erase(0, nl + 1);
            continue;
        }
        const ssize_t r = ::read(from_child_, buf, sizeof buf);
        if (r < 0 && errno == EINTR) continue;
        if (r <= 0) throw Error(ErrorCode::SubprocessFailure, "model process closed its output");
        read_buffer_.append(buf, static_cast<std::size_t>(r));
    }
}

}  // namespace mlrel
