/* Copyright 2026 The gradsync Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "gradsync/tcp_transport.h"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>
#include <thread>
#include <variant>

#include "gradsync/byte_io.h"
#include "json.hpp"

namespace gradsync::tcp {

static_assert(std::endian::native == std::endian::little,
              "data frames copy host floats verbatim");

using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

namespace {

std::string errno_text(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

// Waits until `fd` is ready for `events` or the deadline passes.
void wait_ready(int fd, short events, Clock::time_point deadline, const char* what) {
  for (;;) {
    const auto left =
        std::chrono::duration_cast<Millis>(deadline - Clock::now()).count();
    if (left <= 0) throw TransportError(std::string(what) + ": timed out");
    pollfd pfd{fd, events, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left));
    if (rc > 0) return;
    if (rc < 0 && errno != EINTR) throw TransportError(errno_text(what));
  }
}

void read_exact(int fd, std::uint8_t* out, std::size_t n, Clock::time_point deadline) {
  std::size_t got = 0;
  while (got < n) {
    wait_ready(fd, POLLIN, deadline, "read");
    const ssize_t rc = ::recv(fd, out + got, n - got, 0);
    if (rc == 0) throw TransportError("connection closed by peer");
    if (rc < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw TransportError(errno_text("recv"));
    }
    got += static_cast<std::size_t>(rc);
  }
}

void write_all(int fd, const std::uint8_t* data, std::size_t n, Clock::time_point deadline) {
  std::size_t sent = 0;
  while (sent < n) {
    wait_ready(fd, POLLOUT, deadline, "write");
    const ssize_t rc = ::send(fd, data + sent, n - sent, MSG_NOSIGNAL);
    if (rc < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw TransportError(errno_text("send"));
    }
    sent += static_cast<std::size_t>(rc);
  }
}

// Write deadline for a single frame; generous, the reader side enforces the
// real timeout.
constexpr Millis kWriteTimeout{60000};

void send_json(const Socket& s, FrameTag tag, const Json& j) {
  const std::string text = j.dump();
  write_frame(s, tag, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                text.size()));
}

Json parse_json(const Frame& frame) {
  try {
    return Json::parse(frame.payload.begin(), frame.payload.end());
  } catch (const Json::exception& e) {
    throw TransportError(std::string("malformed control frame: ") + e.what());
  }
}

FrameTag data_tag(DType dtype) { return dtype == DType::kF32 ? FrameTag::kF32 : FrameTag::kF16; }

template <typename T>
std::vector<std::uint8_t> to_bytes(std::span<const T> values) {
  std::vector<std::uint8_t> out(values.size_bytes());
  if (!out.empty()) std::memcpy(out.data(), values.data(), out.size());
  return out;
}

template <typename T>
std::vector<T> from_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % sizeof(T) != 0) {
    throw TransportError("data frame size is not a whole number of elements");
  }
  std::vector<T> out(bytes.size() / sizeof(T));
  if (!out.empty()) std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_frame(FrameTag tag, std::span<const std::uint8_t> payload) {
  if (payload.size() > kMaxFrameBytes) throw TransportError("frame too large");
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.u8(static_cast<std::uint8_t>(tag));
  w.bytes(payload);
  return w.take();
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderBytes) throw TransportError("short frame header");
  ByteReader r(bytes);
  const std::uint32_t length = r.u32();
  const auto tag = static_cast<FrameTag>(r.u8());
  if (length > kMaxFrameBytes) throw TransportError("frame too large");
  if (r.remaining() != length) throw TransportError("frame length mismatch");
  const auto body = r.raw(length);
  return Frame{tag, std::vector<std::uint8_t>(body.begin(), body.end())};
}

CollectiveAborted::CollectiveAborted(std::size_t step, const std::string& detail)
    : std::runtime_error("collective aborted at step " + std::to_string(step) + ": " +
                         detail),
      step_(step) {}

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.release();
  }
  return *this;
}

int Socket::release() {
  const int fd = fd_;
  fd_ = -1;
  return fd;
}

void Socket::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

Socket listen_loopback(std::uint16_t port, std::uint16_t* bound_port) {
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw TransportError(errno_text("socket"));
  const int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    throw TransportError(errno_text("bind"));
  }
  if (::listen(s.fd(), 128) != 0) throw TransportError(errno_text("listen"));
  if (bound_port != nullptr) {
    socklen_t len = sizeof(addr);
    ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
    *bound_port = ntohs(addr.sin_port);
  }
  return s;
}

Socket connect_to(const std::string& host, std::uint16_t port, Millis timeout) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw TransportError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  const sockaddr_in addr = *reinterpret_cast<sockaddr_in*>(res->ai_addr);
  ::freeaddrinfo(res);

  // Retry while the listener is not up yet.
  const auto deadline = Clock::now() + timeout;
  for (;;) {
    Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s.valid()) throw TransportError(errno_text("socket"));
    if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) {
      const int one = 1;
      ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return s;
    }
    if (errno != ECONNREFUSED && errno != EINTR) throw TransportError(errno_text("connect"));
    if (Clock::now() >= deadline) {
      throw TransportError("connect to " + host + ":" + service + ": timed out");
    }
    std::this_thread::sleep_for(Millis(20));
  }
}

Socket accept_with_timeout(const Socket& listener, Millis timeout) {
  wait_ready(listener.fd(), POLLIN, Clock::now() + timeout, "accept");
  Socket s(::accept4(listener.fd(), nullptr, nullptr, SOCK_CLOEXEC));
  if (!s.valid()) throw TransportError(errno_text("accept"));
  const int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return s;
}

void write_frame(const Socket& s, FrameTag tag, std::span<const std::uint8_t> payload) {
  if (payload.size() > kMaxFrameBytes) throw TransportError("frame too large");
  ByteWriter header;
  header.u32(static_cast<std::uint32_t>(payload.size()));
  header.u8(static_cast<std::uint8_t>(tag));
  const auto deadline = Clock::now() + kWriteTimeout;
  write_all(s.fd(), header.buffer().data(), header.buffer().size(), deadline);
  if (!payload.empty()) write_all(s.fd(), payload.data(), payload.size(), deadline);
}

Frame read_frame(const Socket& s, Millis timeout) {
  const auto deadline = Clock::now() + timeout;
  std::uint8_t header[kFrameHeaderBytes];
  read_exact(s.fd(), header, sizeof(header), deadline);
  ByteReader r(header);
  const std::uint32_t length = r.u32();
  const auto tag = static_cast<FrameTag>(r.u8());
  if (length > kMaxFrameBytes) throw TransportError("frame too large");
  Frame frame{tag, std::vector<std::uint8_t>(length)};
  if (length > 0) read_exact(s.fd(), frame.payload.data(), length, deadline);
  return frame;
}

// ---------------------------------------------------------------------------
// Coordinator

Coordinator::Coordinator(std::uint16_t port, int workers, ClusterOptions options)
    : options_(options), workers_(workers) {
  if (workers < 1) throw TransportError("worker count must be >= 1");
  listener_ = listen_loopback(port, &port_);
}

void Coordinator::accept_workers() {
  conns_.clear();
  conns_.resize(static_cast<std::size_t>(workers_));
  std::vector<bool> taken(static_cast<std::size_t>(workers_), false);
  int joined = 0;
  while (joined < workers_) {
    Socket s = accept_with_timeout(listener_, options_.accept_timeout);
    const Frame hello = read_frame(s, options_.io_timeout);
    if (hello.tag != FrameTag::kHello) {
      send_json(s, FrameTag::kReject, Json{{"error", "expected HELLO"}});
      continue;
    }
    const Json j = parse_json(hello);
    int rank = j.value("rank", -1);
    const auto port = j.value("port", 0);
    if (rank >= workers_ || rank < -1 || (rank >= 0 && taken[rank])) {
      send_json(s, FrameTag::kReject,
                Json{{"error", "rank claim " + std::to_string(rank) +
                                   " is out of range or already taken"}});
      continue;
    }
    if (rank < 0) {
      rank = 0;
      while (taken[rank]) ++rank;
    }
    taken[rank] = true;
    send_json(s, FrameTag::kWelcome, Json{{"rank", rank}});
    conns_[rank] = WorkerConn{std::move(s), static_cast<std::uint16_t>(port), true};
    ++joined;
  }
}

std::vector<std::vector<std::uint8_t>> Coordinator::run(
    const collectives::ReduceSchedule& schedule,
    const std::vector<std::vector<std::uint8_t>>& inputs, DType dtype,
    collectives::ReduceOp op, std::optional<FaultInjection> fault) {
  if (broken_) throw TransportError("session unusable after an aborted collective");
  if (schedule.workers != workers_ || inputs.size() != static_cast<std::size_t>(workers_)) {
    throw ContractViolation("schedule/input count does not match the session size");
  }
  const std::size_t elem = dtype == DType::kF32 ? 4 : 2;
  if (schedule.element_bytes != elem) {
    throw ContractViolation("schedule element size does not match dtype");
  }

  Json job;
  job["dtype"] = dtype == DType::kF32 ? "f32" : "f16";
  job["op"] = op == collectives::ReduceOp::kSum ? "sum" : "mean";
  job["schedule"] = collectives::to_json(schedule);
  Json peers = Json::array();
  for (int r = 0; r < workers_; ++r) {
    peers.push_back(Json{{"rank", r}, {"port", conns_[r].listen_port}});
  }
  job["peers"] = std::move(peers);
  if (fault) job["fault"] = Json{{"rank", fault->rank}, {"step", fault->step}};

  for (int r = 0; r < workers_; ++r) {
    send_json(conns_[r].socket, FrameTag::kJob, job);
    write_frame(conns_[r].socket, data_tag(dtype), inputs[r]);
  }

  std::vector<std::vector<std::uint8_t>> results(static_cast<std::size_t>(workers_));
  std::vector<bool> done(static_cast<std::size_t>(workers_), false);
  std::optional<std::size_t> abort_step;
  std::string detail;
  int outstanding = workers_;
  while (outstanding > 0) {
    std::vector<pollfd> fds;
    std::vector<int> ranks;
    for (int r = 0; r < workers_; ++r) {
      if (!done[r]) {
        fds.push_back(pollfd{conns_[r].socket.fd(), POLLIN, 0});
        ranks.push_back(r);
      }
    }
    const int rc = ::poll(fds.data(), fds.size(),
                          static_cast<int>(options_.io_timeout.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) {
      broken_ = true;
      throw CollectiveAborted(abort_step.value_or(0),
                              "timed out waiting for " + std::to_string(outstanding) +
                                  " worker(s)" + detail);
    }
    for (std::size_t i = 0; i < fds.size(); ++i) {
      if (fds[i].revents == 0) continue;
      const int r = ranks[i];
      done[r] = true;
      --outstanding;
      try {
        Frame frame = read_frame(conns_[r].socket, options_.io_timeout);
        if (frame.tag == data_tag(dtype)) {
          results[r] = std::move(frame.payload);
        } else if (frame.tag == FrameTag::kAbort) {
          const Json j = parse_json(frame);
          const std::size_t step = j.value("step", std::size_t{0});
          abort_step = abort_step ? std::min(*abort_step, step) : step;
          detail += "; worker " + std::to_string(r) + " at step " + std::to_string(step) +
                    ": " + j.value("reason", std::string("unknown"));
        } else {
          detail += "; worker " + std::to_string(r) + " sent an unexpected frame";
          conns_[r].alive = false;
        }
      } catch (const TransportError& e) {
        conns_[r].alive = false;
        detail += "; worker " + std::to_string(r) + " lost (" + e.what() + ")";
      }
    }
  }

  bool all_ok = true;
  for (int r = 0; r < workers_; ++r) {
    if (!conns_[r].alive) all_ok = false;
  }
  if (abort_step || !all_ok) {
    broken_ = true;
    throw CollectiveAborted(abort_step.value_or(0),
                            detail.empty() ? std::string("worker failure") : detail.substr(2));
  }
  return results;
}

void Coordinator::shutdown() {
  for (WorkerConn& c : conns_) {
    if (!c.alive || !c.socket.valid()) continue;
    try {
      write_frame(c.socket, FrameTag::kShutdown, {});
    } catch (const TransportError&) {
    }
    c.socket.close();
    c.alive = false;
  }
}

// ---------------------------------------------------------------------------
// Worker

namespace {

struct AbortInfo {
  std::size_t step;
  std::string reason;
};

void establish_mesh(std::vector<Socket>& peers, const Json& peer_list, int rank,
                    const Socket& listener, Millis timeout) {
  const int p = static_cast<int>(peer_list.size());
  peers.clear();
  peers.resize(static_cast<std::size_t>(p));
  for (const auto& peer : peer_list) {
    const int r = peer.at("rank").get<int>();
    if (r >= rank) continue;
    peers[r] = connect_to("127.0.0.1", peer.at("port").get<std::uint16_t>(), timeout);
    send_json(peers[r], FrameTag::kPeerHello, Json{{"rank", rank}});
  }
  for (int i = rank + 1; i < p; ++i) {
    Socket s = accept_with_timeout(listener, timeout);
    const Frame hello = read_frame(s, timeout);
    if (hello.tag != FrameTag::kPeerHello) throw TransportError("expected PEER_HELLO");
    const int r = parse_json(hello).at("rank").get<int>();
    if (r <= rank || r >= p || peers[r].valid()) {
      throw TransportError("unexpected peer rank " + std::to_string(r));
    }
    peers[r] = std::move(s);
  }
}

template <typename T>
std::variant<std::vector<T>, AbortInfo> execute(const collectives::ReduceSchedule& schedule,
                                                int rank, std::vector<T> input,
                                                collectives::ReduceOp op,
                                                std::vector<Socket>& peers, DType dtype,
                                                std::optional<FaultInjection> fault,
                                                Millis timeout) {
  collectives::RankExecutor<T> exec(schedule, rank, std::move(input), op);
  const FrameTag tag = data_tag(dtype);
  for (std::size_t s = 0; s < schedule.steps.size(); ++s) {
    if (fault && fault->rank == rank && fault->step == s) ::raise(SIGKILL);

    auto outgoing = exec.outgoing(s);
    const std::vector<int> sources = exec.expected_sources(s);
    std::string send_error;
    std::thread sender([&] {
      try {
        for (const auto& msg : outgoing) {
          write_frame(peers[msg.dst], tag, to_bytes<T>(msg.data));
        }
      } catch (const std::exception& e) {
        send_error = e.what();
      }
    });
    std::string recv_error;
    try {
      for (int src : sources) {
        const Frame frame = read_frame(peers[src], timeout);
        if (frame.tag != tag) throw TransportError("unexpected frame tag from peer");
        const std::vector<T> data = from_bytes<T>(frame.payload);
        exec.deliver(s, src, data);
      }
    } catch (const std::exception& e) {
      recv_error = "receive from peer failed: " + std::string(e.what());
      // Unblock a sender stuck on a dead connection.
      for (Socket& peer : peers) {
        if (peer.valid()) ::shutdown(peer.fd(), SHUT_RDWR);
      }
    }
    sender.join();
    if (!recv_error.empty()) return AbortInfo{s, recv_error};
    if (!send_error.empty()) return AbortInfo{s, "send to peer failed: " + send_error};
    exec.finish_step(s);
  }
  return exec.take_buffer();
}

}  // namespace

int run_worker(const std::string& coord_host, std::uint16_t coord_port, int claimed_rank,
               WorkerOptions options) {
  std::uint16_t listen_port = 0;
  Socket listener = listen_loopback(0, &listen_port);
  Socket coord = connect_to(coord_host, coord_port, options.io_timeout);
  send_json(coord, FrameTag::kHello, Json{{"rank", claimed_rank}, {"port", listen_port}});
  const Frame welcome = read_frame(coord, options.io_timeout);
  if (welcome.tag == FrameTag::kReject) {
    throw TransportError("coordinator rejected worker: " +
                         parse_json(welcome).value("error", std::string("unknown")));
  }
  if (welcome.tag != FrameTag::kWelcome) throw TransportError("expected WELCOME");
  const int rank = parse_json(welcome).at("rank").get<int>();

  std::vector<Socket> peers;
  bool meshed = false;
  for (;;) {
    // Jobs may be far apart; block on the coordinator indefinitely.
    Frame frame = read_frame(coord, Millis(24L * 3600 * 1000));
    if (frame.tag == FrameTag::kShutdown) return 0;
    if (frame.tag != FrameTag::kJob) throw TransportError("expected JOB or SHUTDOWN");
    const Json job = parse_json(frame);
    const collectives::ReduceSchedule schedule =
        collectives::schedule_from_json(job.at("schedule"));
    const DType dtype = job.at("dtype").get<std::string>() == "f16" ? DType::kF16 : DType::kF32;
    const auto op = job.at("op").get<std::string>() == "mean" ? collectives::ReduceOp::kMean
                                                              : collectives::ReduceOp::kSum;
    std::optional<FaultInjection> fault;
    if (job.contains("fault")) {
      fault = FaultInjection{job["fault"].at("rank").get<int>(),
                             job["fault"].at("step").get<std::size_t>()};
    }
    const Frame input = read_frame(coord, options.io_timeout);
    if (input.tag != data_tag(dtype)) throw TransportError("expected input data frame");

    std::optional<AbortInfo> abort;
    if (!meshed) {
      try {
        establish_mesh(peers, job.at("peers"), rank, listener, options.io_timeout);
        meshed = true;
      } catch (const std::exception& e) {
        abort = AbortInfo{0, std::string("mesh setup failed: ") + e.what()};
      }
    }
    if (!abort) {
      if (dtype == DType::kF32) {
        auto out = execute<float>(schedule, rank, from_bytes<float>(input.payload), op, peers,
                                  dtype, fault, options.io_timeout);
        if (auto* a = std::get_if<AbortInfo>(&out)) {
          abort = *a;
        } else {
          write_frame(coord, FrameTag::kF32, to_bytes<float>(std::get<0>(out)));
        }
      } else {
        auto out = execute<halfprec::HalfBits>(schedule, rank,
                                               from_bytes<halfprec::HalfBits>(input.payload),
                                               op, peers, dtype, fault, options.io_timeout);
        if (auto* a = std::get_if<AbortInfo>(&out)) {
          abort = *a;
        } else {
          write_frame(coord, FrameTag::kF16, to_bytes<halfprec::HalfBits>(std::get<0>(out)));
        }
      }
    }
    if (abort) {
      send_json(coord, FrameTag::kAbort, Json{{"step", abort->step}, {"reason", abort->reason}});
      peers.clear();
      return 3;
    }
  }
}

// ---------------------------------------------------------------------------
// LocalCluster

LocalCluster::LocalCluster(int workers, ClusterOptions options)
    : coordinator_(0, workers, options) {
  const std::uint16_t port = coordinator_.port();
  for (int r = 0; r < workers; ++r) {
    const pid_t pid = ::fork();
    if (pid < 0) {
      reap();
      throw TransportError(errno_text("fork"));
    }
    if (pid == 0) {
      coordinator_.close_listener();
      int code = 3;
      try {
        code = run_worker("127.0.0.1", port, r, WorkerOptions{options.io_timeout});
      } catch (...) {
        code = 3;
      }
      ::_exit(code);
    }
    children_.push_back(pid);
  }
  try {
    coordinator_.accept_workers();
  } catch (...) {
    reap();
    throw;
  }
}

LocalCluster::~LocalCluster() { reap(); }

void LocalCluster::reap() {
  coordinator_.shutdown();
  const auto deadline = Clock::now() + Millis(5000);
  for (pid_t pid : children_) {
    for (;;) {
      int status = 0;
      const pid_t rc = ::waitpid(pid, &status, WNOHANG);
      if (rc == pid || (rc < 0 && errno != EINTR)) break;
      if (Clock::now() >= deadline) {
        ::kill(pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        break;
      }
      std::this_thread::sleep_for(Millis(5));
    }
  }
  children_.clear();
}

std::vector<std::vector<float>> LocalCluster::allreduce(
    const collectives::ReduceSchedule& schedule, const std::vector<std::vector<float>>& inputs,
    collectives::ReduceOp op, std::optional<FaultInjection> fault) {
  std::vector<std::vector<std::uint8_t>> raw;
  raw.reserve(inputs.size());
  for (const auto& in : inputs) raw.push_back(to_bytes<float>(in));
  auto results = coordinator_.run(schedule, raw, DType::kF32, op, fault);
  std::vector<std::vector<float>> out;
  out.reserve(results.size());
  for (const auto& r : results) out.push_back(from_bytes<float>(r));
  return out;
}

std::vector<std::vector<halfprec::HalfBits>> LocalCluster::allreduce_f16(
    const collectives::ReduceSchedule& schedule,
    const std::vector<std::vector<halfprec::HalfBits>>& inputs, collectives::ReduceOp op) {
  std::vector<std::vector<std::uint8_t>> raw;
  raw.reserve(inputs.size());
  for (const auto& in : inputs) raw.push_back(to_bytes<halfprec::HalfBits>(in));
  auto results = coordinator_.run(schedule, raw, DType::kF16, op);
  std::vector<std::vector<halfprec::HalfBits>> out;
  out.reserve(results.size());
  for (const auto& r : results) out.push_back(from_bytes<halfprec::HalfBits>(r));
  return out;
}

std::vector<std::vector<float>> run_over_tcp(const collectives::ReduceSchedule& schedule,
                                             const std::vector<std::vector<float>>& inputs,
                                             collectives::ReduceOp op, ClusterOptions options,
                                             std::optional<FaultInjection> fault) {
  if (inputs.size() != static_cast<std::size_t>(schedule.workers)) {
    throw ContractViolation("expected one input per worker");
  }
  if (schedule.workers == 1) {
    return collectives::execute_in_memory(schedule, inputs, op);
  }
  LocalCluster cluster(schedule.workers, options);
  return cluster.allreduce(schedule, inputs, op, fault);
}

}  // namespace gradsync::tcp
