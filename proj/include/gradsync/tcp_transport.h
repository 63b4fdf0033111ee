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

#ifndef GRADSYNC_TCP_TRANSPORT_H_
#define GRADSYNC_TCP_TRANSPORT_H_

// Loopback TCP execution of reduce schedules, one OS process per worker.
//
// Every message on every connection is a frame:
//
//   u32  payload length in bytes, little-endian
//   u8   tag
//   ...  payload
//
// Data frames (tag kF32 / kF16) carry raw little-endian elements. Control
// frames carry UTF-8 JSON.
//
// Session: each worker opens its own listener, connects to the coordinator
// and sends HELLO {"rank": claimed or -1, "port": listener port}. The
// coordinator rejects out-of-range or duplicate claims, assigns unclaimed
// workers the lowest free rank in connection order, and answers WELCOME
// {"rank": r}. A job is JOB {schedule, dtype, op, peers} followed by one
// data frame with the worker's input. Before the first job the workers form
// a full mesh (rank r dials every lower rank and introduces itself with
// PEER_HELLO). Each worker answers a job with a data frame holding its
// result, or ABORT {"step", "reason"} if a peer failed.

#include <sys/types.h>

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradsync/allreduce.h"
#include "gradsync/halfprec.h"
#include "gradsync/schedule.h"

namespace gradsync::tcp {

enum class FrameTag : std::uint8_t {
  kF32 = 0x01,
  kF16 = 0x02,
  kHello = 0x10,
  kWelcome = 0x11,
  kReject = 0x12,
  kJob = 0x13,
  kAbort = 0x14,
  kShutdown = 0x15,
  kPeerHello = 0x16,
};

inline constexpr std::size_t kFrameHeaderBytes = 5;
inline constexpr std::uint32_t kMaxFrameBytes = 1u << 30;

struct Frame {
  FrameTag tag = FrameTag::kF32;
  std::vector<std::uint8_t> payload;
};

std::vector<std::uint8_t> encode_frame(FrameTag tag, std::span<const std::uint8_t> payload);
// Parses one complete frame; throws TransportError on a short or oversized
// buffer or trailing bytes.
Frame decode_frame(std::span<const std::uint8_t> bytes);

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A collective that could not complete. No partial results are exposed.
class CollectiveAborted : public std::runtime_error {
 public:
  CollectiveAborted(std::size_t step, const std::string& detail);
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

// Owning file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release();
  void close();

 private:
  int fd_ = -1;
};

using Millis = std::chrono::milliseconds;

// Listens on 127.0.0.1 (port 0 picks an ephemeral port).
Socket listen_loopback(std::uint16_t port, std::uint16_t* bound_port = nullptr);
Socket connect_to(const std::string& host, std::uint16_t port, Millis timeout);
// Waits for a connection; throws TransportError on timeout.
Socket accept_with_timeout(const Socket& listener, Millis timeout);

void write_frame(const Socket& s, FrameTag tag, std::span<const std::uint8_t> payload);
// Throws TransportError on EOF, timeout or malformed header.
Frame read_frame(const Socket& s, Millis timeout);

enum class DType { kF32, kF16 };

struct ClusterOptions {
  Millis io_timeout{30000};
  Millis accept_timeout{30000};
};

// Test hook carried in the job: the worker with this rank kills itself with
// SIGKILL when it reaches `step`.
struct FaultInjection {
  int rank = -1;
  std::size_t step = 0;
};

// Coordinator side of a session.
class Coordinator {
 public:
  Coordinator(std::uint16_t port, int workers, ClusterOptions options = {});

  std::uint16_t port() const { return port_; }
  int workers() const { return workers_; }

  // Performs the HELLO/WELCOME handshake with `workers` processes.
  void accept_workers();

  // Runs one collective. `inputs[r]` is rank r's payload as raw elements of
  // `dtype`. Throws CollectiveAborted if any worker fails.
  std::vector<std::vector<std::uint8_t>> run(
      const collectives::ReduceSchedule& schedule,
      const std::vector<std::vector<std::uint8_t>>& inputs, DType dtype,
      collectives::ReduceOp op, std::optional<FaultInjection> fault = std::nullopt);

  // Sends SHUTDOWN to every live worker.
  void shutdown();

  // Closes the listening socket (used by forked children).
  void close_listener() { listener_.close(); }

 private:
  struct WorkerConn {
    Socket socket;
    std::uint16_t listen_port = 0;
    bool alive = true;
  };

  ClusterOptions options_;
  int workers_;
  std::uint16_t port_ = 0;
  Socket listener_;
  std::vector<WorkerConn> conns_;  // indexed by rank
  bool broken_ = false;
};

struct WorkerOptions {
  Millis io_timeout{30000};
};

// Worker main loop: connects to the coordinator, claims `claimed_rank` (-1
// for "assign me one"), serves jobs until SHUTDOWN. Returns 0 on clean
// shutdown, 3 after an aborted collective. Throws TransportError if the
// coordinator is unreachable or rejects the claim.
int run_worker(const std::string& coord_host, std::uint16_t coord_port, int claimed_rank,
               WorkerOptions options = {});

// Forks `workers` local worker processes attached to a fresh coordinator on
// an ephemeral port. The destructor shuts the session down and reaps every
// child.
class LocalCluster {
 public:
  explicit LocalCluster(int workers, ClusterOptions options = {});
  ~LocalCluster();
  LocalCluster(const LocalCluster&) = delete;
  LocalCluster& operator=(const LocalCluster&) = delete;

  int workers() const { return coordinator_.workers(); }

  std::vector<std::vector<float>> allreduce(const collectives::ReduceSchedule& schedule,
                                            const std::vector<std::vector<float>>& inputs,
                                            collectives::ReduceOp op,
                                            std::optional<FaultInjection> fault = std::nullopt);
  std::vector<std::vector<halfprec::HalfBits>> allreduce_f16(
      const collectives::ReduceSchedule& schedule,
      const std::vector<std::vector<halfprec::HalfBits>>& inputs, collectives::ReduceOp op);

 private:
  void reap();

  Coordinator coordinator_;
  std::vector<pid_t> children_;
};

// One-shot convenience: spins up a LocalCluster sized to the schedule, runs
// it once and tears it down. p == 1 opens no sockets and returns the input.
std::vector<std::vector<float>> run_over_tcp(const collectives::ReduceSchedule& schedule,
                                             const std::vector<std::vector<float>>& inputs,
                                             collectives::ReduceOp op = collectives::ReduceOp::kSum,
                                             ClusterOptions options = {},
                                             std::optional<FaultInjection> fault = std::nullopt);

}  // namespace gradsync::tcp

#endif  // GRADSYNC_TCP_TRANSPORT_H_
