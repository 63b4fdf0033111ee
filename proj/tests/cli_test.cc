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

#include <gtest/gtest.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI through the shell, capturing stdout and stderr together.
Result cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + GRADSYNC_CLI_PATH + " " + args + " 2>&1";
  Result r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() /
                     ("gradsync_cli_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  return p;
}

nlohmann::json report(const fs::path& dir) {
  std::ifstream in(dir / "report.json");
  return nlohmann::json::parse(in);
}

TEST(Cli, RunWritesArtifacts) {
  const fs::path dir = scratch("run");
  const Result r = cli("run --set steps=6 --set warmup_steps=1 --out " + dir.string());
  EXPECT_EQ(r.code, 0) << r.out;
  for (const char* f : {"metrics.csv", "fusion.jsonl", "activations.jsonl", "report.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  fs::remove_all(dir);
}

TEST(Cli, GeneratedRunDirectory) {
  const fs::path root = scratch("root");
  const Result r = cli("run --set steps=2 --set warmup_steps=0 --runs-root " + root.string());
  EXPECT_EQ(r.code, 0) << r.out;
  int dirs = 0;
  for (const auto& e : fs::directory_iterator(root)) dirs += e.is_directory() ? 1 : 0;
  EXPECT_EQ(dirs, 1);
  fs::remove_all(root);
}

TEST(Cli, ConfigErrorsExitTwo) {
  const Result r = cli("run --set workers=3 --set momentum=2 --out " + scratch("bad").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("group_size"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("momentum"), std::string::npos) << r.out;
  EXPECT_FALSE(fs::exists(scratch("bad")));

  const fs::path cfg = scratch("cfg.json");
  std::ofstream(cfg) << "{ not json";
  EXPECT_EQ(cli("run --config " + cfg.string()).code, 2);
  std::ofstream(cfg) << R"({"wokers": 4})";
  EXPECT_EQ(cli("run --config " + cfg.string()).code, 2);
  fs::remove(cfg);

  EXPECT_EQ(cli("run --preset nosuch").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
}

TEST(Cli, ConfigFileAndOverrides) {
  const fs::path cfg = scratch("file.json");
  std::ofstream(cfg) << R"({"steps": 3, "warmup_steps": 1, "seed": 11})";
  const fs::path dir = scratch("file_run");
  const Result r =
      cli("run --config " + cfg.string() + " --set steps=4 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto rep = report(dir);
  EXPECT_EQ(rep["config"]["steps"], 4);
  EXPECT_EQ(rep["config"]["seed"], 11);
  fs::remove(cfg);
  fs::remove_all(dir);
}

TEST(Cli, SeedFallsBackToEnvironment) {
  const fs::path a = scratch("env_a"), b = scratch("env_b"), c = scratch("env_c");
  const std::string base = "run --set steps=2 --set warmup_steps=0 --out ";
  ASSERT_EQ(cli(base + a.string(), "GRADSYNC_SEED=7").code, 0);
  ASSERT_EQ(cli(base + b.string() + " --seed 3", "GRADSYNC_SEED=7").code, 0);
  ASSERT_EQ(cli(base + c.string() + " --set seed=5", "GRADSYNC_SEED=7").code, 0);
  EXPECT_EQ(report(a)["config"]["seed"], 7);
  EXPECT_EQ(report(b)["config"]["seed"], 3);
  EXPECT_EQ(report(c)["config"]["seed"], 5);
  EXPECT_EQ(cli(base + scratch("env_d").string(), "GRADSYNC_SEED=x").code, 2);
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST(Cli, TcpFaultExitsThree) {
  const fs::path dir = scratch("fault");
  const Result r = cli("run --set transport=\\\"tcp\\\" --set tcp_fault_rank=1 --set steps=4 "
                       "--set warmup_steps=1 --out " +
                       dir.string());
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_TRUE(fs::exists(dir / "metrics.csv"));
  EXPECT_TRUE(report(dir)["aborted"].get<bool>());
  fs::remove_all(dir);
}

TEST(Cli, PresetCheck) {
  const fs::path dir = scratch("stepcount");
  const Result r = cli("run --preset stepcount-vs-paper --check --out " + dir.string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("\"hierarchical_steps\": 186"), std::string::npos) << r.out;
  fs::remove_all(dir);
}

TEST(Cli, CompareExitCodes) {
  const fs::path a = scratch("cmp_a"), b = scratch("cmp_b"), c = scratch("cmp_c");
  const std::string base = "run --set steps=4 --set warmup_steps=1 --out ";
  ASSERT_EQ(cli(base + a.string()).code, 0);
  ASSERT_EQ(cli(base + b.string() + " --set precision=mixed").code, 0);
  ASSERT_EQ(cli("run --set steps=5 --set warmup_steps=1 --out " + c.string()).code, 0);
  EXPECT_EQ(cli("compare " + a.string() + " " + a.string()).code, 0);
  EXPECT_EQ(cli("compare " + a.string() + " " + b.string()).code, 4);
  EXPECT_EQ(cli("compare " + a.string() + " " + b.string() +
                " --tol loss=0.01 --tol train_accuracy=0.05 --tol loss_scale=1e9")
                .code,
            0);
  EXPECT_EQ(cli("compare " + a.string() + " " + c.string()).code, 2);
  EXPECT_EQ(cli("compare " + a.string() + " " + a.string() + " --tol loss").code, 2);
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST(Cli, HalfprecInspect) {
  const Result r = cli("halfprec inspect 65520 0x3c00 1e-8");
  ASSERT_EQ(r.code, 0) << r.out;
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j["bits"], "0x7c00");
  EXPECT_EQ(j["category"], "inf");
  std::getline(lines, line);
  j = nlohmann::json::parse(line);
  EXPECT_EQ(j["value"], 1.0);
  EXPECT_EQ(j["category"], "normal");
  std::getline(lines, line);
  j = nlohmann::json::parse(line);
  EXPECT_EQ(j["bits"], "0x0000");
  EXPECT_EQ(cli("halfprec inspect banana").code, 2);
}

TEST(Cli, Sweep) {
  const fs::path dir = scratch("sweep");
  const Result r = cli("sweep -w 64 -k 8 --thetas 0 --etas 0 1048576 --out " + dir.string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir / "grid.csv"));
  EXPECT_TRUE(fs::exists(dir / "crossover.csv"));
  EXPECT_EQ(cli("sweep -w 64 -k 7").code, 2);
  fs::remove_all(dir);
}

std::uint16_t free_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

TEST(Cli, CoordinatorWithExternalWorkers) {
  const std::string port = std::to_string(free_port());
  const std::string exe = GRADSYNC_CLI_PATH;
  const std::string cmd = "(" + exe + " worker --port " + port + " >/dev/null 2>&1 & " + exe +
                          " worker --port " + port + " --rank 2 >/dev/null 2>&1 & " + exe +
                          " worker --port " + port + " >/dev/null 2>&1 &) ; " + exe +
                          " coord --port " + port +
                          " -w 3 -k 1 -n 999 -a hierarchical --timeout-ms 20000 2>/dev/null";
  FILE* p = ::popen(cmd.c_str(), "r");
  ASSERT_NE(p, nullptr);
  std::string out;
  char buf[1024];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), p)) > 0) out.append(buf, n);
  const int status = ::pclose(p);
  EXPECT_EQ(WEXITSTATUS(status), 0) << out;
  const auto j = nlohmann::json::parse(out);
  EXPECT_TRUE(j["matches_in_memory"].get<bool>());
  EXPECT_EQ(j["total_steps"], 4);
}

}  // namespace
