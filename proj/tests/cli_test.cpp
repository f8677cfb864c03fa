/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing,
 * software distributed under the License is distributed on an
 * "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
 * KIND, either express or implied.  See the License for the
 * specific language governing permissions and limitations
 * under the License.
 */

// Runs the kll_cli binary and checks exit codes and printed output.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kll/params.hpp"

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::path(::testing::TempDir()) /
           ("kll_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream out(path(name), std::ios::binary);
    out << text;
  }

  std::string read(const std::string& name) const {
    std::ifstream in(path(name), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  Result run(const std::string& args) const {
    const std::string out = path("stdout.txt"), err = path("stderr.txt");
    const std::string cmd = std::string(KLL_CLI_PATH) + " " + args + " >" + out + " 2>" + err;
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read("stdout.txt");
    r.err = read("stderr.txt");
    return r;
  }

  std::string numbers(std::vector<int> xs) const {
    std::string s;
    for (int x : xs) s += std::to_string(x) + "\n";
    return s;
  }

  fs::path dir_;
};

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string l;
  while (std::getline(in, l)) out.push_back(l);
  return out;
}

TEST_F(CliTest, LosslessBuildAndQuery) {
  std::vector<int> xs(100);
  std::iota(xs.begin(), xs.end(), 1);
  std::shuffle(xs.begin(), xs.end(), std::mt19937(3));
  write("d.txt", numbers(xs));
  const auto b = run("build --budget 512 --variant 1111 --in " + path("d.txt") + " --out " + path("s.kll"));
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_NE(b.err.find("n=100 H=0 H_s=0 items_n=100 compactions=0"), std::string::npos) << b.err;

  const auto q = run("query --sketch " + path("s.kll") + " --quantiles 0,0.5,1 --ranks 50,50.5,0");
  ASSERT_EQ(q.code, 0) << q.err;
  EXPECT_EQ(lines(q.out), (std::vector<std::string>{"0\t1", "0.5\t50", "1\t100", "50\t0.49", "50.5\t0.5", "0\t0"}));

  write("q.txt", "0\n25.5\n1000\n");
  const auto c = run("query --sketch " + path("s.kll") + " --cdf " + path("q.txt"));
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_EQ(lines(c.out), (std::vector<std::string>{"0", "0.25", "1"}));

  write("bad.txt", "3\n1\n");
  EXPECT_EQ(run("query --sketch " + path("s.kll") + " --cdf " + path("bad.txt")).code, 2);
}

TEST_F(CliTest, UsageErrors) {
  write("d.txt", "1\n");
  EXPECT_EQ(run("build --variant 2111 --in " + path("d.txt") + " --out " + path("s.kll")).code, 1);
  EXPECT_EQ(run("build --variant 111 --in " + path("d.txt") + " --out " + path("s.kll")).code, 1);
  EXPECT_EQ(run("build --c 0.5 --in " + path("d.txt") + " --out " + path("s.kll")).code, 1);
  EXPECT_EQ(run("build --budget 7 --in " + path("d.txt") + " --out " + path("s.kll")).code, 1);
  EXPECT_EQ(run("build --backend tree --in " + path("d.txt") + " --out " + path("s.kll")).code, 1);
  EXPECT_EQ(run("build --in " + path("d.txt")).code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("eval --variants 0000,1211").code, 1);
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_FALSE(fs::exists(path("s.kll")));
}

TEST_F(CliTest, DataErrors) {
  write("d.txt", "1\n2\nabc\n");
  const auto r = run("build --in " + path("d.txt") + " --out " + path("s.kll"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
  EXPECT_EQ(run("build --in " + path("missing.txt") + " --out " + path("s.kll")).code, 2);
  write("w.txt", "0\t5\n");
  EXPECT_EQ(run("build --weighted base2 --in " + path("w.txt") + " --out " + path("s.kll")).code, 2);
  write("junk.kll", "not a sketch");
  EXPECT_EQ(run("query --sketch " + path("junk.kll") + " --quantiles 0.5").code, 2);
  EXPECT_EQ(run("info --sketch " + path("junk.kll")).code, 2);
}

TEST_F(CliTest, EmptySketch) {
  write("empty.txt", "");
  ASSERT_EQ(run("build --in " + path("empty.txt") + " --out " + path("e.kll")).code, 0);
  const auto r = run("query --sketch " + path("e.kll") + " --ranks 1,2");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(lines(r.out), (std::vector<std::string>{"1\t0", "2\t0"}));
  EXPECT_EQ(run("query --sketch " + path("e.kll") + " --quantiles 0.5").code, 2);
}

TEST_F(CliTest, CodecMismatch) {
  write("d.txt", "1\n2\n3\n");
  ASSERT_EQ(run("build --in " + path("d.txt") + " --out " + path("s.kll")).code, 0);
  EXPECT_EQ(run("query --sketch " + path("s.kll") + " --ranks apple").code, 2);
  write("w.txt", "pear\napple\nfig\n");
  ASSERT_EQ(run("build --codec string --in " + path("w.txt") + " --out " + path("t.kll")).code, 0);
  const auto q = run("query --sketch " + path("t.kll") + " --quantiles 0,1 --ranks g");
  ASSERT_EQ(q.code, 0) << q.err;
  EXPECT_EQ(lines(q.out)[0], "0\tapple");
  EXPECT_EQ(lines(q.out)[1], "1\tpear");
  EXPECT_EQ(lines(q.out)[2].substr(0, 3), "g\t0");
  const auto m = run("merge " + path("s.kll") + " " + path("t.kll") + " --out " + path("m.kll"));
  EXPECT_EQ(m.code, 2);
  EXPECT_NE(m.err.find("codec"), std::string::npos);
}

TEST_F(CliTest, MergeWithEmptyIsIdentity) {
  std::string data;
  for (int i = 0; i < 5000; ++i) data += std::to_string((i * 7919) % 5000) + "\n";
  write("d.txt", data);
  write("empty.txt", "");
  ASSERT_EQ(run("build --budget 64 --seed 5 --in " + path("d.txt") + " --out " + path("x.kll")).code, 0);
  ASSERT_EQ(run("build --budget 64 --in " + path("empty.txt") + " --out " + path("e.kll")).code, 0);
  ASSERT_EQ(run("merge " + path("x.kll") + " " + path("e.kll") + " --out " + path("m.kll")).code, 0);
  EXPECT_EQ(read("m.kll"), read("x.kll"));
}

TEST_F(CliTest, MergeShardsWithinBound) {
  const int n = 30000;
  std::vector<int> xs(n);
  std::iota(xs.begin(), xs.end(), 0);
  std::shuffle(xs.begin(), xs.end(), std::mt19937(9));
  for (int s = 0; s < 3; ++s) {
    write("d" + std::to_string(s) + ".txt", numbers({xs.begin() + s * n / 3, xs.begin() + (s + 1) * n / 3}));
    ASSERT_EQ(run("build --budget 512 --seed " + std::to_string(s) + " --in " + path("d" + std::to_string(s) + ".txt") +
                  " --out " + path("s" + std::to_string(s) + ".kll"))
                  .code,
              0);
  }
  const auto m = run("merge " + path("s0.kll") + " " + path("s1.kll") + " " + path("s2.kll") + " --out " + path("m.kll"));
  ASSERT_EQ(m.code, 0) << m.err;
  const auto q = run("query --sketch " + path("m.kll") + " --ranks 3000,15000,27000");
  ASSERT_EQ(q.code, 0) << q.err;
  const double eps = kll::epsilon_for(0.01, kll::k_from_budget(512, kll::kDefaultDecay), kll::kDefaultDecay);
  const auto ls = lines(q.out);
  ASSERT_EQ(ls.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const double truth = (3000.0 + 12000.0 * static_cast<double>(i)) / n;
    EXPECT_NEAR(std::stod(ls[i].substr(ls[i].find('\t') + 1)), truth, eps) << ls[i];
  }
  const auto info = run("info --sketch " + path("m.kll"));
  EXPECT_NE(info.out.find("n 30000"), std::string::npos);
}

TEST_F(CliTest, MergeMismatchNamesField) {
  write("d.txt", "1\n2\n");
  ASSERT_EQ(run("build --variant 1111 --in " + path("d.txt") + " --out " + path("a.kll")).code, 0);
  ASSERT_EQ(run("build --variant 1010 --in " + path("d.txt") + " --out " + path("b.kll")).code, 0);
  const auto r = run("merge " + path("a.kll") + " " + path("b.kll") + " --out " + path("m.kll"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("'variant'"), std::string::npos) << r.err;
  EXPECT_EQ(run("merge " + path("a.kll") + " --out " + path("m.kll")).code, 1);
}

TEST_F(CliTest, WeightedBuilds) {
  write("w.tsv", "3\t10\n\n1\t20\n5\t30\n40\n");
  for (const char* mode : {"base2", "weight-aware"}) {
    const auto b = run(std::string("build --weighted ") + mode + " --in " + path("w.tsv") + " --out " + path("w.kll"));
    ASSERT_EQ(b.code, 0) << b.err;
    const auto q = run("query --sketch " + path("w.kll") + " --ranks 15,25,35,45 --quantiles 0.5");
    ASSERT_EQ(q.code, 0) << q.err;
    EXPECT_EQ(lines(q.out), (std::vector<std::string>{"0.5\t30", "15\t0.3", "25\t0.4", "35\t0.9", "45\t1"})) << mode;
    const auto info = run("info --sketch " + path("w.kll"));
    EXPECT_NE(info.out.find(std::string("weighted ") + mode), std::string::npos);
    EXPECT_NE(info.out.find("n 10"), std::string::npos);
  }
}

TEST_F(CliTest, BackendsWriteIdenticalFiles) {
  std::string data;
  std::mt19937 g(1);
  for (int i = 0; i < 20000; ++i) data += std::to_string(g() % 100000) + "\n";
  write("d.txt", data);
  ASSERT_EQ(run("build --backend list --budget 100 --in " + path("d.txt") + " --out " + path("l.kll")).code, 0);
  ASSERT_EQ(run("build --backend packed --budget 100 --in " + path("d.txt") + " --out " + path("p.kll")).code, 0);
  EXPECT_EQ(read("l.kll"), read("p.kll"));
}

TEST_F(CliTest, EvalCsv) {
  const std::string args = "eval --variants 1111 --budgets 64 --streams shuffled --n 5000 --trials 3 --seed 4";
  const auto a = run(args);
  ASSERT_EQ(a.code, 0) << a.err;
  const auto ls = lines(a.out);
  ASSERT_EQ(ls.size(), 2u);
  EXPECT_EQ(ls[0], "variant,budget,stream_kind,n,trials,mean_max_err,p95_max_err,compactions,discarded_weight");
  EXPECT_EQ(ls[1].rfind("1111,64,shuffled,5000,3,", 0), 0u);
  EXPECT_EQ(run(args + " --threads 2").out, a.out);
  EXPECT_EQ(run("eval --streams file --path " + path("none.txt") + " --n 10 --trials 1").code, 2);
}

}  // namespace
