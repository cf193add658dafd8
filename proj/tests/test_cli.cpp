#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct RunResult {
  int exitCode;
  std::string output;
};

RunResult run(const std::string& args) {
  std::string cmd = std::string(NLSIM_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  std::array<char, 4096> buf;
  while (std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  int status = pclose(pipe);
  return {WEXITSTATUS(status), out};
}

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("nlsim_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("catalog listing") {
  RunResult r = run("--catalog");
  CHECK(r.exitCode == 0);
  CHECK(r.output.find("aa_total_spin_z") != std::string::npos);
  CHECK(r.output.find("phi_scan") != std::string::npos);

  RunResult j = run("--catalog --json");
  CHECK(j.exitCode == 0);
  Json c = Json::parse(j.output);
  CHECK(c.at("protocols").size() >= 7);
  CHECK(c.at("audits").size() >= 5);
}

TEST_CASE("unknown names and usage errors") {
  RunResult r = run("--protocol does_not_exist --seed 1");
  CHECK(r.exitCode == 2);
  CHECK(r.output.find("aa_total_spin_z") != std::string::npos);  // lists what exists
  CHECK(run("--protocol aa_total_spin_z").exitCode == 2);        // seed mandatory
  CHECK(run("--audit nope").exitCode == 2);
  CHECK(run("--no-such-flag").exitCode == 2);
}

TEST_CASE("malformed state specs exit with the precondition code") {
  fs::path out = temp_dir("badstate");
  RunResult r = run("--protocol aa_total_spin_z --seed 1 --state bogus --out " + out.string());
  CHECK(r.exitCode == 3);
  RunResult shape =
      run("--protocol aa_total_spin_z --seed 1 --state twisted_1 --out " + out.string());
  CHECK(shape.exitCode == 0);  // twisted_1 is a valid two-qubit state
}

TEST_CASE("protocol run artifacts") {
  fs::path out = temp_dir("run");
  RunResult r = run("--protocol aa_total_spin_z --state psi_plus --seed 7 --trials 50 --out " +
                    out.string());
  REQUIRE(r.exitCode == 0);

  std::ifstream summary(out / "aa_total_spin_z_summary.json");
  REQUIRE(summary.good());
  Json s = Json::parse(summary);
  CHECK(s.at("inferred").at("value").get<double>() == doctest::Approx(0.0));
  CHECK(s.at("instantaneousStage").get<bool>());

  std::ifstream transcript(out / "aa_total_spin_z_transcript.jsonl");
  REQUIRE(transcript.good());
  std::string line;
  REQUIRE(std::getline(transcript, line));
  CHECK_NOTHROW(static_cast<void>(Json::parse(line)));

  std::ifstream freq(out / "aa_total_spin_z_freq.csv");
  REQUIRE(freq.good());
  std::getline(freq, line);
  CHECK(line == "outcome,count,frequency,exactProbability");
  REQUIRE(std::getline(freq, line));
  CHECK(line.find("\"value\"") != std::string::npos);
}

TEST_CASE("identical config and seed give identical artifacts") {
  fs::path a = temp_dir("det_a"), b = temp_dir("det_b");
  std::string args = "--protocol gr_twisted --state twisted_2 --seed 99 --trials 20 --out ";
  REQUIRE(run(args + a.string()).exitCode == 0);
  REQUIRE(run(args + b.string()).exitCode == 0);
  for (const char* name : {"gr_twisted_summary.json", "gr_twisted_transcript.jsonl",
                           "gr_twisted_freq.csv"}) {
    std::ifstream fa(a / name), fb(b / name);
    std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ca == cb);
    CHECK_FALSE(ca.empty());
  }
}

TEST_CASE("config file overrides defaults") {
  fs::path out = temp_dir("cfg");
  fs::path cfgFile = out / "run.cfg";
  {
    std::ofstream cfg(cfgFile);
    cfg << "protocol=gr_twisted\nstate=twisted_3\nseed=5\ntrials=10\nout=" << out.string()
        << "\n";
  }
  RunResult r = run("--config " + cfgFile.string());
  REQUIRE(r.exitCode == 0);
  std::ifstream summary(out / "gr_twisted_summary.json");
  Json s = Json::parse(summary);
  CHECK(s.at("inferred").at("index").get<int>() == 3);
}

TEST_CASE("audit runs") {
  fs::path out = temp_dir("audit");
  RunResult r = run("--audit degenerate_demo --out " + out.string());
  REQUIRE(r.exitCode == 0);
  std::ifstream report(out / "degenerate_demo_report.json");
  Json j = Json::parse(report);
  CHECK(j.at("report").at("maxDeviation").get<double>() == doctest::Approx(0.42));

  RunResult scan = run("--audit phi_scan --out " + out.string());
  REQUIRE(scan.exitCode == 0);
  std::ifstream csv(out / "phi_scan.csv");
  REQUIRE(csv.good());
  std::string line;
  std::getline(csv, line);
  CHECK(line == "phi,maxDeviation");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 32);
}
