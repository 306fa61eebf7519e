#include <doctest.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "structfact/structfact.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli_path() {
  const char* env = std::getenv("STRUCTFACT_CLI");
  REQUIRE_MESSAGE(env != nullptr, "STRUCTFACT_CLI must point at the CLI binary");
  return env;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("structfact-cli-" + std::to_string(::getpid()) + "-" +
            std::to_string(reinterpret_cast<uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

int run(const std::string& args) {
  std::string command = cli_path() + " " + args + " > /dev/null 2>&1";
  int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Seeded synthetic input: trend + annual harmonic + AR(1) co-movement.
void write_input(const fs::path& file, int p = 4, int t_count = 300) {
  std::ofstream out(file, std::ios::binary);
  out << "time";
  for (int i = 1; i <= p; ++i) out << ",s" << i;
  out << '\n';
  unsigned long long lcg = 2463534242ULL;
  auto next01 = [&]() {
    lcg ^= lcg << 13;
    lcg ^= lcg >> 7;
    lcg ^= lcg << 17;
    return static_cast<double>(lcg >> 11) * 0x1.0p-53;
  };
  double state = 0.0;
  for (int t = 1; t <= t_count; ++t) {
    state = 0.6 * state + (next01() - 0.5);
    out << t;
    for (int i = 1; i <= p; ++i) {
      double value = 0.02 * t + std::sin(2.0 * M_PI * t / 12.0) * i + i * state +
                     0.4 * (next01() - 0.5);
      char buf[64];
      sf_format_number(value, buf, sizeof(buf));
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace

TEST_CASE("cli: decompose writes the full artifact set") {
  TempDir dir;
  fs::path input = dir.path / "panel.csv";
  write_input(input);
  fs::path out = dir.path / "out";
  int code = run("decompose --input " + input.string() + " --period 12 --k-max 4 --output-dir " +
                 out.string());
  CHECK(code == 0);
  for (const char* name : {"trend.csv", "seasonal.csv", "irregular.csv", "theta.csv",
                           "bic_report.json"}) {
    CHECK_MESSAGE(fs::exists(out / name), name);
  }
  json report = json::parse(slurp(out / "bic_report.json"));
  CHECK(report["selected"]["k"].get<int>() >= 1);

  // theta.csv has a header plus one row per series.
  std::string theta = slurp(out / "theta.csv");
  CHECK(theta.rfind("series,alpha0", 0) == 0);
}

TEST_CASE("cli: factors writes loadings, variates and the test report") {
  TempDir dir;
  fs::path input = dir.path / "panel.csv";
  write_input(input);
  fs::path out = dir.path / "out";
  int code = run("factors --input " + input.string() +
                 " --period 12 --d 1 --k 1 --m 2 --output-dir " + out.string());
  CHECK(code == 0);
  for (const char* name : {"loadings.csv", "whitener.csv", "factors.csv", "noise_variates.csv",
                           "test_report.json"}) {
    CHECK_MESSAGE(fs::exists(out / name), name);
  }
  json report = json::parse(slurp(out / "test_report.json"));
  CHECK(report["rows"].size() == 4);
  CHECK(report["selected_r"].get<int>() + report["selected_v"].get<int>() == 4);
}

TEST_CASE("cli: forecast emits panel and factor paths") {
  TempDir dir;
  fs::path input = dir.path / "panel.csv";
  write_input(input);
  fs::path out = dir.path / "out";
  int code = run("forecast --input " + input.string() +
                 " --period 12 --d 1 --k 1 --r 2 --horizon 3 --output-dir " + out.string());
  CHECK(code == 0);
  CHECK(fs::exists(out / "forecast.csv"));
  CHECK(fs::exists(out / "factor_forecast.csv"));

  // rows = horizons: header + 3 data rows.
  std::string forecast = slurp(out / "forecast.csv");
  int lines = 0;
  for (char c : forecast) {
    if (c == '\n') ++lines;
  }
  CHECK(lines == 4);
}

TEST_CASE("cli: evaluate matches the library result byte for byte") {
  TempDir dir;
  fs::path input = dir.path / "panel.csv";
  write_input(input, 3, 280);
  fs::path out = dir.path / "out";
  int code = run("evaluate --input " + input.string() +
                 " --period 12 --d 1 --k 1 --r 1 --variant GT2 --h 1 --var-order 1 "
                 "--origin-start 260 --output-dir " +
                 out.string());
  CHECK(code == 0);
  REQUIRE(fs::exists(out / "evaluation.json"));
  json from_cli = json::parse(slurp(out / "evaluation.json"));

  // Same computation through the library.
  sf_panel* panel = nullptr;
  REQUIRE(sf_panel_read_csv(input.string().c_str(), 12, &panel) == SF_OK);
  json config = {{"origin_start", 260}, {"horizon", 1},       {"var_order", 1},
                 {"variant", "GT2"},    {"trend_degree", 1},  {"num_harmonics", 1},
                 {"m", 2},              {"alpha", 0.05},      {"regime", "auto"},
                 {"fixed_r", 1}};
  char* raw = nullptr;
  REQUIRE(sf_rolling_evaluate_json(panel, config.dump().c_str(), &raw) == SF_OK);
  json from_lib = json::parse(raw);
  sf_string_free(raw);
  sf_panel_free(panel);
  CHECK(from_cli == from_lib);
}

TEST_CASE("cli: malformed csv exits 2 and leaves no partial artifacts") {
  TempDir dir;
  fs::path input = dir.path / "broken.csv";
  std::ofstream(input) << "time,a,b\n1,1,2\n2,oops,4\n";
  fs::path out = dir.path / "out";
  int code = run("decompose --input " + input.string() + " --period 12 --output-dir " +
                 out.string());
  CHECK(code == 2);
  if (fs::exists(out)) {
    CHECK(fs::is_empty(out));
  }
}

TEST_CASE("cli: numeric failures exit 3") {
  TempDir dir;
  fs::path input = dir.path / "rankdef.csv";
  // Constant series: the seasonal+trend design stays full rank, but the
  // factor step dies on a zero covariance (numeric failure class).
  std::ofstream out_file(input);
  out_file << "time,a,b,c\n";
  for (int t = 1; t <= 120; ++t) out_file << t << ",1,2,3\n";
  out_file.close();
  fs::path out = dir.path / "out";
  int code = run("factors --input " + input.string() + " --period 12 --d 0 --k 0 --output-dir " +
                 out.string());
  CHECK(code == 3);
  if (fs::exists(out)) {
    CHECK(fs::is_empty(out));
  }
}

TEST_CASE("cli: unknown flags exit nonzero") {
  CHECK(run("decompose --nonsense") != 0);
  CHECK(run("") != 0);
}

TEST_CASE("cli: seeded runs are byte-identical and worker-invariant") {
  TempDir dir;
  fs::path out1 = dir.path / "run1";
  fs::path out2 = dir.path / "run2";
  fs::path out3 = dir.path / "run3";
  std::string base = "simulate --experiment table1 --cell p=5,k0=2,T=200,k_max=6 --reps 16 --seed 42";
  CHECK(run(base + " --workers 1 --output-dir " + out1.string()) == 0);
  CHECK(run(base + " --workers 1 --output-dir " + out2.string()) == 0);
  CHECK(run(base + " --workers 2 --output-dir " + out3.string()) == 0);

  CHECK(slurp(out1 / "simulation.json") == slurp(out2 / "simulation.json"));
  CHECK(slurp(out1 / "simulation.csv") == slurp(out2 / "simulation.csv"));
  // Worker count must not change the result.
  CHECK(slurp(out1 / "simulation.json") == slurp(out3 / "simulation.json"));
}

TEST_CASE("cli: decompose artifacts are deterministic across runs") {
  TempDir dir;
  fs::path input = dir.path / "panel.csv";
  write_input(input);
  fs::path out1 = dir.path / "a";
  fs::path out2 = dir.path / "b";
  std::string base = "decompose --input " + input.string() + " --period 12 --k-max 3";
  CHECK(run(base + " --output-dir " + out1.string()) == 0);
  CHECK(run(base + " --output-dir " + out2.string()) == 0);
  for (const char* name : {"trend.csv", "seasonal.csv", "irregular.csv", "theta.csv",
                           "bic_report.json"}) {
    CHECK(slurp(out1 / name) == slurp(out2 / name));
  }
}
