#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "freshsched/cli.hpp"
#include "freshsched/error.hpp"
#include "freshsched/experiment.hpp"

using namespace freshsched;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "freshsched_test_cli";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

ErrorCode parse_code(std::string_view text) {
  try {
    parse_config_text(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

constexpr std::string_view kFig2 = R"(# update load sweep
[model]
lambda_q = 0.1
mu_u = 1
mu_q = 1

[sweep]
axis = lambda_u
start = 0.05
stop = 0.85
step = 0.05

[policy.fcfs]
kind = fcfs

[policy.q1]
kind = query-k
k = 1

[policy.q3]
kind = query-k
k = 3
engines = ctmc
)";

}  // namespace

TEST_CASE("config parsing") {
  const auto spec = parse_config_text(kFig2);
  CHECK(spec.points().size() == 17);
  CHECK(*spec.points().front().lambda_u == doctest::Approx(0.05));
  CHECK(*spec.points().back().lambda_u == doctest::Approx(0.85));
  REQUIRE(spec.policies.size() == 3);
  CHECK(spec.policies[0].policy == PolicySpec::fcfs());
  CHECK(spec.policies[0].engines.size() == 2);  // closed form + sim
  CHECK(spec.policies[2].policy == PolicySpec::parse("query-3"));
  CHECK(spec.policies[2].engines == std::vector<Engine>{Engine::Ctmc});
  CHECK(spec.sim.horizon == 20000);
  CHECK(spec.sim.replications == 10);

  CHECK(parse_code("[model]\nlamda_u = 0.3\n") == ErrorCode::ParseError);
  CHECK(parse_code("[model]\nlambda_u = 0.3\nlambda_q = 0.1\n[sweep]\naxis = lambda_u\nstart = 0.1\nstop = 0.2\nstep = 0\n"
                   "[policy.a]\nkind = fcfs\n") == ErrorCode::ValidationError);
  CHECK(parse_code("[model]\nlambda_u = 0.3\nlambda_q = 0.1\n") == ErrorCode::ValidationError);
  CHECK(parse_code("[bogus]\n") == ErrorCode::ParseError);
  CHECK(parse_code("[model]\nlambda_u = abc\n") == ErrorCode::ParseError);
  try {
    parse_config_text("[model]\nlambda_u = 0.3\n\nlamda_q = 0.1\n");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
}

TEST_CASE("experiment rows") {
  auto spec = parse_config_text(kFig2);
  spec.sim.horizon = 2000;
  spec.sim.replications = 3;
  const auto rows = run_experiment(spec);
  // fcfs: analytic + sim; q1: analytic + ctmc + sim; q3: ctmc only
  CHECK(rows.size() == 17 * (2 + 3 + 1) * 5);
  std::vector<double> fcfs_paoi;
  for (const auto& r : rows) {
    if (r.policy == "fcfs" && r.metric == "paoi" && r.source == "analytic") fcfs_paoi.push_back(*r.mean);
    if (r.source != "sim") CHECK_FALSE(r.ci_half_width);
    if (r.mean) CHECK(std::isfinite(*r.mean));
  }
  REQUIRE(fcfs_paoi.size() == 17);
  const auto low = std::min_element(fcfs_paoi.begin(), fcfs_paoi.end());
  CHECK(low != fcfs_paoi.begin());
  CHECK(low != fcfs_paoi.end() - 1);
}

TEST_CASE("unsupported engines and unstable points become row markers") {
  const auto spec = parse_config_text(
      "[model]\nlambda_q = 0.3\n[sweep]\naxis = lambda_u\nstart = 0.5\nstop = 0.8\nstep = 0.3\n"
      "[sim]\nhorizon = 500\nreplications = 2\n"
      "[policy.j]\nkind = joint\nm = 2\nn = 2\nengines = ctmc\n"
      "[policy.q]\nkind = query-k\nk = 1\nengines = closed_form\n");
  const auto rows = run_experiment(spec);
  CHECK(rows.size() == 2 * 2 * 5);
  for (const auto& r : rows) {
    if (r.policy == "joint") CHECK(r.status == "error: unsupported engine");
    if (r.policy == "query-k" && r.lambda_u > 0.6) CHECK(r.status == "unstable");
    if (r.policy == "query-k" && r.lambda_u < 0.6 && r.metric != "aoi") CHECK(r.status == "ok");
  }
}

TEST_CASE("csv output") {
  CHECK(format_number(2.5) == "2.50000");
  const auto path = scratch("empty.csv");
  emit_csv({}, path);
  CHECK(slurp(path) == std::string(kCsvHeader) + "\n");

  const auto r = cli({"analyze", "--policy", "fcfs", "--lambda-u", "0.5", "--lambda-q", "0.1", "--out",
                      scratch("one.csv").string()});
  REQUIRE(r.code == 0);
  const auto text = slurp(scratch("one.csv"));
  CHECK(text.find("fcfs,,,,0.500000,0.100000,1.00000,1.00000,response_time,analytic,2.50000,,,,,ok\n") !=
        std::string::npos);
  CHECK(text.find('\r') == std::string::npos);
  const auto back = read_csv(scratch("one.csv"));
  CHECK(back.size() == 5);
  CHECK(*back[0].mean == 2.5);

  CHECK_THROWS_AS(emit_csv({}, "/nonexistent-dir/x.csv"), Error);
}

TEST_CASE("analyze prints exact closed forms") {
  const auto r = cli({"analyze", "--lambda-u", "0.5", "--lambda-q", "0.1"});
  CHECK(r.code == 0);
  CHECK(r.out.find("E[T_q] = 2.5\n") != std::string::npos);
  CHECK(r.out.find("E[A] = 4.5\n") != std::string::npos);
  const auto q1 = cli({"analyze", "--policy", "query-k", "--k", "1", "--lambda-u", "0.8", "--lambda-q", "0.1"});
  CHECK(q1.out.find("E[T_q] = 1.111111111") != std::string::npos);
  CHECK(q1.out.find("E[A] = 12.36111111") != std::string::npos);
}

TEST_CASE("exit codes") {
  CHECK(cli({"analyze", "--lambda-u", "0.9", "--lambda-q", "0.2"}).code == kExitValidation);
  CHECK(cli({"analyze", "--lambda-u", "0", "--lambda-q", "0.2"}).code == kExitValidation);
  CHECK(cli({"analyze", "--policy", "query-3", "--lambda-u", "0.3", "--lambda-q", "0.2"}).code ==
        kExitValidation);
  CHECK(cli({"solve", "--policy", "joint", "--m", "2", "--n", "2", "--lambda-u", "0.3", "--lambda-q", "0.2"})
            .code == kExitValidation);
  CHECK(cli({"solve", "--policy", "query-3", "--trunc", "3", "--lambda-u", "0.3", "--lambda-q", "0.2"}).code ==
        kExitNumerical);
  CHECK(cli({"frobnicate"}).code == kExitValidation);
  CHECK(cli({"sweep", "--config", "/nonexistent/x.ini"}).code == kExitIo);
  CHECK(cli({"plot", "--csv", "/nonexistent/x.csv", "--out", "x.svg"}).code == kExitIo);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("seed precedence: flag over environment over config") {
  const auto cfg = scratch("seeded.ini");
  std::ofstream(cfg) << "[model]\nlambda_u = 0.3\nlambda_q = 0.2\n[sim]\nhorizon = 200\nreplications = 2\nseed = 5\n"
                        "[policy.f]\nkind = fcfs\nengines = simulation\n";
  const auto seed_of = [&](std::vector<std::string> extra) {
    std::vector<std::string> args{"sweep", "--config", cfg.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = cli(args);
    REQUIRE(r.code == 0);
    const auto line = r.out.substr(r.out.find('\n') + 1);
    const auto fields_end = line.find(",ok");
    const auto seed_start = line.rfind(',', fields_end - 1) + 1;
    return line.substr(seed_start, fields_end - seed_start);
  };
  unsetenv("FRESHSCHED_SEED");
  CHECK(seed_of({}) == "5");
  setenv("FRESHSCHED_SEED", "77", 1);
  CHECK(seed_of({}) == "77");
  CHECK(seed_of({"--seed", "9"}) == "9");
  unsetenv("FRESHSCHED_SEED");
}

TEST_CASE("sweep is deterministic and plots render") {
  const auto cfg = scratch("det.ini");
  std::ofstream(cfg) << "[model]\nlambda_q = 1/3\n";
  CHECK(cli({"sweep", "--config", cfg.string()}).code == kExitValidation);
  std::ofstream(cfg) << "[model]\nlambda_q = 0.3333333333333333\n[sweep]\naxis = lambda_u\nstart = 0.1\nstop = 0.5\n"
                        "step = 0.1\n[sim]\nhorizon = 1000\nreplications = 3\n"
                        "[policy.q]\nkind = query-k\nk = 2\n[policy.j]\nkind = joint\nm = 2\nn = 3\n";
  const auto a = scratch("det_a.csv"), b = scratch("det_b.csv"), svg = scratch("det.svg");
  REQUIRE(cli({"sweep", "--config", cfg.string(), "--out", a.string()}).code == 0);
  REQUIRE(cli({"sweep", "--config", cfg.string(), "--out", b.string(), "--workers", "3"}).code == 0);
  CHECK(slurp(a) == slurp(b));
  REQUIRE(cli({"plot", "--csv", a.string(), "--x", "lambda_u", "--metrics", "response_time,paoi", "--out",
               svg.string()})
              .code == 0);
  const auto text = slurp(svg);
  CHECK(text.rfind("<svg", 0) == 0);
  CHECK(text.find("href") == std::string::npos);
  CHECK(cli({"plot", "--csv", a.string(), "--metrics", "nonsense", "--out", svg.string()}).code ==
        kExitValidation);
}

TEST_CASE("single-point plot") {
  const auto csv = scratch("point.csv");
  REQUIRE(cli({"analyze", "--lambda-u", "0.5", "--lambda-q", "0.1", "--out", csv.string()}).code == 0);
  const auto rows = read_csv(csv);
  const auto svg = render_plot(rows, "lambda_u", {"response_time"});
  CHECK(svg.find("<circle") != std::string::npos);
}

TEST_CASE("compare reports agreement") {
  const auto r = cli({"compare", "--policy", "query-1", "--lambda-u", "0.3", "--lambda-q", "0.3", "--horizon",
                      "20000"});
  CHECK(r.code == 0);
  CHECK(r.out.find("agreement = ") != std::string::npos);
  CHECK(r.out.find("ctmc") != std::string::npos);
}

TEST_CASE("shipped configs parse") {
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(FRESHSCHED_CONFIG_DIR)) {
    if (entry.path().extension() != ".ini") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(parse_config(entry.path()));
    ++count;
  }
  CHECK(count >= 4);
}
