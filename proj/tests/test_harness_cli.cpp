#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bipolar/harness.hpp"
#include "bipolar/io.hpp"
#include "linear_oracle.hpp"

using namespace bipolar;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bipolar_harness_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> config_errors(const std::string& text) {
  try {
    parse_config_text(text, "t.cfg");
  } catch (const ConfigError& e) {
    return e.errors();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v) {
    if (s.find(needle) != std::string::npos) return true;
  }
  return false;
}

long resident_kib() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VmRSS:", 0) == 0) return std::stol(line.substr(6));
  }
  return -1;
}

const char* kLinearCauchy = R"(experiment = cauchy
[fluid]
kappa1 = 1
[discretization]
m = 16
dt = 0.01
horizon = 1
stress = false
convection = false
levels = 4, 8, 16
[noise]
kind = additive
rates = 3, 2
jump_sizes = 0.5, -0.5
forcing_modes = 4
[ensemble]
paths = 20
seed = 5
[initial]
kind = fixed
coefficients = 0.8, -0.56, 0.392, -0.2744, 0.19208, -0.134456, 0.0941192, -0.06588344, 0.046118408, -0.0322828856, 0.02259801992, -0.015818613944, 0.0110730297608, -0.00775112083256, 0.005425784582792, -0.0037980492079544
)";

}  // namespace

TEST_CASE("minimal config takes the documented defaults") {
  const ExperimentConfig c = parse_config_text("experiment = moments\n");
  CHECK(c == ExperimentConfig{});
  CHECK(c.fluid.p == 1.5);
  CHECK(c.paths == 1000);
  CHECK(c.effective_levels() == std::vector<std::size_t>{16});
  CHECK(c.declared_constants() == NoiseConstants{});
  const std::string text = canonical_text(c);
  CHECK(text.find("p = 1.5") != std::string::npos);
  CHECK(text.find("paths = 1000") != std::string::npos);
  CHECK(text.find("dt = auto") != std::string::npos);
  CHECK(c.time_step() == 1e-3);
  CHECK(c.solver(16).dt == 1e-3);

  // The automatic step follows the finest level.
  const ExperimentConfig stiff = parse_config_text("[fluid]\nkappa1 = 100\n[discretization]\nm = 8\nlevels = 4, 32\n");
  const double lam_max = build_basis(32, 2).eigenvalue(31);
  CHECK(stiff.time_step() == doctest::Approx(0.1 / (lam_max * 100)));
  CHECK(stiff.solver(4).dt == stiff.time_step());
}

TEST_CASE("config errors name the field and the line") {
  SUBCASE("p outside (1, 2]") {
    const auto e = config_errors("experiment = moments\n[fluid]\np = 2.5\n");
    REQUIRE(e.size() == 1);
    CHECK(e[0].find("t.cfg:3") != std::string::npos);
    CHECK(e[0].find("fluid.p") != std::string::npos);
    CHECK(e[0].find("(1, 2]") != std::string::npos);
    CHECK(any_contains(config_errors("[fluid]\np = 1\n"), "(1, 2]"));
    CHECK(config_errors("[fluid]\np = 2\n").empty());
  }
  SUBCASE("duplicate keys report both lines") {
    const auto e = config_errors("[ensemble]\npaths = 10\n# note\n\npaths = 20\n");
    REQUIRE(e.size() == 1);
    CHECK(e[0].find("ensemble.paths") != std::string::npos);
    CHECK(e[0].find("line 2") != std::string::npos);
    CHECK(e[0].find("line 5") != std::string::npos);
  }
  SUBCASE("unknown keys are rejected") {
    const auto e = config_errors("[ensemble]\npahts = 10\n");
    REQUIRE(e.size() == 1);
    CHECK(e[0].find("t.cfg:2") != std::string::npos);
    CHECK(e[0].find("ensemble.pahts") != std::string::npos);
    CHECK(!config_errors("experiment = bogus\n").empty());
    CHECK(!config_errors("just text\n").empty());
  }
  SUBCASE("all problems are collected") {
    const auto e = config_errors("[fluid]\np = 3\nkappa1 = -1\n[noise]\nkind = additive\nrates = 1, -2\njump_sizes = 1\n");
    CHECK(e.size() >= 3);
    CHECK(any_contains(e, "fluid.kappa1"));
    CHECK(any_contains(e, "noise.rates"));
  }
  SUBCASE("semigroup functionals must be bounded and registered") {
    CHECK(any_contains(config_errors("[semigroup]\nfunctionals = gaussian, energy\n"), "energy"));
    CHECK(any_contains(config_errors("[semigroup]\nfeller_functional = nope\n"), "nope"));
  }
  SUBCASE("regime violations are reported at parse time") {
    // 2 kappa1 lambda1^2 = 1/2 with kappa1 = 1.
    const std::string base = "experiment = invariant-bound\n[noise]\nkind = affine\nrates = 1\njump_sizes = 0.5\n";
    const auto e = config_errors(base + "multipliers = 0.8\n");
    REQUIRE(!e.empty());
    CHECK(any_contains(e, "noise.l1"));
    CHECK(any_contains(e, "regime"));
    CHECK(config_errors(base + "multipliers = 0.1\n").empty());
    // The same constants are fine for an experiment that does not need the regime.
    CHECK(config_errors("experiment = moments\n[noise]\nkind = affine\nrates = 1\njump_sizes = 0.5\nmultipliers = 0.8\n")
              .empty());
    // A declared l1 overrides the closed form.
    CHECK(any_contains(config_errors(base + "multipliers = 0.1\nl1 = 0.6\n"), "noise.l1"));
  }
}

TEST_CASE("canonical text round-trips and fixes the hash") {
  ExperimentConfig c = parse_config_text(kLinearCauchy);
  c.dt = 0.1 + 0.2;
  c.l2 = 1.0 / 3.0;
  c.ck_functionals = {"cosine"};
  const std::string text = canonical_text(c);
  const ExperimentConfig back = parse_config_text(text);
  CHECK(back == c);
  CHECK(canonical_text(back) == text);
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c).size() == 40);
  ExperimentConfig d = c;
  d.seed += 1;
  CHECK(config_hash(d) != config_hash(c));

  const fs::path dir = scratch("roundtrip");
  write_text_file((dir / "c.cfg").string(), text);
  CHECK(parse_config((dir / "c.cfg").string()) == c);
  CHECK_THROWS_AS(parse_config((dir / "missing.cfg").string()), ConfigError);
}

TEST_CASE("moments of the unforced system from rest: zeros and PASS") {
  ExperimentConfig c = parse_config_text("experiment = moments\n[discretization]\nm = 8\nhorizon = 0.05\n"
                                         "levels = 4, 8\n[ensemble]\npaths = 8\n");
  const fs::path dir = scratch("zeros");
  const RunResult r = run_experiment(c, {dir.string(), 1});
  CHECK(r.verdict == "PASS");
  CHECK(r.exit_code == kExitPass);
  const auto& levels = r.summary["results"]["levels"];
  REQUIRE(levels.size() == 4);
  for (const auto& row : levels) {
    CHECK(row["sup_moment"]["mean"].get<double>() == 0.0);
    CHECK(row["dissipation"]["mean"].get<double>() == 0.0);
    CHECK(row["terminal"]["mean"].get<double>() == 0.0);
  }
  for (const char* f : {"summary.json", "timing.json", "moments.csv", "moments.jsonl"}) CHECK(fs::exists(dir / f));
  CHECK(r.summary["config_hash"] == config_hash(c));
  CHECK(r.summary["basis"]["lambda1"].get<double>() == 0.5);
  CHECK(r.summary["provenance"]["operation"] == "mc_moment");
  const auto header = read_series_header((dir / "moments.csv").string());
  CHECK(header.front() == "level");
  CHECK(slurp(dir / "moments.csv").find("# config_hash: " + config_hash(c)) != std::string::npos);
}

TEST_CASE("summaries are byte-identical across reruns and worker counts") {
  ExperimentConfig c = parse_config_text(kLinearCauchy);
  c.noise.forcing_modes = 16;
  c.stress = true;
  c.convection = true;
  c.initial.kind = "gaussian";
  c.initial.modes = 16;
  c.paths = 12;
  c.horizon = 0.2;
  const fs::path a = scratch("det_a"), b = scratch("det_b"), w = scratch("det_w");
  run_experiment(c, {a.string(), 1});
  run_experiment(c, {b.string(), 1});
  run_experiment(c, {w.string(), 3});
  for (const char* f : {"summary.json", "cauchy.csv", "cauchy.jsonl"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK(slurp(a / f) == slurp(w / f));
  }
  CHECK(slurp(a / "summary.json").find("wall_seconds") == std::string::npos);
  CHECK(slurp(w / "timing.json").find("\"workers\": 3") != std::string::npos);
}

TEST_CASE("cauchy at levels 4, 8, 16 against the linear closed form") {
  const ExperimentConfig c = parse_config_text(kLinearCauchy);
  const fs::path dir = scratch("cauchy");
  const RunResult r = run_experiment(c, {dir.string(), 2});
  CHECK(r.verdict == "PASS");
  const auto& rows = r.summary["results"]["rows"];
  REQUIRE(rows.size() == 2);

  const GalerkinBasis basis = build_basis(16, 2);
  std::vector<double> init;
  for (double x : c.initial.coefficients) init.push_back(x * x);
  const auto lm = oracle::linear_moments(basis, c.noise, 1.0, 0.01, 100, init);
  const std::size_t lo[] = {4, 8}, hi[] = {8, 16};
  double previous = INFINITY;
  for (std::size_t l = 0; l < 2; ++l) {
    const double gap = rows[l]["terminal_gap"]["mean"].get<double>();
    CHECK(rows[l]["coarse"].get<std::size_t>() == lo[l]);
    CHECK(rows[l]["fine"].get<std::size_t>() == hi[l]);
    CHECK(gap == doctest::Approx(lm.energy(100, lo[l], hi[l])).epsilon(1e-12));
    CHECK(gap < previous);
    previous = gap;
  }
  const auto header = read_series_header((dir / "cauchy.csv").string());
  CHECK(header == std::vector<std::string>{"coarse", "fine", "terminal_gap", "terminal_error", "integrated_gap",
                                           "integrated_error"});
}

TEST_CASE("blow-up gives exit 3 and truncated outputs") {
  ExperimentConfig c = parse_config_text("experiment = occupation\n[discretization]\nm = 32\ndt = 1\nscheme = explicit\n"
                                         "[initial]\ncoefficients = 1, 1, 1\n[occupation]\nschedule = 10, 20, 30\n"
                                         "burn_in = 0\nblock_length = 1\nreplicas = 1\n");
  const fs::path dir = scratch("blowup");
  const RunResult r = run_experiment(c, {dir.string(), 1});
  CHECK(r.exit_code == kExitBlowUp);
  CHECK(r.verdict == "BLOWUP");
  const std::string csv = slurp(dir / "occupation.csv");
  CHECK(csv.find("# TRUNCATED") != std::string::npos);
  CHECK(slurp(dir / "occupation.jsonl").find("truncated") != std::string::npos);
  CHECK(fs::exists(dir / "summary.json"));
}

TEST_CASE("occupation, invariant bound and audit run end to end") {
  SUBCASE("invariant bound without forcing decays to zero") {
    ExperimentConfig c = parse_config_text("experiment = invariant-bound\n[discretization]\nm = 4\ndt = 0.01\n"
                                           "[initial]\ncoefficients = 0.5, 0.5\n[occupation]\nschedule = 16, 18, 20\n"
                                           "burn_in = 14\nreplicas = 2\n");
    const RunResult r = run_experiment(c, {scratch("inv").string(), 1});
    CHECK(r.verdict == "PASS");
    CHECK(r.summary["results"]["bound"].get<double>() == 0.0);
    CHECK(r.summary["results"]["measured"]["mean"].get<double>() < 1e-6);
  }
  SUBCASE("gronwall audit on an affine ensemble") {
    ExperimentConfig c = parse_config_text("experiment = audit\n[discretization]\nm = 8\ndt = 0.01\nhorizon = 0.5\n"
                                           "[noise]\nkind = affine\nrates = 2, 1\njump_sizes = 0.5, -0.4\n"
                                           "multipliers = 0.2, -0.1\nforcing_modes = 4\n[ensemble]\npaths = 40\n"
                                           "[initial]\nkind = gaussian\n");
    const RunResult r = run_experiment(c, {scratch("audit").string(), 1});
    CHECK(r.verdict == "PASS");
    CHECK(r.summary["results"]["margin"].get<double>() > 0);
  }
}

TEST_CASE("write_series") {
  const fs::path dir = scratch("series");
  SUBCASE("empty rows give a header-only file") {
    const std::string p = (dir / "empty.csv").string();
    write_series(p, {{"t", "s"}, {"energy", "J"}}, {}, {{"config_hash", "abc"}});
    const std::string text = slurp(p);
    CHECK(text == "# config_hash: abc\n# units: t [s], energy [J]\nt,energy\n");
    CHECK(read_series_header(p) == std::vector<std::string>{"t", "energy"});
  }
  SUBCASE("unicode and quoted column names round-trip") {
    const std::string p = (dir / "unicode.csv").string();
    const std::vector<std::string> names{"κ₁", "‖u‖₂²", "a,b", "say \"hi\""};
    std::vector<Column> cols;
    for (const auto& n : names) cols.push_back({n, ""});
    write_series(p, cols, {{1, 2, 3, 4}});
    CHECK(read_series_header(p) == names);
  }
  SUBCASE("append continues after the last row and checks the header") {
    const std::string p = (dir / "append.csv").string();
    write_series(p, {{"x", ""}}, {{1}});
    {
      SeriesWriter w(p, {{"x", ""}}, {}, true);
      w.row({2});
    }
    CHECK(slurp(p).find("1\n2\n") != std::string::npos);
    CHECK_THROWS(SeriesWriter(p, {{"y", ""}}, {}, true));
  }
  SUBCASE("I/O failures carry the path") {
    const std::string p = (dir / "no_such_dir" / "x.csv").string();
    try {
      write_series(p, {{"x", ""}}, {});
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("no_such_dir") != std::string::npos);
    }
  }
  SUBCASE("a million rows stream under a fixed memory budget") {
    const std::string p = (dir / "big.csv").string();
    const long before = resident_kib();
    long peak = before;
    {
      SeriesWriter w(p, {{"i", ""}, {"x", ""}, {"y", ""}});
      for (int i = 0; i < 1000000; ++i) {
        w.row({static_cast<double>(i), std::sin(i * 0.1), 1.0 / (i + 1.0)});
        if (i % 100000 == 0) peak = std::max(peak, resident_kib());
      }
    }
    peak = std::max(peak, resident_kib());
    const auto size = fs::file_size(p);
    CHECK(size > 40'000'000u);
    // Buffering the table would cost at least the file size.
    CHECK(peak - before < 8 * 1024);
    fs::remove(p);
  }
}
