#include "bipolar/harness.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <memory>
#include <map>
#include <optional>
#include <sstream>

#include "bipolar/ergodics.hpp"
#include "bipolar/io.hpp"

namespace bipolar {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const Estimate& e) { return {{"mean", e.mean}, {"error", e.error}, {"n", e.n}}; }
json to_json(const NoiseConstants& k) { return {{"l0", k.l0}, {"l1", k.l1}, {"l2", k.l2}, {"l3", k.l3}}; }
json to_json(const TrendTest& t) {
  return {{"slope", t.slope}, {"slope_error", t.slope_error}, {"increasing", t.increasing}};
}

// A CSV table mirrored line by line into JSONL.
class Table {
 public:
  Table(const fs::path& dir, const std::string& name, std::vector<Column> columns,
        const SeriesWriter::Comments& comments, std::vector<std::string>& files)
      : names_(), csv_((dir / (name + ".csv")).string(), columns, comments),
        jsonl_(dir / (name + ".jsonl"), std::ios::trunc) {
    for (const auto& c : columns) names_.push_back(c.name);
    if (!jsonl_) throw std::runtime_error((dir / (name + ".jsonl")).string() + ": cannot open");
    files.push_back(name + ".csv");
    files.push_back(name + ".jsonl");
  }

  void row(const std::vector<double>& values) {
    csv_.row(values);
    json j = json::object();
    for (std::size_t i = 0; i < values.size(); ++i) j[names_[i]] = values[i];
    jsonl_ << j.dump() << '\n';
  }

  void truncate(const std::string& reason) {
    csv_.mark_truncated(reason);
    jsonl_ << json{{"truncated", reason}}.dump() << '\n';
    jsonl_.flush();
  }

  void close() {
    csv_.close();
    jsonl_.close();
  }

 private:
  std::vector<std::string> names_;
  SeriesWriter csv_;
  std::ofstream jsonl_;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

InitialLaw initial_law(const ExperimentConfig& c) {
  if (c.initial.kind == "gaussian") return InitialLaw::gaussian(c.dim, c.initial.modes, c.initial.scale, c.initial.decay);
  if (c.initial.coefficients.empty()) return InitialLaw::fixed(SpectralField());
  Eigen::VectorXd v(static_cast<Eigen::Index>(c.initial.coefficients.size()));
  for (std::size_t i = 0; i < c.initial.coefficients.size(); ++i) v[static_cast<Eigen::Index>(i)] = c.initial.coefficients[i];
  return InitialLaw::fixed(SpectralField(v));
}

EnsembleSpec ensemble(const ExperimentConfig& c, std::uint64_t seed, std::size_t workers) {
  EnsembleSpec e;
  e.paths = c.paths;
  e.seed = seed;
  e.initial = initial_law(c);
  e.workers = workers;
  return e;
}

json config_json(const ExperimentConfig& c) {
  json j = json::object();
  std::istringstream in(canonical_text(c));
  std::string line, section;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find(" = ");
    const std::string key = line.substr(0, eq);
    const std::string value = eq + 3 <= line.size() ? line.substr(eq + 3) : "";
    j[section.empty() ? key : section + "." + key] = value;
  }
  return j;
}

struct Context {
  const ExperimentConfig& config;
  fs::path dir;
  std::size_t workers;
  std::vector<std::string>& files;
  SeriesWriter::Comments comments;
  json results = json::object();
  json streams = json::array();
  std::string verdict = "PASS";
  std::size_t blowups = 0;
  std::vector<std::unique_ptr<Table>> tables;

  Table& table(const std::string& name, std::vector<Column> columns, SeriesWriter::Comments extra = {}) {
    auto all = comments;
    all.insert(all.end(), extra.begin(), extra.end());
    tables.push_back(std::make_unique<Table>(dir, name, std::move(columns), all, files));
    return *tables.back();
  }
  void stream(const std::string& purpose, const std::string& index, const std::string& use) {
    streams.push_back({{"purpose", purpose}, {"index", index}, {"use", use}});
  }
  void fail_unless(bool ok) {
    if (!ok && verdict == "PASS") verdict = "FAIL";
  }
};

GalerkinModel model_at(const ExperimentConfig& c, std::size_t level) {
  return GalerkinModel(c.dim, level, c.fluid, c.noise);
}

// ---- experiments -----------------------------------------------------------

void run_moments(Context& ctx) {
  const auto& c = ctx.config;
  const auto levels = c.effective_levels();
  auto& t = ctx.table("moments", {{"level", ""}, {"r", ""}, {"sup_mean", "energy^r"}, {"sup_error", "energy^r"},
                                  {"sup_lo", "energy^r"}, {"sup_hi", "energy^r"}, {"dissipation_mean", "energy^r time"},
                                  {"dissipation_error", "energy^r time"}, {"dissipation_lo", "energy^r time"},
                                  {"dissipation_hi", "energy^r time"}, {"terminal_mean", "energy^r"},
                                  {"terminal_error", "energy^r"}, {"blowups", "paths"}});
  json out = json::array();
  std::vector<double> x;
  std::map<int, std::vector<Estimate>> sup, diss;
  for (std::size_t level : levels) {
    const GalerkinModel model = model_at(c, level);
    // Independent ensembles per level.
    const std::uint64_t seed = derive_seed(c.seed, StreamPurpose::Sampling, level);
    x.push_back(std::log2(static_cast<double>(level)));
    for (int r : c.orders) {
      const MomentReport rep = mc_moment(model, c.solver(level), ensemble(c, seed, ctx.workers), r);
      ctx.blowups += rep.blowups;
      t.row({static_cast<double>(level), static_cast<double>(r), rep.sup_moment.mean, rep.sup_moment.error,
             rep.sup_interval.lo, rep.sup_interval.hi, rep.dissipation.mean, rep.dissipation.error,
             rep.dissipation_interval.lo, rep.dissipation_interval.hi, rep.terminal.mean, rep.terminal.error,
             static_cast<double>(rep.blowups)});
      sup[r].push_back(rep.sup_moment);
      diss[r].push_back(rep.dissipation);
      out.push_back({{"level", level},
                     {"r", r},
                     {"sup_moment", to_json(rep.sup_moment)},
                     {"sup_interval", {rep.sup_interval.lo, rep.sup_interval.hi}},
                     {"dissipation", to_json(rep.dissipation)},
                     {"dissipation_interval", {rep.dissipation_interval.lo, rep.dissipation_interval.hi}},
                     {"terminal", to_json(rep.terminal)},
                     {"blowups", rep.blowups}});
    }
  }
  ctx.results["levels"] = out;
  ctx.stream("sampling", "level", "root of the ensemble at each level");
  ctx.stream("jumps", "path", "jump realization of each member");
  ctx.stream("initial", "path", "initial condition of each member");
  ctx.stream("bootstrap", "0, 1", "percentile intervals");
  if (levels.size() >= 2) {
    json trends = json::object();
    for (int r : c.orders) {
      const TrendTest ts = trend_test(x, sup[r]);
      const TrendTest td = trend_test(x, diss[r]);
      trends["r" + std::to_string(r)] = {{"sup_moment", to_json(ts)}, {"dissipation", to_json(td)}};
      ctx.fail_unless(!ts.increasing && !td.increasing);
    }
    ctx.results["trend"] = trends;
  }
}

void run_cauchy(Context& ctx) {
  const auto& c = ctx.config;
  std::vector<GalerkinModel> models;
  for (std::size_t level : c.effective_levels()) models.push_back(model_at(c, level));
  std::vector<const GalerkinModel*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m);
  const CauchyReport rep = cauchy_study(ptrs, c.solver(models.back().level()), ensemble(c, c.seed, ctx.workers));
  auto& t = ctx.table("cauchy", {{"coarse", ""}, {"fine", ""}, {"terminal_gap", "energy"},
                                 {"terminal_error", "energy"}, {"integrated_gap", "energy time"},
                                 {"integrated_error", "energy time"}});
  json rows = json::array();
  for (const auto& r : rep.rows) {
    t.row({static_cast<double>(r.coarse), static_cast<double>(r.fine), r.terminal_gap.mean, r.terminal_gap.error,
           r.integrated_gap.mean, r.integrated_gap.error});
    rows.push_back({{"coarse", r.coarse},
                    {"fine", r.fine},
                    {"terminal_gap", to_json(r.terminal_gap)},
                    {"integrated_gap", to_json(r.integrated_gap)}});
  }
  ctx.blowups += rep.blowups;
  ctx.results = {{"rows", rows},
                 {"decreasing", rep.decreasing},
                 {"last_ratio", rep.last_ratio},
                 {"converged", rep.converged},
                 {"refine_dt", rep.refine_dt},
                 {"blowups", rep.blowups}};
  ctx.stream("jumps", "path", "jump realization shared by all levels");
  ctx.stream("initial", "path", "initial condition, projected to each level");
  ctx.fail_unless(rep.converged);
}

void run_contraction(Context& ctx) {
  const auto& c = ctx.config;
  const GalerkinModel model = model_at(c, c.m);
  const EnsembleSpec spec = ensemble(c, c.seed, ctx.workers);
  const SpectralField xi = spec.initial.draw(c.m, c.seed, 0);
  Stream dir_stream(c.seed, StreamPurpose::Sampling, 0);
  SpectralField d(c.m);
  for (std::size_t i = 0; i < c.m; ++i) d[i] = dir_stream.normal();
  d *= 1.0 / std::sqrt(l2_sq(d));
  const double c0 = c.convection ? estimate_c0(model.convection(), model.basis(),
                                               derive_seed(c.seed, StreamPurpose::Sampling, 1))
                                 : 0.0;
  auto& t = ctx.table("contraction", {{"separation", "velocity"}, {"t", "time"}, {"statistic", ""},
                                      {"statistic_error", ""}, {"weighted", "energy"}, {"weighted_error", "energy"}});
  std::vector<ContractionReport> reps;
  json out = json::array();
  for (double h : c.separations) {
    reps.push_back(uniqueness_contraction(model, c.solver(c.m), spec, xi, xi + h * d, c0, c.samples));
    const auto& r = reps.back();
    json stat = json::array();
    for (std::size_t j = 0; j < r.times.size(); ++j) {
      t.row({h, r.times[j], r.statistic[j].mean, r.statistic[j].error, r.weighted[j].mean, r.weighted[j].error});
      stat.push_back(to_json(r.statistic[j]));
    }
    ctx.blowups += r.blowups;
    out.push_back({{"separation", h},
                   {"statistic", stat},
                   {"max_pathwise_ratio", r.max_pathwise_ratio},
                   {"blowups", r.blowups}});
  }
  const bool ok = contraction_consistent(reps);
  ctx.results = {{"c0", c0}, {"times", reps.front().times}, {"separations", out}, {"consistent", ok}};
  ctx.stream("sampling", "0", "separation direction");
  ctx.stream("sampling", "1", "convection constant estimate");
  ctx.stream("jumps", "path", "jump realization shared by each pair");
  ctx.fail_unless(ok);
}

void run_feller(Context& ctx) {
  const auto& c = ctx.config;
  const GalerkinModel model = model_at(c, c.m);
  const EnsembleSpec spec = ensemble(c, c.seed, ctx.workers);
  const SpectralField xi = spec.initial.draw(c.m, c.seed, 0);
  std::string names;
  for (std::size_t i = 0; i < c.ck_functionals.size(); ++i) names += (i ? ", " : "") + c.ck_functionals[i];
  auto& ck = ctx.table("chapman_kolmogorov",
                       {{"functional", "index"}, {"direct", ""}, {"direct_error", ""}, {"nested", ""},
                        {"nested_error", ""}, {"z", "sigma"}},
                       {{"functionals", names}});
  json ck_out = json::array();
  bool ok = true;
  for (std::size_t i = 0; i < c.ck_functionals.size(); ++i) {
    const auto rep = chapman_kolmogorov(model, c.solver(c.m), spec, c.ck_functionals[i], xi, c.ck_t, c.ck_s,
                                        c.ck_outer, c.ck_inner);
    ck.row({static_cast<double>(i), rep.direct.mean, rep.direct.error, rep.nested.mean, rep.nested.error, rep.z});
    ck_out.push_back({{"functional", c.ck_functionals[i]},
                      {"direct", to_json(rep.direct)},
                      {"nested", to_json(rep.nested)},
                      {"z", rep.z},
                      {"pass", rep.pass}});
    ok = ok && rep.pass;
  }
  const auto fr = feller_modulus(model, c.solver(c.m), spec, c.feller_functional, xi,
                                 SpectralField::unit(c.m, c.feller_mode), c.feller_count);
  auto& ft = ctx.table("feller", {{"k", ""}, {"distance", "velocity"}, {"modulus", ""}, {"modulus_error", ""}},
                       {{"functional", c.feller_functional}});
  json mod = json::array();
  for (std::size_t k = 0; k < fr.modulus.size(); ++k) {
    ft.row({static_cast<double>(k + 1), fr.distances[k], fr.modulus[k].mean, fr.modulus[k].error});
    mod.push_back(to_json(fr.modulus[k]));
  }
  ctx.results = {{"chapman_kolmogorov", ck_out},
                 {"feller", {{"functional", c.feller_functional}, {"distances", fr.distances}, {"modulus", mod},
                             {"monotone", fr.monotone}}}};
  ctx.stream("jumps", "path", "direct estimates and the common random numbers of the Feller sequence");
  ctx.stream("sampling", "outer path", "first leg of the nested estimator");
  ctx.stream("inner", "outer path, then inner path", "second leg of the nested estimator");
  ctx.fail_unless(ok && fr.monotone);
}

OccupationSpec occupation_spec(const ExperimentConfig& c, std::size_t workers) {
  OccupationSpec os;
  os.functionals = c.occupation_functionals;
  os.schedule = c.schedule;
  os.burn_in = c.burn_in;
  os.block_length = c.block_length;
  os.replicas = c.replicas;
  os.seed = c.seed;
  os.workers = workers;
  return os;
}

json write_occupation(Context& ctx, const std::string& name, const OccupationMeasure& occ) {
  std::vector<Column> cols{{"T", "time"}};
  for (const auto& f : occ.functionals) {
    cols.push_back({f + "_mean", ""});
    cols.push_back({f + "_error", ""});
  }
  auto& t = ctx.table(name, cols);
  json rows = json::array();
  for (const auto& r : occ.rows) {
    std::vector<double> v{r.horizon};
    json avg = json::object();
    for (std::size_t f = 0; f < occ.functionals.size(); ++f) {
      v.push_back(r.averages[f].mean);
      v.push_back(r.averages[f].error);
      avg[occ.functionals[f]] = to_json(r.averages[f]);
    }
    t.row(v);
    rows.push_back({{"T", r.horizon}, {"averages", avg}});
  }
  if (occ.truncated) t.truncate(occ.truncation_reason);
  return {{"burn_in", occ.burn_in},  {"block_length", occ.block_length}, {"replicas", occ.replicas},
          {"rows", rows},            {"stabilized", occ.stabilized},     {"truncated", occ.truncated},
          {"truncation_reason", occ.truncation_reason}};
}

void run_occupation(Context& ctx) {
  const auto& c = ctx.config;
  const GalerkinModel model = model_at(c, c.m);
  const SpectralField xi = initial_law(c).draw(c.m, c.seed, 0);
  const OccupationMeasure occ = occupation_measure(model, c.solver(c.m), xi, occupation_spec(c, ctx.workers));
  ctx.results = write_occupation(ctx, "occupation", occ);
  ctx.stream("jumps", "replica", "jump realization of each chain");
  ctx.stream("bootstrap", "row * functionals + functional", "block bootstrap errors");
  if (occ.truncated) {
    ctx.verdict = "BLOWUP";
    return;
  }
  ctx.fail_unless(occ.stabilized);
}

void run_invariant(Context& ctx) {
  const auto& c = ctx.config;
  const GalerkinModel model = model_at(c, c.m);
  const SpectralField xi = initial_law(c).draw(c.m, c.seed, 0);
  const InvariantCheck chk = invariant_moment_check(model, c.solver(c.m), xi, c.declared_constants(),
                                                    occupation_spec(c, ctx.workers), c.tolerance, c.zero_floor);
  ctx.results = {{"regime",
                  {{"admissible", chk.regime.admissible},
                   {"dissipation", chk.regime.dissipation},
                   {"l1", chk.regime.growth},
                   {"message", chk.regime.message}}},
                 {"lambda1", chk.lambda1},
                 {"bound", chk.bound},
                 {"tolerance", chk.tolerance},
                 {"zero_floor", chk.zero_floor},
                 {"measured", to_json(chk.measured)},
                 {"pass", chk.pass}};
  if (chk.refused) {
    ctx.verdict = "REFUSED";
    return;
  }
  ctx.results["occupation"] = write_occupation(ctx, "invariant_bound", chk.occupation);
  ctx.stream("jumps", "replica", "jump realization of each chain");
  if (chk.occupation.truncated) {
    ctx.verdict = "BLOWUP";
    return;
  }
  ctx.fail_unless(chk.pass);
}

void run_audit(Context& ctx) {
  const auto& c = ctx.config;
  const GalerkinModel model = model_at(c, c.m);
  const GronwallStudy study =
      gronwall_study(model, c.solver(c.m), ensemble(c, c.seed, ctx.workers), c.declared_constants().l1, c.samples);
  auto& t = ctx.table("audit", {{"t", "time"}, {"lhs", "energy"}, {"rhs", "energy"}, {"margin", "energy"}});
  for (std::size_t k = 0; k < study.times.size() && k < study.report.lhs.size(); ++k) {
    t.row({study.times[k], study.report.lhs[k], study.report.rhs[k], study.report.rhs[k] - study.report.lhs[k]});
  }
  const auto& k = study.constants;
  ctx.blowups += study.blowups;
  ctx.results = {{"status", to_string(study.report.status)},
                 {"violations", study.report.violations},
                 {"margin", study.report.margin},
                 {"constants",
                  {{"C", k.c}, {"alpha", k.alpha}, {"beta", k.beta}, {"gamma", k.gamma}, {"delta", k.delta},
                   {"C_tilde", k.c_tilde}}},
                 {"blowups", study.blowups}};
  ctx.stream("jumps", "path", "jump realization of each member");
  ctx.stream("initial", "path", "initial condition of each member");
  if (study.report.status == GronwallReport::Status::Inapplicable) {
    ctx.verdict = "INAPPLICABLE";
    return;
  }
  ctx.fail_unless(study.report.status == GronwallReport::Status::Pass && study.report.margin > 0);
}

struct Operation {
  const char* module;
  const char* operation;
  void (*run)(Context&);
};

Operation operation_for(Experiment e) {
  switch (e) {
    case Experiment::Moments: return {"ergodics", "mc_moment", run_moments};
    case Experiment::Cauchy: return {"ergodics", "cauchy_study", run_cauchy};
    case Experiment::Contraction: return {"ergodics", "uniqueness_contraction", run_contraction};
    case Experiment::Feller: return {"ergodics", "semigroup_eval", run_feller};
    case Experiment::Occupation: return {"ergodics", "occupation_measure", run_occupation};
    case Experiment::InvariantBound: return {"ergodics", "invariant_moment_check", run_invariant};
    case Experiment::Audit: return {"ergodics", "gronwall_audit", run_audit};
  }
  throw std::logic_error("unhandled experiment");
}

int exit_for(const std::string& verdict) {
  if (verdict == "PASS") return kExitPass;
  if (verdict == "BLOWUP") return kExitBlowUp;
  if (verdict == "REFUSED") return kExitConfig;
  return kExitFail;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  validate_config(config);
  const auto started = std::chrono::steady_clock::now();
  const std::string started_utc = utc_now();
  const fs::path dir = options.out_dir.empty() ? fs::path(config.output) : fs::path(options.out_dir);
  fs::create_directories(dir);

  RunResult result;
  const std::string hash = config_hash(config);
  const Operation op = operation_for(config.experiment);
  Context ctx{config, dir, std::max<std::size_t>(options.workers, 1), result.files, {}, {}, {}, "PASS", 0, {}};
  ctx.comments = {{"experiment", to_string(config.experiment)},
                  {"config_hash", hash},
                  {"seed", std::to_string(config.seed)},
                  {"source", std::string(op.module) + "::" + op.operation}};
  std::string failure;
  try {
    op.run(ctx);
  } catch (const BlowUpError& e) {
    ctx.verdict = "BLOWUP";
    failure = e.what();
    for (auto& t : ctx.tables) t->truncate(failure);
  }
  if (ctx.blowups > 0 && ctx.verdict != "BLOWUP") {
    ctx.verdict = "BLOWUP";
    failure = std::to_string(ctx.blowups) + " ensemble members blew up";
  }
  for (auto& t : ctx.tables) t->close();

  const GalerkinBasis basis = build_basis(config.m, config.dim);
  json summary = {
      {"experiment", to_string(config.experiment)},
      {"verdict", ctx.verdict},
      {"exit_code", exit_for(ctx.verdict)},
      {"config_hash", hash},
      {"config", config_json(config)},
      {"provenance", {{"module", op.module}, {"operation", op.operation}}},
      {"seeds", {{"root", config.seed}, {"schedule", "derive_seed(root, purpose, index)"}, {"streams", ctx.streams}}},
      {"basis",
       {{"dim", config.dim},
        {"m", config.m},
        {"mode_table_hash", basis.mode_table_hash()},
        {"lambda1", poincare_lambda1(basis)}}},
      {"constants",
       {{"declared", to_json(config.declared_constants())},
        {"closed_form", to_json(config.noise.closed_form_constants(config.dim))}}},
      {"results", ctx.results},
      {"blowups", ctx.blowups},
      {"files", result.files},
  };
  if (!failure.empty()) summary["failure"] = failure;
  write_text_file((dir / "summary.json").string(), summary.dump(2) + "\n");

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  const json timing = {{"started_utc", started_utc},
                       {"finished_utc", utc_now()},
                       {"wall_seconds", wall},
                       {"workers", ctx.workers}};
  write_text_file((dir / "timing.json").string(), timing.dump(2) + "\n");

  result.files.push_back("summary.json");
  result.files.push_back("timing.json");
  result.verdict = ctx.verdict;
  result.exit_code = exit_for(ctx.verdict);
  result.summary = std::move(summary);
  return result;
}

}  // namespace bipolar
