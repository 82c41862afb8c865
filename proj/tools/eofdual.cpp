// eofdual command-line driver.
//
// Every subcommand writes one JSON document (to --out or stdout) whose
// "config" block records all parameters of the run.  Exit codes: 0 success,
// 1 error, 2 when the checked property fails or a violation is found.

#include "eofdual/eofdual.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace eofdual;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitViolation = 2;

struct Cli {
  RunConfig config;
  std::vector<int> dims{2, 2};
  int copies = 1;
  std::optional<double> tol;
  std::string out_path;
  std::string csv_path;
  bool wootters = false;
  bool timing = false;
};

void add_common(CLI::App* sub, Cli& cli) {
  sub->add_option("--seed", cli.config.seed, "random seed")->capture_default_str();
  sub->add_option("--restarts", cli.config.restarts, "optimizer restarts")->capture_default_str()->check(CLI::PositiveNumber);
  sub->add_option("--tol", cli.tol, "tolerance for the pass/violation decision");
  sub->add_option("--dims", cli.dims, "local dimensions dA dB")->expected(2);
  sub->add_option("--copies", cli.copies, "number of copies (1 or 2)")->check(CLI::Range(1, 2));
  sub->add_option("--out", cli.out_path, "write the JSON result here instead of stdout");
  sub->add_option("--threads", cli.config.threads, "worker threads for restarts/trials")->check(CLI::PositiveNumber);
}

void emit(const Cli& cli, const Json& j) {
  const std::string text = j.dump(2) + "\n";
  if (cli.out_path.empty()) {
    std::cout << text;
  } else {
    write_text_file(cli.out_path, text);
  }
}

Json with_config(const Cli& cli, Json body) {
  Json j;
  j["config"] = cli.config.to_json();
  for (auto& [k, v] : body.items()) j[k] = v;
  return j;
}

const std::string& require_input(const Cli& cli) {
  if (cli.config.input_path.empty()) throw ParameterError(detail::concat(cli.config.command, ": --in is required"));
  return cli.config.input_path;
}

// ---------------------------------------------------------------------------

int cmd_eof(const Cli& cli) {
  const DensityMatrix rho = density_from_json(read_json_file(require_input(cli)));
  Json body;
  if (cli.wootters) {
    body["method"] = "wootters";
    body["value"] = wootters_eof(rho);
    body["concurrence"] = concurrence(rho);
  } else {
    RoofOptions ro;
    ro.restarts = cli.config.restarts;
    ro.seed = cli.config.seed;
    ro.threads = cli.config.threads;
    const RoofResult r = eof_roof(rho.dims().copies == 2 ? group_copies(rho) : rho, ro);
    body["method"] = "roof";
    body["value"] = r.value;
    body["converged"] = r.converged;
    Json members = Json::array();
    for (const auto& m : r.ensemble.members()) {
      members.push_back(Json{{"weight", m.weight}, {"state", vector_to_json(m.state.amplitudes())}});
    }
    body["ensemble"] = members;
  }
  emit(cli, with_config(cli, body));
  return kExitOk;
}

int cmd_conjugate(const Cli& cli) {
  const HermitianOperator x = hermitian_from_json(read_json_file(require_input(cli)));
  ConjugateOptions co;
  co.restarts = cli.config.restarts;
  co.seed = cli.config.seed;
  co.threads = cli.config.threads;
  const ConjugateResult r = conjugate_e(x.dims().copies == 2 ? group_copies(x) : x, co);
  emit(cli, with_config(cli, Json{{"value", r.value}, {"argmax_state", vector_to_json(r.argmax_state.amplitudes())}}));
  return kExitOk;
}

int cmd_g(const Cli& cli) {
  const HermitianOperator m = hermitian_from_json(read_json_file(require_input(cli)));
  GOptions go;
  go.restarts = cli.config.restarts;
  go.seed = cli.config.seed;
  go.threads = cli.config.threads;
  const std::string& method = cli.config.method;
  Json body;
  std::optional<GEvalResult> direct, eigen;
  if (method == "direct" || method == "both") {
    direct = g_direct(m, go);
    body["g_direct"] = extended_to_json(direct->value);
  }
  if (method == "eigen" || method == "both") {
    eigen = g_eigen(m, go);
    body["g_eigen"] = extended_to_json(eigen->value);
    body["tau_on_boundary"] = eigen->tau_on_boundary;
    body["argmax_tau"] = operator_to_json(eigen->argmax_tau);
  }
  if (direct && eigen && direct->value.is_finite() && eigen->value.is_finite()) {
    body["difference"] = direct->value.value() - eigen->value.value();
  }
  emit(cli, with_config(cli, body));
  return kExitOk;
}

int cmd_hp_sweep(const Cli& cli) {
  const HermitianOperator m = hermitian_from_json(read_json_file(require_input(cli)));
  HpOptions ho;
  ho.restarts = cli.config.restarts;
  ho.seed = cli.config.seed;
  ho.threads = cli.config.threads;
  const PuritySweep sweep = trotter_sweep(m, cli.config.p_grid, ho);
  if (!cli.csv_path.empty()) emit_sweep_csv(sweep, cli.csv_path);
  Json rows = Json::array();
  for (const auto& r : sweep.rows) {
    rows.push_back(Json{{"p", r.p}, {"h_p", r.h_p}, {"h_p_pow_inv", r.h_p_pow_inv}, {"exp_g", r.exp_g}, {"gap", r.gap}});
  }
  emit(cli, with_config(cli, Json{{"rows", rows},
                                  {"monotone", sweep.monotone},
                                  {"nonnegative", sweep.nonnegative},
                                  {"max_increase", sweep.max_increase}}));
  return kExitOk;
}

int cmd_nu_q(const Cli& cli) {
  const KrausChannel ch = channel_from_json(read_json_file(require_input(cli)));
  PurityOptions po;
  po.restarts = cli.config.restarts;
  po.seed = cli.config.seed;
  po.threads = cli.config.threads;
  const PurityResult r = nu_q(ch, cli.config.q.value_or(2.0), po);
  emit(cli, with_config(cli, Json{{"value", r.value}, {"argmax_input", vector_to_json(r.argmax_input)}}));
  return kExitOk;
}

int cmd_check_duality(const Cli& cli) {
  const double tol = cli.config.tol;
  std::vector<std::pair<HermitianOperator, double>> cases;
  if (!cli.config.input_path.empty()) {
    cases.emplace_back(hermitian_from_json(read_json_file(cli.config.input_path)), cli.config.p.value_or(0.5));
  } else {
    static constexpr double ps[] = {0.2, 0.5, 0.8};
    for (int t = 0; t < cli.config.trials; ++t) {
      cases.emplace_back(sample_filter_m(cli.config.dims, derive_seed(cli.config.seed, t)), cli.config.p.value_or(ps[t % 3]));
    }
  }
  Json records = Json::array();
  double worst = 0.0;
  for (std::size_t t = 0; t < cases.size(); ++t) {
    const auto& [m, p] = cases[t];
    const PurityDualityReport r = purity_duality_check(m, p, cli.config.restarts, derive_seed(cli.config.seed, 100000 + t));
    worst = std::max(worst, std::abs(r.difference));
    records.push_back(Json{{"trial", t}, {"p", p}, {"q", r.q}, {"h_p", r.h_p}, {"nu_q", r.nu_q}, {"difference", r.difference}});
  }
  const bool pass = worst <= tol;
  emit(cli, with_config(cli, Json{{"max_abs_difference", worst}, {"pass", pass}, {"records", records}}));
  return pass ? kExitOk : kExitViolation;
}

int cmd_check_lemma2(const Cli& cli) {
  const double tol = cli.config.tol;
  GOptions go;
  go.restarts = cli.config.restarts;
  go.threads = cli.config.threads;
  Json records = Json::array();
  double worst = 0.0;
  for (int t = 0; t < cli.config.trials; ++t) {
    const HermitianOperator m = sample_filter_m(cli.config.dims, derive_seed(cli.config.seed, t));
    go.seed = derive_seed(cli.config.seed, 100000 + t);
    const GEvalResult a = g_direct(m, go);
    const GEvalResult b = g_eigen(m, go);
    const double diff = a.value.value() - b.value.value();
    worst = std::max(worst, std::abs(diff));
    records.push_back(Json{{"trial", t},
                           {"g_direct", a.value.value()},
                           {"g_eigen", b.value.value()},
                           {"difference", diff},
                           {"tau_on_boundary", b.tau_on_boundary}});
  }
  const bool pass = worst <= tol;
  emit(cli, with_config(cli, Json{{"max_abs_difference", worst}, {"pass", pass}, {"records", records}}));
  return pass ? kExitOk : kExitViolation;
}

int cmd_check_prop(const Cli& cli) {
  const DensityMatrix rho = density_from_json(read_json_file(require_input(cli)));
  const double tol = cli.config.tol;
  if (rho.dims().copies == 1) {
    RoofOptions ro;
    ro.restarts = cli.config.restarts;
    ro.seed = derive_seed(cli.config.seed, 1);
    const RoofResult roof = eof_roof(rho, ro);
    DualEstimateOptions dopt;
    dopt.restarts = cli.config.restarts;
    dopt.seed = derive_seed(cli.config.seed, 2);
    const DualEstimate dual = fhat_dual_estimate(rho, dopt);
    ConjugateOptions co;
    co.restarts = cli.config.restarts;
    co.seed = derive_seed(cli.config.seed, 3);
    const Prop1Report r = check_prop1_ensemble(rho, dual.x, roof.ensemble, tol, co);
    const bool pass = r.members_optimal && r.tau_optimal;
    emit(cli, with_config(cli, Json{{"proposition", "ensemble_members_maximize_conjugate"},
                                    {"roof_value", roof.value},
                                    {"dual_value", dual.value},
                                    {"defects", r.defects},
                                    {"max_abs_defect", r.max_abs_defect},
                                    {"closure_residual", r.closure_residual},
                                    {"pass", pass}}));
    return pass ? kExitOk : kExitViolation;
  }
  const auto [m1, m2] = detail::reduction_filters(rho, cli.config.restarts, cli.config.seed);
  GapOptions go;
  go.restarts = cli.config.restarts;
  go.seed = cli.config.seed;
  go.roof_restarts = std::max(4, cli.config.restarts / 4);
  const Prop2Report r = check_prop2_transport(rho, m1, m2, tol, go);
  Json body = detail::prop2_to_json(r);
  body["proposition"] = "violation_transport";
  body["eof_mode"] = r.eof_gap.mode;
  body["pass"] = r.transport_holds;
  emit(cli, with_config(cli, body));
  return r.transport_holds ? kExitOk : kExitViolation;
}

int cmd_gap_search(const Cli& cli) {
  GapSearchOptions opt;
  opt.kind = parse_gap_kind(cli.config.kind);
  opt.trials = cli.config.trials;
  opt.dims = cli.config.dims.single_copy();
  opt.seed = cli.config.seed;
  opt.restarts = cli.config.restarts;
  opt.tol = cli.config.tol;
  opt.threads = cli.config.threads;
  opt.q = cli.config.q.value_or(5.0);
  if (!cli.config.input_path.empty()) {
    if (opt.kind != GapKind::nu_mult) throw ParameterError("gap-search: --in is only used by --kind nu_mult");
    opt.channel = channel_from_json(read_json_file(cli.config.input_path));
  }
  const auto records = gap_search(opt);
  emit(cli, campaign_to_json(cli.config, records, cli.timing));
  return summarize(records).violations > 0 ? kExitViolation : kExitOk;
}

int cmd_wh_demo(const Cli& cli) {
  const int d = cli.config.d.value_or(3);
  const double q = cli.config.q.value_or(5.0);
  const KrausChannel wh = werner_holevo_channel(d);
  PurityOptions po;
  po.restarts = cli.config.restarts;
  po.seed = cli.config.seed;
  po.threads = cli.config.threads;
  const MultiplicativityResult r = multiplicativity_gap(wh, wh, q, po);
  const double me = detail::output_norm(product_channel(wh, wh), maximally_entangled(d), q);
  emit(cli, with_config(cli, Json{{"channel", "werner_holevo"},
                                  {"d", d},
                                  {"q", q},
                                  {"nu_single", r.nu_single_1},
                                  {"nu_single_squared", r.nu_single_1 * r.nu_single_2},
                                  {"nu_joint", r.nu_joint},
                                  {"maximally_entangled_output_norm", me},
                                  {"log_gap", r.gap.gap},
                                  {"violated", r.gap.violated(cli.config.tol)},
                                  {"witness", vector_to_json(r.witness)}}));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entanglement-of-formation duality toolkit"};
  app.require_subcommand(1);
  Cli cli;
  std::string p_grid_text;

  struct Entry {
    const char* name;
    const char* help;
    int (*run)(const Cli&);
    double default_tol;
  };
  const std::vector<Entry> entries{
      {"eof", "entanglement of formation of a state (--in)", cmd_eof, kDefaultGapTolerance},
      {"conjugate", "E*(X) for a Hermitian X (--in)", cmd_conjugate, kDefaultGapTolerance},
      {"g", "g(M) by the direct and eigenvalue forms (--in)", cmd_g, kDefaultGapTolerance},
      {"hp-sweep", "h_p^{1/p} against exp g(M) down a p grid (--in)", cmd_hp_sweep, kDefaultGapTolerance},
      {"nu-q", "maximal output q-norm of a channel (--in channel)", cmd_nu_q, kDefaultPurityTolerance},
      {"check-duality", "h_p(M) = nu_q of the filter channel", cmd_check_duality, kDefaultPurityTolerance},
      {"check-lemma2", "g_direct = g_eigen on random M", cmd_check_lemma2, kDefaultPurityTolerance},
      {"check-prop", "ensemble optimality (1 copy) or violation transport (2 copies)", cmd_check_prop, 1e-3},
      {"gap-search", "randomized search for additivity violations", cmd_gap_search, kDefaultGapTolerance},
      {"wh-demo", "Werner-Holevo multiplicativity counterexample", cmd_wh_demo, kDefaultGapTolerance},
  };
  std::vector<CLI::App*> subs;
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    add_common(sub, cli);
    const std::string name = e.name;
    if (name != "check-lemma2" && name != "gap-search") sub->add_option("--in", cli.config.input_path, "input JSON file");
    if (name == "eof") sub->add_flag("--wootters", cli.wootters, "use the two-qubit closed form");
    if (name == "g") {
      cli.config.method = "both";
      sub->add_option("--method", cli.config.method, "direct, eigen or both")
          ->check(CLI::IsMember({"direct", "eigen", "both"}));
    }
    if (name == "hp-sweep") {
      sub->add_option("--p-grid", p_grid_text, "comma separated, descending p values");
      sub->add_option("--csv", cli.csv_path, "also write the sweep as CSV");
    }
    if (name == "nu-q" || name == "gap-search" || name == "wh-demo") sub->add_option("--q", cli.config.q, "Schatten index");
    if (name == "check-duality") sub->add_option("--p", cli.config.p, "exponent p in (0, 1]");
    if (name == "check-lemma2" || name == "check-duality" || name == "gap-search") {
      sub->add_option("--trials", cli.config.trials, "number of trials")->check(CLI::PositiveNumber);
    }
    if (name == "gap-search") {
      sub->add_option("--kind", cli.config.kind, "g_subadd, strong_superadd or nu_mult")->required();
      sub->add_option("--in", cli.config.input_path, "channel JSON for nu_mult");
      sub->add_flag("--timing", cli.timing, "add wall-clock times to the records");
    }
    if (name == "wh-demo") sub->add_option("--d", cli.config.d, "dimension d >= 2");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      cli.config.command = entries[i].name;
      cli.config.tol = cli.tol.value_or(entries[i].default_tol);
      if (cli.config.command != "g") cli.config.method.clear();
      cli.config.dims = BipartiteDims(cli.dims[0], cli.dims[1], cli.copies);
      if (cli.config.command == "hp-sweep") {
        if (p_grid_text.empty()) {
          cli.config.p_grid = default_p_grid();
        } else {
          for (const auto& tok : CLI::detail::split(p_grid_text, ',')) {
            try {
              cli.config.p_grid.push_back(std::stod(tok));
            } catch (const std::exception&) {
              throw ParameterError(detail::concat("--p-grid: not a number: '", tok, "'"));
            }
          }
        }
      }
      if (cli.config.command == "g" || cli.config.command == "conjugate" || cli.config.command == "eof" ||
          cli.config.command == "hp-sweep" || cli.config.command == "nu-q" || cli.config.command == "check-prop") {
        cli.config.trials = 1;
      }
      return entries[i].run(cli);
    }
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
