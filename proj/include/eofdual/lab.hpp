#pragma once

#include "eofdual/io.hpp"

#include <chrono>

namespace eofdual {

inline constexpr double kDefaultGapTolerance = 1e-4;
inline constexpr double kDefaultPurityTolerance = 1e-6;

/// Everything that determines a run.  Serialized into every output so that a
/// result can be reproduced from its own header.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 0;
  int restarts = 32;
  double tol = kDefaultGapTolerance;
  BipartiteDims dims{2, 2, 1};
  int trials = 1;
  std::optional<double> q;
  std::optional<double> p;
  std::vector<double> p_grid;
  std::string input_path;
  std::string kind;
  std::string method;
  int threads = 1;
  std::optional<int> d;

  [[nodiscard]] Json to_json() const {
    Json j;
    j["command"] = command;
    j["seed"] = seed;
    j["restarts"] = restarts;
    j["tol"] = tol;
    j["dims"] = dims_to_json(dims);
    j["trials"] = trials;
    if (q) j["q"] = *q;
    if (p) j["p"] = *p;
    if (!p_grid.empty()) j["p_grid"] = p_grid;
    if (!input_path.empty()) j["in"] = input_path;
    if (!kind.empty()) j["kind"] = kind;
    if (!method.empty()) j["method"] = method;
    if (d) j["d"] = *d;
    j["threads"] = threads;
    return j;
  }
};

enum class GapKind { g_subadd, strong_superadd, nu_mult };

inline GapKind parse_gap_kind(const std::string& s) {
  if (s == "g_subadd") return GapKind::g_subadd;
  if (s == "strong_superadd") return GapKind::strong_superadd;
  if (s == "nu_mult") return GapKind::nu_mult;
  throw ParameterError(detail::concat("unknown gap kind '", s, "' (expected g_subadd, strong_superadd or nu_mult)"));
}

inline const char* to_string(GapKind k) {
  switch (k) {
    case GapKind::g_subadd:
      return "g_subadd";
    case GapKind::strong_superadd:
      return "strong_superadd";
    case GapKind::nu_mult:
      return "nu_mult";
  }
  return "?";
}

struct CampaignRecord {
  int trial = 0;
  GapKind kind = GapKind::g_subadd;
  std::uint64_t trial_seed = 0;
  Json inputs;  // enough to replay the trial
  AdditivityGap gap;
  bool violated = false;
  Json details;  // kind-specific extras (witness, transport check)
  double wall_seconds = 0.0;

  [[nodiscard]] Json to_json(bool with_timing) const {
    Json j;
    j["trial"] = trial;
    j["kind"] = to_string(kind);
    j["trial_seed"] = trial_seed;
    j["direction"] = to_string(gap.direction);
    j["mode"] = gap.mode;
    j["lhs"] = gap.lhs;
    j["rhs"] = gap.rhs;
    j["gap"] = gap.gap;
    j["violated"] = violated;
    j["reverse_direction"] = reverse_direction_name(gap.direction);
    j["reverse_gap"] = gap.reverse_gap();
    if (!details.is_null()) j["details"] = details;
    j["inputs"] = inputs;
    if (with_timing) j["wall_seconds"] = wall_seconds;
    return j;
  }
};

struct GapSearchOptions {
  GapKind kind = GapKind::g_subadd;
  int trials = 10;
  BipartiteDims dims{2, 2, 1};
  std::uint64_t seed = 0;
  int restarts = 16;
  double tol = kDefaultGapTolerance;
  int threads = 1;
  double q = 5.0;                       // nu_mult
  std::optional<KrausChannel> channel;  // nu_mult: fixed channel, otherwise random channels
  int state_rank = 2;                   // strong_superadd: rank of the sampled two-copy states
};

inline constexpr double kStrongSuperaddEstimatedTolerance = 5e-3;

namespace detail {

/// Random channel from a Haar isometry: K Kraus elements d_in -> d_out.
inline KrausChannel sample_channel(int d_in, int d_out, int elements, std::uint64_t seed) {
  const Matrix u = sample_unitary(static_cast<Eigen::Index>(d_out) * elements, seed);
  const Matrix v = u.leftCols(d_in);
  std::vector<Matrix> kraus;
  for (int i = 0; i < elements; ++i) kraus.push_back(v.middleRows(static_cast<Eigen::Index>(i) * d_out, d_out));
  return KrausChannel::detect(std::move(kraus));
}

inline double gap_tolerance(const CampaignRecord& r, double tol) {
  if (r.kind == GapKind::strong_superadd && r.gap.mode == "both sides estimated") {
    return std::max(tol, kStrongSuperaddEstimatedTolerance);
  }
  return tol;
}

/// Dual operators of the two reductions, in M form, for the transport check.
inline std::pair<HermitianOperator, HermitianOperator> reduction_filters(const DensityMatrix& rho, int restarts,
                                                                         std::uint64_t seed) {
  DualEstimateOptions o;
  o.restarts = restarts;
  o.seed = derive_seed(seed, 1);
  const HermitianOperator x1 = fhat_dual_estimate(reduce_to_copy(rho, 0), o).x;
  o.seed = derive_seed(seed, 2);
  const HermitianOperator x2 = fhat_dual_estimate(reduce_to_copy(rho, 1), o).x;
  return {m_form(x1), m_form(x2)};
}

inline Json prop2_to_json(const Prop2Report& r) {
  return Json{{"eof_gap", r.eof_gap.gap},   {"g_gap", r.g_gap.gap},         {"eof_violated", r.eof_violated},
              {"g_violated", r.g_violated}, {"transport_holds", r.transport_holds}, {"signs_agree", r.signs_agree}};
}

/// Evaluates one trial from its recorded inputs.
inline CampaignRecord evaluate_trial(GapKind kind, const Json& inputs, std::uint64_t trial_seed, int restarts,
                                     double tol, double q) {
  CampaignRecord r;
  r.kind = kind;
  r.trial_seed = trial_seed;
  r.inputs = inputs;
  GapOptions go;
  go.restarts = restarts;
  go.seed = trial_seed;
  go.roof_restarts = std::max(4, restarts / 4);
  switch (kind) {
    case GapKind::g_subadd: {
      r.gap = g_subadditivity_gap(hermitian_from_json(inputs.at("m1")), hermitian_from_json(inputs.at("m2")), go);
      break;
    }
    case GapKind::strong_superadd: {
      const DensityMatrix rho = density_from_json(inputs.at("rho"));
      r.gap = strong_superadditivity_gap(rho, go);
      break;
    }
    case GapKind::nu_mult: {
      PurityOptions po;
      po.restarts = restarts;
      po.seed = trial_seed;
      const KrausChannel c1 = channel_from_json(inputs.at("channel1"));
      const KrausChannel c2 = channel_from_json(inputs.at("channel2"));
      const MultiplicativityResult m = multiplicativity_gap(c1, c2, q, po);
      r.gap = m.gap;
      r.details = Json{{"nu_1", m.nu_single_1}, {"nu_2", m.nu_single_2}, {"nu_joint", m.nu_joint},
                       {"witness", vector_to_json(m.witness)}};
      break;
    }
  }
  r.violated = r.gap.violated(gap_tolerance(r, tol));
  if (kind == GapKind::strong_superadd && r.violated) {
    const DensityMatrix rho = density_from_json(inputs.at("rho"));
    const auto [m1, m2] = reduction_filters(rho, restarts, trial_seed);
    r.details = Json{{"prop2_transport", prop2_to_json(check_prop2_transport(rho, m1, m2, tol, go))}};
  }
  return r;
}

inline Json sample_trial_inputs(const GapSearchOptions& opt, int trial) {
  const std::uint64_t s = derive_seed(opt.seed, 2 * static_cast<std::uint64_t>(trial));
  const std::uint64_t s2 = derive_seed(opt.seed, 2 * static_cast<std::uint64_t>(trial) + 1);
  const BipartiteDims single = opt.dims.single_copy();
  switch (opt.kind) {
    case GapKind::g_subadd:
      return Json{{"m1", operator_to_json(sample_filter_m(single, s))},
                  {"m2", operator_to_json(sample_filter_m(single, s2))}};
    case GapKind::strong_superadd: {
      const BipartiteDims two(single.dim_a, single.dim_b, 2);
      return Json{{"rho", operator_to_json(sample_ginibre_density(two, s, opt.state_rank))}};
    }
    case GapKind::nu_mult: {
      if (opt.channel) return Json{{"channel1", channel_to_json(*opt.channel)}, {"channel2", channel_to_json(*opt.channel)}};
      // random channels H_A -> H_A with dB Kraus elements
      return Json{{"channel1", channel_to_json(sample_channel(single.dim_a, single.dim_a, single.dim_b, s))},
                  {"channel2", channel_to_json(sample_channel(single.dim_a, single.dim_a, single.dim_b, s2))}};
    }
  }
  return {};
}

}  // namespace detail

/// Randomized search for violations.  Trials are independent, seeded by
/// index, and returned in trial order whatever the thread count.
inline std::vector<CampaignRecord> gap_search(const GapSearchOptions& opt) {
  if (opt.trials < 1) throw ParameterError("gap_search needs at least one trial");
  if (opt.kind == GapKind::strong_superadd && opt.dims.total() > 9) {
    throw ShapeError(detail::concat("strong_superadd supports single-copy dims up to 9, got ", opt.dims));
  }
  std::vector<CampaignRecord> out(opt.trials);
  auto run = [&](int t) {
    const auto start = std::chrono::steady_clock::now();
    const Json inputs = detail::sample_trial_inputs(opt, t);
    CampaignRecord r = detail::evaluate_trial(opt.kind, inputs, derive_seed(opt.seed, 1000000 + t), opt.restarts,
                                              opt.tol, opt.q);
    r.trial = t;
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out[t] = std::move(r);
  };
  if (opt.threads <= 1) {
    for (int t = 0; t < opt.trials; ++t) run(t);
  } else {
    std::vector<std::future<void>> jobs;
    const int workers = std::min(opt.threads, opt.trials);
    for (int w = 0; w < workers; ++w)
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (int t = w; t < opt.trials; t += workers) run(t);
      }));
    for (auto& j : jobs) j.get();
  }
  return out;
}

/// Recomputes a record from its serialized form.
inline CampaignRecord replay(const Json& record, int restarts, double tol, double q) {
  const GapKind kind = parse_gap_kind(record.at("kind").get<std::string>());
  CampaignRecord r = detail::evaluate_trial(kind, record.at("inputs"), record.at("trial_seed").get<std::uint64_t>(),
                                            restarts, tol, q);
  r.trial = record.at("trial").get<int>();
  return r;
}

struct CampaignSummary {
  int trials = 0;
  int violations = 0;
  double min_gap = std::numeric_limits<double>::infinity();
};

inline CampaignSummary summarize(const std::vector<CampaignRecord>& records) {
  CampaignSummary s;
  s.trials = static_cast<int>(records.size());
  for (const auto& r : records) {
    s.violations += r.violated ? 1 : 0;
    s.min_gap = std::min(s.min_gap, r.gap.gap);
  }
  return s;
}

inline Json campaign_to_json(const RunConfig& config, const std::vector<CampaignRecord>& records, bool with_timing) {
  const CampaignSummary s = summarize(records);
  Json j;
  j["config"] = config.to_json();
  j["summary"] = Json{{"trials", s.trials}, {"violations", s.violations}, {"min_gap", s.min_gap}};
  Json arr = Json::array();
  for (const auto& r : records) arr.push_back(r.to_json(with_timing));
  j["records"] = arr;
  return j;
}

}  // namespace eofdual
