#include "support.hpp"

#include <gtest/gtest.h>

using namespace eofdual;

namespace {

const BipartiteDims k22(2, 2);

std::string schema_field(const std::function<void()>& f) {
  try {
    f();
  } catch (const SchemaError& e) {
    return e.field();
  }
  return "<no error>";
}

GapSearchOptions small_campaign(GapKind kind, int trials) {
  GapSearchOptions o;
  o.kind = kind;
  o.trials = trials;
  o.seed = 17;
  o.restarts = 4;
  return o;
}

}  // namespace

TEST(Json, OperatorRoundTrip) {
  const DensityMatrix rho = sample_ginibre_density(BipartiteDims(2, 3), 5);
  const Json j = operator_to_json(rho);
  const DensityMatrix back = density_from_json(Json::parse(j.dump()));
  EXPECT_EQ(back.dims(), rho.dims());
  EXPECT_EQ(back.matrix(), rho.matrix());  // %.17g round trip is exact
  const HermitianOperator x = sample_hermitian(BipartiteDims(2, 2, 2), 1);
  EXPECT_EQ(hermitian_from_json(operator_to_json(x)).matrix(), x.matrix());
}

TEST(Json, AcceptsRealEntriesAndDefaultCopies) {
  const Json j = Json::parse(R"({"dims":{"dA":2,"dB":1},"matrix":[[0.5,0],[0,[0.5,0]]]})");
  const DensityMatrix rho = density_from_json(j);
  EXPECT_EQ(rho.dims(), BipartiteDims(2, 1));
  EXPECT_NEAR(rho.matrix()(1, 1).real(), 0.5, 0);
}

TEST(Json, SchemaErrorsNameTheField) {
  EXPECT_EQ(schema_field([] { hermitian_from_json(Json::parse(R"({"matrix":[[1]]})")); }), "dims");
  EXPECT_EQ(schema_field([] { hermitian_from_json(Json::parse(R"({"dims":{"dB":1},"matrix":[[1]]})")); }), "dims.dA");
  EXPECT_EQ(schema_field([] { hermitian_from_json(Json::parse(R"({"dims":{"dA":1,"dB":1}})")); }), "matrix");
  EXPECT_EQ(schema_field([] { hermitian_from_json(Json::parse(R"({"dims":{"dA":2,"dB":1},"matrix":[[1,0]]})")); }),
            "matrix");
  EXPECT_EQ(schema_field([] { hermitian_from_json(Json::parse(R"({"dims":{"dA":2,"dB":1},"matrix":[[1,0],[0]]})")); }),
            "matrix[1]");
  EXPECT_EQ(
      schema_field([] { hermitian_from_json(Json::parse(R"({"dims":{"dA":2,"dB":1},"matrix":[[1,"x"],[0,1]]})")); }),
      "matrix[0][1]");
  // non-Hermitian
  EXPECT_EQ(schema_field([] { hermitian_from_json(Json::parse(R"({"dims":{"dA":2,"dB":1},"matrix":[[1,1],[0,1]]})")); }),
            "matrix");
  // size does not match dims
  EXPECT_EQ(schema_field([] { hermitian_from_json(Json::parse(R"({"dims":{"dA":2,"dB":2},"matrix":[[1,0],[0,1]]})")); }),
            "matrix");
  // Hermitian but not a state
  EXPECT_EQ(schema_field([] { density_from_json(Json::parse(R"({"dims":{"dA":2,"dB":1},"matrix":[[1,0],[0,1]]})")); }),
            "matrix");
  EXPECT_EQ(schema_field([] { dims_from_json(Json::parse(R"({"dA":2,"dB":2,"copies":3})")); }), "dims");
}

TEST(Json, ChannelRoundTripAndErrors) {
  const KrausChannel wh = werner_holevo_channel(3);
  const KrausChannel back = channel_from_json(Json::parse(channel_to_json(wh).dump()));
  ASSERT_EQ(back.elements().size(), wh.elements().size());
  for (std::size_t i = 0; i < wh.elements().size(); ++i) EXPECT_EQ(back.elements()[i], wh.elements()[i]);
  EXPECT_TRUE(back.trace_preserving());
  // bare row arrays are accepted
  const KrausChannel id = channel_from_json(Json::parse(R"({"kraus":[[[1,0],[0,1]]],"in_dim":2,"out_dim":2})"));
  EXPECT_TRUE(id.trace_preserving());
  EXPECT_EQ(schema_field([] { channel_from_json(Json::parse(R"({"kraus":[[[1,0]]],"in_dim":2,"out_dim":2})")); }),
            "kraus[0]");
  EXPECT_EQ(schema_field([] { channel_from_json(Json::parse(R"({"kraus":[[[2,0],[0,2]]],"in_dim":2,"out_dim":2})")); }),
            "kraus");
  EXPECT_EQ(schema_field([] { channel_from_json(Json::parse(R"({"kraus":[],"in_dim":2,"out_dim":2})")); }), "kraus");
  EXPECT_EQ(schema_field([] { channel_from_json(Json::parse(R"({"kraus":[[[1]]],"out_dim":1})")); }), "in_dim");
}

TEST(Json, ExtendedRealSentinel) {
  EXPECT_EQ(extended_to_json(ExtendedReal::minus_infinity()), Json("-inf"));
  EXPECT_EQ(extended_to_json(ExtendedReal(1.5)), Json(1.5));
}

TEST(Files, MissingFileIsAnIoError) {
  EXPECT_THROW(read_json_file("/nonexistent/eofdual/input.json"), IoError);
}

TEST(Csv, SweepRoundTrip) {
  const PuritySweep s = trotter_sweep(sample_filter_m(k22, 3), {1.0, 0.1, 0.01}, [] {
    HpOptions o;
    o.restarts = 2;
    return o;
  }());
  const std::string csv = sweep_to_csv(s);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kSweepCsvHeader);
  const auto rows = sweep_rows_from_csv(csv);
  ASSERT_EQ(rows.size(), s.rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_NEAR(rows[i].p, s.rows[i].p, 1e-11 * std::abs(s.rows[i].p));
    EXPECT_NEAR(rows[i].h_p, s.rows[i].h_p, 1e-11 * std::abs(s.rows[i].h_p));
    EXPECT_NEAR(rows[i].h_p_pow_inv, s.rows[i].h_p_pow_inv, 1e-11 * std::abs(s.rows[i].h_p_pow_inv));
    EXPECT_NEAR(rows[i].exp_g, s.rows[i].exp_g, 1e-11 * std::abs(s.rows[i].exp_g));
    EXPECT_NEAR(rows[i].gap, s.rows[i].gap, 1e-11 * std::max(std::abs(s.rows[i].gap), 1e-300) + 1e-300);
  }
  EXPECT_EQ(sweep_to_csv(s), csv);
}

TEST(Csv, MalformedInput) {
  EXPECT_THROW(sweep_rows_from_csv("p,h\n"), SchemaError);
  EXPECT_EQ(schema_field([] { sweep_rows_from_csv(std::string(kSweepCsvHeader) + "\n1,2,3\n"); }), "line 2");
  EXPECT_EQ(schema_field([] { sweep_rows_from_csv(std::string(kSweepCsvHeader) + "\n1,2,x,4,5\n"); }), "line 2");
}

TEST(GapKind, Parsing) {
  EXPECT_EQ(parse_gap_kind("g_subadd"), GapKind::g_subadd);
  EXPECT_EQ(parse_gap_kind("strong_superadd"), GapKind::strong_superadd);
  EXPECT_EQ(parse_gap_kind("nu_mult"), GapKind::nu_mult);
  EXPECT_THROW(parse_gap_kind("nope"), ParameterError);
}

TEST(Campaign, GSubadditivityFindsNoViolations) {
  const auto records = gap_search(small_campaign(GapKind::g_subadd, 4));
  ASSERT_EQ(records.size(), 4u);
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(records[i].trial, static_cast<int>(i));
    EXPECT_FALSE(records[i].violated) << records[i].gap.gap;
    EXPECT_GE(records[i].gap.lhs, records[i].gap.rhs - 1e-4);
  }
  EXPECT_EQ(summarize(records).violations, 0);
}

TEST(Campaign, DeterministicAndThreadIndependent) {
  GapSearchOptions o = small_campaign(GapKind::g_subadd, 3);
  RunConfig cfg;
  cfg.command = "gap-search";
  const std::string a = campaign_to_json(cfg, gap_search(o), false).dump(2);
  const std::string b = campaign_to_json(cfg, gap_search(o), false).dump(2);
  o.threads = 2;
  const std::string c = campaign_to_json(cfg, gap_search(o), false).dump(2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  EXPECT_EQ(a.find("wall_seconds"), std::string::npos);
  EXPECT_NE(campaign_to_json(cfg, gap_search(o), true).dump().find("wall_seconds"), std::string::npos);
}

TEST(Campaign, ReplayReproducesRecords) {
  GapSearchOptions o = small_campaign(GapKind::nu_mult, 2);
  const auto records = gap_search(o);
  for (const auto& r : records) {
    const Json j = Json::parse(r.to_json(false).dump());
    const CampaignRecord again = replay(j, o.restarts, o.tol, o.q);
    EXPECT_NEAR(again.gap.gap, r.gap.gap, 1e-9);
    EXPECT_EQ(again.violated, r.violated);
    EXPECT_EQ(again.trial, r.trial);
  }
}

TEST(Campaign, FixedWernerHolevoChannelIsFlagged) {
  GapSearchOptions o = small_campaign(GapKind::nu_mult, 1);
  o.channel = werner_holevo_channel(3);
  o.restarts = 8;
  const auto records = gap_search(o);
  EXPECT_TRUE(records[0].violated);
  EXPECT_GT(records[0].gap.reverse_gap(), 1e-3);
  const Json j = records[0].to_json(false);
  EXPECT_EQ(j.at("direction"), "multiplicativity_of_nu_q");
  EXPECT_TRUE(j.contains("reverse_direction"));
}

TEST(Campaign, StrongSuperadditivitySmallRun) {
  GapSearchOptions o = small_campaign(GapKind::strong_superadd, 2);
  const auto records = gap_search(o);
  for (const auto& r : records) {
    EXPECT_EQ(r.gap.mode, "whole state roof, reductions closed form");
    EXPECT_FALSE(r.violated) << r.gap.gap;
  }
  o.dims = BipartiteDims(3, 4);
  EXPECT_THROW(gap_search(o), ShapeError);
}

TEST(Campaign, Errors) {
  GapSearchOptions o = small_campaign(GapKind::g_subadd, 0);
  EXPECT_THROW(gap_search(o), ParameterError);
}

TEST(RunConfig, SerializesOptionalFields) {
  RunConfig c;
  c.command = "nu-q";
  c.q = 5.0;
  const Json j = c.to_json();
  EXPECT_EQ(j.at("command"), "nu-q");
  EXPECT_EQ(j.at("q"), 5.0);
  EXPECT_FALSE(j.contains("p"));
  EXPECT_EQ(j.at("dims").at("dA"), 2);
}
