#include <catch2/catch_amalgamated.hpp>
#include <sstream>

#include "irsdp/experiment.hpp"

using namespace irsdp;

namespace {

constexpr const char* kTinyTdma = R"(
[geometry]
ap = 0 0 5
user = 30 0 1.5
user = 35 0 1.5
region_x = 30 40
region_y = 5 5
region_h = 5 5
m = 4
m_h = 2
wavelength = 0.1
spacing_ratio = 0.5

[channel]
rho0_db = -30
alpha_ai = 2.2
alpha_iu = 2.2
rician_ai_db = 3
rician_iu_db = 3
los_only = true

[run]
scheme = tdma
solver = exhaustive
weights = 0.5 0.5
p_max_dbm = 30
sigma2_dbm = -90
realizations = 1
seed = 7

[mo]
grid_step = 5
)";

ExperimentConfig tiny_tdma() {
  std::istringstream in(kTinyTdma);
  return parse_config(in);
}

std::string to_csv(const std::vector<ResultRecord>& records) {
  std::ostringstream os;
  emit_csv(records, os);
  return os.str();
}

}  // namespace

TEST_CASE("config parsing") {
  SECTION("valid config round-trips the fields") {
    auto cfg = tiny_tdma();
    REQUIRE(cfg.geometry.num_users() == 2);
    REQUIRE(cfg.geometry.num_elements() == 4);
    REQUIRE(cfg.geometry.panel_v == 2);
    REQUIRE(cfg.scheme == Scheme::tdma);
    REQUIRE(cfg.solver == SolverKind::exhaustive);
    REQUIRE(cfg.rician.los_only);
    REQUIRE(cfg.model.rho0 == Catch::Approx(1e-3));
    REQUIRE(cfg.p_max_watts() == Catch::Approx(1.0));
    REQUIRE(cfg.sigma2_watts() == Catch::Approx(1e-12));
    REQUIRE(cfg.mo.grid_step == 5.0);
  }
  SECTION("unknown keys carry their field path") {
    std::istringstream in("[run]\nschem = noma\n");
    try {
      parse_config(in);
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      REQUIRE(std::string(e.what()).find("run.schem") != std::string::npos);
    }
  }
  SECTION("unknown sections are rejected") {
    std::istringstream in("[nope]\nx = 1\n");
    REQUIRE_THROWS_AS(parse_config(in), ConfigError);
  }
  SECTION("weights must match the user count") {
    std::string text(kTinyTdma);
    const auto pos = text.find("weights = 0.5 0.5");
    text.replace(pos, 17, "weights = 1.0");
    std::istringstream in(text);
    REQUIRE_THROWS_AS(parse_config(in), ConfigError);
  }
  SECTION("element count must divide by the panel width") {
    std::string text(kTinyTdma);
    const auto pos = text.find("m = 4");
    text.replace(pos, 5, "m = 5");
    std::istringstream in(text);
    REQUIRE_THROWS_AS(parse_config(in), ConfigError);
  }
  SECTION("malformed numbers are rejected") {
    std::istringstream in("[run]\np_max_dbm = alot\n");
    REQUIRE_THROWS_AS(parse_config(in), ConfigError);
  }
}

TEST_CASE("emission") {
  SECTION("zero records give a header-only csv") {
    REQUIRE(to_csv({}) ==
            "scheme,solver,M,p_max_dbm,realization,wsr_bps_hz,s_x,s_y,s_z,iters,wall_ms\n");
  }
  SECTION("one record gives a two-line csv") {
    ResultRecord r;
    r.scheme = "tdma";
    r.solver = "ao";
    r.m = 4;
    r.p_max_dbm = 30;
    r.realization = 0;
    r.wsr = 1.23456789012;
    r.s = Vec3(31.5, 5, 5);
    r.iters = 3;
    r.rates = (VecX(2) << 0.5, 0.73456789012).finished();
    const std::string csv = to_csv({r});
    REQUIRE(csv ==
            "scheme,solver,M,p_max_dbm,realization,wsr_bps_hz,s_x,s_y,s_z,iters,wall_ms,rate_1,rate_2\n"
            "tdma,ao,4,30,0,1.23456789,31.5,5,5,3,0,0.5,0.73456789\n");
  }
  SECTION("json round-trip reproduces records exactly") {
    ResultRecord r;
    r.scheme = "noma";
    r.solver = "mo-bound";
    r.m = 8;
    r.p_max_dbm = 20;
    r.realization = 3;
    r.wsr = 2.5;
    r.s = Vec3(40, 5, 5);
    r.iters = 17;
    r.wall_ms = 0.0;
    r.rates = (VecX(3) << 0.1, 0.9, 1.5).finished();
    std::ostringstream os;
    emit_json({r}, os);
    const auto arr = nlohmann::json::parse(os.str());
    REQUIRE(arr.size() == 1);
    const ResultRecord got = record_from_json(arr.at(0));
    REQUIRE(got.scheme == r.scheme);
    REQUIRE(got.solver == r.solver);
    REQUIRE(got.m == r.m);
    REQUIRE(got.p_max_dbm == r.p_max_dbm);
    REQUIRE(got.realization == r.realization);
    REQUIRE(got.wsr == r.wsr);
    REQUIRE(got.s == r.s);
    REQUIRE(got.iters == r.iters);
    REQUIRE((got.rates - r.rates).norm() == 0.0);
  }
}

TEST_CASE("experiment harness") {
  SECTION("tdma exhaustive run composes the library calls") {
    auto cfg = tiny_tdma();
    auto summary = run_experiment(cfg);
    REQUIRE(summary.records.size() == 1);

    DriverOptions opts;
    opts.grid_step = cfg.mo.grid_step;
    auto driver = exhaustive_driver(cfg.geometry, cfg.model, Scheme::tdma, cfg.weights,
                                    cfg.p_max_watts(), cfg.sigma2_watts(), opts);
    REQUIRE(summary.deployment == driver.best.s);
    // LoS-only: the online solve at the fixed point reproduces the offline value
    REQUIRE(summary.records[0].wsr == Catch::Approx(driver.best.wsr).epsilon(1e-12));
  }
  SECTION("same config and seed give a byte-identical csv") {
    auto cfg = tiny_tdma();
    auto a = run_experiment(cfg);
    auto b = run_experiment(cfg);
    REQUIRE(to_csv(a.records) == to_csv(b.records));
  }
  SECTION("earlier realizations are unchanged when the count grows") {
    auto cfg = tiny_tdma();
    cfg.rician.los_only = false;
    cfg.realizations = 2;
    auto two = run_experiment(cfg);
    cfg.realizations = 3;
    auto three = run_experiment(cfg);
    REQUIRE(to_csv({two.records[0], two.records[1]}) ==
            to_csv({three.records[0], three.records[1]}));
  }
  SECTION("sweep with a single value equals the plain run") {
    auto cfg = tiny_tdma();
    cfg.sweep.param = "M";
    cfg.sweep.values = {4.0};
    auto swept = sweep_experiment(cfg);
    auto plain = run_experiment(cfg);
    REQUIRE(to_csv(swept) == to_csv(plain.records));
  }
  SECTION("empty sweep list is an error") {
    auto cfg = tiny_tdma();
    cfg.sweep.param = "M";
    cfg.sweep.values = {};
    REQUIRE_THROWS_AS(sweep_experiment(cfg), ConfigError);
  }
}
