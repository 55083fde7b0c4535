#include "doctest.h"
#include "json.hpp"

#include "mtp/mtp.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Config {
  mtp_config* p = nullptr;
  ~Config() { mtp_config_free(p); }
};

struct Solution {
  mtp_solution* p = nullptr;
  ~Solution() { mtp_solution_free(p); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  mtp_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("library metadata") {
  CHECK(std::string(mtp_version()).size() > 0);
  CHECK(std::string(mtp_preset_names()) == "kepler-fig1,kepler-fig2");
}

TEST_CASE("configuration errors map to codes") {
  Config c;
  CHECK(mtp_config_new("kepler-fig7", &c.p) == MTP_E_UNKNOWN_PRESET);
  CHECK(c.p == nullptr);
  CHECK(std::string(mtp_last_error()).find("kepler-fig7") != std::string::npos);
  CHECK(mtp_config_new("kepler-fig1", nullptr) == MTP_E_INVALID_ARGUMENT);
  CHECK(mtp_config_from_json("{not json", &c.p) == MTP_E_PARSE);
  CHECK(mtp_config_from_json(R"({"nco_window": [1]})", &c.p) == MTP_E_PARSE);

  REQUIRE(mtp_config_new("kepler-fig1", &c.p) == MTP_OK);
  CHECK(mtp_config_set_flag(c.p, "colour", 1) == MTP_E_INVALID_ARGUMENT);
  CHECK(mtp_config_set_flag(c.p, "sop", 1) == MTP_OK);
  CHECK(mtp_config_set_scan(c.p, nullptr, 2, 0.1) == MTP_E_INVALID_ARGUMENT);
  CHECK(mtp_config_set_trim(c.p, "mass", 5.0, 0.0, nullptr, 0, 0, 1.0) == MTP_E_INVALID_ARGUMENT);
  CHECK(mtp_config_set_horizon(nullptr, 1.0) == MTP_E_INVALID_ARGUMENT);
  char* out = nullptr;
  CHECK(mtp_analysis(c.p, "dance", &out) == MTP_E_INVALID_ARGUMENT);
  CHECK(out == nullptr);
}

TEST_CASE("solve through the C interface") {
  Config c;
  REQUIRE(mtp_config_new("kepler-fig1", &c.p) == MTP_OK);
  REQUIRE(mtp_config_set_horizon(c.p, 3.0) == MTP_OK);
  char* js = nullptr;
  REQUIRE(mtp_config_spec_json(c.p, &js) == MTP_OK);
  const Json spec = Json::parse(take(js));
  CHECK(spec["horizon"] == 3.0);
  const int intervals = spec["intervals"].get<int>();

  Solution s;
  REQUIRE(mtp_solve(c.p, &s.p) == MTP_OK);
  mtp_summary sum{};
  REQUIRE(mtp_solution_summary(s.p, &sum) == MTP_OK);
  CHECK(sum.converged == 1);
  CHECK(sum.nodes == intervals + 1);
  CHECK(sum.control_dim == 2);
  CHECK(sum.max_defect <= 1e-8);
  CHECK(sum.objective > 0.0);

  double t = -1.0, x[4], lam[4];
  REQUIRE(mtp_solution_node(s.p, 0, &t, x, lam) == MTP_OK);
  CHECK(t == 0.0);
  for (int k = 0; k < 4; ++k) CHECK(x[k] == spec["x0"][k].get<double>());
  REQUIRE(mtp_solution_node(s.p, sum.nodes - 1, &t, x, nullptr) == MTP_OK);
  CHECK(t == doctest::Approx(3.0));
  CHECK(mtp_solution_node(s.p, sum.nodes, &t, x, nullptr) == MTP_E_INVALID_ARGUMENT);

  double u[2];
  CHECK(mtp_solution_control(s.p, 0, u, 2) == MTP_OK);
  CHECK(std::isfinite(u[0]));
  CHECK(mtp_solution_control(s.p, sum.nodes - 1, u, 2) == MTP_E_INVALID_ARGUMENT);
  CHECK(mtp_solution_control(s.p, 0, u, 1) == MTP_E_INVALID_ARGUMENT);

  char* csv = nullptr;
  REQUIRE(mtp_solution_csv(s.p, &csv) == MTP_OK);
  CHECK(take(csv).rfind("t,s,v_s,theta,v_theta,u_1,u_2", 0) == 0);
}

TEST_CASE("analyses through the C interface") {
  const fs::path dir = fs::temp_directory_path() / "mtp_test_capi";
  fs::remove_all(dir);
  Config c;
  REQUIRE(mtp_config_new("kepler-fig1", &c.p) == MTP_OK);
  REQUIRE(mtp_config_set_out(c.p, dir.string().c_str()) == MTP_OK);
  REQUIRE(mtp_config_set_horizon(c.p, 3.0) == MTP_OK);

  SUBCASE("trim") {
    const double u[2] = {0.0, 0.0};
    REQUIRE(mtp_config_set_trim(c.p, "cyclic_velocity", 5.0, 0.0, u, 2, 0, 3.0) == MTP_OK);
    char* out = nullptr;
    REQUIRE(mtp_analysis(c.p, "trim", &out) == MTP_OK);
    const Json j = Json::parse(take(out));
    // unforced circular orbit: v^2 = k / (m2 s^3)
    CHECK(j["v_theta"].get<double>() == doctest::Approx(std::sqrt(1.016895192894334e3 / 125.0)).epsilon(1e-10));
    CHECK(fs::exists(dir / "trim.json"));
  }
  SUBCASE("run stops at the iteration limit") {
    REQUIRE(mtp_config_set_max_iter(c.p, 1) == MTP_OK);
    char* out = nullptr;
    CHECK(mtp_analysis(c.p, "run", &out) == MTP_E_NOT_CONVERGED);
    REQUIRE(out != nullptr);
    CHECK(!Json::parse(take(out)).empty());
  }
  SUBCASE("run writes artifacts") {
    char* out = nullptr;
    REQUIRE(mtp_analysis(c.p, "run", &out) == MTP_OK);
    mtp_string_free(out);
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "trajectory.csv"));
  }
  fs::remove_all(dir);
}
