#include "doctest.h"

#include "mtp/error.hpp"
#include "mtp/experiment.hpp"
#include "mtp/io.hpp"
#include "mtp/presets.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <random>

using namespace mtp;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::internal;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mtp_test_io_" + name);
  fs::remove_all(p);
  return p;
}

Trajectory random_trajectory(int n, bool costates) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> d(-10.0, 10.0);
  Trajectory tr;
  for (int i = 0; i <= n; ++i) {
    tr.times.push_back(0.1 * i);
    tr.states.push_back({d(rng), d(rng), d(rng), d(rng)});
    if (costates) tr.costates.push_back({d(rng), d(rng), d(rng), d(rng)});
    if (i < n) tr.controls.push_back(Control(Eigen::Vector2d(d(rng), d(rng) * 1e-7)));
  }
  return tr;
}

}  // namespace

TEST_CASE("number formatting round trips") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> d(-1e6, 1e6);
  for (int k = 0; k < 200; ++k) {
    const double v = d(rng) * std::pow(10.0, k % 20 - 10);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(std::strtod(format_double(std::numeric_limits<double>::denorm_min()).c_str(), nullptr) > 0.0);
}

TEST_CASE("trajectory CSV") {
  SUBCASE("exact round trip with costates") {
    const Trajectory tr = random_trajectory(7, true);
    const std::string csv = trajectory_to_csv(tr);
    CHECK(csv.rfind("t,s,v_s,theta,v_theta,u_1,u_2,l_s,l_vs,l_th,l_vth\n", 0) == 0);
    const Trajectory back = trajectory_from_csv(csv);
    REQUIRE(back.size() == tr.size());
    REQUIRE(back.controls.size() == tr.controls.size());
    REQUIRE(back.costates.size() == tr.costates.size());
    for (std::size_t i = 0; i < tr.size(); ++i) {
      CHECK(back.times[i] == tr.times[i]);
      CHECK(back.states[i].vec() == tr.states[i].vec());
      CHECK(back.costates[i].vec() == tr.costates[i].vec());
    }
    for (std::size_t i = 0; i < tr.controls.size(); ++i) CHECK(back.controls[i] == tr.controls[i]);
  }
  SUBCASE("last row has empty controls") {
    const std::string csv = trajectory_to_csv(random_trajectory(2, false));
    const std::string last = csv.substr(csv.rfind('\n', csv.size() - 2) + 1);
    CHECK(last.find(",,\n") != std::string::npos);
  }
  SUBCASE("malformed input") {
    CHECK(code_of([] { trajectory_from_csv(""); }) == ErrorCode::parse);
    CHECK(code_of([] { trajectory_from_csv("a,b\n1,2\n"); }) == ErrorCode::parse);
    CHECK(code_of([] { trajectory_from_csv("t,s,v_s,theta,v_theta\n"); }) == ErrorCode::parse);
    CHECK(code_of([] { trajectory_from_csv("t,s,v_s,theta,v_theta\n0,1,x,0,0\n"); }) == ErrorCode::parse);
    CHECK(code_of([] { trajectory_from_csv("t,s,v_s,theta,v_theta\n0,1,0\n"); }) == ErrorCode::parse);
  }
  SUBCASE("file round trip") {
    const fs::path dir = scratch("csv");
    fs::create_directories(dir);
    const std::string path = (dir / "tr.csv").string();
    const Trajectory tr = random_trajectory(3, false);
    write_text(path, trajectory_to_csv(tr));
    CHECK(trajectory_from_csv(read_text(path)).states.back().vec() == tr.states.back().vec());
    CHECK(code_of([&] { read_text((dir / "missing.csv").string()); }) == ErrorCode::io);
    fs::remove_all(dir);
  }
}

TEST_CASE("spec JSON") {
  for (const OcpSpec& spec : {preset_fig1(), preset_fig2()}) {
    const Json j = spec_to_json(spec);
    const OcpSpec back = spec_from_json(j);
    CHECK(spec_to_json(back) == j);
    CHECK(back.horizon == spec.horizon);
    CHECK(back.intervals == spec.intervals);
    CHECK(back.x0.vec() == spec.x0.vec());
    CHECK(back.kepler.k == spec.kepler.k);
    CHECK(back.cost.index() == spec.cost.index());
  }
  SUBCASE("model given by name") {
    Json j = spec_to_json(preset_fig1());
    j["model"] = "kepler";
    CHECK(spec_from_json(j).kepler.k == KeplerParams{}.k);
  }
  SUBCASE("state as object") {
    const State x = state_from_json(Json{{"s", 5.0}, {"v_s", 0.1}, {"theta", 0.2}, {"v_theta", 3.0}});
    CHECK(x.vec() == Vector4(5.0, 0.1, 0.2, 3.0));
    CHECK(state_from_json(state_to_json(x)).vec() == x.vec());
  }
  SUBCASE("errors") {
    Json j = spec_to_json(preset_fig1());
    j["model"] = "pendulum";
    CHECK(code_of([&] { spec_from_json(j); }) == ErrorCode::unknown_preset);
    j = spec_to_json(preset_fig1());
    j["cost"]["type"] = "l1";
    CHECK(code_of([&] { spec_from_json(j); }) == ErrorCode::parse);
    j = spec_to_json(preset_fig1());
    j["horizon"] = "long";
    CHECK(code_of([&] { spec_from_json(j); }) == ErrorCode::parse);
    CHECK(code_of([] { spec_from_json(Json::array()); }) == ErrorCode::parse);
    CHECK(code_of([] { state_from_json(Json::array({1.0, 2.0})); }) == ErrorCode::parse);
    OcpSpec custom = preset_fig1();
    custom.cost = CustomCost{};
    CHECK(code_of([&] { spec_to_json(custom); }) == ErrorCode::invalid_argument);
  }
}

TEST_CASE("experiment configuration") {
  const Json j = Json::parse(R"({
    "preset": "kepler-fig2", "out": "somewhere", "horizon": 12.5, "tol": 1e-9, "max_iter": 40,
    "nco_window": [1, 2],
    "analysis": {"nco_check": true, "tocp": true, "turnpike_scan": {"horizons": [1, 2], "epsilon": 0.3},
                 "dissipativity": true},
    "trim": {"unknown": "control", "s": 5, "v_theta": 2.8, "u": [0, 0], "control_index": 1}
  })");
  const ExperimentConfig c = config_from_json(j);
  CHECK(c.preset == "kepler-fig2");
  CHECK(c.out_dir == "somewhere");
  CHECK(*c.horizon == 12.5);
  CHECK(*c.tol == 1e-9);
  CHECK(*c.max_iter == 40);
  CHECK(c.nco_window.from == 1.0);
  CHECK(c.nco_window.to == 2.0);
  CHECK(c.nco_check);
  CHECK(c.tocp);
  CHECK(!c.sop);
  REQUIRE(c.turnpike_scan);
  CHECK(c.turnpike_scan->horizons == std::vector<double>{1.0, 2.0});
  CHECK(c.turnpike_scan->epsilon == 0.3);
  REQUIRE(c.dissipativity);
  CHECK(c.dissipativity->horizons.empty());
  REQUIRE(c.trim);
  CHECK(c.trim->unknown == TrimUnknown::control);
  CHECK(c.trim->control_index == 1);
  CHECK(resolve_spec(c).horizon == 12.5);
  CHECK(resolve_options(c).sqp.max_iter == 40);

  CHECK(code_of([] { config_from_json(Json::parse(R"({"nco_window": [1]})")); }) == ErrorCode::parse);
  CHECK(code_of([] { config_from_json(Json::parse(R"({"trim": {"unknown": "mass"}})")); }) == ErrorCode::parse);
  CHECK(code_of([] { config_from_json(Json::parse(R"({"tol": "small"})")); }) == ErrorCode::parse);
  CHECK(code_of([] { config_from_json(Json::parse("[]")); }) == ErrorCode::parse);

  ExperimentConfig bad;
  bad.preset = "kepler-fig9";
  CHECK(code_of([&] { resolve_spec(bad); }) == ErrorCode::unknown_preset);
  bad.preset = "kepler-fig1";
  bad.tol = -1.0;
  CHECK(code_of([&] { resolve_options(bad); }) == ErrorCode::invalid_argument);
}

TEST_CASE("experiment runs write their artifacts") {
  ExperimentConfig c;
  c.out_dir = scratch("run").string();
  c.horizon = 3.0;
  const RunOutcome r = run(c);
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(fs::path(c.out_dir) / "summary.json"));
  REQUIRE(fs::exists(fs::path(c.out_dir) / "trajectory.csv"));
  const Trajectory tr = trajectory_from_csv(read_text((fs::path(c.out_dir) / "trajectory.csv").string()));
  CHECK(tr.times.back() == doctest::Approx(3.0));
  CHECK(tr.states.front().vec() == preset_fig1().x0.vec());
  CHECK(tr.costates.size() == tr.size());

  ExperimentConfig t = c;
  TrimRequest req;
  req.unknown = TrimUnknown::cyclic_velocity;
  req.s = 5.0;
  req.u = Control::Zero(2);
  t.trim = req;
  const Json tj = run_trim(t);
  CHECK(fs::exists(fs::path(c.out_dir) / "trim.json"));
  CHECK(tj.dump().find("v_theta") != std::string::npos);
  fs::remove_all(c.out_dir);
}
