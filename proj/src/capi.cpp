#include "mtp/mtp.h"

#include "mtp/error.hpp"
#include "mtp/experiment.hpp"
#include "mtp/presets.hpp"

#include <cstdlib>
#include <cstring>
#include <string>

struct mtp_config {
  mtp::ExperimentConfig cfg;
};

struct mtp_solution {
  mtp::OcpSolution sol;
  int control_dim = 0;
};

namespace {

thread_local std::string g_last_error;

int fail(int code, const std::string& what) {
  g_last_error = what;
  return code;
}

template <class F>
int guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const mtp::Error& e) {
    return fail(static_cast<int>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(MTP_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MTP_E_INTERNAL, e.what());
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

bool known_preset(const std::string& name) {
  if (name == "custom") return true;
  for (const auto& p : mtp::preset_names()) {
    if (p == name) return true;
  }
  return false;
}

}  // namespace

extern "C" {

const char* mtp_version(void) { return "1.0.0"; }

const char* mtp_last_error(void) { return g_last_error.c_str(); }

void mtp_string_free(char* s) { std::free(s); }

const char* mtp_preset_names(void) { return "kepler-fig1,kepler-fig2"; }

int mtp_config_new(const char* preset, mtp_config** out) {
  return guarded([&]() -> int {
    if (!out) return fail(MTP_E_INVALID_ARGUMENT, "out is null");
    *out = nullptr;
    const std::string name = preset ? preset : "kepler-fig1";
    if (!known_preset(name)) return fail(MTP_E_UNKNOWN_PRESET, "unknown preset: " + name);
    auto* c = new mtp_config;
    c->cfg.preset = name;
    *out = c;
    return MTP_OK;
  });
}

int mtp_config_from_json(const char* json, mtp_config** out) {
  return guarded([&]() -> int {
    if (!json || !out) return fail(MTP_E_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    mtp::Json j;
    try {
      j = mtp::Json::parse(json);
    } catch (const nlohmann::json::exception& e) {
      return fail(MTP_E_PARSE, std::string("config: ") + e.what());
    }
    mtp::ExperimentConfig cfg = mtp::config_from_json(j);
    if (!known_preset(cfg.preset)) return fail(MTP_E_UNKNOWN_PRESET, "unknown preset: " + cfg.preset);
    *out = new mtp_config{std::move(cfg)};
    return MTP_OK;
  });
}

void mtp_config_free(mtp_config* cfg) { delete cfg; }

int mtp_config_set_out(mtp_config* cfg, const char* dir) {
  if (!cfg || !dir) return fail(MTP_E_INVALID_ARGUMENT, "null argument");
  cfg->cfg.out_dir = dir;
  return MTP_OK;
}

int mtp_config_set_horizon(mtp_config* cfg, double horizon) {
  if (!cfg) return fail(MTP_E_INVALID_ARGUMENT, "null argument");
  if (!(horizon > 0.0)) return fail(MTP_E_INVALID_ARGUMENT, "horizon must be positive");
  cfg->cfg.horizon = horizon;
  return MTP_OK;
}

int mtp_config_set_tol(mtp_config* cfg, double tol) {
  if (!cfg) return fail(MTP_E_INVALID_ARGUMENT, "null argument");
  if (!(tol > 0.0)) return fail(MTP_E_INVALID_ARGUMENT, "tol must be positive");
  cfg->cfg.tol = tol;
  return MTP_OK;
}

int mtp_config_set_max_iter(mtp_config* cfg, int max_iter) {
  if (!cfg) return fail(MTP_E_INVALID_ARGUMENT, "null argument");
  if (max_iter < 1) return fail(MTP_E_INVALID_ARGUMENT, "max_iter must be >= 1");
  cfg->cfg.max_iter = max_iter;
  return MTP_OK;
}

int mtp_config_set_flag(mtp_config* cfg, const char* name, int on) {
  if (!cfg || !name) return fail(MTP_E_INVALID_ARGUMENT, "null argument");
  auto& c = cfg->cfg;
  const std::string n = name;
  if (n == "nco_check") {
    c.nco_check = on != 0;
  } else if (n == "tocp") {
    c.tocp = on != 0;
  } else if (n == "sop") {
    c.sop = on != 0;
  } else if (n == "turnpike_scan") {
    if (on && !c.turnpike_scan) c.turnpike_scan = mtp::ScanConfig{};
    if (!on) c.turnpike_scan.reset();
  } else if (n == "dissipativity") {
    if (on && !c.dissipativity) c.dissipativity = mtp::DissipativityConfig{};
    if (!on) c.dissipativity.reset();
  } else {
    return fail(MTP_E_INVALID_ARGUMENT, "unknown flag: " + n);
  }
  return MTP_OK;
}

int mtp_config_set_scan(mtp_config* cfg, const double* horizons, int n, double epsilon) {
  if (!cfg || (n > 0 && !horizons) || n < 0) return fail(MTP_E_INVALID_ARGUMENT, "bad argument");
  if (!(epsilon > 0.0)) return fail(MTP_E_INVALID_ARGUMENT, "epsilon must be positive");
  mtp::ScanConfig sc;
  sc.horizons.assign(horizons, horizons + n);
  sc.epsilon = epsilon;
  cfg->cfg.turnpike_scan = sc;
  return MTP_OK;
}

int mtp_config_set_dissipativity(mtp_config* cfg, const double* horizons, int n, double w) {
  if (!cfg || (n > 0 && !horizons) || n < 0) return fail(MTP_E_INVALID_ARGUMENT, "bad argument");
  mtp::DissipativityConfig dc;
  dc.horizons.assign(horizons, horizons + n);
  dc.w = w;
  cfg->cfg.dissipativity = dc;
  return MTP_OK;
}

int mtp_config_set_nco_window(mtp_config* cfg, double from, double to) {
  if (!cfg) return fail(MTP_E_INVALID_ARGUMENT, "null argument");
  if (!(from <= to)) return fail(MTP_E_INVALID_ARGUMENT, "nco window needs from <= to");
  cfg->cfg.nco_window = {from, to};
  return MTP_OK;
}

int mtp_config_set_trim(mtp_config* cfg, const char* unknown, double s, double v_theta, const double* u, int m,
                        int control_index, double guess) {
  return guarded([&]() -> int {
    if (!cfg || !unknown || m < 0 || (m > 0 && !u)) return fail(MTP_E_INVALID_ARGUMENT, "bad argument");
    const std::string name = unknown;
    if (name != "shape" && name != "cyclic_velocity" && name != "control") {
      return fail(MTP_E_INVALID_ARGUMENT, "unknown must be shape, cyclic_velocity or control");
    }
    mtp::Json t = {{"unknown", unknown}, {"s", s}, {"v_theta", v_theta}, {"control_index", control_index},
                   {"guess", guess}};
    if (m > 0) t["u"] = std::vector<double>(u, u + m);
    cfg->cfg.trim = mtp::config_from_json({{"trim", t}}).trim;
    return MTP_OK;
  });
}

int mtp_config_spec_json(const mtp_config* cfg, char** out_json) {
  return guarded([&]() -> int {
    if (!cfg || !out_json) return fail(MTP_E_INVALID_ARGUMENT, "null argument");
    *out_json = dup(mtp::spec_to_json(mtp::resolve_spec(cfg->cfg)).dump(2));
    return MTP_OK;
  });
}

int mtp_solve(const mtp_config* cfg, mtp_solution** out) {
  return guarded([&]() -> int {
    if (!cfg || !out) return fail(MTP_E_INVALID_ARGUMENT, "null argument");
    *out = nullptr;
    const mtp::OcpSpec spec = mtp::resolve_spec(cfg->cfg);
    auto* s = new mtp_solution;
    try {
      s->sol = mtp::solve_ocp(spec, mtp::resolve_options(cfg->cfg));
    } catch (...) {
      delete s;
      throw;
    }
    s->control_dim = spec.model.control_dim;
    *out = s;
    return MTP_OK;
  });
}

void mtp_solution_free(mtp_solution* sol) { delete sol; }

int mtp_solution_summary(const mtp_solution* sol, mtp_summary* out) {
  if (!sol || !out) return fail(MTP_E_INVALID_ARGUMENT, "null argument");
  const auto& s = sol->sol;
  out->converged = s.status == mtp::NlpStatus::converged;
  out->iterations = s.iterations;
  out->nodes = static_cast<int>(s.trajectory.size());
  out->control_dim = sol->control_dim;
  out->objective = s.objective;
  out->stationarity = s.kkt.stationarity;
  out->feasibility = s.kkt.feasibility;
  out->complementarity = s.kkt.complementarity;
  out->max_defect = s.max_defect;
  out->seconds = s.seconds;
  return MTP_OK;
}

int mtp_solution_node(const mtp_solution* sol, int i, double* t, double* x, double* lam) {
  if (!sol || !x) return fail(MTP_E_INVALID_ARGUMENT, "null argument");
  const auto& tr = sol->sol.trajectory;
  if (i < 0 || i >= static_cast<int>(tr.size())) return fail(MTP_E_INVALID_ARGUMENT, "node index out of range");
  if (t) *t = tr.times[i];
  const auto v = tr.states[i].vec();
  for (int k = 0; k < 4; ++k) x[k] = v[k];
  if (lam) {
    if (tr.costates.empty()) return fail(MTP_E_INVALID_ARGUMENT, "solution carries no costates");
    const auto l = tr.costates[i].vec();
    for (int k = 0; k < 4; ++k) lam[k] = l[k];
  }
  return MTP_OK;
}

int mtp_solution_control(const mtp_solution* sol, int i, double* u, int m) {
  if (!sol || !u) return fail(MTP_E_INVALID_ARGUMENT, "null argument");
  const auto& tr = sol->sol.trajectory;
  if (i < 0 || i >= static_cast<int>(tr.controls.size())) return fail(MTP_E_INVALID_ARGUMENT, "interval index out of range");
  if (m != sol->control_dim) return fail(MTP_E_INVALID_ARGUMENT, "m must equal the control dimension");
  for (int k = 0; k < m; ++k) u[k] = tr.controls[i][k];
  return MTP_OK;
}

int mtp_solution_csv(const mtp_solution* sol, char** out_csv) {
  return guarded([&]() -> int {
    if (!sol || !out_csv) return fail(MTP_E_INVALID_ARGUMENT, "null argument");
    *out_csv = dup(mtp::trajectory_to_csv(sol->sol.trajectory));
    return MTP_OK;
  });
}

int mtp_analysis(const mtp_config* cfg, const char* name, char** out_json) {
  return guarded([&]() -> int {
    if (!cfg || !name || !out_json) return fail(MTP_E_INVALID_ARGUMENT, "null argument");
    *out_json = nullptr;
    const std::string n = name;
    const auto& c = cfg->cfg;
    mtp::Json j;
    int code = MTP_OK;
    if (n == "solve") {
      j = mtp::run_solve(c);
    } else if (n == "trim") {
      j = mtp::run_trim(c);
    } else if (n == "sop") {
      j = mtp::run_sop(c);
    } else if (n == "nco-check") {
      j = mtp::run_nco_check(c);
    } else if (n == "turnpike-scan") {
      j = mtp::run_turnpike_scan(c);
    } else if (n == "dissipativity") {
      j = mtp::run_dissipativity(c);
    } else if (n == "run") {
      const mtp::RunOutcome r = mtp::run(c);
      j = r.summary;
      code = r.exit_code;
      if (code != MTP_OK) g_last_error = "solver did not converge";
    } else {
      return fail(MTP_E_INVALID_ARGUMENT, "unknown analysis: " + n);
    }
    *out_json = dup(j.dump(2));
    return code;
  });
}

}  // extern "C"
