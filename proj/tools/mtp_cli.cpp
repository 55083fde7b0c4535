#include "mtp/mtp.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace {

const char* code_name(int code) {
  switch (code) {
    case MTP_OK: return "ok";
    case MTP_E_INVALID_ARGUMENT: return "invalid_argument";
    case MTP_E_UNKNOWN_PRESET: return "unknown_preset";
    case MTP_E_DOMAIN: return "domain";
    case MTP_E_NOT_CONVERGED: return "not_converged";
    case MTP_E_IO: return "io";
    case MTP_E_PARSE: return "parse";
    default: return "internal";
  }
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

int report(int code, const std::string& message) {
  std::cerr << "{\"error\": {\"code\": " << code << ", \"kind\": \"" << code_name(code) << "\", \"message\": \""
            << escape(message) << "\"}}\n";
  return code;
}

int report(int code) { return report(code, mtp_last_error()); }

struct Common {
  std::string config;
  std::string preset;
  std::string out;
  double tol = 0.0;
  int max_iter = 0;
};

struct RunFlags {
  bool nco_check = false;
  bool tocp = false;
  bool sop = false;
  bool scan = false;
  bool dissipativity = false;
};

int make_config(const Common& c, mtp_config** cfg) {
  int rc;
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) return report(MTP_E_IO, "cannot open config '" + c.config + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    rc = mtp_config_from_json(ss.str().c_str(), cfg);
    if (rc != MTP_OK) return report(rc);
    if (!c.preset.empty()) {
      mtp_config* fresh = nullptr;
      rc = mtp_config_new(c.preset.c_str(), &fresh);
      mtp_config_free(fresh);
      if (rc != MTP_OK) {
        mtp_config_free(*cfg);
        return report(rc);
      }
      const std::string in_config = nlohmann::json::parse(ss.str()).value("preset", std::string("kepler-fig1"));
      if (in_config != c.preset) {
        std::cerr << "note: preset '" << c.preset << "' ignored, the config selects '" << in_config << "'\n";
      }
    }
  } else {
    rc = mtp_config_new(c.preset.empty() ? "kepler-fig1" : c.preset.c_str(), cfg);
    if (rc != MTP_OK) return report(rc);
  }
  rc = c.out.empty() ? MTP_OK : mtp_config_set_out(*cfg, c.out.c_str());
  if (rc == MTP_OK && c.tol > 0.0) rc = mtp_config_set_tol(*cfg, c.tol);
  if (rc == MTP_OK && c.max_iter > 0) rc = mtp_config_set_max_iter(*cfg, c.max_iter);
  if (rc != MTP_OK) {
    mtp_config_free(*cfg);
    *cfg = nullptr;
    return report(rc);
  }
  return MTP_OK;
}

int analysis(const Common& c, const char* name, const RunFlags* flags) {
  mtp_config* cfg = nullptr;
  int rc = make_config(c, &cfg);
  if (rc != MTP_OK) return rc;
  if (flags) {
    if (flags->nco_check) mtp_config_set_flag(cfg, "nco_check", 1);
    if (flags->tocp) mtp_config_set_flag(cfg, "tocp", 1);
    if (flags->sop) mtp_config_set_flag(cfg, "sop", 1);
    if (flags->scan) mtp_config_set_flag(cfg, "turnpike_scan", 1);
    if (flags->dissipativity) mtp_config_set_flag(cfg, "dissipativity", 1);
  }
  char* json = nullptr;
  rc = mtp_analysis(cfg, name, &json);
  if (json) {
    std::cout << json << "\n";
    mtp_string_free(json);
  }
  mtp_config_free(cfg);
  return rc == MTP_OK ? MTP_OK : report(rc);
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Experiment configuration JSON file");
  app->add_option("--preset", c.preset, std::string("Preset name (") + mtp_preset_names() + ",custom)");
  app->add_option("--out", c.out, "Output directory (default: the config's \"out\", else out)");
  app->add_option("--tol", c.tol, "KKT tolerance of the solver")->check(CLI::PositiveNumber);
  app->add_option("--max-iter", c.max_iter, "Iteration limit of the solver")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Manifold turnpike toolkit for Lagrangian systems with a cyclic variable"};
  app.set_version_flag("--version", mtp_version());
  app.require_subcommand(1);

  Common common;
  RunFlags flags;
  std::string run_preset;

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"solve", "Solve the optimal control problem (trajectory.csv, summary.json)"},
      {"trim", "Solve for a trim primitive (trim.json)"},
      {"sop", "Solve the steady-state optimization problem (sop.json)"},
      {"nco-check", "Check the necessary optimality conditions (nco_report.json)"},
      {"turnpike-scan", "Dwell-time scan over horizons (turnpike.csv, turnpike.json)"},
      {"dissipativity", "Fit a strict dissipativity certificate (dissipativity.json)"},
  };
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    add_common(sub, common);
    if (std::string(s.name) == "nco-check") sub->add_flag("--tocp", flags.tocp, "Also solve the reduced problem");
  }

  auto* run = app.add_subcommand("run", "Solve a preset and the selected analyses");
  run->add_option("preset", run_preset, "Preset name")->required();
  run->add_option("--config", common.config, "Experiment configuration JSON file");
  run->add_option("--out", common.out, "Output directory (default: the config's \"out\", else out)");
  run->add_option("--tol", common.tol, "KKT tolerance of the solver")->check(CLI::PositiveNumber);
  run->add_option("--max-iter", common.max_iter, "Iteration limit of the solver")->check(CLI::PositiveNumber);
  run->add_flag("--nco-check", flags.nco_check, "Write nco_report.json");
  run->add_flag("--tocp", flags.tocp, "Solve the reduced problem and check the correspondence");
  run->add_flag("--sop", flags.sop, "Solve the steady-state problem");
  run->add_flag("--turnpike-scan", flags.scan, "Dwell-time scan over T, 2T, 3T");
  run->add_flag("--dissipativity", flags.dissipativity, "Fit a dissipativity certificate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : report(MTP_E_INVALID_ARGUMENT, e.what());
  }

  if (run->parsed()) {
    common.preset = run_preset;
    return analysis(common, "run", &flags);
  }
  for (const auto* sub : app.get_subcommands()) {
    if (sub->get_name() == "nco-check") return analysis(common, "nco-check", &flags);
    return analysis(common, sub->get_name().c_str(), nullptr);
  }
  return report(MTP_E_INVALID_ARGUMENT, "no subcommand");
}
