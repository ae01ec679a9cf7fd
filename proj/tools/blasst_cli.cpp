// SPDX-FileCopyrightText: Copyright (c) 2026 blasst contributors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Talks to the library only through the C API.

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "blasst/blasst.h"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;
constexpr int kExitCalibration = 3;
constexpr int kExitCheckFailed = 4;

// Failure carrying the process exit code.
struct CliError {
  int code;
  std::string message;
};

int exit_code_for(blasst_status s) {
  switch (s) {
    case BLASST_OK: return kExitOk;
    case BLASST_ERR_VALIDATION:
    case BLASST_ERR_GEOMETRY:
    case BLASST_ERR_MODEL: return kExitValidation;
    case BLASST_ERR_CALIBRATION: return kExitCalibration;
    default: return kExitIo;
  }
}

void check(blasst_status s) {
  if (s != BLASST_OK) throw CliError{exit_code_for(s), blasst_last_error()};
}

// Owns a string returned by the library.
struct LibString {
  char* p = nullptr;
  ~LibString() { blasst_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

struct TensorHandle {
  blasst_tensor* p = nullptr;
  TensorHandle() = default;
  TensorHandle(const TensorHandle&) = delete;
  TensorHandle& operator=(const TensorHandle&) = delete;
  ~TensorHandle() { blasst_tensor_free(p); }
};

struct Inputs {
  TensorHandle q, k, v;
};

struct GlobalOptions {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  bool verify = false;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{kExitIo, "cannot open " + path.string()};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError{kExitIo, "cannot write " + path.string()};
  out << content;
  if (!out) throw CliError{kExitIo, "error while writing " + path.string()};
  spdlog::info("wrote {}", path.string());
}

Json load_config(const GlobalOptions& g) {
  if (g.config.empty()) throw CliError{kExitValidation, "--config is required"};
  try {
    return Json::parse(read_text(g.config));
  } catch (const nlohmann::json::parse_error& e) {
    throw CliError{kExitIo, g.config + ": invalid JSON: " + e.what()};
  }
}

const Json& section(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw CliError{kExitValidation, where + ": missing \"" + key + "\""};
  return j.at(key);
}

fs::path out_dir(const GlobalOptions& g) {
  fs::path dir(g.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError{kExitIo, "cannot create output directory " + dir.string() + ": " + ec.message()};
  return dir;
}

fs::path resolve_input(const GlobalOptions& g, const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) path = fs::path(g.config).parent_path() / path;
  return path;
}

std::string attention_json(const Json& cfg) { return section(cfg, "attention", "config").dump(); }

Json with_seed(Json workload, const GlobalOptions& g) {
  if (g.seed) workload["seed"] = *g.seed;
  return workload;
}

// Q, K, V from a RunConfig's "input": exactly one of "synthetic" or "files".
void load_inputs(const Json& cfg, const GlobalOptions& g, Inputs& in) {
  const Json& input = section(cfg, "input", "config");
  const bool synthetic = input.is_object() && input.contains("synthetic");
  const bool files = input.is_object() && input.contains("files");
  if (synthetic == files) {
    throw CliError{kExitValidation, "config.input must contain exactly one of \"synthetic\" or \"files\""};
  }
  if (synthetic) {
    const auto w = with_seed(input.at("synthetic"), g).dump();
    check(blasst_workload_generate(w.c_str(), &in.q.p, &in.k.p, &in.v.p));
    return;
  }
  const Json& f = input.at("files");
  for (auto [key, handle] : {std::pair{"q", &in.q}, std::pair{"k", &in.k}, std::pair{"v", &in.v}}) {
    const auto& entry = section(f, key, "config.input.files");
    if (!entry.is_string()) throw CliError{kExitValidation, std::string("config.input.files.") + key + " must be a path"};
    const auto path = resolve_input(g, entry.get<std::string>()).string();
    check(blasst_tensor_read(path.c_str(), &handle->p));
  }
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CliError{kExitValidation, "not a number: \"" + item + "\""};
    }
  }
  return out;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0 && hi >= lo) || n == 0) throw CliError{kExitValidation, "log grid needs 0 < lo <= hi and n >= 1"};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    out[i] = std::pow(10.0, std::log10(lo) + t * (std::log10(hi) - std::log10(lo)));
  }
  out.front() = lo;
  if (n > 1) out.back() = hi;
  return out;
}

int cmd_run(const GlobalOptions& g) {
  const Json cfg = load_config(g);
  Inputs in;
  load_inputs(cfg, g, in);
  const auto attn = attention_json(cfg);

  blasst_forward_result* raw = nullptr;
  check(blasst_forward(in.q.p, in.k.p, in.v.p, attn.c_str(), &raw));
  std::unique_ptr<blasst_forward_result, decltype(&blasst_forward_free)> res(raw, &blasst_forward_free);

  const Json output = cfg.value("output", Json::object());
  const auto dir = out_dir(g);
  const auto tensor_path = (dir / output.value("output", "output.btsr")).string();
  check(blasst_tensor_write(blasst_forward_output(res.get()), tensor_path.c_str()));

  LibString mask, report, diags;
  check(blasst_forward_mask_json(res.get(), &mask.p));
  write_text(dir / output.value("mask", "mask.json"), mask.str() + "\n");
  const auto layout = output.value("report_layout", "per_head");
  check(blasst_forward_report_csv(res.get(), layout.c_str(), &report.p));
  write_text(dir / output.value("report", "sparsity.csv"), report.str());

  check(blasst_forward_diagnostics_json(res.get(), &diags.p));
  const Json d = Json::parse(diags.str());
  for (const auto& w : d["warnings"]) spdlog::warn("{}", w.get<std::string>());
  for (const auto& e : d["diagnostics"]) {
    spdlog::warn("head {} row {}: {}", e["head"].get<std::uint64_t>(), e["row"].get<std::uint64_t>(),
                 e["message"].get<std::string>());
  }

  std::printf("sparsity %.4f\n", blasst_forward_sparsity(res.get()));
  if (g.verify) {
    TensorHandle dense, masked;
    double dev_dense = 0.0, dev_masked = 0.0;
    const auto* out = blasst_forward_output(res.get());
    check(blasst_dense_attention(in.q.p, in.k.p, in.v.p, attn.c_str(), &dense.p));
    check(blasst_max_relative_deviation(out, dense.p, &dev_dense));
    check(blasst_masked_oracle(in.q.p, in.k.p, in.v.p, attn.c_str(), mask.p, &masked.p));
    check(blasst_max_relative_deviation(out, masked.p, &dev_masked));
    std::printf("deviation_vs_dense %.6e\n", dev_dense);
    std::printf("deviation_vs_masked_oracle %.6e\n", dev_masked);
    std::printf("row_diagnostics %zu\n", d["diagnostics"].size());
  }
  return kExitOk;
}

int cmd_sweep(const GlobalOptions& g, const std::string& lambdas_arg, const std::vector<double>& grid_arg) {
  const Json cfg = load_config(g);
  std::vector<double> lambdas;
  if (!lambdas_arg.empty()) {
    lambdas = parse_number_list(lambdas_arg);
  } else if (!grid_arg.empty()) {
    if (grid_arg.size() != 3) throw CliError{kExitValidation, "--grid expects lo,hi,count"};
    lambdas = log_grid(grid_arg[0], grid_arg[1], static_cast<std::size_t>(grid_arg[2]));
  } else if (cfg.contains("sweep")) {
    const Json& s = cfg["sweep"];
    if (s.contains("lambdas")) {
      lambdas = s["lambdas"].get<std::vector<double>>();
    } else if (s.contains("log_space") && s["log_space"].size() == 3) {
      lambdas = log_grid(s["log_space"][0].get<double>(), s["log_space"][1].get<double>(),
                         s["log_space"][2].get<std::size_t>());
    }
  }
  if (lambdas.empty()) {
    throw CliError{kExitValidation,
                   "no thresholds to sweep; usage: blasst sweep --config RUN.json (--lambdas L1,L2,... | --grid LO,HI,N)"};
  }
  Inputs in;
  load_inputs(cfg, g, in);
  const auto attn = attention_json(cfg);
  LibString csv;
  check(blasst_sweep(in.q.p, in.k.p, in.v.p, attn.c_str(), lambdas.data(), lambdas.size(), &csv.p));
  write_text(out_dir(g) / cfg.value("output", Json::object()).value("sweep", "sweep.csv"), csv.str());
  std::fputs(csv.str().c_str(), stdout);
  return kExitOk;
}

std::string calibration_config(const GlobalOptions& g) {
  Json cfg = load_config(g);
  if (g.seed && cfg.contains("workload")) cfg["workload"]["seed"] = *g.seed;
  return cfg.dump();
}

int cmd_calibrate(const GlobalOptions& g) {
  const auto cfg = calibration_config(g);
  LibString fit;
  check(blasst_calibrate(cfg.c_str(), &fit.p));
  write_text(out_dir(g) / "fit.json", fit.str());
  const Json f = Json::parse(fit.str());
  std::printf("a %s\n", f["a"].dump().c_str());
  std::printf("accepted %zu rejected %zu\n", f["points"].size(), f["rejected_lengths"].size());
  std::printf("max_abs_residual %s\n", f["max_abs_residual"].dump().c_str());
  return kExitOk;
}

int cmd_stability(const GlobalOptions& g, const std::string& fit_path, double lambda) {
  const auto cfg = calibration_config(g);
  const auto fit = read_text(fit_path);
  LibString csv;
  check(blasst_stability(cfg.c_str(), fit.c_str(), lambda, &csv.p));
  write_text(out_dir(g) / "stability.csv", csv.str());
  std::fputs(csv.str().c_str(), stdout);
  return kExitOk;
}

int cmd_gradcheck(const GlobalOptions& g, std::uint64_t coords, double step, std::uint64_t grad_seed) {
  const Json cfg = load_config(g);
  Inputs in;
  load_inputs(cfg, g, in);
  const auto attn = attention_json(cfg);
  LibString report;
  double max_err = 0.0;
  check(blasst_gradcheck(in.q.p, in.k.p, in.v.p, attn.c_str(), grad_seed, coords, step, grad_seed + 1, &report.p,
                         &max_err));
  write_text(out_dir(g) / "gradcheck.json", report.str());
  const Json r = Json::parse(report.str());
  std::printf("max_rel_error %.3e\n", max_err);
  std::printf("checked %llu excluded %llu\n", static_cast<unsigned long long>(r["checked"].get<std::uint64_t>()),
              static_cast<unsigned long long>(r["excluded"].get<std::uint64_t>()));
  if (max_err > 1e-5) {
    spdlog::error("gradient check failed: max relative error {:.3e} exceeds 1e-5", max_err);
    return kExitCheckFailed;
  }
  return kExitOk;
}

struct SimulateOptions {
  std::string phase = "prefill";
  std::string model_path;
  std::optional<std::string> skip;
  std::string sparsity;
  std::uint32_t trials = 16;
  bool mla = false;
};

int cmd_simulate(const GlobalOptions& g, const SimulateOptions& o) {
  std::string model_text;
  if (!o.model_path.empty()) {
    model_text = read_text(o.model_path);
  } else {
    LibString m;
    check(blasst_default_phase_model(o.phase.c_str(), &m.p));
    model_text = m.str();
  }
  if (o.mla) {
    Json m = Json::parse(model_text);
    m["skip_softmax_on_skip"] = true;
    model_text = m.dump();
  }
  const auto dir = out_dir(g);

  if (!o.sparsity.empty()) {
    const auto s = parse_number_list(o.sparsity);
    if (s.empty()) throw CliError{kExitValidation, "--sparsity needs at least one value"};
    LibString csv;
    check(blasst_speedup_curve(model_text.c_str(), s.data(), s.size(), o.trials, g.seed.value_or(0), &csv.p));
    write_text(dir / "speedup.csv", csv.str());
    std::istringstream rows(csv.str());
    std::string line;
    std::getline(rows, line);  // header
    while (std::getline(rows, line)) {
      std::vector<double> f = parse_number_list(line);
      std::printf("sparsity %.3f mean_runtime %.3f speedup %.3f\n", f[0], f[3], f[4]);
    }
    return kExitOk;
  }

  std::vector<std::uint32_t> skipped;
  for (double x : parse_number_list(o.skip.value_or(""))) {
    if (x < 0 || x != std::floor(x)) throw CliError{kExitValidation, "--skip expects loop indices"};
    skipped.push_back(static_cast<std::uint32_t>(x));
  }
  LibString trace, base_trace;
  std::int64_t runtime = 0, baseline = 0;
  check(blasst_simulate(model_text.c_str(), skipped.data(), skipped.size(), &trace.p, &runtime));
  check(blasst_simulate(model_text.c_str(), nullptr, 0, &base_trace.p, &baseline));
  write_text(dir / "trace.csv", trace.str());
  std::printf("runtime %lld\n", static_cast<long long>(runtime));
  std::printf("baseline %lld\n", static_cast<long long>(baseline));
  std::printf("speedup %.3f\n", static_cast<double>(baseline) / static_cast<double>(runtime));
  return kExitOk;
}

int cmd_gen(const GlobalOptions& g) {
  const Json cfg = load_config(g);
  Json workload = cfg;
  if (cfg.contains("input")) workload = section(section(cfg, "input", "config"), "synthetic", "config.input");
  workload = with_seed(workload, g);
  Inputs in;
  const auto text = workload.dump();
  check(blasst_workload_generate(text.c_str(), &in.q.p, &in.k.p, &in.v.p));
  const auto dir = out_dir(g);
  for (auto [name, handle] : {std::pair{"q.btsr", &in.q}, std::pair{"k.btsr", &in.k}, std::pair{"v.btsr", &in.v}}) {
    const auto path = (dir / name).string();
    check(blasst_tensor_write(handle->p, path.c_str()));
    spdlog::info("wrote {}", path);
  }
  std::printf("generated %llu x %llu x %llu\n", static_cast<unsigned long long>(blasst_tensor_dim(in.q.p, 0)),
              static_cast<unsigned long long>(blasst_tensor_dim(in.q.p, 1)),
              static_cast<unsigned long long>(blasst_tensor_dim(in.q.p, 2)));
  return kExitOk;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("blasst");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("BLASST_LOG");
  const std::string level = env ? env : "warn";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::warn);
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Blocked attention with softmax-threshold skipping: reference runs, calibration, "
               "gradient checks and pipeline cost modeling."};
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--config", g.config, "Path to the JSON configuration");
  app.add_option("--out", g.out, "Output directory (created if missing)");
  app.add_option("--seed", g.seed, "Override the seed in the configuration");
  app.add_flag("--verify", g.verify, "Compare against the dense and masked oracles");

  auto* run = app.add_subcommand("run", "Run blocked attention on files or a synthetic workload");
  auto* sweep = app.add_subcommand("sweep", "Measure sparsity over a list of thresholds");
  std::string lambdas;
  std::vector<double> grid;
  sweep->add_option("--lambdas", lambdas, "Comma-separated thresholds");
  sweep->add_option("--grid", grid, "Log-spaced grid: lo hi count")->delimiter(',')->expected(3);
  auto* calibrate = app.add_subcommand("calibrate", "Fit lambda = a / L from a calibration config");
  auto* stability = app.add_subcommand("stability", "Compare fixed and calibrated thresholds across lengths");
  std::string fit_path;
  double fixed_lambda = 0.0;
  stability->add_option("--fit", fit_path, "CalibrationFit JSON")->required();
  stability->add_option("--lambda", fixed_lambda, "Fixed threshold to compare against")->required();
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the sparse backward pass");
  std::uint64_t coords = 200, grad_seed = 0;
  double step = 1e-5;
  gradcheck->add_option("--coords", coords, "Number of input coordinates to probe");
  gradcheck->add_option("--step", step, "Central-difference step");
  gradcheck->add_option("--grad-seed", grad_seed, "Seed for the upstream gradient and coordinate draws");
  auto* simulate = app.add_subcommand("simulate", "Simulate the prefill or decode pipeline schedule");
  SimulateOptions sim;
  simulate->add_option("--phase", sim.phase, "prefill or decode (built-in model)");
  simulate->add_option("--model", sim.model_path, "PhaseModel JSON instead of the built-in model");
  simulate->add_option("--skip", sim.skip, "Comma-separated skipped loop indices");
  simulate->add_option("--sparsity", sim.sparsity, "Comma-separated sparsities for a speedup curve");
  simulate->add_option("--trials", sim.trials, "Random skip sets per sparsity");
  simulate->add_flag("--mla", sim.mla, "Skipped decode loops also drop their softmax");
  auto* gen = app.add_subcommand("gen", "Write a synthetic workload as q.btsr, k.btsr, v.btsr");

  for (auto* sub : {run, sweep, calibrate, stability, gradcheck, simulate, gen}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*run) return cmd_run(g);
    if (*sweep) return cmd_sweep(g, lambdas, grid);
    if (*calibrate) return cmd_calibrate(g);
    if (*stability) return cmd_stability(g, fit_path, fixed_lambda);
    if (*gradcheck) return cmd_gradcheck(g, coords, step, grad_seed);
    if (*simulate) return cmd_simulate(g, sim);
    if (*gen) return cmd_gen(g);
  } catch (const CliError& e) {
    spdlog::error("{}", e.message);
    return e.code;
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("malformed configuration: {}", e.what());
    return kExitIo;
  }
  return kExitValidation;
}
