// Command-line surface: kernel inspection, maximum-entropy band completion,
// dataset simulation, impulse-response identification and the property
// verifier. Exit codes: 0 ok, 1 input/parse error, 2 domain error,
// 3 infeasible completion, 4 verification failure.

#include "sskernel/band_completion.hpp"
#include "sskernel/io.hpp"
#include "sskernel/stable_spline.hpp"
#include "sskernel/sysid.hpp"
#include "sskernel/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

using sskernel::io::ParseError;

void emit(const std::string& path, const std::string& contents) {
  if (path == "-") {
    std::cout << contents;
    if (!contents.empty() && contents.back() != '\n') std::cout << '\n';
  } else {
    sskernel::io::write_file(path, contents);
  }
}

std::string slurp(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  return sskernel::io::read_file(path);
}

struct KernelArgs {
  Eigen::Index n = 0;
  double alpha = 0.0;
  double lambda = 1.0;
  std::string format = "json";
  std::string out = "-";
};

int cmd_kernel(const KernelArgs& args) {
  if (args.n < 1) throw std::invalid_argument("--n must be a positive integer");
  if (!(args.alpha > 0.0 && args.alpha < 1.0))
    throw std::invalid_argument("--alpha must lie in the open interval (0, 1)");
  if (!(args.lambda > 0.0)) throw std::invalid_argument("--lambda must be positive");

  const sskernel::StableSplineKernel<double> kernel(args.n, args.alpha, args.lambda);
  if (args.format == "json") {
    emit(args.out, sskernel::io::kernel_report(kernel).dump(2));
    return 0;
  }
  if (args.format == "csv") {
    if (args.out == "-") throw std::invalid_argument("--format csv needs --out as a file prefix");
    const auto write_csv = [&](const std::string& suffix, const Eigen::MatrixXd& m) {
      std::ofstream out(args.out + suffix);
      if (!out) throw std::runtime_error("cannot open '" + args.out + suffix + "' for writing");
      sskernel::io::matrix_to_csv(out, m);
    };
    write_csv(".kernel.csv", sskernel::build_kernel(kernel));
    write_csv(".w.csv", Eigen::MatrixXd(sskernel::factorize(kernel).w.transpose()));
    write_csv(".inverse.csv", sskernel::inverse_closed_form(kernel).dense());
    write_csv(".logdet.csv", Eigen::MatrixXd::Constant(1, 1, sskernel::log_det(kernel)));
    return 0;
  }
  throw std::invalid_argument("--format must be json or csv");
}

struct CompleteArgs {
  std::string input;
  std::string out = "-";
};

int cmd_complete(const CompleteArgs& args) {
  const nlohmann::json parsed = nlohmann::json::parse(slurp(args.input));
  const sskernel::PartialBandMatrix<double> band = sskernel::io::band_from_json(parsed);
  emit(args.out, sskernel::io::completion_report(band).dump(2));
  return 0;
}

struct SimulateArgs {
  Eigen::Index samples = 0;
  Eigen::Index order = 50;
  double decay = 0.8;
  std::string impulse_file;
  std::string input_type = "white";
  std::optional<double> sigma2;
  double snr = 10.0;
  std::uint64_t seed = 1;
  std::string out = "-";
};

int cmd_simulate(const SimulateArgs& args) {
  if (args.samples < 1) throw std::invalid_argument("--N must be a positive integer");
  if (args.order < 1) throw std::invalid_argument("--order must be a positive integer");
  if (args.sigma2 && !(*args.sigma2 >= 0.0))
    throw std::invalid_argument("--sigma2 must be nonnegative");
  if (!(args.snr > 0.0)) throw std::invalid_argument("--snr must be positive");

  Eigen::VectorXd f_true;
  if (!args.impulse_file.empty()) {
    std::istringstream in(slurp(args.impulse_file));
    const Eigen::MatrixXd column = sskernel::io::matrix_from_csv(in);
    if (column.cols() != 1) throw ParseError("--impulse-file must hold one value per line");
    f_true = column.col(0);
  } else {
    if (!(args.decay > 0.0 && args.decay < 1.0))
      throw std::invalid_argument("--decay must lie in the open interval (0, 1)");
    f_true.resize(args.order);
    for (Eigen::Index k = 0; k < args.order; ++k) f_true[k] = std::pow(args.decay, double(k + 1));
  }

  Eigen::VectorXd u;
  if (args.input_type == "white") {
    u = sskernel::gaussian_white_noise(args.samples, args.seed);
  } else if (args.input_type == "impulse") {
    u = Eigen::VectorXd::Zero(args.samples);
    u[0] = 1.0;
  } else {
    throw std::invalid_argument("--input-type must be white or impulse");
  }

  double sigma2 = 0.0;
  if (args.sigma2) {
    sigma2 = *args.sigma2;
  } else {
    const Eigen::VectorXd noiseless =
        sskernel::build_convolution_operator(u, args.samples, f_true.size()) * f_true;
    sigma2 = noiseless.squaredNorm() / double(args.samples) / args.snr;
  }

  sskernel::SysIdDataset data =
      sskernel::simulate_dataset(f_true, u, args.samples, sigma2, args.seed + 7919);
  data.seed = args.seed;  // record the user-facing seed, not the derived noise stream
  std::ostringstream csv;
  csv << "# sigma2=" << sigma2 << "\n";
  sskernel::io::dataset_to_csv(csv, data);
  emit(args.out, csv.str());
  return 0;
}

struct IdentifyArgs {
  std::string data_path;
  Eigen::Index order = 0;  // 0: min(100, N/2)
  sskernel::SearchConfig search;
  double fixed_sigma2 = 0.0;
  bool has_fixed_sigma2 = false;
  std::string out = "-";
};

int cmd_identify(const IdentifyArgs& args) {
  std::istringstream in(slurp(args.data_path));
  const sskernel::SysIdDataset data = sskernel::io::dataset_from_csv(in);
  const Eigen::Index N = data.y.size();

  Eigen::Index order = args.order;
  if (order == 0) order = std::min<Eigen::Index>(100, std::max<Eigen::Index>(1, N / 2));
  if (order < 1) throw std::invalid_argument("--order must be a positive integer");

  sskernel::SearchConfig cfg = args.search;
  if (args.has_fixed_sigma2) {
    if (!(args.fixed_sigma2 > 0.0)) throw std::invalid_argument("--fixed-sigma2 must be positive");
    cfg.fixed_sigma2 = args.fixed_sigma2;
  }

  const sskernel::Hyperparams h = sskernel::tune_hyperparameters(data, order, cfg);
  const sskernel::ImpulseEstimate estimate = sskernel::estimate_impulse_response(data, order, h);
  emit(args.out, sskernel::io::estimate_to_json(estimate).dump(2));
  return 0;
}

struct VerifyArgs {
  std::string suites = "all";
  sskernel::verify::Scale scale;
};

int cmd_verify(const VerifyArgs& args) {
  std::vector<std::string> names;
  if (args.suites == "all") {
    names = sskernel::verify::suite_names();
  } else if (args.suites != "none") {
    std::stringstream ss(args.suites);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (!name.empty()) names.push_back(name);
    }
  }
  bool all_pass = true;
  for (const auto& name : names) {
    const auto r = sskernel::verify::run_suite(name, args.scale);
    all_pass = all_pass && r.pass;
    std::printf("%s  %-22s %s (%.2fs)\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.c_str(), r.seconds);
  }
  return all_pass ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"First-order stable spline (TC) kernel toolkit"};
  app.require_subcommand(1);

  KernelArgs kernel_args;
  auto* kernel = app.add_subcommand("kernel", "Closed forms of the TC kernel: K, W, K^-1, log det");
  kernel->add_option("--n", kernel_args.n, "Kernel order")->required();
  kernel->add_option("--alpha", kernel_args.alpha, "Decay rate, in (0, 1)")->required();
  kernel->add_option("--lambda", kernel_args.lambda, "Scale, > 0");
  kernel->add_option("--format", kernel_args.format, "Output format: json or csv");
  kernel->add_option("--out", kernel_args.out, "Output path ('-' for stdout; csv: file prefix)");

  CompleteArgs complete_args;
  auto* complete = app.add_subcommand("complete", "Maximum-entropy completion of a band matrix");
  complete->add_option("--input", complete_args.input, "Band matrix JSON ('-' for stdin)")->required();
  complete->add_option("--out", complete_args.out, "Output path ('-' for stdout)");

  SimulateArgs simulate_args;
  auto* simulate = app.add_subcommand("simulate", "Simulate an identification dataset");
  simulate->add_option("--N", simulate_args.samples, "Number of output samples")->required();
  simulate->add_option("--order", simulate_args.order, "Impulse response length");
  simulate->add_option("--decay", simulate_args.decay, "Impulse response f_k = decay^k");
  simulate->add_option("--impulse-file", simulate_args.impulse_file,
                       "Impulse response file, one value per line (overrides --decay)");
  simulate->add_option("--input-type", simulate_args.input_type, "Input signal: white or impulse");
  simulate->add_option("--sigma2", simulate_args.sigma2, "Noise variance (overrides --snr)");
  simulate->add_option("--snr", simulate_args.snr, "Signal-to-noise power ratio");
  simulate->add_option("--seed", simulate_args.seed, "RNG seed");
  simulate->add_option("--out", simulate_args.out, "Output CSV path ('-' for stdout)");

  IdentifyArgs identify_args;
  auto* identify = app.add_subcommand("identify", "Estimate an impulse response from a dataset");
  identify->add_option("--data", identify_args.data_path, "Dataset CSV ('-' for stdin)")->required();
  identify->add_option("--order", identify_args.order, "FIR order (default: min(100, N/2))");
  identify->add_option("--alpha-min", identify_args.search.alpha_min, "Grid lower bound for alpha");
  identify->add_option("--alpha-max", identify_args.search.alpha_max, "Grid upper bound for alpha");
  identify->add_option("--grid-alpha", identify_args.search.alpha_grid, "Grid points for alpha");
  identify->add_option("--grid-lambda", identify_args.search.lambda_grid, "Grid points for lambda");
  identify->add_option("--grid-sigma2", identify_args.search.sigma2_grid, "Grid points for sigma2");
  identify->add_option("--budget", identify_args.search.refine_budget,
                       "Objective evaluations for simplex refinement");
  identify->add_option("--fixed-sigma2", identify_args.fixed_sigma2, "Fix the noise variance")
      ->each([&](const std::string&) { identify_args.has_fixed_sigma2 = true; });
  identify->add_option("--out", identify_args.out, "Output JSON path ('-' for stdout)");

  VerifyArgs verify_args;
  auto* verify = app.add_subcommand("verify", "Run the property suites and print a pass/fail table");
  verify->add_option("--suites", verify_args.suites, "all, none, or a comma-separated list");
  verify->add_option("--n-max", verify_args.scale.inverse_n_max, "Order cap for the kernel sweeps");
  verify->add_option("--completion-n-max", verify_args.scale.completion_n_max,
                     "Order cap for the completion sweeps");
  verify->add_option("--instances", verify_args.scale.random_instances,
                     "Random instances for the completion suites");
  verify->add_option("--trials", verify_args.scale.stationarity_trials,
                     "Perturbation trials for the stationarity suite");
  verify->add_option("--e2e-seeds", verify_args.scale.e2e_seeds,
                     "Seeds for the end-to-end identification suite");
  verify->add_option("--seed", verify_args.scale.seed, "Base RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (kernel->parsed()) return cmd_kernel(kernel_args);
    if (complete->parsed()) return cmd_complete(complete_args);
    if (simulate->parsed()) return cmd_simulate(simulate_args);
    if (identify->parsed()) return cmd_identify(identify_args);
    if (verify->parsed()) return cmd_verify(verify_args);
  } catch (const sskernel::InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::overflow_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
