#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "sprknet/experiments.hpp"

namespace fs = std::filesystem;
using namespace sprknet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;      // verification or divergence failure
constexpr int kExitBadInput = 2;  // unusable arguments, files, or configs

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

void write_run_outputs(const RunReport& report, const std::string& out_dir) {
  if (out_dir.empty()) return;
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "metrics.csv");
    write_metrics_csv(out, report.metrics);
  }
  save_net(report.model, (fs::path(out_dir) / "model.json").string());
  write_text_file(fs::path(out_dir) / "report.json", report_to_json(report).dump(1) + "\n");
}

int cmd_verify(const std::string& file, const std::string& name) {
  std::vector<PrkTableau> tableaux;
  if (!file.empty())
    tableaux.push_back(load_tableau_file(file));
  else if (!name.empty())
    tableaux.push_back(builtin_tableau(name));
  else
    for (const auto& builtin : builtin_tableau_names())
      tableaux.push_back(builtin_tableau(builtin));

  bool all_pass = true;
  for (const PrkTableau& t : tableaux) {
    const VerifyReport report = run_verify(t);
    print_verify_report(std::cout, report);
    std::cout << "\n";
    all_pass = all_pass && report.pass;
  }
  return all_pass ? kExitOk : kExitFail;
}

int cmd_convergence(const std::string& out_path) {
  const auto rows = run_convergence();
  if (out_path.empty()) {
    write_convergence_csv(std::cout, rows);
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
    write_convergence_csv(out, rows);
  }
  return kExitOk;
}

RunConfig resolve_config(const std::string& path, RunConfig base, long long seed_override) {
  RunConfig cfg = path.empty() ? base : load_config_file(path, std::move(base));
  if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
  return cfg;
}

int cmd_train_classify(const std::string& config_path, long long seed, const std::string& out) {
  const RunConfig cfg = resolve_config(config_path, default_classification_config(), seed);
  const RunReport report = run_classification(cfg);
  write_run_outputs(report, out);
  if (!out.empty()) {
    const ClassificationDataset data = gen_classification(cfg.seed);
    std::ofstream csv(fs::path(out) / "test_data.csv");
    csv << "x1,x2,label\n";
    char buf[64];
    for (std::size_t k : data.test_idx) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g", data.features[k][0], data.features[k][1]);
      csv << buf << "," << data.labels[k] << "\n";
    }
  }
  std::cout << report_to_json(report).dump() << "\n";
  return kExitOk;
}

int cmd_train_kepler(const std::string& config_path, long long seed, const std::string& out) {
  const RunConfig cfg = resolve_config(config_path, default_kepler_config(), seed);
  const RunReport report = run_kepler(cfg);
  write_run_outputs(report, out);
  if (!out.empty()) {
    const KeplerDataset data = gen_kepler(cfg.seed);
    std::ofstream csv(fs::path(out) / "test_trajectory.csv");
    write_trajectory_csv(csv, data.test_trajectory);
  }
  std::cout << report_to_json(report).dump() << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& data_path) {
  const NetParams model = load_net(model_path);
  std::ifstream in(data_path);
  if (!in) throw std::invalid_argument("cannot open data file '" + data_path + "'");
  std::string header;
  std::getline(in, header);
  nlohmann::ordered_json out;

  if (header.rfind("t,", 0) == 0) {
    in.seekg(0);
    const Trajectory observed = read_trajectory_csv(in);
    const Trajectory predicted =
        kepler_rollout(model, observed.states.front(), observed.times, nullptr);
    out["metric"] = "trajectory_mse";
    out["value"] = loss_trajectory(predicted, observed).value;
  } else if (header == "x1,x2,label") {
    std::size_t correct = 0, total = 0;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      double x1, x2;
      int label;
      if (std::sscanf(line.c_str(), "%lf,%lf,%d", &x1, &x2, &label) != 3)
        throw std::invalid_argument("bad data row: " + line);
      const ForwardResult res = forward(model, Vec{x1, x2});
      const int predicted = res.output[0] > 0.0 ? 1 : 0;
      correct += predicted == label ? 1 : 0;
      ++total;
    }
    if (total == 0) throw std::invalid_argument("data file has no rows");
    out["metric"] = "accuracy_percent";
    out["value"] = 100.0 * static_cast<double>(correct) / static_cast<double>(total);
  } else {
    throw std::invalid_argument("unrecognized data header '" + header + "'");
  }
  std::cout << out.dump() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symplectic partitioned Runge-Kutta networks"};
  app.require_subcommand(1);

  std::string verify_file, verify_name;
  auto* verify = app.add_subcommand("verify-tableau",
                                    "Check symplecticity, node and order conditions");
  verify->add_option("--file", verify_file, "Tableau JSON file");
  verify->add_option("--name", verify_name, "Built-in tableau name");

  std::string conv_out;
  auto* conv = app.add_subcommand("convergence", "Empirical order table for the built-ins");
  conv->add_option("--out", conv_out, "Output CSV path (default stdout)");

  std::string classify_config, classify_out;
  long long classify_seed = -1;
  auto* classify = app.add_subcommand("train-classify", "Train the point classifier");
  classify->add_option("--config", classify_config, "Config JSON path");
  classify->add_option("--seed", classify_seed, "Seed override");
  classify->add_option("--out", classify_out, "Output directory");

  std::string kepler_config, kepler_out;
  long long kepler_seed = -1;
  auto* kepler = app.add_subcommand("train-kepler", "Learn the Kepler force from trajectories");
  kepler->add_option("--config", kepler_config, "Config JSON path");
  kepler->add_option("--seed", kepler_seed, "Seed override");
  kepler->add_option("--out", kepler_out, "Output directory");

  std::string eval_model, eval_data;
  auto* eval = app.add_subcommand("eval", "Evaluate a saved model on a data file");
  eval->add_option("--model", eval_model, "Model JSON path")->required();
  eval->add_option("--data", eval_data, "Data CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (verify->parsed()) return cmd_verify(verify_file, verify_name);
    if (conv->parsed()) return cmd_convergence(conv_out);
    if (classify->parsed()) return cmd_train_classify(classify_config, classify_seed, classify_out);
    if (kepler->parsed()) return cmd_train_kepler(kepler_config, kepler_seed, kepler_out);
    if (eval->parsed()) return cmd_eval(eval_model, eval_data);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFail;
  }
  return kExitBadInput;
}
