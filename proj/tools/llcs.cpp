// Command-line entry point: llcs <command> --config PATH [options]

#include <iostream>

#include "CLI11.hpp"
#include "llcs/llcs.hpp"

namespace {

void print_summary(const llcs::CommandResult& res) {
  const auto& r = res.record["results"];
  std::cout << r.dump(2) << "\n";
  if (res.directory) std::cerr << "record: " << (*res.directory / "record.json").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained-search energies from conditional-density ansatzes"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::string prefactor;
  bool test_mode = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file (.ini) or run record (.json)")->required();
    sub->add_option("--seed", seed, "master seed (overrides the file)");
    sub->add_option("--out", out, "output directory for run records");
    sub->add_option("--prefactor", prefactor, "Coulomb prefactor")->check(CLI::IsMember({"half", "full"}));
    sub->add_flag("--test-mode", test_mode, "allow gamma = 0 for the pairwise family");
  };
  auto* energy = app.add_subcommand("energy", "energy breakdown at fixed parameters");
  auto* optimize = app.add_subcommand("optimize", "nested minimization over density and ansatz parameters");
  auto* compare = app.add_subcommand("compare-ansatz", "rank ansatz families by minimized Gamma");
  auto* verify = app.add_subcommand("verify", "decomposition and condition checks");
  auto* diag = app.add_subcommand("sample-diagnostics", "one Metropolis chain with diagnostics");
  for (auto* sub : {energy, optimize, compare, verify, diag}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return llcs::exit_validation;
  }

  try {
    llcs::CommandOverrides o;
    o.seed = seed;
    o.out = out;
    if (!prefactor.empty()) o.prefactor = llcs::parse_prefactor(prefactor);
    o.test_mode = test_mode;
    const auto cfg = llcs::apply_overrides(llcs::load_config(config_path), o);

    llcs::CommandResult res;
    if (energy->parsed()) res = llcs::cmd_energy(cfg);
    else if (optimize->parsed()) res = llcs::cmd_optimize(cfg);
    else if (compare->parsed()) res = llcs::cmd_compare_ansatz(cfg);
    else if (verify->parsed()) res = llcs::cmd_verify(cfg);
    else res = llcs::cmd_sample_diagnostics(cfg);
    print_summary(res);
    if (res.exit_code == llcs::exit_tolerance) std::cerr << "verify: residual exceeds tolerance\n";
    return res.exit_code;
  } catch (const llcs::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return llcs::exit_validation;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return llcs::exit_numerical;
  }
}
