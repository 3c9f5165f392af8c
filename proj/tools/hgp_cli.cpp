// Command-line front end: one subcommand per study kind plus dump_noise.
// Exit code 0 when every gating check passes, 1 when a check fails, 2 on
// bad input.

#include <hgp/harness.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  bool verbose = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config, "key = value config file")->check(CLI::ExistingFile);
  sub->add_option("--set", c.overrides, "extra key=value assignments, applied after the file");
  sub->add_option("--seed", c.seed, "master seed");
  sub->add_option("-o,--out", c.out, "output directory");
  sub->add_option("-j,--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  sub->add_flag("-v,--verbose", c.verbose, "print the summary");
}

hgp::ExperimentConfig assemble(hgp::StudyKind kind, const Common& c) {
  hgp::ExperimentConfig cfg = c.config.empty() ? hgp::ExperimentConfig{} : hgp::load_config(c.config);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw hgp::ConfigError("--set expects key=value, got '" + kv + "'");
    hgp::set_config_value(cfg, hgp::detail::trim(std::string_view(kv).substr(0, eq)), std::string_view(kv).substr(eq + 1));
  }
  cfg.kind = kind;
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.output_path = *c.out;
  if (c.threads) cfg.threads = *c.threads;
  return cfg;
}

int run(hgp::StudyKind kind, const Common& c) {
  const hgp::ExperimentConfig cfg = assemble(kind, c);
  const hgp::StudyResult r = hgp::run_study(cfg);
  const auto written = hgp::write_study(r, cfg.output_path);
  for (const auto& chk : r.checks) {
    std::cout << (chk.pass ? "PASS " : "FAIL ") << chk.name << " = " << hgp::format_number(chk.value) << " ("
              << chk.relation << ")" << (chk.gating ? "" : " [reported]") << '\n';
  }
  if (c.verbose) {
    for (const auto& p : written) std::cout << "wrote " << p << '\n';
    std::cout << r.summary.dump(1) << '\n';
  }
  std::cout << r.kind << ": " << (r.pass() ? "pass" : "fail") << '\n';
  return r.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hermite spectral solver for the renormalized Gross-Pitaevskii equation with white-noise potential"};
  app.require_subcommand(1);

  std::vector<std::pair<hgp::StudyKind, std::unique_ptr<Common>>> studies;
  std::function<int()> action;
  for (const auto& [kind, name] : hgp::study_kinds()) {
    auto opts = std::make_unique<Common>();
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " study");
    add_common(sub, *opts);
    const hgp::StudyKind k = kind;
    Common* raw = opts.get();
    sub->callback([&action, k, raw] { action = [k, raw] { return run(k, *raw); }; });
    studies.emplace_back(kind, std::move(opts));
  }

  std::uint64_t seed = 1, stream = 0;
  int K = 32;
  std::string path = "noise.json";
  CLI::App* dump = app.add_subcommand("dump_noise", "write one noise realization as JSON");
  dump->add_option("--seed", seed, "master seed");
  dump->add_option("--stream", stream, "realization index");
  dump->add_option("-K,--K", K, "basis cutoff per axis")->check(CLI::PositiveNumber);
  dump->add_option("-o,--out", path, "output file");
  dump->callback([&] {
    action = [&] {
      hgp::write_json_file(path, hgp::noise_to_json(hgp::sample_noise(seed, stream, K)));
      std::cout << "wrote " << path << '\n';
      return 0;
    };
  });

  CLI11_PARSE(app, argc, argv);
  try {
    return action();
  } catch (const hgp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
  } catch (const hgp::ResolutionError& e) {
    std::cerr << "resolution error: " << e.what() << '\n';
  } catch (const hgp::FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return 2;
}
