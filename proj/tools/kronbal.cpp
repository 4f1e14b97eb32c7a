#include <Eigen/Core>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kronbal/kronbal.hpp"

using namespace kronbal;

namespace {

constexpr int kOk = 0;
constexpr int kNumerical = 1;
constexpr int kUsage = 2;

class UsageError : public Error {
 public:
  using Error::Error;
};

void report(const Warnings& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

void apply_thread_limit() {
  const char* env = std::getenv("KRONBAL_THREADS");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const long threads = std::strtol(env, &end, 10);
  if (*end != '\0' || threads < 1) {
    throw UsageError("KRONBAL_THREADS must be a positive integer, got '" + std::string(env) + "'");
  }
  Eigen::setNbThreads(static_cast<int>(threads));
}

// Writes to path, or to stdout for "-" / empty.
template <class F>
void with_output(const std::string& path, F&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw IoError(path + ": cannot open for writing");
  write(out);
  if (!out) throw IoError(path + ": write failed");
}

DegeneratePolicy parse_policy(const std::string& s) {
  if (s == "warn") return DegeneratePolicy::Warn;
  if (s == "error") return DegeneratePolicy::Error;
  throw UsageError("--degenerate must be warn or error, got '" + s + "'");
}

std::vector<std::size_t> parse_n_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = std::min(s.find(',', start), s.size());
    const std::string item = s.substr(start, comma - start);
    char* end = nullptr;
    const long v = std::strtol(item.c_str(), &end, 10);
    if (item.empty() || *end != '\0' || v < 1) throw UsageError("--n: bad entry '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
    start = comma + 1;
  }
  return out;
}

struct Options {
  std::string input;
  std::string second;
  std::string out;
  int degree = 0;
  bool min_norm = false;
  std::string degenerate = "warn";
  std::string topology = "anchored";
  std::string example;
  std::size_t masses = 1;
  std::string n_list = "8,16,32,64";
  int repeats = 3;
  std::string projections;
};

int cmd_generate(const Options& o) {
  if (o.example == "duffing") {
    const PolynomialDynamics model = duffing_chain(o.masses, parse_topology(o.topology));
    with_output(o.out, [&](std::ostream& os) { os << dump_json(model_to_json(model)); });
  } else {
    const auto [ec, eo] = fujimoto2d_energy_coeffs();
    with_output(o.out, [&](std::ostream& os) { os << dump_json(energy_to_json({2, 6, ec, eo})); });
  }
  return kOk;
}

int cmd_energy(const Options& o) {
  const PolynomialDynamics model = read_model(o.input);
  Warnings warnings;
  EnergyFile f{model.n(), o.degree, std::nullopt, std::nullopt};
  f.v = solve_energy_expansion(model, o.degree, EnergyKind::Controllability, &warnings);
  f.w = solve_energy_expansion(model, o.degree, EnergyKind::Observability, &warnings);
  report(warnings);
  write_energy(o.out, f);
  return kOk;
}

EnergyFile read_energy_pair(const std::string& path, Warnings& warnings) {
  EnergyFile f = read_energy(path, &warnings);
  if (!f.v) throw ValidationError("v: missing from " + path);
  if (!f.w) throw ValidationError("w: missing from " + path);
  return f;
}

int cmd_balance(const Options& o) {
  Warnings warnings;
  const EnergyFile f = read_energy_pair(o.input, warnings);
  report(warnings);
  const int d = o.degree > 0 ? o.degree : f.d;
  if (d > f.d) throw UsageError("--degree " + std::to_string(d) + " exceeds the file degree " + std::to_string(f.d));
  BalanceOptions options;
  options.min_norm = o.min_norm;
  options.degenerate = parse_policy(o.degenerate);
  const InOdResult res = compute_in_od_transformation(*f.v, *f.w, d, options);
  report(res.warnings);
  write_transformation(o.out, res.transformation, res.sigma);
  return kOk;
}

int cmd_check(const Options& o) {
  Warnings warnings;
  const EnergyFile f = read_energy_pair(o.input, warnings);
  const auto [t, s] = read_transformation(o.second);
  if (t.n != f.n) throw ValidationError("n: energy and transformation dimensions differ");
  const int d = o.degree > 0 ? o.degree : std::min(f.d, t.max_degree() + 1);
  if (d < 2 || d > f.d) throw UsageError("--degree out of range for the energy file");
  const EnergyExpansion ec = compose_energy(*f.v, t, d);
  const EnergyExpansion eo = compose_energy(*f.w, t, d);
  report(warnings);
  const DiagnosticsReport r = check_in_od(ec, eo, warnings);
  with_output(o.out, [&](std::ostream& os) { write_diagnostics_csv(os, {r}); });
  if (!o.projections.empty()) {
    std::filesystem::create_directories(o.projections);
    for (int k = 3; k <= d; ++k) {
      for (int dims = 2; dims <= std::min(3, k); ++dims) {
        const std::string name = o.projections + "/w" + std::to_string(k) + "_proj" +
                                 std::to_string(dims) + ".txt";
        with_output(name, [&](std::ostream& os) {
          write_projection(os, tensor_projection(eo.coeff(k), f.n, k, dims), f.n, dims);
        });
      }
    }
  }
  return kOk;
}

int cmd_bench(const Options& o) {
  BalanceOptions options;
  options.min_norm = o.min_norm;
  const TimingTable table = scaling_benchmark(parse_n_list(o.n_list), o.degree, o.repeats,
                                              parse_topology(o.topology), options);
  for (const auto& r : table.rows)
    if (!r.note.empty()) std::cerr << "warning: n=" << r.n << ' ' << r.note << '\n';
  with_output(o.out, [&](std::ostream& os) { write_timings_csv(os, table); });
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polynomial input-normal/output-diagonal balancing"};
  app.require_subcommand(1);
  Options o;

  auto* generate = app.add_subcommand("generate", "Write an example model or energy file");
  generate->add_option("example", o.example, "duffing (model) or fujimoto2d (energies)")
      ->required()
      ->check(CLI::IsMember({"duffing", "fujimoto2d"}));
  generate->add_option("-N,--masses", o.masses, "Number of masses (duffing)")->check(CLI::PositiveNumber);
  generate->add_option("--topology", o.topology, "chain or anchored (duffing)")
      ->check(CLI::IsMember({"chain", "anchored"}));
  generate->add_option("-o,--out", o.out, "Output file (default stdout)");

  auto* energy = app.add_subcommand("energy", "Energy function expansions of a model");
  energy->add_option("model", o.input, "Model file")->required();
  energy->add_option("-d,--degree", o.degree, "Expansion degree")->required()->check(CLI::Range(2, 64));
  energy->add_option("-o,--out", o.out, "Energy file")->required();

  auto* balance = app.add_subcommand("balance", "Input-normal/output-diagonal transformation");
  balance->add_option("energy", o.input, "Energy file with v and w")->required();
  balance->add_option("-d,--degree", o.degree, "Energy degree (default: file degree)")
      ->check(CLI::Range(2, 64));
  balance->add_option("-o,--out", o.out, "Transformation file")->required();
  balance->add_flag("--min-norm", o.min_norm, "Minimum-norm instead of basic solutions");
  balance->add_option("--degenerate", o.degenerate, "warn or error on repeated singular values")
      ->check(CLI::IsMember({"warn", "error"}));

  auto* check = app.add_subcommand("check", "Diagnostics CSV of a transformation");
  check->add_option("energy", o.input, "Energy file with v and w")->required();
  check->add_option("transformation", o.second, "Transformation file")->required();
  check->add_option("-d,--degree", o.degree, "Truncation degree")->check(CLI::Range(2, 64));
  check->add_option("-o,--out", o.out, "CSV file (default stdout)");
  check->add_option("--projections", o.projections, "Directory for tensor projections of w~");

  auto* bench = app.add_subcommand("bench", "Scaling benchmark on Duffing chains");
  bench->add_option("-d,--degree", o.degree, "Energy degree")->required()->check(CLI::Range(2, 64));
  bench->add_option("--n", o.n_list, "Comma-separated state dimensions (even)");
  bench->add_option("--repeats", o.repeats, "Timed repetitions per size")->check(CLI::PositiveNumber);
  bench->add_option("--topology", o.topology, "chain or anchored")
      ->check(CLI::IsMember({"chain", "anchored"}));
  bench->add_flag("--min-norm", o.min_norm, "Minimum-norm solutions");
  bench->add_option("-o,--out", o.out, "CSV file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    apply_thread_limit();
    if (generate->parsed()) return cmd_generate(o);
    if (energy->parsed()) return cmd_energy(o);
    if (balance->parsed()) return cmd_balance(o);
    if (check->parsed()) return cmd_check(o);
    return cmd_bench(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return kNumerical;
  }
}
