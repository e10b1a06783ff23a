#include "checks.hpp"

#include <CLI11.hpp>

#include <dbest/bounds.hpp>
#include <dbest/config.hpp>
#include <dbest/io.hpp>
#include <dbest/linear.hpp>
#include <dbest/moments.hpp>
#include <dbest/simulation.hpp>
#include <dbest/tensor.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

namespace {

using namespace dbest;

struct MomentOptions {
  std::string design;
  std::string load;
  bool exact = false;
  std::int64_t mc = 0;
  std::uint64_t seed = 1;
  int workers = 1;
};

void add_moment_options(CLI::App* cmd, MomentOptions& o) {
  cmd->add_option("--design", o.design, "design config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--load-moments", o.load, "moments saved by 'moments --save'")->check(CLI::ExistingFile);
  auto* ex = cmd->add_flag("--exact", o.exact, "exact moments (default)");
  cmd->add_option("--mc", o.mc, "Monte Carlo moments with this many draws")->excludes(ex)->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Monte Carlo seed");
  cmd->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
}

DesignMoments get_moments(const MomentOptions& o, DesignSpec* design_out = nullptr) {
  if (!o.design.empty()) {
    DesignSpec design = load_design(o.design);
    if (design_out) *design_out = design;
    if (!o.load.empty()) return load_moments(o.load);
    return o.mc > 0 ? mc_moments(design, o.mc, o.seed, o.workers) : exact_moments(design);
  }
  if (!o.load.empty()) return load_moments(o.load);
  throw std::invalid_argument("need --design or --load-moments");
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

void write_file(const std::string& path, const std::string& text) { open_out(path) << text; }

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& cell : split_csv_line(s)) out.push_back(std::stod(cell));
  return out;
}

std::string format_eigen(const EigenResult& e) {
  if (e.infinite) return "inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << e.value;
  if (!e.converged) os << '?';
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Design-based estimation for randomized experiments"};
  app.require_subcommand(1);

  MomentOptions mo;
  std::string pi_csv, p_csv, d_csv, save_path, tensor_csv;
  auto* moments = app.add_subcommand("moments", "compute and export design moments");
  add_moment_options(moments, mo);
  moments->add_option("--pi-csv", pi_csv, "write first-order probabilities");
  moments->add_option("--p-csv", p_csv, "write joint inclusion triplets");
  moments->add_option("--d-csv", d_csv, "write design matrix triplets");
  moments->add_option("--tensor-csv", tensor_csv, "write the second-order tensor (kn <= 64)");
  moments->add_option("--save", save_path, "save moments in binary form");

  MomentOptions co;
  bool complexity_json_out = false;
  auto* complexity = app.add_subcommand("complexity", "largest eigenvalues of the design matrix per arm pair");
  add_moment_options(complexity, co);
  complexity->add_flag("--json", complexity_json_out, "print JSON instead of a table");

  MomentOptions bo;
  std::string bound_kind = "aronow_samii", bound_csv, cert_path;
  bool clip = false;
  auto* bound = app.add_subcommand("bound", "build and certify a variance bound");
  add_moment_options(bound, bo);
  bound->add_option("--kind", bound_kind, "aronow_samii or neyman")
      ->check(CLI::IsMember({"aronow_samii", "neyman"}));
  bound->add_flag("--psd-clip", clip, "zero the negative spectrum of the bound over p");
  bound->add_option("--out", bound_csv, "write bound triplets");
  bound->add_option("--certificate", cert_path, "write the certificate JSON");

  MomentOptions eo;
  std::string data_csv, cov_csv, est_list = "HT", contrast_str, report_path, est_bound = "aronow_samii";
  std::vector<int> topcode;
  double level = 0.95;
  auto* estimate = app.add_subcommand("estimate", "estimate on one observed dataset");
  add_moment_options(estimate, eo);
  estimate->add_option("--data", data_csv, "observed data: unit_id,arm,y")->required()->check(CLI::ExistingFile);
  estimate->add_option("--covariates", cov_csv, "covariates: unit_id,x1..xp")->check(CLI::ExistingFile);
  estimate->add_option("--topcode", topcode, "1-based covariate columns to top-code at 5");
  estimate->add_option("--estimators", est_list, "comma-separated estimator names");
  estimate->add_option("--contrast", contrast_str, "comma-separated contrast weights")->required();
  estimate->add_option("--bound", est_bound, "aronow_samii or neyman")->check(CLI::IsMember({"aronow_samii", "neyman"}));
  estimate->add_option("--level", level, "confidence level")->check(CLI::Range(0.0, 1.0));
  estimate->add_option("--out", report_path, "write the report JSON");

  std::string sim_config, sim_out, sim_records, sim_table;
  int sim_workers = 0;
  std::int64_t sim_reps = 0;
  bool sim_text = false;
  auto* simulate = app.add_subcommand("simulate", "run a simulation config and emit the metrics table");
  simulate->add_option("config", sim_config, "simulation config (JSON)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--workers", sim_workers, "override worker count")->check(CLI::PositiveNumber);
  simulate->add_option("--replications", sim_reps, "override replication count")->check(CLI::PositiveNumber);
  simulate->add_option("--out", sim_out, "metrics CSV path");
  simulate->add_option("--records", sim_records, "per-replication CSV path");
  simulate->add_option("--table", sim_table, "two-decimal text table path");
  simulate->add_flag("--text", sim_text, "print the text table to stdout");

  auto* check = app.add_subcommand("check", "run oracle and invariant checks on small designs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (moments->parsed()) {
      const DesignMoments m = get_moments(mo);
      if (!pi_csv.empty()) {
        auto out = open_out(pi_csv);
        write_pi_csv(out, m);
      }
      if (!p_csv.empty()) {
        auto out = open_out(p_csv);
        write_matrix_triplets(out, m.p);
      }
      if (!d_csv.empty()) {
        auto out = open_out(d_csv);
        write_matrix_triplets(out, m.D);
      }
      if (!tensor_csv.empty()) {
        if (mo.design.empty()) throw std::invalid_argument("--tensor-csv needs --design");
        auto out = open_out(tensor_csv);
        write_tensor_csv(out, second_order_tensor(load_design(mo.design)));
      }
      if (!save_path.empty()) save_moments(save_path, m);
      std::cout << "n=" << m.n << " k=" << m.k << " method="
                << (m.method == MomentMethod::exact ? "exact" : "monte_carlo") << " reps=" << m.reps
                << " zero_cells=" << m.zero_mask.count() << " possibly_zero=" << m.possibly_zero.count() << '\n';
      if (pi_csv.empty() && d_csv.empty() && p_csv.empty() && save_path.empty() && tensor_csv.empty())
        write_pi_csv(std::cout, m);
    } else if (complexity->parsed()) {
      const DesignMoments m = get_moments(co);
      const auto pairs = pairwise_complexity(m);
      if (complexity_json_out) {
        std::cout << complexity_json(pairs, m) << '\n';
      } else {
        const auto whole = largest_eigenvalue(m.D, false, m.zero_mask, 1e-8, 100000, m.possibly_zero);
        const auto whole0 = largest_eigenvalue(m.D, true, m.zero_mask, 1e-8, 100000, m.possibly_zero);
        std::cout << "|||D|||_2 = " << format_eigen(whole) << "   |||D0|||_2 = " << format_eigen(whole0) << "\n\n";
        for (int which = 0; which < 2; ++which) {
          std::cout << (which == 0 ? "arm-pair |||D|||_2" : "arm-pair |||D0|||_2") << '\n' << std::setw(6) << "";
          for (int b = 0; b < m.k; ++b) std::cout << std::setw(10) << b + 1;
          std::cout << '\n';
          for (int a = 0; a < m.k; ++a) {
            std::cout << std::setw(6) << a + 1;
            for (int b = 0; b < m.k; ++b) {
              std::string cell = "";
              for (const auto& p : pairs)
                if (p.arm_a == b && p.arm_b == a) cell = format_eigen(which == 0 ? p.full : p.zero_diag);
              std::cout << std::setw(10) << cell;
            }
            std::cout << '\n';
          }
          std::cout << '\n';
        }
        for (const auto& p : pairs)
          for (const auto* e : {&p.full, &p.zero_diag})
            if (!e->warning.empty()) std::cerr << "arms " << p.arm_a + 1 << "," << p.arm_b + 1 << ": " << e->warning << '\n';
      }
    } else if (bound->parsed()) {
      DesignSpec design;
      const DesignMoments m = get_moments(bo, &design);
      if (bound_kind == "neyman" && bo.design.empty()) throw std::invalid_argument("the Neyman bound needs --design");
      const VarianceBound b = make_bound(design, m, bound_kind, clip);
      const BoundCertificate cert = certify_bound(m, b);
      const std::string cert_text = certificate_json(cert, b);
      if (!cert_path.empty()) write_file(cert_path, cert_text + "\n");
      std::cout << cert_text << '\n';
      if (!bound_csv.empty()) {
        auto out = open_out(bound_csv);
        write_matrix_triplets(out, b.Dt);
      }
      return cert.passed() ? 0 : 2;
    } else if (estimate->parsed()) {
      DesignSpec design;
      const DesignMoments m = get_moments(eo, &design);
      const ObservedTable obs = read_observed_csv(data_csv);
      if (static_cast<int>(obs.arm_of.size()) != m.n) throw std::invalid_argument("data rows differ from design size");
      Mat X(m.n, 0);
      if (!cov_csv.empty()) {
        CovariateOptions opts;
        for (int c : topcode) opts.topcode_columns.push_back(c - 1);
        X = preprocess_covariates(read_covariates_csv(cov_csv), opts);
      }
      AssignmentRealization z{m.n, m.k, obs.arm_of};
      const ExperimentData d = make_data(z, obs.y, X, m.pi);
      if (est_bound == "neyman" && eo.design.empty()) throw std::invalid_argument("the Neyman bound needs --design");
      const VarianceBound b = make_bound(design, m, est_bound, false);
      const auto cv = parse_list(contrast_str);
      const Vec c = Eigen::Map<const Vec>(cv.data(), static_cast<Eigen::Index>(cv.size()));
      if (c.size() != m.k) throw std::invalid_argument("contrast length differs from arm count");
      EstimationContext ctx;
      ctx.moments = &m;
      ctx.bound = &b;
      ctx.level = level;
      std::vector<EstimateReport> reports;
      for (const auto& name : split_csv_line(est_list)) reports.push_back(run_estimator(name, d, ctx, c));
      const std::string text = reports_json(reports);
      if (!report_path.empty()) write_file(report_path, text + "\n");
      std::cout << text << '\n';
    } else if (simulate->parsed()) {
      SimSetup setup = load_sim_config(sim_config);
      if (sim_workers > 0) setup.config.workers = sim_workers;
      if (sim_reps > 0) setup.config.replications = sim_reps;
      if (!sim_out.empty()) setup.metrics_csv = sim_out;
      if (!sim_records.empty()) setup.records_csv = sim_records;
      if (!sim_table.empty()) setup.table_txt = sim_table;
      setup.config.keep_records = !setup.records_csv.empty();
      const MetricsTable table = run_simulation(setup.config);
      if (setup.metrics_csv.empty())
        std::cout << table.to_csv();
      else
        write_file(setup.metrics_csv, table.to_csv());
      if (!setup.records_csv.empty()) write_file(setup.records_csv, table.records_csv());
      if (!setup.table_txt.empty()) write_file(setup.table_txt, table.to_text());
      if (sim_text) std::cout << table.to_text();
    } else if (check->parsed()) {
      return cli::run_checks(std::cout) == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
