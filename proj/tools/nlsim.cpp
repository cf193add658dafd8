#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "nlsim/causality.hpp"
#include "nlsim/protocols.hpp"

namespace fs = std::filesystem;
using namespace nlsim;

namespace {

const std::vector<std::string> kProtocols = {
    "aa_total_spin_z", "aa_verify_singlet", "verify_canonical_equal", "gr_twisted",
    "gr_general_angle", "partial_teleport", "vaidman_bipartite", "vaidman_three_party"};

const std::vector<std::string> kAudits = {"phi_scan", "pv_theorems", "entangled_projector",
                                          "degenerate_demo", "protocol_nosignal"};

Json catalog_json() {
  Json protocols = Json::array();
  auto proto = [&](const std::string& name, const std::string& source,
                   const std::string& summary) {
    protocols.push_back({{"name", name}, {"source", source}, {"summary", summary}});
  };
  proto("aa_total_spin_z", "Aharonov-Albert 1981",
        "nondemolition measurement of the total spin z-component of two qubits");
  proto("aa_verify_singlet", "Aharonov-Albert 1981",
        "verifies the singlet by measuring the x, y and z spin sums");
  proto("verify_canonical_equal", "Aharonov-Albert 1981",
        "verifies the equal-coefficient canonical state of M parties, local dimension K");
  proto("gr_twisted", "Groisman-Reznik 2002",
        "twisted-product-basis measurement with one shared pair");
  proto("gr_general_angle", "Groisman-Reznik 2002",
        "general-angle twisted basis via repeat-until-success remote rotation");
  proto("partial_teleport", "Vaidman 2003",
        "teleportation with recorded outcomes and withheld corrections");
  proto("vaidman_bipartite", "Vaidman 2003",
        "instantaneous nonlocal measurement by nested partial teleportation");
  proto("vaidman_three_party", "Vaidman 2003", "three-site variant, one qubit per site");

  Json audits = Json::array();
  auto audit = [&](const std::string& name, const std::string& source,
                   const std::string& summary) {
    audits.push_back({{"name", name}, {"source", source}, {"summary", summary}});
  };
  audit("phi_scan", "Aharonov-Albert-Vaidman 1986",
        "signaling of the ideal phi-family measurement over a 32-point grid");
  audit("pv_theorems", "Popescu-Vaidman 1994",
        "theorem 1 spread and theorem 2 linearity residuals for a verification model");
  audit("entangled_projector", "Popescu-Vaidman 1994",
        "signaling of the ideal entangled-projector measurement versus alpha");
  audit("degenerate_demo", "Aharonov-Albert 1981",
        "signaling from resolving degenerate product eigenstates");
  audit("protocol_nosignal", "no-signaling invariant",
        "scans every shipped measurement model for signaling");

  Json states = Json::array();
  for (const char* n : {"psi_plus", "psi_minus", "phi_plus", "phi_minus", "twisted_1",
                        "twisted_2", "twisted_3", "twisted_4"})
    states.push_back(n);
  states.push_back("canonical_K_M (equal-coefficient canonical state)");
  states.push_back("product:<u|d|+|-> per qubit, comma separated");
  states.push_back("inline JSON {\"dims\":[...],\"amps\":[[re,im],...]}");

  return Json{{"protocols", protocols}, {"audits", audits}, {"states", states}};
}

Ket parse_state(const std::string& spec) {
  if (spec == "psi_plus") return make_bell(BellKind::PsiPlus);
  if (spec == "psi_minus") return make_bell(BellKind::PsiMinus);
  if (spec == "phi_plus") return make_bell(BellKind::PhiPlus);
  if (spec == "phi_minus") return make_bell(BellKind::PhiMinus);
  for (int i = 1; i <= 4; ++i)
    if (spec == "twisted_" + std::to_string(i)) return twisted_state(i);
  if (spec.rfind("canonical_", 0) == 0) {
    std::istringstream in(spec.substr(10));
    int k = 0, m = 0;
    char sep = 0;
    if (!(in >> k >> sep >> m) || sep != '_' || k < 2 || m < 2)
      throw PreconditionError("state: canonical spec must be canonical_K_M with K,M >= 2");
    std::vector<int> dims(m, k);
    Vec v = Vec::Zero(product_of(dims));
    long stride = 0;
    for (int s = 0; s < m; ++s) stride = stride * k + 1;
    for (int i = 0; i < k; ++i) v(i * stride) = 1 / std::sqrt(static_cast<double>(k));
    return Ket(std::move(dims), std::move(v));
  }
  if (spec.rfind("product:", 0) == 0) {
    std::vector<Ket> factors;
    std::istringstream in(spec.substr(8));
    std::string tok;
    while (std::getline(in, tok, ',')) {
      Vec v(2);
      if (tok == "u") v << 1, 0;
      else if (tok == "d") v << 0, 1;
      else if (tok == "+") v << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
      else if (tok == "-") v << 1 / std::sqrt(2.0), -1 / std::sqrt(2.0);
      else throw PreconditionError("state: product factors must be u, d, + or -");
      factors.emplace_back(std::vector<int>{2}, std::move(v));
    }
    if (factors.empty()) throw PreconditionError("state: empty product spec");
    Ket out = factors[0];
    for (std::size_t i = 1; i < factors.size(); ++i) out = tensor(out, factors[i]);
    return out;
  }
  if (!spec.empty() && spec[0] == '{') {
    try {
      return ket_from_json(Json::parse(spec));
    } catch (const Json::exception& e) {
      throw PreconditionError(std::string("state: bad JSON spec: ") + e.what());
    }
  }
  throw PreconditionError("state: unknown spec '" + spec + "'");
}

struct RunConfig {
  std::string protocol, audit, state = "psi_minus", outDir, format = "json";
  std::uint64_t seed = 0;
  bool seedSet = false;
  long trials = 1;
  int maxRounds = 16;
  double alpha = 0.0;
  long ebits = 256;
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw ResourceError("cannot open output file " + p.string());
  out << text;
  if (!out.good()) throw ResourceError("write failed for " + p.string());
}

ProtocolResult run_once(const RunConfig& cfg, const Ket& psi, RngStream& rng) {
  if (cfg.protocol == "aa_total_spin_z") return aa_total_spin_z(psi, rng);
  if (cfg.protocol == "aa_verify_singlet") return aa_verify_singlet(psi, rng);
  if (cfg.protocol == "verify_canonical_equal")
    return verify_canonical_equal(psi, psi.subsystems(), psi.dims()[0], rng);
  if (cfg.protocol == "gr_twisted") {
    EbitPool pool(cfg.ebits, BellKind::PhiPlus);
    return gr_twisted_basis_measure(psi, pool, rng);
  }
  if (cfg.protocol == "gr_general_angle") {
    EbitPool pool(cfg.ebits, BellKind::PhiPlus);
    return gr_general_angle_measure(psi, cfg.alpha, pool, cfg.maxRounds, rng);
  }
  if (cfg.protocol == "partial_teleport") {
    EbitPool pool(cfg.ebits, BellKind::PsiMinus);
    ProtocolResult r;
    PartialTeleportResult t =
        partial_teleport(psi, {0}, pool, rng, &r.transcript, "Alice", 1);
    r.inferred = {{"outcome", bell_name(t.outcomes[0])}};
    r.post = t.post;
    r.resources.ebitsConsumed = 1;
    return r;
  }
  // The Vaidman runners measure in the twisted basis (bipartite) or the
  // computational-diagonal observable (three sites).
  if (cfg.protocol == "vaidman_bipartite") {
    EbitPool pool(cfg.ebits, BellKind::PsiMinus);
    Mat v(4, 4);
    for (int i = 0; i < 4; ++i) v.col(i) = twisted_state(i + 1).amps();
    Vec values(4);
    values << 1, 2, 3, 4;
    Operator o = Operator::hermitian({2, 2}, v * values.asDiagonal() * v.adjoint());
    return vaidman_bipartite_measure(psi, o, 1, pool, cfg.maxRounds, rng);
  }
  if (cfg.protocol == "vaidman_three_party") {
    EbitPool pool(cfg.ebits, BellKind::PsiMinus);
    Vec values(8);
    for (int i = 0; i < 8; ++i) values(i) = i;
    Operator o = Operator::hermitian({2, 2, 2}, values.asDiagonal());
    return vaidman_three_party_measure(psi, o, pool, cfg.maxRounds, rng);
  }
  throw PreconditionError("unreachable protocol dispatch");
}

// Exact outcome probabilities keyed the same way the frequency table keys
// empirical results; empty when no closed form is wired up.
std::map<std::string, double> exact_distribution(const RunConfig& cfg, const Ket& psi) {
  std::map<std::string, double> out;
  if (cfg.protocol == "aa_total_spin_z") {
    for (auto [value, p] : sum_distribution(psi, {{spin_z(), 0}, {spin_z(), 1}}))
      out[Json{{"value", value}}.dump()] = p;
  } else if (cfg.protocol == "gr_twisted") {
    for (int i = 1; i <= 4; ++i) {
      double p = psi.fidelity(twisted_state(i));
      if (p > 1e-15) out[Json{{"index", i}}.dump()] = p;
    }
  } else if (cfg.protocol == "aa_verify_singlet") {
    double p = psi.fidelity(make_bell(BellKind::PsiMinus));
    if (p > 1e-15) out[Json{{"verified", true}}.dump()] = p;
    if (1 - p > 1e-15) out[Json{{"verified", false}}.dump()] = 1 - p;
  }
  return out;
}

int run_protocol(const RunConfig& cfg) {
  Ket psi = parse_state(cfg.state);
  RngStream root(cfg.seed);
  fs::create_directories(cfg.outDir);
  fs::path base = fs::path(cfg.outDir) / cfg.protocol;

  std::map<std::string, long> freq;
  Json summary;
  for (long t = 0; t < cfg.trials; ++t) {
    RngStream rng = root.derive(t);
    ProtocolResult r = run_once(cfg, psi, rng);
    r.transcript.verify_causality();
    ++freq[r.inferred.dump()];
    if (t == 0) {
      write_text(base.string() + "_transcript.jsonl", r.transcript.to_json_lines());
      summary = {{"protocol", cfg.protocol},
                 {"state", cfg.state},
                 {"seed", cfg.seed},
                 {"trials", cfg.trials},
                 {"inferred", r.inferred},
                 {"resources",
                  {{"ebitsConsumed", r.resources.ebitsConsumed},
                   {"rounds", r.resources.rounds},
                   {"messages", r.resources.messages}}},
                 {"instantaneousStage", r.transcript.stage_is_instantaneous()},
                 {"extra", r.extra}};
    }
  }
  write_text(base.string() + "_summary.json", summary.dump(2) + "\n");

  if (cfg.trials > 1) {
    auto exact = exact_distribution(cfg, psi);
    std::ostringstream csv;
    csv << "outcome,count,frequency,exactProbability\n";
    for (const auto& [key, count] : freq) {
      csv << '"';
      for (char c : key) csv << (c == '"' ? std::string("\"\"") : std::string(1, c));
      csv << "\"," << count << ',' << static_cast<double>(count) / cfg.trials << ',';
      if (auto it = exact.find(key); it != exact.end()) csv << it->second;
      csv << '\n';
    }
    write_text(base.string() + "_freq.csv", csv.str());
  }
  std::cout << summary.dump(2) << std::endl;
  return 0;
}

int run_audit(const RunConfig& cfg) {
  fs::create_directories(cfg.outDir);
  fs::path base = fs::path(cfg.outDir) / cfg.audit;
  std::uint64_t seed = cfg.seedSet ? cfg.seed : 1;
  Json report = {{"audit", cfg.audit}};

  if (cfg.audit == "phi_scan") {
    auto scan = phi_scan(32);
    std::ostringstream csv;
    csv << "phi,maxDeviation\n";
    Json rows = Json::array();
    for (auto [phi, dev] : scan) {
      csv << phi << ',' << dev << '\n';
      rows.push_back({{"phi", phi}, {"maxDeviation", dev}});
    }
    write_text(base.string() + ".csv", csv.str());
    report["grid"] = rows;
  } else if (cfg.audit == "pv_theorems") {
    MeasurementModel model = pv_psi0_model();
    double isq = 1 / std::sqrt(2.0);
    Vec psi0v = Vec::Zero(9);
    psi0v(0) = isq;
    psi0v(4) = isq;
    Ket psi0({3, 3}, psi0v);
    RngStream rng(seed);
    Vec vals(3);
    vals << 0, 1, 2;
    Operator a1 = Operator::hermitian({3}, vals.asDiagonal());

    double spread = 0;
    std::vector<Ket> tests;
    for (int n = 0; n < 50; ++n) {
      RngStream sub = rng.derive(n);
      Vec v = Vec::Zero(9);
      for (int i = 0; i < 9; ++i)
        if (i / 3 < 2) v(i) = cx(sub.gaussian(), sub.gaussian());
      tests.emplace_back(std::vector<int>{3, 3}, std::move(v), true);
    }
    for (double a : {0.0, 1.0, 2.0})
      spread = std::max(spread, check_pv_theorem1(model, psi0, 2, tests, a1, a));

    double residual = 0;
    for (int n = 0; n < 100; ++n) {
      RngStream sub = rng.derive(1000 + n);
      Vec vp = Vec::Zero(9), vpp = Vec::Zero(9);
      for (int i = 0; i < 9; ++i)
        (i / 3 < 2 ? vp(i) : vpp(i)) = cx(sub.gaussian(), sub.gaussian());
      Ket prime({3, 3}, std::move(vp), true);
      Ket doublePrime({3, 3}, std::move(vpp), true);
      double x = sub.uniform();
      cx alpha = std::sqrt(x), beta = std::polar(std::sqrt(1 - x), sub.uniform() * 6.28);
      for (double a : {0.0, 1.0, 2.0})
        residual = std::max(residual, check_pv_theorem2(model, psi0, 2, prime, doublePrime,
                                                        alpha, beta, a1, a));
    }
    report["theorem1Spread"] = spread;
    report["theorem2Residual"] = residual;
    report["pass"] = spread < 1e-9 && residual < 1e-9;
  } else if (cfg.audit == "entangled_projector") {
    Json rows = Json::array();
    for (double a2 : {0.5, 0.8, 1.0}) {
      SignalingReport r = entangled_projector_signaling(std::sqrt(a2), std::sqrt(1 - a2));
      rows.push_back({{"alphaSquared", a2}, {"report", signaling_report_to_json(r)}});
    }
    report["cases"] = rows;
  } else if (cfg.audit == "degenerate_demo") {
    report["report"] = signaling_report_to_json(degenerate_eigenstate_signal_demo());
  } else if (cfg.audit == "protocol_nosignal") {
    Json rows = Json::array();
    double worst = 0;
    std::vector<MeasurementModel> models;
    models.push_back(total_spin_z_model());
    models.push_back(verify_singlet_model());
    models.push_back(canonical_equal_model());
    models.push_back(gr_twisted_model());
    models.push_back(vaidman_round1_model());
    models.push_back(pv_psi0_model());
    for (const auto& model : models) {
      Vec v = Vec::Zero(product_of(model.systemDims));
      v(0) = 1 / std::sqrt(2.0);
      v(v.size() - 1) = 1 / std::sqrt(2.0);
      Ket psi(model.systemDims, std::move(v));
      SignalingReport r = bidirectional_scan(model, psi, 25, seed);
      worst = std::max(worst, r.maxDeviation);
      rows.push_back({{"model", model.name}, {"report", signaling_report_to_json(r)}});
    }
    report["models"] = rows;
    report["worstDeviation"] = worst;
    report["pass"] = worst < 1e-9;
  }

  write_text(base.string() + "_report.json", report.dump(2) + "\n");
  std::cout << report.dump(2) << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  bool catalog = false, machine = false;
  if (const char* env = std::getenv("NLSIM_OUT_DIR")) cfg.outDir = env;
  if (cfg.outDir.empty()) cfg.outDir = ".";

  CLI::App app{"simulator and no-signaling auditor for nonlocal measurement protocols"};
  app.set_config("--config", "", "flat key=value config file");
  app.add_flag("--catalog", catalog, "list protocols, audits and named states");
  app.add_flag("--json", machine, "machine-readable catalog");
  auto* popt = app.add_option("--protocol", cfg.protocol, "protocol to run");
  auto* aopt = app.add_option("--audit", cfg.audit, "audit to run");
  popt->excludes(aopt);
  app.add_option("--state", cfg.state, "input state spec");
  auto* sopt = app.add_option("--seed", cfg.seed, "RNG seed (mandatory for protocol runs)");
  app.add_option("--trials", cfg.trials, "number of Monte Carlo trials")
      ->check(CLI::PositiveNumber);
  app.add_option("--max-rounds", cfg.maxRounds, "round budget for iterative protocols");
  app.add_option("--alpha", cfg.alpha, "angle for gr_general_angle");
  app.add_option("--ebits", cfg.ebits, "entangled-pair budget");
  app.add_option("--out", cfg.outDir, "output directory");
  app.add_option("--format", cfg.format, "summary format")
      ->check(CLI::IsMember({"json", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  cfg.seedSet = sopt->count() > 0;

  try {
    if (catalog || (cfg.protocol.empty() && cfg.audit.empty())) {
      Json c = catalog_json();
      if (machine) {
        std::cout << c.dump(2) << std::endl;
      } else {
        std::cout << "protocols:\n";
        for (const auto& p : c["protocols"])
          std::cout << "  " << p["name"].get<std::string>() << " ("
                    << p["source"].get<std::string>() << "): "
                    << p["summary"].get<std::string>() << "\n";
        std::cout << "audits:\n";
        for (const auto& a : c["audits"])
          std::cout << "  " << a["name"].get<std::string>() << " ("
                    << a["source"].get<std::string>() << "): "
                    << a["summary"].get<std::string>() << "\n";
        std::cout << "named states:\n";
        for (const auto& s : c["states"]) std::cout << "  " << s.get<std::string>() << "\n";
      }
      return 0;
    }
    if (!cfg.protocol.empty()) {
      if (std::find(kProtocols.begin(), kProtocols.end(), cfg.protocol) == kProtocols.end()) {
        std::cerr << "unknown protocol '" << cfg.protocol << "'; available:";
        for (const auto& p : kProtocols) std::cerr << ' ' << p;
        std::cerr << std::endl;
        return 2;
      }
      if (!cfg.seedSet) {
        std::cerr << "--seed is mandatory for protocol runs" << std::endl;
        return 2;
      }
      return run_protocol(cfg);
    }
    if (std::find(kAudits.begin(), kAudits.end(), cfg.audit) == kAudits.end()) {
      std::cerr << "unknown audit '" << cfg.audit << "'; available:";
      for (const auto& a : kAudits) std::cerr << ' ' << a;
      std::cerr << std::endl;
      return 2;
    }
    return run_audit(cfg);
  } catch (const PreconditionError& e) {
    std::cerr << "precondition: " << e.what() << std::endl;
    return 3;
  } catch (const ResourceError& e) {
    std::cerr << "resource: " << e.what() << std::endl;
    return 4;
  } catch (const InternalError& e) {
    std::cerr << "internal: " << e.what() << std::endl;
    return 5;
  }
}
