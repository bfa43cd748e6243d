#include "pdemts/evalcli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "pdemts/bayes_models.hpp"
#include "pdemts/diff.hpp"
#include "pdemts/discover.hpp"
#include "pdemts/featlib.hpp"
#include "pdemts/metrics.hpp"
#include "pdemts/net.hpp"
#include "pdemts/pinn.hpp"
#include "pdemts/sparse.hpp"
#include "pdemts/symreg.hpp"

namespace pdemts {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(s);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

double parse_number(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': value out of range: '" + v + "'");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  const auto n = parse_count(key, v);
  if (n > 1000000000ULL) throw ConfigError("key '" + key + "': value out of range: '" + v + "'");
  return static_cast<int>(n);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

struct Key {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define PDEMTS_STR(field) \
  Key { #field, [](RunConfig& c, const std::string& v) { c.field = v; }, [](const RunConfig& c) { return c.field; } }
#define PDEMTS_SIZE(name, field)                                                                    \
  Key {                                                                                             \
    name, [](RunConfig& c, const std::string& v) { c.field = parse_count(name, v); },               \
        [](const RunConfig& c) { return std::to_string(c.field); }                                  \
  }
#define PDEMTS_INT(field)                                                                           \
  Key {                                                                                             \
    #field, [](RunConfig& c, const std::string& v) { c.field = parse_int(#field, v); },              \
        [](const RunConfig& c) { return std::to_string(c.field); }                                  \
  }
#define PDEMTS_NUM(field)                                                                           \
  Key {                                                                                             \
    #field, [](RunConfig& c, const std::string& v) { c.field = parse_number(#field, v); },           \
        [](const RunConfig& c) { return num(c.field); }                                             \
  }

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys = {
      PDEMTS_STR(dataset),
      PDEMTS_STR(phase),
      PDEMTS_STR(method),
      PDEMTS_STR(preset),
      PDEMTS_SIZE("max_rows", max_rows),
      PDEMTS_SIZE("lag", lag),
      PDEMTS_SIZE("split_start", split_start),
      PDEMTS_SIZE("train", n_train),
      PDEMTS_SIZE("validation", n_validation),
      PDEMTS_SIZE("test", n_test),
      PDEMTS_SIZE("seed", seed),
      PDEMTS_INT(epochs),
      PDEMTS_SIZE("batch_size", batch_size),
      PDEMTS_NUM(lr),
      Key{"early_stopping", [](RunConfig& c, const std::string& v) { c.early_stopping = parse_bool("early_stopping", v); },
          [](const RunConfig& c) { return std::string(c.early_stopping ? "true" : "false"); }},
      PDEMTS_INT(patience),
      PDEMTS_STR(pdes),
      PDEMTS_STR(pde_select),
      PDEMTS_NUM(physics_weight),
      PDEMTS_NUM(sigma_pde),
      PDEMTS_INT(degree),
      PDEMTS_INT(library_degree),
      PDEMTS_NUM(correlation_threshold),
      PDEMTS_NUM(selection_r2),
      PDEMTS_NUM(gate_r2),
      PDEMTS_SIZE("max_fit_rows", max_fit_rows),
      PDEMTS_NUM(stlsq_threshold),
      PDEMTS_NUM(lasso_tol),
      PDEMTS_INT(lasso_max_iter),
      PDEMTS_SIZE("gp_population", gp_population),
      PDEMTS_INT(gp_generations),
      PDEMTS_SIZE("sr_rows", sr_rows),
      PDEMTS_SIZE("bayes_samples", bayes_samples),
      PDEMTS_INT(tune),
      PDEMTS_INT(draws),
      PDEMTS_INT(chains),
      PDEMTS_INT(max_treedepth),
      PDEMTS_NUM(target_accept),
      PDEMTS_INT(map_steps),
      PDEMTS_INT(advi_steps),
  };
  return keys;
}

#undef PDEMTS_STR
#undef PDEMTS_SIZE
#undef PDEMTS_INT
#undef PDEMTS_NUM

const std::vector<std::string> kExtractMethods = {"cnn", "tcn1", "tcn2", "sindy", "lasso", "blasso", "sr"};
const std::vector<std::string> kPredictMethods = {"nn", "pinn", "blr", "pi_blr", "bnn", "bpinn"};

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

bool surrogate_method(const std::string& m) { return m == "cnn" || m == "tcn1" || m == "tcn2"; }
bool physics_method(const std::string& m) { return m == "pinn" || m == "pi_blr" || m == "bpinn"; }
bool network_method(const std::string& m) {
  return surrogate_method(m) || m == "nn" || m == "pinn" || m == "bnn" || m == "bpinn";
}

const std::vector<std::string> kInputs = {kElapsedColumn,    "Global_active_power", "Global_reactive_power", "Voltage",
                                          "Sub_metering_1", "Sub_metering_2",      "Sub_metering_3"};
const std::vector<std::string> kTargets = {"Global_active_power", "Global_reactive_power", "Voltage",
                                           "Sub_metering_1",      "Sub_metering_2",        "Sub_metering_3"};
const std::string kIntensity = "Global_intensity";
constexpr double kScreenThreshold = 1.0 - 1e-9;

// ---------------------------------------------------------------- timing

class Stages {
 public:
  template <class F>
  auto run(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto done = [&] {
      times_.emplace_back(name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    };
    try {
      if constexpr (std::is_void_v<decltype(f())>) {
        f();
        done();
      } else {
        auto out = f();
        done();
        return out;
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  }

  void write(std::ostream& out) const {
    double total = 0.0;
    char buf[96];
    for (const auto& [name, s] : times_) {
      std::snprintf(buf, sizeof buf, "%s %.3f\n", name.c_str(), s);
      out << buf;
      total += s;
    }
    std::snprintf(buf, sizeof buf, "total %.3f\n", total);
    out << buf;
  }

  double total() const {
    double t = 0.0;
    for (const auto& [name, s] : times_) t += s;
    return t;
  }

 private:
  std::vector<std::pair<std::string, double>> times_;
};

// ---------------------------------------------------------------- conversions

Eigen::MatrixXd to_matrix(const Tensor& t) {
  const std::size_t n = t.dim(0), m = t.size() / std::max<std::size_t>(n, 1);
  Eigen::MatrixXd out(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) = t[i * m + j];
  return out;
}

std::vector<double> col(const Eigen::MatrixXd& m, Eigen::Index j) {
  std::vector<double> out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[i] = m(i, j);
  return out;
}

std::vector<std::string> target_names(std::size_t p) {
  std::vector<std::string> out;
  for (std::size_t j = 1; j <= p; ++j) out.push_back("Y" + std::to_string(j));
  return out;
}

std::string derivative_name(const Symbol& s) {
  return "dY" + std::to_string(s.target) + "/dX" + std::to_string(s.input);
}

// ---------------------------------------------------------------- report

struct Report {
  std::string phase, method;
  std::vector<MetricsRow> metrics;
  std::vector<std::string> degenerate;
  PredictionTable predictions;
  std::vector<std::pair<std::string, std::string>> manifest;

  void note(const std::string& k, const std::string& v) { manifest.emplace_back(k, v); }

  void add_block(const std::vector<std::size_t>& index, const std::vector<std::string>& names,
                 const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred) {
    const Metrics m = compute_metrics(truth, pred, names);
    auto& pt = predictions;
    if (pt.names.empty()) {
      pt.index = index;
      pt.truth.resize(static_cast<Eigen::Index>(index.size()), 0);
      pt.pred.resize(static_cast<Eigen::Index>(index.size()), 0);
    } else if (pt.index != index) {
      throw std::logic_error("prediction blocks must share one index");
    }
    const Eigen::Index c0 = pt.truth.cols(), k = truth.cols();
    pt.truth.conservativeResize(Eigen::NoChange, c0 + k);
    pt.pred.conservativeResize(Eigen::NoChange, c0 + k);
    pt.truth.rightCols(k) = truth;
    pt.pred.rightCols(k) = pred;
    for (const auto& r : m.rows) {
      pt.names.push_back(r.variable);
      metrics.push_back({phase, method, r.variable, r.fit});
      if (r.degenerate) degenerate.push_back(r.variable);
    }
  }
};

std::vector<std::size_t> target_rows(const LagWindowSet& set) {
  std::vector<std::size_t> out(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) out[i] = set.first_row(i) + set.lag();
  return out;
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig tc;
  tc.adam.lr = c.lr;
  tc.epochs = c.epochs;
  tc.batch_size = c.batch_size;
  tc.early_stopping = c.early_stopping;
  tc.patience = c.patience;
  tc.seed = c.seed;
  return tc;
}

SamplerConfig sampler_config(const RunConfig& c, std::uint64_t salt = 0) {
  SamplerConfig sc;
  sc.chains = c.chains;
  sc.tune = c.tune;
  sc.draws = c.draws;
  sc.max_treedepth = c.max_treedepth;
  sc.target_accept = c.target_accept;
  sc.seed = c.seed + salt;
  return sc;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  body(f);
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

void note_sampler(Report& rep, const PosteriorSamples& s, const std::string& prefix = "") {
  for (std::size_t c = 0; c < s.accept_rate.size(); ++c) {
    const std::string chain = prefix + "chain" + std::to_string(c);
    rep.note(chain + "_accept_rate", num(s.accept_rate[c]));
    rep.note(chain + "_divergences", std::to_string(s.divergences[c]));
    rep.note(chain + "_step_size", num(s.step_size[c]));
  }
  for (const auto& w : s.warnings) rep.note("warning", w);
}

// ---------------------------------------------------------------- PDE files

std::vector<PdeSpec> load_pdes(const RunConfig& c) {
  std::ifstream f(c.pdes);
  if (!f) throw ConfigError("cannot open PDE file '" + c.pdes + "'");
  auto pdes = read_pde_file(f);
  if (c.pde_select == "mask") return pdes;
  std::set<std::string> wanted;
  if (c.pde_select != "none") {
    for (auto s : split_on(c.pde_select, ',')) {
      s = trim(s);
      if (!s.empty()) wanted.insert(s);
    }
  }
  std::set<std::string> seen;
  for (auto& p : pdes) {
    p.mask = wanted.count(p.lhs.text()) > 0;
    seen.insert(p.lhs.text());
  }
  for (const auto& w : wanted) {
    if (!seen.count(w)) throw ConfigError("pde_select names '" + w + "', which is not in " + c.pdes);
  }
  return pdes;
}

std::string active_list(const std::vector<PdeSpec>& pdes) {
  std::vector<std::string> on;
  for (const auto& p : pdes)
    if (p.mask) on.push_back(p.lhs.text());
  return on.empty() ? "none" : join(on, ",");
}

// ---------------------------------------------------------------- extract

void extract_surrogate(const RunConfig& c, const PreparedData& data, const fs::path& out, Stages& st, Report& rep) {
  const auto& w = data.windows;
  const NetworkSpec spec = make_preset(c.preset, c.lag, data.inputs.size(), data.targets.size());
  rep.note("preset", c.preset);
  rep.note("receptive_field", std::to_string(receptive_field(spec)));
  auto trained = st.run("train", [&] { return train(Network(spec, c.seed), w.train, w.validation, train_config(c)); });
  rep.note("parameters", std::to_string(trained.net.parameter_count()));
  write_file(out / "history.csv", [&](std::ostream& f) { trained.write_history(f); });
  write_file(out / "model.txt", [&](std::ostream& f) { trained.net.save(f); });

  const auto index = target_rows(w.test);
  st.run("predict", [&] {
    rep.add_block(index, target_names(data.targets.size()), to_matrix(w.test.all_y()), to_matrix(trained.net.predict(w.test)));
  });

  DiscoveryConfig dc;
  dc.correlation_threshold = c.correlation_threshold;
  dc.degree = c.degree;
  dc.selection_r2 = c.selection_r2;
  dc.gate_r2 = c.gate_r2;
  dc.max_fit_rows = c.max_fit_rows;
  const auto disc = st.run("discover", [&] { return run_discovery(trained.net, w, dc); });
  disc.write(out.string());
  for (const auto& wmsg : disc.warnings) rep.note("warning", wmsg);

  st.run("derivatives", [&] {
    const auto h = harvest(trained.net, w.test);
    std::vector<std::string> names;
    std::vector<std::vector<double>> truth, pred;
    for (const auto& cand : disc.candidates) {
      if (!cand.gated) continue;
      const auto lhs = cand.fit.pde.lhs;
      const auto t = h.table.column(lhs);
      names.push_back(derivative_name(lhs));
      truth.emplace_back(t.begin(), t.end());
      pred.push_back(evaluate_batch(cand.fit.pde.rhs, h.table));
    }
    if (names.empty()) return;
    Eigen::MatrixXd tm(static_cast<Eigen::Index>(index.size()), static_cast<Eigen::Index>(names.size())), pm = tm;
    for (std::size_t k = 0; k < names.size(); ++k)
      for (std::size_t i = 0; i < index.size(); ++i) {
        tm(i, k) = truth[k][i];
        pm(i, k) = pred[k][i];
      }
    rep.add_block(index, names, tm, pm);
  });
  rep.note("pdes_selected", active_list(disc.pdes()));
}

// States X1..Xd and dYj_dX1 at the last step of every window of `set`.
ColumnTable difference_table(const PreparedData& data, const std::vector<std::vector<double>>& deriv,
                             const LagWindowSet& set) {
  ColumnTable t(set.size());
  std::vector<std::size_t> rows(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) rows[i] = set.first_row(i) + set.lag() - 1;
  auto pick = [&](const std::vector<double>& src) {
    std::vector<double> v(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) v[i] = src[rows[i]];
    return v;
  };
  for (std::size_t k = 0; k < data.inputs.size(); ++k) {
    t.add(Symbol::state(static_cast<int>(k + 1)), pick(data.frame.column(data.inputs[k])));
  }
  for (std::size_t j = 0; j < deriv.size(); ++j) t.add(Symbol::derivative(static_cast<int>(j + 1), 1), pick(deriv[j]));
  return t;
}

void extract_sparse(const RunConfig& c, const PreparedData& data, const fs::path& out, Stages& st, Report& rep) {
  const auto& w = data.windows;
  const std::size_t p = data.targets.size();
  std::vector<std::vector<double>> deriv;
  ColumnTable tr, va, te;
  st.run("differentiate", [&] {
    const auto& x1 = data.frame.column(data.inputs[0]);
    for (const auto& name : data.targets) deriv.push_back(forward_difference(data.frame.column(name), x1));
    tr = difference_table(data, deriv, w.train);
    va = difference_table(data, deriv, w.validation);
    te = difference_table(data, deriv, w.test);
  });
  std::vector<Symbol> states;
  for (std::size_t k = 1; k <= data.inputs.size(); ++k) states.push_back(Symbol::state(static_cast<int>(k)));
  const LibraryConfig lib_cfg{c.library_degree, true, false, true};

  std::vector<PdeSpec> pdes;
  for (std::size_t j = 1; j <= p; ++j) {
    const Symbol lhs = Symbol::derivative(static_cast<int>(j), 1);
    PdeSpec pde = st.run("fit " + lhs.text(), [&] {
      if (c.method == "sindy" || c.method == "lasso") {
        const auto lib = build_theta(tr, states, lib_cfg);
        const auto y = tr.column(lhs);
        const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
        if (c.method == "sindy") return assemble_pde(stlsq(lib.matrix(), b, c.stlsq_threshold), lib, lhs);
        const auto cv = cross_validate_lambda(lib.matrix(), b, kDefaultLambdaGrid, 5, c.lasso_tol, c.lasso_max_iter);
        rep.note(lhs.text() + "_lambda", num(cv.best_lambda));
        rep.note(lhs.text() + "_converged", cv.final_fit.converged ? "true" : "false");
        return assemble_pde(cv.final_fit, lib, lhs);
      }
      if (c.method == "blasso") {
        const std::size_t n = std::min(c.bayes_samples, tr.rows());
        const auto rows = tr.slice(tr.rows() - n, n);
        const auto lib = build_theta(rows, states, lib_cfg);
        const auto y = rows.column(lhs);
        BlassoSpec spec;
        spec.design = lib.matrix();
        spec.target = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
        for (const auto& e : lib.exprs) spec.names.push_back(to_text(e));
        const auto model = build_blasso(spec);
        const auto samples = nuts_sample(model.density, sampler_config(c, j), model.init_z);
        write_file(out / ("posterior_" + lhs.text() + ".csv"), [&](std::ostream& f) { samples.write_csv(f); });
        note_sampler(rep, samples, lhs.text() + "_");
        return select_terms_blasso(samples, lib, lhs);
      }
      const std::size_t n = std::min(c.sr_rows, tr.rows());
      const auto rows = tr.slice(tr.rows() - n, n);
      GpConfig gc;
      gc.population = c.gp_population;
      gc.generations = c.gp_generations;
      gc.seed = c.seed + j;
      const auto res = evolve(rows, states, rows.column(lhs), gc);
      return make_pde(lhs, res.best.expr);
    });
    validate_pde(pde, va);
    pde.mask = !pde.trivial && pde.metrics && pde.metrics->r2 >= c.selection_r2;
    pdes.push_back(std::move(pde));
  }
  write_file(out / "pdes.txt", [&](std::ostream& f) { write_pde_file(f, pdes); });
  rep.note("pdes_selected", active_list(pdes));

  st.run("derivatives", [&] {
    const auto index = target_rows(w.test);
    std::vector<std::string> names;
    Eigen::MatrixXd tm(static_cast<Eigen::Index>(te.rows()), static_cast<Eigen::Index>(p)), pm = tm;
    for (std::size_t j = 0; j < p; ++j) {
      const auto t = te.column(pdes[j].lhs);
      const auto f = evaluate_batch(pdes[j].rhs, te);
      for (std::size_t i = 0; i < te.rows(); ++i) {
        tm(i, j) = t[i];
        pm(i, j) = f[i];
      }
      names.push_back(derivative_name(pdes[j].lhs));
    }
    rep.add_block(index, names, tm, pm);
  });
}

// ---------------------------------------------------------------- predict

void predict_network(const RunConfig& c, const PreparedData& data, const std::vector<PdeSpec>& pdes,
                     const fs::path& out, Stages& st, Report& rep) {
  const auto& w = data.windows;
  PinnConfig pc;
  pc.net = make_preset(c.preset, c.lag, data.inputs.size(), data.targets.size());
  pc.train = train_config(c);
  pc.physics_weight = c.physics_weight;
  if (c.method == "pinn") pc.pdes = pdes;
  rep.note("preset", c.preset);
  rep.note("receptive_field", std::to_string(receptive_field(pc.net)));
  const auto res = st.run("train", [&] { return train_pinn(pc, w.train, w.validation); });
  rep.note("parameters", std::to_string(res.trained.net.parameter_count()));
  write_file(out / "history.csv", [&](std::ostream& f) { res.write_history(f); });
  write_file(out / "model.txt", [&](std::ostream& f) { res.trained.net.save(f); });
  st.run("predict", [&] {
    rep.add_block(target_rows(w.test), target_names(data.targets.size()), to_matrix(w.test.all_y()),
                  to_matrix(res.trained.net.predict(w.test)));
  });
  if (!pdes.empty()) {
    const auto loss = st.run("physics", [&] { return evaluate_losses(res.trained.net, w.test, pdes); });
    rep.note("test_L_D", num(loss.data));
    rep.note("test_L_P_per_sample", num(loss.physics));
  }
}

RegressionData regression_rows(const LagWindowSet& set, std::size_t begin, std::size_t count, bool flatten) {
  RegressionData d;
  d.inputs = flatten ? to_matrix(set.batch_x(begin, count)) : to_matrix(set.last_step(begin, count));
  d.targets = to_matrix(set.batch_y(begin, count));
  return d;
}

void predict_bayes(const RunConfig& c, const PreparedData& data, const std::vector<PdeSpec>& pdes, const fs::path& out,
                   Stages& st, Report& rep) {
  const auto& w = data.windows;
  const bool linear = c.method == "blr" || c.method == "pi_blr";
  const std::size_t n = std::min(c.bayes_samples, w.train.size());
  const auto fit_rows = regression_rows(w.train, w.train.size() - n, n, !linear);
  const auto test_rows = regression_rows(w.test, 0, w.test.size(), !linear);
  rep.note("bayes_rows", std::to_string(n));

  BayesModel model = st.run("model", [&] {
    BayesModel m;
    if (linear) {
      m = build_blr(fit_rows);
    } else {
      rep.note("preset", c.preset);
      m = build_bpinn(make_preset(c.preset, c.lag, data.inputs.size(), data.targets.size()), fit_rows, {}, c.seed);
    }
    if (physics_method(c.method)) m = add_pde_potential(std::move(m), pdes, c.sigma_pde);
    return m;
  });
  rep.note("model", model.kind);
  rep.note("dimension", std::to_string(model.density.dim()));
  for (const auto& [k, v] : model.manifest) rep.note(k, v);

  const auto init = st.run("init", [&] {
    if (linear) return map_estimate(model.density, model.init_z, c.map_steps).z;
    return advi_fit(model.density, model.init_z, c.advi_steps, 10, 0.05, c.seed).mean;
  });
  const auto samples = st.run("sample", [&] { return nuts_sample(model.density, sampler_config(c), init); });
  note_sampler(rep, samples);
  write_file(out / "posterior.csv", [&](std::ostream& f) { samples.write_csv(f); });
  write_file(out / "diagnostics.txt", [&](std::ostream& f) { samples.write_diagnostics(f); });

  st.run("predict", [&] {
    const auto pred = posterior_predict(model, samples, test_rows.inputs);
    const auto names = target_names(data.targets.size());
    write_file(out / "predictive.csv", [&](std::ostream& f) { write_predictive_csv(f, pred, test_rows.targets, names); });
    rep.add_block(target_rows(w.test), names, test_rows.targets, pred.mean);
  });
  if (!pdes.empty() && model.pde_count > 0) {
    rep.note("pde_residual_norm_at_mean", num(pde_residual_norm(model, posterior_mean(samples), pdes)));
  }
}

std::vector<MetricsRow> load_metrics(const fs::path& dir) {
  std::ifstream f(dir / "metrics.csv");
  if (!f) throw std::runtime_error("cannot open " + (dir / "metrics.csv").string());
  return read_metrics_csv(f);
}

}  // namespace

// ---------------------------------------------------------------- metrics

Metrics compute_metrics(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& pred, std::vector<std::string> names) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) {
    throw std::invalid_argument("truth and prediction shapes differ");
  }
  if (truth.rows() < 2) throw std::invalid_argument("metrics need at least 2 rows");
  if (names.empty()) names = target_names(static_cast<std::size_t>(truth.cols()));
  if (names.size() != static_cast<std::size_t>(truth.cols())) throw std::invalid_argument("one name per column expected");
  Metrics m;
  m.samples = static_cast<std::size_t>(truth.rows());
  for (Eigen::Index j = 0; j < truth.cols(); ++j) {
    const auto t = col(truth, j), f = col(pred, j);
    VariableMetrics v;
    v.variable = names[j];
    v.fit = regression_metrics(t, f, &v.degenerate);
    m.rows.push_back(v);
  }
  return m;
}

std::string format_metric(double v) {
  char buf[48];
  if (std::isfinite(v) && std::fabs(v) >= 1e4) {
    std::snprintf(buf, sizeof buf, "%.4E", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.4f", v);
  }
  return buf;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "phase,method,variable,MSE,MAE,R2\n";
  for (const auto& r : rows) {
    out << r.phase << ',' << r.method << ',' << r.variable << ',' << num(r.fit.mse) << ',' << num(r.fit.mae) << ','
        << num(r.fit.r2) << '\n';
  }
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "phase,method,variable,MSE,MAE,R2") {
    throw std::runtime_error("metrics.csv: unexpected header");
  }
  std::vector<MetricsRow> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_on(trim(line), ',');
    if (cells.size() != 6) throw std::runtime_error("metrics.csv: expected 6 cells in '" + line + "'");
    MetricsRow r{cells[0], cells[1], cells[2], {}};
    r.fit.mse = std::strtod(cells[3].c_str(), nullptr);
    r.fit.mae = std::strtod(cells[4].c_str(), nullptr);
    r.fit.r2 = std::strtod(cells[5].c_str(), nullptr);
    out.push_back(r);
  }
  return out;
}

void write_metrics_table(std::ostream& out, const std::vector<MetricsRow>& rows,
                         const std::vector<std::string>& degenerate) {
  out << std::left << std::setw(8) << "Phase" << std::setw(8) << "Method" << std::setw(10) << "Variable" << std::right
      << std::setw(13) << "MSE" << std::setw(13) << "MAE" << std::setw(13) << "R2" << '\n';
  for (const auto& r : rows) {
    const bool deg = contains(degenerate, r.variable);
    out << std::left << std::setw(8) << r.phase << std::setw(8) << r.method << std::setw(10) << r.variable << std::right
        << std::setw(13) << format_metric(r.fit.mse) << std::setw(13) << format_metric(r.fit.mae) << std::setw(13)
        << format_metric(r.fit.r2) << (deg ? " *" : "") << '\n';
  }
  if (!degenerate.empty()) out << "* zero variance in the truth; R2 reported as 0\n";
}

void PredictionTable::write(std::ostream& out) const {
  out << "index";
  for (const auto& n : names) out << ',' << n << "_truth," << n << "_pred";
  out << '\n';
  for (std::size_t i = 0; i < index.size(); ++i) {
    out << index[i];
    for (Eigen::Index j = 0; j < truth.cols(); ++j) out << ',' << num(truth(i, j)) << ',' << num(pred(i, j));
    out << '\n';
  }
}

PredictionTable PredictionTable::read(std::istream& in) {
  PredictionTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("predictions.csv: empty");
  const auto head = split_on(trim(line), ',');
  if (head.empty() || head[0] != "index" || head.size() % 2 != 1) throw std::runtime_error("predictions.csv: bad header");
  for (std::size_t k = 1; k < head.size(); k += 2) {
    const auto& a = head[k];
    if (a.size() < 6 || a.substr(a.size() - 6) != "_truth") throw std::runtime_error("predictions.csv: bad header");
    t.names.push_back(a.substr(0, a.size() - 6));
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_on(trim(line), ',');
    if (cells.size() != head.size()) throw std::runtime_error("predictions.csv: ragged row");
    t.index.push_back(std::stoull(cells[0]));
    std::vector<double> r;
    for (std::size_t k = 1; k < cells.size(); ++k) r.push_back(std::strtod(cells[k].c_str(), nullptr));
    rows.push_back(std::move(r));
  }
  const auto n = static_cast<Eigen::Index>(rows.size()), m = static_cast<Eigen::Index>(t.names.size());
  t.truth.resize(n, m);
  t.pred.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      t.truth(i, j) = rows[i][2 * j];
      t.pred(i, j) = rows[i][2 * j + 1];
    }
  return t;
}

// ---------------------------------------------------------------- config

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& k : key_table()) out.push_back(k.name);
    return out;
  }();
  return names;
}

const std::vector<std::string>& phase_methods(const std::string& phase) {
  if (phase == "extract") return kExtractMethods;
  if (phase == "predict") return kPredictMethods;
  throw ConfigError("unknown phase '" + phase + "'; valid phases: extract, predict");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& k : key_table()) {
    if (k.name == key) {
      k.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig RunConfig::parse(std::istream& in) {
  RunConfig c;
  std::set<std::string> seen;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(no) + ": repeated key '" + key + "'");
    try {
      c.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(no) + ": " + e.what());
    }
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  return parse(f);
}

RunConfig RunConfig::resolved() const {
  RunConfig c = *this;
  const auto& methods = phase_methods(c.phase);
  if (!contains(methods, c.method)) {
    throw ConfigError("unknown method '" + c.method + "' for phase " + c.phase + "; valid methods: " + join(methods, ", "));
  }
  const bool extract = c.phase == "extract";
  if (c.n_train == 0) c.n_train = extract ? 6000 : 2000;
  if (c.n_validation == 0) c.n_validation = extract ? 1000 : 200;
  if (c.n_test == 0) c.n_test = extract ? 500 : 200;
  if (c.preset.empty()) {
    if (surrogate_method(c.method)) c.preset = c.method;
    else if (c.method == "nn" || c.method == "pinn") c.preset = "tcn_pred";
    else if (c.method == "bnn" || c.method == "bpinn") c.preset = "dense";
    else c.preset = "none";
  }
  if (network_method(c.method) && !contains(preset_names(), c.preset)) {
    throw ConfigError("unknown preset '" + c.preset + "'; valid presets: " + join(preset_names(), ", "));
  }
  if (c.dataset.empty()) throw ConfigError("dataset is required");
  c.dataset = fs::absolute(c.dataset).lexically_normal().string();
  if (physics_method(c.method) && c.pdes.empty()) throw ConfigError("method " + c.method + " needs a pdes file");
  if (!c.pdes.empty()) c.pdes = fs::absolute(c.pdes).lexically_normal().string();
  if (c.pde_select.empty()) throw ConfigError("pde_select must be 'mask', 'none' or a list of lhs symbols");

  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(c.lag > 0, "lag must be positive");
  require(c.n_test >= 2 && c.n_validation >= 1, "validation must be >= 1 and test >= 2");
  require(c.batch_size > 0, "batch_size must be positive");
  require(std::isfinite(c.lr) && c.lr > 0, "lr must be positive");
  require(c.patience >= 1, "patience must be >= 1");
  require(std::isfinite(c.physics_weight) && c.physics_weight >= 0, "physics_weight must be >= 0");
  require(std::isfinite(c.sigma_pde) && c.sigma_pde > 0, "sigma_pde must be positive");
  require(c.degree >= 1 && c.library_degree >= 1, "degrees must be >= 1");
  require(c.bayes_samples >= 2, "bayes_samples must be >= 2");
  require(c.draws >= 1 && c.chains >= 1 && c.max_treedepth >= 1, "draws, chains and max_treedepth must be >= 1");
  require(c.target_accept > 0 && c.target_accept < 1, "target_accept must lie in (0, 1)");
  require(c.lasso_tol > 0 && c.lasso_max_iter >= 1, "lasso_tol must be positive and lasso_max_iter >= 1");
  require(c.gp_population >= 2 && c.sr_rows >= 2, "gp_population and sr_rows must be >= 2");
  return c;
}

void RunConfig::write(std::ostream& out) const {
  for (const auto& k : key_table()) out << k.name << " = " << k.get(*this) << '\n';
}

// ---------------------------------------------------------------- pipeline

PreparedData prepare_data(const RunConfig& config) {
  const RunConfig& c = config;
  PreparedData d;
  d.inputs = kInputs;
  d.targets = kTargets;
  auto note = [&](const std::string& k, const std::string& v) { d.manifest.emplace_back(k, v); };

  const auto raw = load_power_csv(c.dataset, kPowerSchema, c.max_rows);
  const double cells = static_cast<double>(raw.rows() * raw.width());
  note("rows_loaded", std::to_string(raw.rows()));
  note("missing_cells", std::to_string(raw.missing_count()));
  note("missing_fraction", num(cells > 0 ? static_cast<double>(raw.missing_count()) / cells : 0.0));

  const auto screen = correlation_screen(raw, kScreenThreshold, kPowerSchema);
  d.screen = screen.all;
  note("screen_threshold", num(kScreenThreshold));
  for (const auto& pr : screen.all) {
    if ((pr.a == "Global_active_power" && pr.b == kIntensity) || (pr.b == "Global_active_power" && pr.a == kIntensity)) {
      note("r_active_power_intensity", num(pr.r));
    }
  }
  note("dropped_columns", screen.dropped.empty() ? "none" : join(screen.dropped, ","));
  for (const auto& w : screen.warnings) note("warning", w);

  const auto trimmed = trim_missing_edges(raw);
  note("rows_after_trim", std::to_string(trimmed.rows()));
  auto interp = interpolate_missing(trimmed);
  note("interpolated_fraction", num(interp.overall_fraction));
  note("missing_after_interpolation", std::to_string(interp.frame.missing_count()));

  TimeSeriesFrame frame = compute_elapsed_hours(interp.frame);
  const auto energy = derive_active_energy(frame);
  if (!energy.empty()) {
    double s = 0.0, lo = energy[0], hi = energy[0];
    for (double v : energy) {
      s += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    note("active_energy_wh_mean", num(s / static_cast<double>(energy.size())));
    note("active_energy_wh_min", num(lo));
    note("active_energy_wh_max", num(hi));
  }
  for (const auto& name : screen.dropped) frame = frame.without_column(name);
  for (const auto& name : kInputs) {
    if (!frame.has(name)) throw DataError("input column '" + name + "' was removed by the correlation screen");
  }

  const std::size_t norm_rows = c.n_train + c.lag;
  if (c.split_start + norm_rows > frame.rows()) {
    throw DataError("insufficient data: " + std::to_string(frame.rows()) + " rows for " + std::to_string(norm_rows) +
                    " training rows from " + std::to_string(c.split_start));
  }
  d.stats = fit_normalization(frame, c.split_start, norm_rows);
  d.frame = normalize(frame, d.stats).first;
  note("normalization_rows", std::to_string(c.split_start) + "+" + std::to_string(norm_rows));

  const auto windows = make_lag_windows(d.frame, c.lag, d.inputs, d.targets);
  d.windows = split(windows, SplitSpec::contiguous(c.split_start, c.n_train, c.n_validation, c.n_test));
  note("windows", std::to_string(windows.size()));
  std::vector<std::string> xs, ys;
  for (std::size_t k = 0; k < d.inputs.size(); ++k) xs.push_back("X" + std::to_string(k + 1) + "=" + d.inputs[k]);
  for (std::size_t j = 0; j < d.targets.size(); ++j) ys.push_back("Y" + std::to_string(j + 1) + "=" + d.targets[j]);
  note("inputs", join(xs, " "));
  note("targets", join(ys, " "));
  return d;
}

void run_ingest(const RunConfig& config, const std::string& out_dir) {
  Stages st;
  const RunConfig c = st.run("config", [&] { return config.resolved(); });
  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  const auto data = st.run("ingest", [&] { return prepare_data(c); });
  write_file(out / "manifest.txt", [&](std::ostream& f) {
    for (const auto& [k, v] : data.manifest) f << k << " = " << v << '\n';
  });
  write_file(out / "screen.csv", [&](std::ostream& f) {
    f << "a,b,r\n";
    for (const auto& pr : data.screen) f << pr.a << ',' << pr.b << ',' << num(pr.r) << '\n';
  });
  write_file(out / "normalization.txt", [&](std::ostream& f) { data.stats.write(f); });
  write_file(out / "timing.txt", [&](std::ostream& f) { st.write(f); });
}

RunReport run_experiment(const RunConfig& config, const std::string& out_dir) {
  Stages st;
  const RunConfig c = st.run("config", [&] { return config.resolved(); });
  const fs::path out(out_dir);
  fs::create_directories(out);
  write_file(out / "resolved_config.txt", [&](std::ostream& f) { c.write(f); });

  const auto pdes = physics_method(c.method) || !c.pdes.empty()
                        ? st.run("pdes", [&] { return load_pdes(c); })
                        : std::vector<PdeSpec>{};
  const auto data = st.run("ingest", [&] { return prepare_data(c); });
  write_file(out / "normalization.txt", [&](std::ostream& f) { data.stats.write(f); });

  Report rep;
  rep.phase = c.phase;
  rep.method = c.method;
  rep.manifest = data.manifest;
  rep.note("train_windows", std::to_string(data.windows.train.size()));
  rep.note("validation_windows", std::to_string(data.windows.validation.size()));
  rep.note("test_windows", std::to_string(data.windows.test.size()));

  if (c.phase == "extract") {
    if (surrogate_method(c.method)) extract_surrogate(c, data, out, st, rep);
    else extract_sparse(c, data, out, st, rep);
  } else {
    if (!pdes.empty()) {
      rep.note("pdes_file", c.pdes);
      rep.note("pdes_active", active_list(pdes));
      write_file(out / "pdes.txt", [&](std::ostream& f) { write_pde_file(f, pdes); });
    }
    if (c.method == "nn" || c.method == "pinn") predict_network(c, data, pdes, out, st, rep);
    else predict_bayes(c, data, pdes, out, st, rep);
  }

  st.run("report", [&] {
    write_file(out / "metrics.csv", [&](std::ostream& f) { write_metrics_csv(f, rep.metrics); });
    write_file(out / "table.txt", [&](std::ostream& f) { write_metrics_table(f, rep.metrics, rep.degenerate); });
    write_file(out / "predictions.csv", [&](std::ostream& f) { rep.predictions.write(f); });
    write_file(out / "manifest.txt", [&](std::ostream& f) {
      for (const auto& [k, v] : rep.manifest) f << k << " = " << v << '\n';
    });
  });
  write_file(out / "timing.txt", [&](std::ostream& f) { st.write(f); });

  RunReport r;
  r.dir = out.string();
  r.metrics = rep.metrics;
  r.seconds = st.total();
  std::ifstream pf(out / "pdes.txt");
  if (pf) r.pdes = read_pde_file(pf);
  return r;
}

double verify_report(const std::string& dir, std::vector<MetricsRow>* recomputed) {
  const fs::path d(dir);
  std::ifstream pf(d / "predictions.csv");
  if (!pf) throw std::runtime_error("cannot open " + (d / "predictions.csv").string());
  const auto table = PredictionTable::read(pf);
  const auto rows = load_metrics(d);
  double worst = 0.0;
  std::vector<MetricsRow> out;
  for (const auto& r : rows) {
    const auto it = std::find(table.names.begin(), table.names.end(), r.variable);
    if (it == table.names.end()) throw std::runtime_error("predictions.csv has no columns for " + r.variable);
    const auto j = static_cast<Eigen::Index>(it - table.names.begin());
    MetricsRow m = r;
    m.fit = regression_metrics(col(table.truth, j), col(table.pred, j));
    for (auto [a, b] : {std::pair{m.fit.mse, r.fit.mse}, {m.fit.mae, r.fit.mae}, {m.fit.r2, r.fit.r2}}) {
      if (a == b) continue;
      worst = std::max(worst, std::isfinite(a) && std::isfinite(b) ? std::fabs(a - b)
                                                                     : std::numeric_limits<double>::infinity());
    }
    out.push_back(m);
  }
  if (recomputed) *recomputed = std::move(out);
  return worst;
}

void compare_runs(const std::vector<std::string>& dirs, std::ostream& out) {
  if (dirs.size() < 2) throw std::invalid_argument("compare needs at least 2 report directories");
  std::vector<RunConfig> configs;
  std::vector<std::vector<MetricsRow>> metrics;
  for (const auto& d : dirs) {
    configs.push_back(RunConfig::load((fs::path(d) / "resolved_config.txt").string()));
    metrics.push_back(load_metrics(d));
  }
  const std::vector<std::string> split_keys = {"dataset", "max_rows", "lag", "split_start", "train", "validation", "test"};
  for (std::size_t r = 1; r < dirs.size(); ++r) {
    for (const auto& name : split_keys) {
      const auto& key = *std::find_if(key_table().begin(), key_table().end(), [&](const Key& k) { return k.name == name; });
      if (key.get(configs[r]) != key.get(configs[0])) {
        throw std::invalid_argument("split mismatch on '" + name + "': " + dirs[0] + " has " + key.get(configs[0]) +
                                    ", " + dirs[r] + " has " + key.get(configs[r]));
      }
    }
  }
  auto find = [](const std::vector<MetricsRow>& rows, const std::string& v) -> const MetricsRow* {
    for (const auto& r : rows)
      if (r.variable == v) return &r;
    return nullptr;
  };
  // Only variables every run reports; surrogate runs add Y rows that sparse runs lack.
  std::vector<std::vector<const MetricsRow*>> shared;
  for (const auto& base : metrics[0]) {
    std::vector<const MetricsRow*> row;
    for (std::size_t r = 0; r < dirs.size(); ++r)
      if (const auto* m = find(metrics[r], base.variable)) row.push_back(m);
    if (row.size() == dirs.size()) shared.push_back(row);
  }
  if (shared.empty()) throw std::invalid_argument("no variable is reported by every run");
  out << "variable,run,method,MSE,MAE,R2,dMSE,dMAE,dR2,best\n";
  for (const auto& row : shared) {
    const auto& base = *row[0];
    std::size_t best = 0;
    for (std::size_t r = 1; r < row.size(); ++r)
      if (row[r]->fit.mse < row[best]->fit.mse) best = r;
    for (std::size_t r = 0; r < row.size(); ++r) {
      const auto& f = row[r]->fit;
      out << base.variable << ',' << dirs[r] << ',' << row[r]->method << ',' << num(f.mse) << ',' << num(f.mae) << ','
          << num(f.r2) << ',' << num(f.mse - base.fit.mse) << ',' << num(f.mae - base.fit.mae) << ','
          << num(f.r2 - base.fit.r2) << ',' << (r == best ? 1 : 0) << '\n';
    }
  }
}

}  // namespace pdemts
