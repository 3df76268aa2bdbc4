#include "endotree/model.hpp"

#include "endotree/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace endotree {

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void check_table(const RtpModel& m) {
  const std::size_t s = m.s(), e = m.e();
  if (s == 0) throw InvalidModel("model has no states");
  if (e == 0) throw InvalidModel("model has no innovations");
  if (m.mu.size() != s) throw InvalidModel("mu has " + std::to_string(m.mu.size()) +
                                           " entries, expected " + std::to_string(s));
  if (m.nu.size() != e) throw InvalidModel("nu has " + std::to_string(m.nu.size()) +
                                           " entries, expected " + std::to_string(e));
  if (m.phi.size() != s * s * e)
    throw InvalidModel("phi table has " + std::to_string(m.phi.size()) + " entries, expected " +
                       std::to_string(s * s * e));
  for (std::size_t i = 0; i < m.phi.size(); ++i) {
    if (m.phi[i] < 0 || static_cast<std::size_t>(m.phi[i]) >= s)
      throw InvalidModel("phi entry " + std::to_string(i) + " targets state index " +
                         std::to_string(m.phi[i]) + " outside [0, " + std::to_string(s) + ")");
  }
}

bool has_duplicates(const std::vector<std::string>& labels) {
  std::set<std::string> seen(labels.begin(), labels.end());
  return seen.size() != labels.size();
}

}  // namespace

bool is_symmetric(const RtpModel& m) {
  for (std::size_t x0 = 0; x0 < m.s(); ++x0)
    for (std::size_t x1 = x0 + 1; x1 < m.s(); ++x1)
      for (std::size_t z = 0; z < m.e(); ++z)
        if (m(x0, x1, z) != m(x1, x0, z)) return false;
  return true;
}

std::vector<double> pushforward(const RtpModel& m, const std::vector<double>& mu0,
                                const std::vector<double>& mu1) {
  const std::size_t s = m.s(), e = m.e();
  std::vector<double> out(s, 0.0);
  for (std::size_t x0 = 0; x0 < s; ++x0) {
    if (mu0[x0] == 0.0) continue;
    for (std::size_t x1 = 0; x1 < s; ++x1) {
      const double w = mu0[x0] * mu1[x1];
      if (w == 0.0) continue;
      for (std::size_t z = 0; z < e; ++z) out[m(x0, x1, z)] += w * m.nu[z];
    }
  }
  return out;
}

double invariance_residual(const RtpModel& m) {
  const auto image = pushforward(m, m.mu, m.mu);
  double r = 0.0;
  for (std::size_t x = 0; x < m.s(); ++x) r = std::max(r, std::abs(image[x] - m.mu[x]));
  return r;
}

ValidationReport validate(const RtpModel& model, const Tolerances& tol) {
  check_table(model);

  ValidationReport rep;
  rep.ok = true;
  auto fail = [&rep](std::string msg) {
    rep.ok = false;
    rep.messages.push_back(std::move(msg));
  };

  if (has_duplicates(model.states)) fail("duplicate state labels");
  if (has_duplicates(model.innovations)) fail("duplicate innovation labels");

  for (std::size_t x = 0; x < model.s(); ++x)
    if (!(model.mu[x] >= 0.0) || !std::isfinite(model.mu[x]))
      fail("mu(" + model.states[x] + ") = " + fmt_double(model.mu[x]) + " is not a probability");
  for (std::size_t z = 0; z < model.e(); ++z)
    if (!(model.nu[z] >= 0.0) || !std::isfinite(model.nu[z]))
      fail("nu(" + model.innovations[z] + ") = " + fmt_double(model.nu[z]) +
           " is not a probability");

  rep.mu_mass_residual = std::abs(std::accumulate(model.mu.begin(), model.mu.end(), 0.0) - 1.0);
  rep.nu_mass_residual = std::abs(std::accumulate(model.nu.begin(), model.nu.end(), 0.0) - 1.0);
  if (rep.mu_mass_residual > tol.mass)
    fail("mu mass residual " + fmt_double(rep.mu_mass_residual) + " exceeds " +
         fmt_double(tol.mass));
  if (rep.nu_mass_residual > tol.mass)
    fail("nu mass residual " + fmt_double(rep.nu_mass_residual) + " exceeds " +
         fmt_double(tol.mass));

  // Trim zero-mass states and innovations; a retained input that still maps
  // onto a removed state means mass leaks out of the support.
  std::vector<std::size_t> keep_s, keep_e;
  for (std::size_t x = 0; x < model.s(); ++x)
    if (model.mu[x] != 0.0) keep_s.push_back(x);
  for (std::size_t z = 0; z < model.e(); ++z)
    if (model.nu[z] != 0.0) keep_e.push_back(z);

  RtpModel trimmed = model;
  if (rep.ok && !keep_s.empty() && !keep_e.empty() &&
      (keep_s.size() < model.s() || keep_e.size() < model.e())) {
    std::vector<int> new_index(model.s(), -1);
    for (std::size_t i = 0; i < keep_s.size(); ++i) new_index[keep_s[i]] = static_cast<int>(i);

    bool leaks = false;
    RtpModel t;
    for (auto x : keep_s) {
      t.states.push_back(model.states[x]);
      t.mu.push_back(model.mu[x]);
    }
    for (auto z : keep_e) {
      t.innovations.push_back(model.innovations[z]);
      t.nu.push_back(model.nu[z]);
    }
    t.phi.reserve(keep_s.size() * keep_s.size() * keep_e.size());
    for (auto x0 : keep_s)
      for (auto x1 : keep_s)
        for (auto z : keep_e) {
          const int y = new_index[model(x0, x1, z)];
          if (y < 0) leaks = true;
          t.phi.push_back(std::max(y, 0));
        }
    if (leaks) {
      fail("positive-mass inputs map onto a zero-mass state; cannot trim");
    } else {
      for (std::size_t x = 0; x < model.s(); ++x)
        if (model.mu[x] == 0.0) rep.trimmed_states.push_back(model.states[x]);
      for (std::size_t z = 0; z < model.e(); ++z)
        if (model.nu[z] == 0.0) rep.trimmed_innovations.push_back(model.innovations[z]);
      trimmed = std::move(t);
    }
  } else if (keep_s.empty() || keep_e.empty()) {
    fail("measures have empty support");
  }

  rep.symmetric = is_symmetric(trimmed);
  if (!rep.symmetric)
    rep.messages.push_back("warning: phi is not symmetric in its state arguments");

  rep.invariance_residual = invariance_residual(trimmed);
  if (rep.invariance_residual > tol.invariance)
    fail("invariance residual " + fmt_double(rep.invariance_residual) + " exceeds " +
         fmt_double(tol.invariance));

  rep.model = std::move(trimmed);
  return rep;
}

RtpModel validated(const RtpModel& model, const Tolerances& tol) {
  auto rep = validate(model, tol);
  if (!rep.ok) {
    std::string msg = "model failed validation";
    for (const auto& m : rep.messages) msg += "; " + m;
    throw InvalidModel(msg);
  }
  return std::move(rep.model);
}

std::vector<double> find_invariant(const RtpModel& model, std::size_t max_iter, double tol) {
  const std::size_t s = model.s();
  if (s == 0 || model.phi.size() != s * s * model.e()) throw InvalidModel("phi table not total");
  std::vector<double> mu(s, 1.0 / static_cast<double>(s));
  double residual = 0.0;
  for (std::size_t k = 0; k < max_iter; ++k) {
    auto next = pushforward(model, mu, mu);
    // The map squares the total mass, so rounding drift would grow doubly
    // exponentially without renormalization.
    const double total = std::accumulate(next.begin(), next.end(), 0.0);
    for (auto& w : next) w /= total;
    residual = 0.0;
    for (std::size_t x = 0; x < s; ++x) residual = std::max(residual, std::abs(next[x] - mu[x]));
    mu = std::move(next);
    if (residual <= tol) return mu;
  }
  throw ConvergenceError("fixed-point iteration did not converge in " + std::to_string(max_iter) +
                             " steps",
                         residual);
}

std::vector<double> label_values(const RtpModel& model) {
  std::vector<double> values;
  for (const auto& label : model.states) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(label, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != label.size()) {
      values.clear();
      for (std::size_t x = 0; x < model.s(); ++x) values.push_back(static_cast<double>(x));
      return values;
    }
    values.push_back(v);
  }
  return values;
}

const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names = {"SELECT", "CONST", "PURE-INNOVATION",
                                                 "XOR",    "ANDOR", "ANDOR-NOISE"};
  return names;
}

RtpModel builtin(const std::string& name) {
  RtpModel m;
  auto fill = [&m](auto&& f) {
    m.phi.resize(m.s() * m.s() * m.e());
    for (std::size_t x0 = 0; x0 < m.s(); ++x0)
      for (std::size_t x1 = 0; x1 < m.s(); ++x1)
        for (std::size_t z = 0; z < m.e(); ++z) m.phi[m.phi_index(x0, x1, z)] = f(x0, x1, z);
  };
  if (name == "SELECT") {
    m.states = {"-1", "+1"};
    m.innovations = {"0", "1"};
    m.mu = {0.5, 0.5};
    m.nu = {0.5, 0.5};
    fill([](std::size_t x0, std::size_t x1, std::size_t z) { return static_cast<int>(z == 0 ? x0 : x1); });
  } else if (name == "CONST") {
    // The second state carries no mass and is removed by validate().
    m.states = {"c", "d"};
    m.innovations = {"0", "1"};
    m.mu = {1.0, 0.0};
    m.nu = {0.5, 0.5};
    fill([](std::size_t, std::size_t, std::size_t) { return 0; });
  } else if (name == "PURE-INNOVATION") {
    m.states = {"a", "b", "c"};
    m.innovations = {"a", "b", "c"};
    m.nu = {0.5, 0.25, 0.25};
    m.mu = m.nu;
    fill([](std::size_t, std::size_t, std::size_t z) { return static_cast<int>(z); });
  } else if (name == "XOR") {
    // Index 0 is -1, index 1 is +1; the product of signs flips on each -1.
    m.states = {"-1", "+1"};
    m.innovations = {"-1", "+1"};
    m.mu = {0.5, 0.5};
    m.nu = {0.5, 0.5};
    fill([](std::size_t x0, std::size_t x1, std::size_t z) {
      const int negatives = (x0 == 0) + (x1 == 0) + (z == 0);
      return negatives % 2 == 1 ? 0 : 1;
    });
  } else if (name == "ANDOR" || name == "ANDOR-NOISE") {
    m.states = {"0", "1"};
    m.mu = {0.5, 0.5};
    if (name == "ANDOR") {
      m.innovations = {"and", "or"};
      m.nu = {0.5, 0.5};
    } else {
      m.innovations = {"and", "or", "fresh0", "fresh1"};
      m.nu = {0.25, 0.25, 0.25, 0.25};
    }
    fill([](std::size_t x0, std::size_t x1, std::size_t z) {
      switch (z) {
        case 0: return static_cast<int>(std::min(x0, x1));
        case 1: return static_cast<int>(std::max(x0, x1));
        case 2: return 0;
        default: return 1;
      }
    });
  } else {
    throw InvalidModel("unknown builtin model '" + name + "'");
  }
  return m;
}

namespace {

using nlohmann::json;

double parse_probability(const json& v, const std::string& where, std::vector<std::string>& notes) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) throw InvalidModel(where + ": expected a number or a rational string");
  const auto text = v.get<std::string>();
  const auto slash = text.find('/');
  auto parse_part = [&](const std::string& part) {
    std::size_t used = 0;
    double d = 0.0;
    try {
      d = std::stod(part, &used);
    } catch (const std::exception&) {
      throw InvalidModel(where + ": cannot parse '" + text + "'");
    }
    if (used != part.size()) throw InvalidModel(where + ": cannot parse '" + text + "'");
    return d;
  };
  if (slash == std::string::npos) return parse_part(text);
  const double num = parse_part(text.substr(0, slash));
  const double den = parse_part(text.substr(slash + 1));
  if (den == 0.0) throw InvalidModel(where + ": zero denominator in '" + text + "'");
  const double value = num / den;
  notes.push_back(where + ": rational '" + text + "' rounded to the nearest double " +
                  fmt_double(value));
  return value;
}

std::vector<std::string> parse_labels(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_array())
    throw InvalidModel(std::string("missing array '") + key + "'");
  std::vector<std::string> out;
  for (const auto& v : doc[key]) {
    if (!v.is_string()) throw InvalidModel(std::string("'") + key + "' entries must be strings");
    out.push_back(v.get<std::string>());
  }
  if (has_duplicates(out)) throw InvalidModel(std::string("duplicate labels in '") + key + "'");
  return out;
}

}  // namespace

LoadedModel parse_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidModel(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw InvalidModel("model file must hold a JSON object");

  LoadedModel out;
  RtpModel& m = out.model;
  m.states = parse_labels(doc, "states");
  m.innovations = parse_labels(doc, "innovations");

  auto read_measure = [&](const char* key, std::size_t expected) {
    if (!doc.contains(key) || !doc[key].is_array())
      throw InvalidModel(std::string("missing array '") + key + "'");
    const auto& arr = doc[key];
    if (arr.size() != expected)
      throw InvalidModel(std::string("'") + key + "' has " + std::to_string(arr.size()) +
                         " entries, expected " + std::to_string(expected));
    std::vector<double> v;
    for (std::size_t i = 0; i < arr.size(); ++i)
      v.push_back(parse_probability(arr[i], std::string(key) + "[" + std::to_string(i) + "]",
                                    out.notes));
    return v;
  };
  m.mu = read_measure("mu", m.s());
  m.nu = read_measure("nu", m.e());

  std::map<std::string, int> index;
  for (std::size_t i = 0; i < m.s(); ++i) index[m.states[i]] = static_cast<int>(i);

  if (!doc.contains("phi") || !doc["phi"].is_array()) throw InvalidModel("missing array 'phi'");
  const auto& phi = doc["phi"];
  const std::size_t s = m.s(), e = m.e();
  if (phi.size() != s) throw InvalidModel("phi is not total: outer dimension != |states|");
  m.phi.assign(s * s * e, 0);
  for (std::size_t x0 = 0; x0 < s; ++x0) {
    if (!phi[x0].is_array() || phi[x0].size() != s)
      throw InvalidModel("phi is not total at [" + std::to_string(x0) + "]");
    for (std::size_t x1 = 0; x1 < s; ++x1) {
      const auto& row = phi[x0][x1];
      if (!row.is_array() || row.size() != e)
        throw InvalidModel("phi is not total at [" + std::to_string(x0) + "][" +
                           std::to_string(x1) + "]");
      for (std::size_t z = 0; z < e; ++z) {
        if (!row[z].is_string()) throw InvalidModel("phi entries must be state labels");
        const auto it = index.find(row[z].get<std::string>());
        if (it == index.end())
          throw InvalidModel("phi targets unknown state '" + row[z].get<std::string>() + "'");
        m.phi[m.phi_index(x0, x1, z)] = it->second;
      }
    }
  }
  return out;
}

LoadedModel load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidModel("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

std::string dump_model(const RtpModel& m) {
  nlohmann::ordered_json doc;
  doc["states"] = m.states;
  doc["innovations"] = m.innovations;
  doc["mu"] = m.mu;
  doc["nu"] = m.nu;
  auto phi = nlohmann::ordered_json::array();
  for (std::size_t x0 = 0; x0 < m.s(); ++x0) {
    auto plane = nlohmann::ordered_json::array();
    for (std::size_t x1 = 0; x1 < m.s(); ++x1) {
      auto row = nlohmann::ordered_json::array();
      for (std::size_t z = 0; z < m.e(); ++z) row.push_back(m.states[m(x0, x1, z)]);
      plane.push_back(std::move(row));
    }
    phi.push_back(std::move(plane));
  }
  doc["phi"] = std::move(phi);
  return doc.dump(2);
}

void save(const RtpModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidModel("cannot write model file '" + path + "'");
  out << dump_model(model) << '\n';
}

RtpModel permuted(const RtpModel& m, const std::vector<std::size_t>& sp,
                  const std::vector<std::size_t>& ep) {
  RtpModel out;
  out.states.resize(m.s());
  out.mu.resize(m.s());
  out.innovations.resize(m.e());
  out.nu.resize(m.e());
  for (std::size_t x = 0; x < m.s(); ++x) {
    out.states[sp[x]] = m.states[x];
    out.mu[sp[x]] = m.mu[x];
  }
  for (std::size_t z = 0; z < m.e(); ++z) {
    out.innovations[ep[z]] = m.innovations[z];
    out.nu[ep[z]] = m.nu[z];
  }
  out.phi.resize(m.phi.size());
  for (std::size_t x0 = 0; x0 < m.s(); ++x0)
    for (std::size_t x1 = 0; x1 < m.s(); ++x1)
      for (std::size_t z = 0; z < m.e(); ++z)
        out.phi[out.phi_index(sp[x0], sp[x1], ep[z])] = static_cast<int>(sp[m(x0, x1, z)]);
  return out;
}

}  // namespace endotree
