#pragma once

// Star-convex benchmark functions, the sampling evaluation oracle over them,
// and an empirical star-convexity checker.
//
// A FunctionSpec is an immutable expression tree. Leaves are closed-form
// star-convex functions; interior nodes are the closure operations (shift,
// power, sum, product, power mean, stochastic mixture). Every node knows its
// star center, its optimum value and an analytic bound on |f| over a ball.

#include "starcut/core.hpp"
#include "starcut/random.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace starcut {

using json = nlohmann::json;

enum class FunctionKind {
  constant,
  sphere,
  sqrt_canyon,
  two_slope,
  nesterov_polyak,
  linear_extension,
  monomial_sos,
  erm_p_loss,
  irrational_center,
  affine_shift,
  power,
  sum,
  product,
  power_mean,
  stochastic_mixture,
  minimum,
};

inline const char* to_string(FunctionKind kind) {
  switch (kind) {
    case FunctionKind::constant: return "constant";
    case FunctionKind::sphere: return "sphere";
    case FunctionKind::sqrt_canyon: return "sqrt_canyon";
    case FunctionKind::two_slope: return "two_slope";
    case FunctionKind::nesterov_polyak: return "nesterov_polyak";
    case FunctionKind::linear_extension: return "linear_extension";
    case FunctionKind::monomial_sos: return "monomial_sos";
    case FunctionKind::erm_p_loss: return "erm_p_loss";
    case FunctionKind::irrational_center: return "irrational_center";
    case FunctionKind::affine_shift: return "affine_shift";
    case FunctionKind::power: return "power";
    case FunctionKind::sum: return "sum";
    case FunctionKind::product: return "product";
    case FunctionKind::power_mean: return "power_mean";
    case FunctionKind::stochastic_mixture: return "stochastic_mixture";
    case FunctionKind::minimum: return "minimum";
  }
  return "unknown";
}

inline FunctionKind kind_from_string(const std::string& name) {
  static const std::map<std::string, FunctionKind> table = {
      {"constant", FunctionKind::constant},
      {"sphere", FunctionKind::sphere},
      {"sqrt_canyon", FunctionKind::sqrt_canyon},
      {"two_slope", FunctionKind::two_slope},
      {"nesterov_polyak", FunctionKind::nesterov_polyak},
      {"linear_extension", FunctionKind::linear_extension},
      {"monomial_sos", FunctionKind::monomial_sos},
      {"erm_p_loss", FunctionKind::erm_p_loss},
      {"irrational_center", FunctionKind::irrational_center},
      {"affine_shift", FunctionKind::affine_shift},
      {"power", FunctionKind::power},
      {"sum", FunctionKind::sum},
      {"product", FunctionKind::product},
      {"power_mean", FunctionKind::power_mean},
      {"stochastic_mixture", FunctionKind::stochastic_mixture},
      {"minimum", FunctionKind::minimum},
  };
  auto it = table.find(name);
  if (it == table.end()) throw InvalidInput("unknown function kind '" + name + "'");
  return it->second;
}

/// Positive profile on the unit sphere used by linear extensions. The angle
/// is atan2(u[1], u[0]).
struct SphereProfile {
  enum class Type { oscillating, sliver } type = Type::oscillating;
  // oscillating: base + amplitude * sin(frequency * angle)
  double base = 2.0;
  double amplitude = 1.0;
  double frequency = 40.0;
  // sliver: high on an arc of the given fraction of the circle, low elsewhere
  double low = 1.0;
  double high = 10.0;
  double fraction = 0.01;
  double phase = 0.0;

  double operator()(double angle) const {
    if (type == Type::oscillating) return base + amplitude * std::sin(frequency * angle);
    double t = std::fmod(angle - phase, 2.0 * M_PI);
    if (t < 0) t += 2.0 * M_PI;
    return t < 2.0 * M_PI * fraction ? high : low;
  }
  double max_value() const {
    return type == Type::oscillating ? base + std::abs(amplitude) : std::max(low, high);
  }
  double min_value() const {
    return type == Type::oscillating ? base - std::abs(amplitude) : std::min(low, high);
  }
};

class FunctionSpec;

namespace detail {

struct Node {
  FunctionKind kind = FunctionKind::constant;
  int dim = 0;
  Vector center;
  double f_star = 0.0;
  json params;

  double value = 0.0;   // constant value, affine offset
  double scale = 1.0;   // sphere scale
  double p = 1.0;       // exponent of power / power_mean / erm
  Matrix matrix;        // affine linear part, or erm data points as rows
  Vector inner_center;  // affine: child star center
  SphereProfile profile;
  std::vector<double> coefs;
  std::vector<std::vector<int>> exponents;
  std::vector<std::shared_ptr<const Node>> children;
  std::vector<double> weights;  // normalized mixture weights
  std::vector<double> cumulative;
};

using NodePtr = std::shared_ptr<const Node>;

double eval_node(const Node& node, const Eigen::Ref<const Vector>& x);

inline double eval_children_power_mean(const Node& node, const Eigen::Ref<const Vector>& x) {
  const double m = static_cast<double>(node.children.size());
  if (node.p == 0.0) {
    double log_sum = 0.0;
    for (const auto& c : node.children) {
      const double v = eval_node(*c, x);
      if (v <= 0.0) return 0.0;
      log_sum += std::log(v);
    }
    return std::exp(log_sum / m);
  }
  double acc = 0.0;
  for (const auto& c : node.children) {
    const double v = eval_node(*c, x);
    if (v <= 0.0) {
      if (node.p < 0.0) return 0.0;  // limit of the negative-power mean
      continue;
    }
    acc += std::pow(v, node.p);
  }
  if (acc == 0.0) return 0.0;
  return std::pow(acc / m, 1.0 / node.p);
}

inline double eval_node(const Node& node, const Eigen::Ref<const Vector>& x) {
  switch (node.kind) {
    case FunctionKind::constant:
      return node.value;
    case FunctionKind::sphere:
      return node.scale * (x - node.center).squaredNorm();
    case FunctionKind::sqrt_canyon: {
      double s = 0.0;
      for (int i = 0; i < node.dim; ++i) s += std::sqrt(std::abs(x[i] - node.center[i]));
      return s * s;
    }
    case FunctionKind::two_slope: {
      const double r = (x - node.center).norm();
      return r < 1.0 ? r : 2.0 * r;
    }
    case FunctionKind::nesterov_polyak: {
      const double r = (x - node.center).norm();
      return r * (1.0 - std::exp(-r));
    }
    case FunctionKind::linear_extension: {
      const double d0 = x[0] - node.center[0];
      const double d1 = x[1] - node.center[1];
      const double r = (x - node.center).norm();
      if (r == 0.0) return 0.0;
      return r * node.profile(std::atan2(d1, d0));
    }
    case FunctionKind::monomial_sos: {
      double total = 0.0;
      for (std::size_t t = 0; t < node.coefs.size(); ++t) {
        double term = node.coefs[t];
        for (int i = 0; i < node.dim; ++i) {
          const int e = node.exponents[t][i];
          if (e != 0) term *= std::pow(std::abs(x[i] - node.center[i]), e);
        }
        total += term;
      }
      return total;
    }
    case FunctionKind::erm_p_loss: {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < node.matrix.rows(); ++i) {
        const double r = std::abs(node.matrix.row(i).dot(x - node.center));
        if (r > 0.0) acc += std::pow(r, node.p);
      }
      return acc == 0.0 ? 0.0 : std::pow(acc, 1.0 / node.p);
    }
    case FunctionKind::irrational_center:
      return (x - node.center).norm();
    case FunctionKind::affine_shift: {
      const Vector inner = node.matrix * (x - node.center) + node.inner_center;
      return eval_node(*node.children.front(), inner) + node.value;
    }
    case FunctionKind::power: {
      const double v = eval_node(*node.children.front(), x);
      return std::pow(std::max(v, 0.0), node.p);
    }
    case FunctionKind::sum: {
      double acc = 0.0;
      for (const auto& c : node.children) acc += eval_node(*c, x);
      return acc;
    }
    case FunctionKind::product: {
      double acc = 1.0;
      for (const auto& c : node.children) acc *= eval_node(*c, x);
      return acc;
    }
    case FunctionKind::power_mean:
      return eval_children_power_mean(node, x);
    case FunctionKind::stochastic_mixture: {
      double acc = 0.0;
      for (std::size_t i = 0; i < node.children.size(); ++i)
        acc += node.weights[i] * eval_node(*node.children[i], x);
      return acc;
    }
    case FunctionKind::minimum: {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : node.children) best = std::min(best, eval_node(*c, x));
      return best;
    }
  }
  return 0.0;
}

inline double bound_node(const Node& node, double radius) {
  const double reach = radius + node.center.norm();
  switch (node.kind) {
    case FunctionKind::constant: return std::abs(node.value);
    case FunctionKind::sphere: return node.scale * reach * reach;
    case FunctionKind::sqrt_canyon: return node.dim * std::sqrt(double(node.dim)) * reach;
    case FunctionKind::two_slope: return 2.0 * reach;
    case FunctionKind::nesterov_polyak: return reach;
    case FunctionKind::linear_extension: return reach * node.profile.max_value();
    case FunctionKind::monomial_sos: {
      double total = 0.0;
      for (std::size_t t = 0; t < node.coefs.size(); ++t) {
        int degree = 0;
        for (int e : node.exponents[t]) degree += e;
        total += node.coefs[t] * std::pow(reach, degree);
      }
      return total;
    }
    case FunctionKind::erm_p_loss: {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < node.matrix.rows(); ++i)
        acc += std::pow(reach * node.matrix.row(i).norm(), node.p);
      return std::pow(acc, 1.0 / node.p);
    }
    case FunctionKind::irrational_center: return reach;
    case FunctionKind::affine_shift: {
      Eigen::JacobiSVD<Matrix> svd(node.matrix);
      const double op = svd.singularValues()(0);
      return bound_node(*node.children.front(), op * reach + node.inner_center.norm()) +
             std::abs(node.value);
    }
    case FunctionKind::power: return std::pow(bound_node(*node.children.front(), radius), node.p);
    case FunctionKind::sum: {
      double acc = 0.0;
      for (const auto& c : node.children) acc += bound_node(*c, radius);
      return acc;
    }
    case FunctionKind::product: {
      double acc = 1.0;
      for (const auto& c : node.children) acc *= bound_node(*c, radius);
      return acc;
    }
    case FunctionKind::power_mean:
    case FunctionKind::stochastic_mixture:
    case FunctionKind::minimum: {
      double acc = 0.0;
      for (const auto& c : node.children) acc = std::max(acc, bound_node(*c, radius));
      return acc;
    }
  }
  return 0.0;
}

}  // namespace detail

/// Immutable handle to a benchmark function.
class FunctionSpec {
 public:
  FunctionSpec() = default;
  explicit FunctionSpec(detail::NodePtr node) : node_(std::move(node)) {}

  /// Builds a spec from its JSON description; unknown keys are rejected.
  static FunctionSpec from_json(const json& j);

  FunctionKind kind() const { return node_->kind; }
  int dim() const { return node_->dim; }
  const Vector& star_center() const { return node_->center; }
  double f_star() const { return node_->f_star; }
  const json& to_json() const { return node_->params; }

  bool is_mixture() const { return node_->kind == FunctionKind::stochastic_mixture; }
  std::size_t component_count() const { return is_mixture() ? node_->children.size() : 1; }
  const std::vector<double>& mixture_weights() const { return node_->weights; }

  /// Exact value; for a mixture this is the weighted expectation.
  double operator()(const Eigen::Ref<const Vector>& x) const {
    return detail::eval_node(*node_, x);
  }

  /// Value of one mixture component; index must be 0 for non-mixtures.
  double component(const Eigen::Ref<const Vector>& x, std::size_t index) const {
    if (!is_mixture()) {
      require(index == 0, "component index out of range");
      return detail::eval_node(*node_, x);
    }
    require(index < node_->children.size(), "component index out of range");
    return detail::eval_node(*node_->children[index], x);
  }

  /// Mixture component drawn by weight from a uniform variate in [0,1).
  std::size_t pick_component(double u) const {
    if (!is_mixture()) return 0;
    const auto& cum = node_->cumulative;
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    return std::min<std::size_t>(it - cum.begin(), cum.size() - 1);
  }

  /// Upper bound on |f(x)| for ||x|| <= radius.
  double value_bound(double radius) const { return detail::bound_node(*node_, radius); }

  const detail::NodePtr& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  detail::NodePtr node_;
};

/// evaluate_exact: dimension-checked evaluation. For stochastic mixtures an
/// explicit component index selects one component; without it the
/// expectation is returned.
inline double evaluate_exact(const FunctionSpec& spec, const Vector& x,
                             std::optional<std::size_t> component = std::nullopt) {
  require(x.size() == spec.dim(), "dimension mismatch: point has " + std::to_string(x.size()) +
                                      " coordinates, function expects " +
                                      std::to_string(spec.dim()));
  if (component) return spec.component(x, *component);
  return spec(x);
}

namespace detail {

inline Vector vector_from_json(const json& j, const std::string& what) {
  require(j.is_array(), what + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_number(), what + " must contain numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed) {
  require(j.is_object(), "function description must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  ok.insert("kind");
  for (auto it = j.begin(); it != j.end(); ++it)
    require(ok.count(it.key()) != 0,
            "unknown key '" + it.key() + "' for kind '" + j.value("kind", "?") + "'");
}

inline double number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  require(j.at(key).is_number(), std::string("key '") + key + "' must be a number");
  return j.at(key).get<double>();
}

inline double required_number(const json& j, const char* key) {
  require(j.contains(key), std::string("missing key '") + key + "'");
  return number(j, key, 0.0);
}

inline int dimension(const json& j) {
  require(j.contains("dim") && j.at("dim").is_number_integer(), "missing integer key 'dim'");
  const int n = j.at("dim").get<int>();
  require(n >= 1, "dim must be >= 1");
  return n;
}

inline Vector center_of(const json& j, int dim) {
  if (!j.contains("center")) return Vector::Zero(dim);
  Vector c = vector_from_json(j.at("center"), "center");
  require(c.size() == dim, "center has wrong dimension");
  return c;
}

inline bool same_point(const Vector& a, const Vector& b) {
  return a.size() == b.size() && (a - b).lpNorm<Eigen::Infinity>() <= 1e-12;
}

inline std::vector<NodePtr> children_of(const json& j, const char* key = "components") {
  require(j.contains(key) && j.at(key).is_array() && !j.at(key).empty(),
          std::string("'") + key + "' must be a non-empty array");
  std::vector<NodePtr> out;
  for (const auto& c : j.at(key)) out.push_back(FunctionSpec::from_json(c).node());
  return out;
}

inline void require_shared_center(const std::vector<NodePtr>& children, bool zero_optimum,
                                  const char* what) {
  const auto& first = *children.front();
  for (const auto& c : children) {
    require(c->dim == first.dim, std::string(what) + ": components differ in dimension");
    require(same_point(c->center, first.center),
            std::string(what) + ": components must share the star center");
    if (zero_optimum)
      require(std::abs(c->f_star) <= 1e-12,
              std::string(what) + ": components must have optimum value 0");
  }
}

}  // namespace detail

inline FunctionSpec FunctionSpec::from_json(const json& j) {
  using namespace detail;
  require(j.is_object() && j.contains("kind") && j.at("kind").is_string(),
          "function description needs a string 'kind'");
  auto node = std::make_shared<Node>();
  node->kind = kind_from_string(j.at("kind").get<std::string>());
  node->params = j;

  switch (node->kind) {
    case FunctionKind::constant:
      check_keys(j, {"dim", "value", "center"});
      node->dim = dimension(j);
      node->center = center_of(j, node->dim);
      node->value = required_number(j, "value");
      node->f_star = node->value;
      break;
    case FunctionKind::sphere:
      check_keys(j, {"dim", "center", "scale"});
      node->dim = dimension(j);
      node->center = center_of(j, node->dim);
      node->scale = number(j, "scale", 1.0);
      require(node->scale > 0.0, "sphere scale must be positive");
      break;
    case FunctionKind::sqrt_canyon:
    case FunctionKind::two_slope:
    case FunctionKind::nesterov_polyak:
      check_keys(j, {"dim", "center"});
      node->dim = dimension(j);
      node->center = center_of(j, node->dim);
      break;
    case FunctionKind::linear_extension: {
      check_keys(j, {"dim", "center", "profile"});
      node->dim = dimension(j);
      require(node->dim >= 2, "linear_extension needs dim >= 2");
      node->center = center_of(j, node->dim);
      const json prof = j.value("profile", json{{"type", "oscillating"}});
      require(prof.is_object(), "profile must be an object");
      const std::string type = prof.value("type", "oscillating");
      SphereProfile& g = node->profile;
      if (type == "oscillating") {
        check_keys(prof, {"type", "base", "amplitude", "frequency"});
        g.type = SphereProfile::Type::oscillating;
        g.base = number(prof, "base", 2.0);
        g.amplitude = number(prof, "amplitude", 1.0);
        g.frequency = number(prof, "frequency", 40.0);
      } else if (type == "sliver") {
        check_keys(prof, {"type", "low", "high", "fraction", "phase"});
        g.type = SphereProfile::Type::sliver;
        g.low = number(prof, "low", 1.0);
        g.high = number(prof, "high", 10.0);
        g.fraction = number(prof, "fraction", 0.01);
        g.phase = number(prof, "phase", 0.0);
        require(g.fraction > 0.0 && g.fraction < 1.0, "sliver fraction must lie in (0,1)");
      } else {
        throw InvalidInput("unknown profile type '" + type + "'");
      }
      require(g.min_value() > 0.0, "linear_extension profile must be positive");
      break;
    }
    case FunctionKind::monomial_sos: {
      check_keys(j, {"dim", "center", "terms"});
      node->dim = dimension(j);
      node->center = center_of(j, node->dim);
      require(j.contains("terms") && j.at("terms").is_array() && !j.at("terms").empty(),
              "monomial_sos needs a non-empty 'terms' array");
      for (const auto& t : j.at("terms")) {
        check_keys(t, {"coef", "exponents"});
        const double coef = number(t, "coef", 1.0);
        require(coef >= 0.0, "monomial coefficients must be non-negative");
        require(t.contains("exponents") && t.at("exponents").is_array() &&
                    static_cast<int>(t.at("exponents").size()) == node->dim,
                "each term needs 'exponents' with one entry per dimension");
        std::vector<int> e;
        int degree = 0;
        for (const auto& v : t.at("exponents")) {
          require(v.is_number_integer() && v.get<int>() >= 0,
                  "exponents must be non-negative integers");
          e.push_back(v.get<int>());
          degree += e.back();
        }
        if (degree == 0) node->f_star += coef;
        node->coefs.push_back(coef);
        node->exponents.push_back(std::move(e));
      }
      break;
    }
    case FunctionKind::erm_p_loss: {
      check_keys(j, {"data", "theta", "p"});
      node->center = vector_from_json(j.at("theta"), "theta");
      node->dim = static_cast<int>(node->center.size());
      require(node->dim >= 1, "theta must be non-empty");
      node->p = required_number(j, "p");
      require(node->p > 0.0, "erm_p_loss needs p > 0");
      require(j.contains("data") && j.at("data").is_array() && !j.at("data").empty(),
              "erm_p_loss needs a non-empty 'data' array");
      node->matrix.resize(static_cast<Eigen::Index>(j.at("data").size()), node->dim);
      for (std::size_t i = 0; i < j.at("data").size(); ++i) {
        const Vector row = vector_from_json(j.at("data")[i], "data point");
        require(row.size() == node->dim, "data point has wrong dimension");
        node->matrix.row(static_cast<Eigen::Index>(i)) = row.transpose();
      }
      break;
    }
    case FunctionKind::irrational_center: {
      check_keys(j, {"i", "j"});
      node->dim = 2;
      node->center = Vector(2);
      node->center << 1.0 / std::sqrt(2.0) + number(j, "i", 0.0),
          1.0 / std::sqrt(3.0) + number(j, "j", 0.0);
      break;
    }
    case FunctionKind::affine_shift: {
      check_keys(j, {"component", "center", "offset", "matrix"});
      require(j.contains("component"), "affine_shift needs 'component'");
      auto child = FunctionSpec::from_json(j.at("component")).node();
      node->dim = child->dim;
      node->children = {child};
      node->inner_center = child->center;
      node->center = center_of(j, node->dim);
      node->value = number(j, "offset", 0.0);
      node->f_star = child->f_star + node->value;
      node->matrix = Matrix::Identity(node->dim, node->dim);
      if (j.contains("matrix")) {
        const json& m = j.at("matrix");
        require(m.is_array() && static_cast<int>(m.size()) == node->dim,
                "matrix must be square with the component's dimension");
        for (int r = 0; r < node->dim; ++r) {
          const Vector row = vector_from_json(m[static_cast<std::size_t>(r)], "matrix row");
          require(row.size() == node->dim, "matrix must be square");
          node->matrix.row(r) = row.transpose();
        }
      }
      break;
    }
    case FunctionKind::power: {
      check_keys(j, {"component", "p"});
      require(j.contains("component"), "power needs 'component'");
      auto child = FunctionSpec::from_json(j.at("component")).node();
      node->p = required_number(j, "p");
      require(node->p >= 1.0, "power needs p >= 1");
      require(std::abs(child->f_star) <= 1e-12, "power: component must have optimum value 0");
      node->dim = child->dim;
      node->center = child->center;
      node->children = {child};
      break;
    }
    case FunctionKind::sum:
    case FunctionKind::product: {
      check_keys(j, {"components"});
      node->children = children_of(j);
      const bool product = node->kind == FunctionKind::product;
      require_shared_center(node->children, product, product ? "product" : "sum");
      node->dim = node->children.front()->dim;
      node->center = node->children.front()->center;
      node->f_star = 0.0;
      for (const auto& c : node->children) node->f_star += c->f_star;
      if (product) node->f_star = 0.0;
      break;
    }
    case FunctionKind::power_mean: {
      check_keys(j, {"components", "p"});
      node->children = children_of(j);
      require_shared_center(node->children, true, "power_mean");
      node->p = required_number(j, "p");
      node->dim = node->children.front()->dim;
      node->center = node->children.front()->center;
      break;
    }
    case FunctionKind::stochastic_mixture: {
      check_keys(j, {"components", "weights"});
      node->children = children_of(j);
      require_shared_center(node->children, false, "stochastic_mixture");
      for (const auto& c : node->children)
        require(std::abs(c->f_star - node->children.front()->f_star) <= 1e-12,
                "stochastic_mixture: components must share the optimum value");
      node->dim = node->children.front()->dim;
      node->center = node->children.front()->center;
      node->f_star = node->children.front()->f_star;
      std::vector<double> w(node->children.size(), 1.0);
      if (j.contains("weights")) {
        const Vector wv = vector_from_json(j.at("weights"), "weights");
        require(static_cast<std::size_t>(wv.size()) == w.size(),
                "one weight per component required");
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = wv[static_cast<Eigen::Index>(i)];
      }
      double total = 0.0;
      for (double v : w) {
        require(v >= 0.0, "weights must be non-negative");
        total += v;
      }
      require(total > 0.0, "weights must not all be zero");
      double run = 0.0;
      for (double& v : w) {
        v /= total;
        run += v;
        node->cumulative.push_back(run);
      }
      node->cumulative.back() = 1.0;
      node->weights = std::move(w);
      break;
    }
    case FunctionKind::minimum: {
      // Not star-convex in general; exists to exercise the checker.
      check_keys(j, {"components", "center"});
      node->children = children_of(j);
      node->dim = node->children.front()->dim;
      for (const auto& c : node->children)
        require(c->dim == node->dim, "minimum: components differ in dimension");
      node->center = j.contains("center") ? center_of(j, node->dim) : node->children.front()->center;
      node->f_star = detail::eval_node(*node, node->center);
      break;
    }
  }
  return FunctionSpec(std::move(node));
}

/// Mixture of functions sharing a star center and optimum; the oracle draws
/// one component per query according to the weights.
inline FunctionSpec wrap_stochastic(const std::vector<FunctionSpec>& specs,
                                    const std::vector<double>& weights) {
  require(!specs.empty(), "wrap_stochastic needs at least one component");
  require(weights.empty() || weights.size() == specs.size(), "one weight per component required");
  json j{{"kind", "stochastic_mixture"}, {"components", json::array()}};
  for (const auto& s : specs) j["components"].push_back(s.to_json());
  if (!weights.empty()) j["weights"] = weights;
  return FunctionSpec::from_json(j);
}

// ---------------------------------------------------------------------------
// Catalog

/// Named presets. A benchmark reference is {"name": <preset>, ...keys}; the
/// extra keys replace the preset's top-level keys.
inline const std::map<std::string, json>& catalog() {
  static const std::map<std::string, json> presets = [] {
    std::map<std::string, json> m;
    m["constant"] = {{"kind", "constant"}, {"dim", 2}, {"value", 5.0}};
    m["sphere"] = {{"kind", "sphere"}, {"dim", 2}, {"center", {3.0, -2.0}}};
    m["sqrt_canyon"] = {{"kind", "sqrt_canyon"}, {"dim", 2}, {"center", {-1.5, 2.5}}};
    m["two_slope"] = {{"kind", "two_slope"}, {"dim", 2}};
    m["nesterov_polyak"] = {{"kind", "nesterov_polyak"}, {"dim", 2}};
    m["linear_extension"] = {
        {"kind", "linear_extension"},
        {"dim", 2},
        {"center", {1.0, 2.0}},
        {"profile", {{"type", "oscillating"}, {"base", 2.0}, {"amplitude", 1.0}, {"frequency", 40.0}}}};
    m["linear_extension_sliver"] = {
        {"kind", "linear_extension"},
        {"dim", 2},
        {"profile", {{"type", "sliver"}, {"low", 1.0}, {"high", 10.0}, {"fraction", 0.01}}}};
    m["monomial_sos"] = {{"kind", "monomial_sos"},
                         {"dim", 2},
                         {"terms",
                          {{{"coef", 1.0}, {"exponents", {2, 2}}},
                           {{"coef", 1.0}, {"exponents", {2, 0}}},
                           {{"coef", 1.0}, {"exponents", {0, 2}}}}}};
    m["erm_p_loss"] = {{"kind", "erm_p_loss"},
                       {"theta", {0.5, -0.25}},
                       {"p", 0.5},
                       {"data", {{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}, {0.5, -2.0}}}};
    m["irrational_center"] = {{"kind", "irrational_center"}, {"i", 0}, {"j", 0}};
    m["power_mean"] = {{"kind", "power_mean"},
                       {"p", 0.5},
                       {"components",
                        {{{"kind", "sqrt_canyon"}, {"dim", 2}},
                         {{"kind", "sphere"}, {"dim", 2}, {"scale", 2.0}}}}};
    m["product"] = {{"kind", "product"},
                    {"components",
                     {{{"kind", "two_slope"}, {"dim", 2}}, {{"kind", "sqrt_canyon"}, {"dim", 2}}}}};
    m["sum"] = {{"kind", "sum"},
                {"components",
                 {{{"kind", "nesterov_polyak"}, {"dim", 2}}, {{"kind", "sphere"}, {"dim", 2}}}}};
    m["stochastic_mixture"] = {{"kind", "stochastic_mixture"},
                               {"components",
                                {{{"kind", "irrational_center"}},
                                 {{"kind", "affine_shift"},
                                  {"component", {{"kind", "sphere"}, {"dim", 2}}},
                                  {"center", {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(3.0)}}}}}};
    // ||x||, written as a linear extension with a flat profile.
    const json norm = {{"kind", "linear_extension"},
                       {"dim", 2},
                       {"profile", {{"type", "oscillating"}, {"base", 1.0}, {"amplitude", 0.0}, {"frequency", 1.0}}}};
    m["broken_min"] = {{"kind", "minimum"},
                       {"center", {0.0, 0.0}},
                       {"components",
                        {norm,
                         {{"kind", "affine_shift"},
                          {"component", norm},
                          {"center", {2.0, 0.0}},
                          {"offset", 0.1}}}}};
    return m;
  }();
  return presets;
}

/// Resolves either a full description ({"kind": ...}) or a catalog reference.
inline FunctionSpec resolve_benchmark(const json& ref) {
  if (ref.is_string()) return resolve_benchmark(json{{"name", ref}});
  require(ref.is_object(), "benchmark must be a name or an object");
  if (ref.contains("kind")) return FunctionSpec::from_json(ref);
  require(ref.contains("name") && ref.at("name").is_string(),
          "benchmark needs either 'kind' or 'name'");
  const std::string name = ref.at("name").get<std::string>();
  auto it = catalog().find(name);
  require(it != catalog().end(), "unknown benchmark '" + name + "'");
  json merged = it->second;
  for (auto kv = ref.begin(); kv != ref.end(); ++kv)
    if (kv.key() != "name") merged[kv.key()] = kv.value();
  return FunctionSpec::from_json(merged);
}

// ---------------------------------------------------------------------------
// Oracle

/// A Gaussian N(mean, factor * factor^T) in original coordinates.
struct GaussianQuery {
  Vector mean;
  Matrix factor;

  /// Axis-aligned Gaussian with the given per-coordinate widths.
  static GaussianQuery axis_aligned(const Vector& mean, const Vector& widths) {
    require(mean.size() == widths.size(), "widths must match the mean's dimension");
    GaussianQuery q{mean, Matrix::Zero(mean.size(), mean.size())};
    for (Eigen::Index i = 0; i < widths.size(); ++i) {
      require(widths[i] >= 0.0 && std::isfinite(widths[i]), "widths must be positive");
      q.factor(i, i) = std::max(widths[i], kMinWidth);
    }
    return q;
  }
};

struct OracleCounters {
  std::uint64_t evaluations = 0;
  std::uint64_t out_of_ball = 0;
};

/// Weak sampling evaluation oracle with well-guarantee bounds (R, B).
///
/// Each query draws y ~ N(mean, Sigma) from the caller's stream and answers
/// f(y) plus uniform slack in (-eps_oracle, eps_oracle). Queries with
/// ||y|| > 10 n R are answered but counted.
class Oracle {
 public:
  using Evaluator = std::function<double(const Eigen::Ref<const Vector>&, std::size_t)>;
  using Observer = std::function<void(const Vector& y, std::size_t component, double value)>;

  /// Oracle over a benchmark. When B is omitted it is taken from the spec's
  /// analytic bound over the 10nR ball. The Def.-style contract is checked on
  /// `check_samples` random points of that ball.
  Oracle(FunctionSpec spec, double R, std::optional<double> B = std::nullopt,
         int check_samples = 2048, std::uint64_t check_seed = 0x0DDBA11)
      : spec_(std::move(spec)), dim_(spec_.dim()), R_(R) {
    require(R > 0.0 && std::isfinite(R), "R must be positive");
    require(spec_.star_center().norm() <= R, "star center lies outside the radius-R ball");
    const double outer = 10.0 * dim_ * R_;
    B_ = B ? *B : std::max(1.0, spec_.value_bound(outer));
    require(B_ > 0.0 && std::isfinite(B_), "B must be positive and finite");
    Stream rng = seed_schedule(check_seed, 0, 0, 0);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif;
    Vector x(dim_);
    for (int t = 0; t < check_samples; ++t) {
      for (int i = 0; i < dim_; ++i) x[i] = normal(rng);
      const double r = (t % 4 == 0) ? outer : outer * std::pow(unif(rng), 1.0 / dim_);
      x *= r / std::max(x.norm(), 1e-300);
      for (std::size_t c = 0; c < spec_.component_count(); ++c)
        require(std::abs(spec_.component(x, c)) <= B_ * (1.0 + 1e-12),
                "function exceeds the value bound B inside the 10nR ball (value " +
                    std::to_string(spec_.component(x, c)) + ", B " + std::to_string(B_) + ")");
    }
    evaluator_ = [s = spec_](const Eigen::Ref<const Vector>& y, std::size_t c) {
      return s.component(y, c);
    };
  }

  /// Oracle over an external evaluator; the bounds are taken on trust.
  Oracle(int dim, Evaluator evaluator, double R, double B)
      : dim_(dim), R_(R), B_(B), evaluator_(std::move(evaluator)) {
    require(dim >= 1 && R > 0.0 && B > 0.0, "external oracle needs dim >= 1, R > 0, B > 0");
  }

  Oracle(const Oracle&) = delete;
  Oracle& operator=(const Oracle&) = delete;

  int dim() const { return dim_; }
  double R() const { return R_; }
  double B() const { return B_; }
  const FunctionSpec& spec() const { return spec_; }
  bool has_spec() const { return static_cast<bool>(spec_); }

  OracleCounters counters() const {
    return {evaluations_.load(std::memory_order_relaxed),
            out_of_ball_.load(std::memory_order_relaxed)};
  }

  /// Installs a hook that sees every sampled point; not synchronized.
  void set_observer(Observer observer) { observer_ = std::move(observer); }

  /// Draws y ~ N(q.mean, q.factor q.factor^T) and returns the slackened
  /// value. If `standardized` is non-null it receives the standard normal
  /// draw u with y = mean + factor * u.
  double sample(const GaussianQuery& q, double eps_oracle, Stream& rng,
                Vector* standardized = nullptr) const {
    thread_local Vector u;
    thread_local Vector y;
    Vector& draw = standardized ? *standardized : u;
    draw.resize(dim_);
    std::normal_distribution<double> normal;
    for (int i = 0; i < dim_; ++i) draw[i] = normal(rng);
    y.resize(dim_);
    y.noalias() = q.mean + q.factor * draw;
    return answer(y, eps_oracle, rng);
  }

  /// sample_oracle: axis-aligned Gaussian around `mean`.
  double sample(const Vector& mean, const Vector& widths, double eps_oracle, Stream& rng) const {
    require(mean.size() == dim_, "dimension mismatch");
    for (Eigen::Index i = 0; i < widths.size(); ++i)
      require(widths[i] > 0.0, "widths must be positive");
    return sample(GaussianQuery::axis_aligned(mean, widths), eps_oracle, rng);
  }

 private:
  double answer(const Vector& y, double eps_oracle, Stream& rng) const {
    require(eps_oracle >= 0.0, "eps_oracle must be non-negative");
    evaluations_.fetch_add(1, std::memory_order_relaxed);
    const double outer = 10.0 * dim_ * R_;
    if (y.squaredNorm() > outer * outer) out_of_ball_.fetch_add(1, std::memory_order_relaxed);
    std::size_t component = 0;
    if (spec_ && spec_.component_count() > 1) {
      std::uniform_real_distribution<double> unif;
      component = spec_.pick_component(unif(rng));
    }
    double value = evaluator_(y, component);
    if (observer_) observer_(y, component, value);
    if (eps_oracle > 0.0) {
      std::uniform_real_distribution<double> unif(-1.0, 1.0);
      value += std::nextafter(eps_oracle, 0.0) * unif(rng);
    }
    return value;
  }

  FunctionSpec spec_;
  int dim_ = 0;
  double R_ = 1.0;
  double B_ = 1.0;
  Evaluator evaluator_;
  Observer observer_;
  mutable std::atomic<std::uint64_t> evaluations_{0};
  mutable std::atomic<std::uint64_t> out_of_ball_{0};
};

// ---------------------------------------------------------------------------
// Star-convexity checker

struct StarConvexityWitness {
  Vector x;
  double alpha = 0.0;
};

struct StarConvexityReport {
  bool passed = true;
  double worst_violation = -std::numeric_limits<double>::infinity();
  std::optional<StarConvexityWitness> witness;
  int trials = 0;
};

/// Samples x uniformly in the ball of the given radius and alpha in [0,1]
/// and records the largest f(a x* + (1-a) x) - [a f(x*) + (1-a) f(x)].
/// A violation counts once it exceeds tolerance * max(1, |a f(x*)| + |(1-a) f(x)|).
inline StarConvexityReport check_star_convexity(const FunctionSpec& spec,
                                                const Vector& candidate_center, int trials,
                                                Stream& rng, std::optional<double> radius = {},
                                                double tolerance = 1e-9) {
  require(trials >= 1, "trials must be >= 1");
  require(candidate_center.size() == spec.dim(), "candidate center has wrong dimension");
  const int n = spec.dim();
  const double ball = radius ? *radius : 10.0 * n * std::max(1.0, candidate_center.norm());
  const double f_center = spec(candidate_center);

  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  StarConvexityReport report;
  report.trials = trials;
  double worst_excess = -std::numeric_limits<double>::infinity();
  Vector x(n);
  for (int t = 0; t < trials; ++t) {
    for (int i = 0; i < n; ++i) x[i] = normal(rng);
    x *= ball * std::pow(unif(rng), 1.0 / n) / std::max(x.norm(), 1e-300);
    const double alpha = unif(rng);
    const Vector mid = alpha * candidate_center + (1.0 - alpha) * x;
    const double fx = spec(x);
    const double interp = alpha * f_center + (1.0 - alpha) * fx;
    const double violation = spec(mid) - interp;
    const double scale =
        std::max(1.0, std::abs(alpha * f_center) + std::abs((1.0 - alpha) * fx));
    const double excess = violation - tolerance * scale;
    report.worst_violation = std::max(report.worst_violation, violation);
    if (excess > 0.0 && excess > worst_excess) {
      worst_excess = excess;
      report.passed = false;
      report.witness = StarConvexityWitness{x, alpha};
    }
  }
  return report;
}

}  // namespace starcut
