// Adam with bias correction over a flat parameter vector.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "pallm/common.hpp"
#include "pallm/errors.hpp"

namespace pallm {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 1.0;  // global-norm clip; <=0 disables

  void validate() const {
    if (!(lr > 0)) throw InvalidConfig("lr must be positive");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
      throw InvalidConfig("betas must be in [0,1)");
    if (!(eps > 0)) throw InvalidConfig("adam eps must be positive");
  }

  json to_json() const {
    return json{{"lr", lr}, {"beta1", beta1}, {"beta2", beta2},
                {"eps", eps}, {"grad_clip", grad_clip}};
  }
  static AdamConfig from_json(const json& j) {
    AdamConfig c;
    if (j.contains("lr")) c.lr = j.at("lr").get<double>();
    if (j.contains("beta1")) c.beta1 = j.at("beta1").get<double>();
    if (j.contains("beta2")) c.beta2 = j.at("beta2").get<double>();
    if (j.contains("eps")) c.eps = j.at("eps").get<double>();
    if (j.contains("grad_clip")) c.grad_clip = j.at("grad_clip").get<double>();
    return c;
  }
};

template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(size_t n, const AdamConfig& cfg) : cfg_(cfg), m_(n, T(0)), v_(n, T(0)) {
    cfg_.validate();
  }

  const AdamConfig& config() const { return cfg_; }
  int64_t step_count() const { return t_; }
  size_t size() const { return m_.size(); }
  std::vector<T>& m() { return m_; }
  std::vector<T>& v() { return v_; }
  const std::vector<T>& m() const { return m_; }
  const std::vector<T>& v() const { return v_; }
  void set_step_count(int64_t t) { t_ = t; }

  // One update in place. Throws on non-finite gradients before touching
  // parameters, so a poisoned step never corrupts the model.
  void step(std::vector<T>& params, const std::vector<T>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw ShapeMismatch("adam: size mismatch");
    double sq = 0;
    for (T gr : grads) {
      double g = static_cast<double>(gr);
      if (!std::isfinite(g)) throw NonFiniteGradient("non-finite gradient in adam step");
      sq += g * g;
    }
    double scale = 1.0;
    if (cfg_.grad_clip > 0) {
      double norm = std::sqrt(sq);
      if (norm > cfg_.grad_clip) scale = cfg_.grad_clip / norm;
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params.size(); ++i) {
      double g = static_cast<double>(grads[i]) * scale;
      double m = cfg_.beta1 * static_cast<double>(m_[i]) + (1.0 - cfg_.beta1) * g;
      double v = cfg_.beta2 * static_cast<double>(v_[i]) + (1.0 - cfg_.beta2) * g * g;
      m_[i] = static_cast<T>(m);
      v_[i] = static_cast<T>(v);
      double mh = m / bc1;
      double vh = v / bc2;
      params[i] = static_cast<T>(static_cast<double>(params[i]) -
                                 cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps));
    }
  }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
  std::vector<T> m_, v_;
};

}  // namespace pallm
