#include "weic/beamforming.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace weic {

double BeamformerSet::total_power() const {
  double p = 0.0;
  for (const auto& v : vectors) p += v.squaredNorm();
  return p;
}

void SolverParams::validate() const {
  if (!(mu > 0.0) || !(mu_floor > 0.0) || mu_floor > mu) throw std::invalid_argument("need 0 < mu_floor <= mu");
  if (!(mu_decay > 0.0) || mu_decay > 1.0) throw std::invalid_argument("mu_decay must lie in (0, 1]");
  if (!(eps_dinkelbach > 0.0) || !(eps_grad > 0.0)) throw std::invalid_argument("tolerances must be positive");
  if (max_outer < 1 || max_inner < 1) throw std::invalid_argument("iteration caps must be positive");
  if (!(armijo_c > 0.0) || armijo_c > 0.5) throw std::invalid_argument("armijo_c must lie in (0, 0.5]");
  if (!(armijo_backtrack > 0.0) || !(armijo_backtrack < 1.0))
    throw std::invalid_argument("armijo_backtrack must lie in (0, 1)");
}

RoundLinks::RoundLinks(const ChannelSet& channels, UserId sender, const RoundAction& action)
    : sender_(sender), blocks_(static_cast<int>(action.blocks.size())), antennas_(channels.antennas()) {
  for (int b = 0; b < blocks_; ++b)
    for (UserId k : action.blocks[static_cast<std::size_t>(b)]) {
      const CMatrix& h = channels.link(sender, k);
      served_.push_back({k, b, h * h.adjoint()});
    }
  std::sort(served_.begin(), served_.end(), [](const Served& a, const Served& b) { return a.user < b.user; });
}

double RoundLinks::gain(std::size_t u, const CVector& v) const {
  return v.dot(served_[u].gram * v).real();
}

namespace {

void check_beams(const RoundLinks& links, const BeamformerSet& beams) {
  if (static_cast<int>(beams.vectors.size()) != links.blocks())
    throw std::invalid_argument("need exactly one beamformer per message");
  for (const auto& v : beams.vectors)
    if (v.size() != links.antennas()) throw std::invalid_argument("beamformer length must equal Nt");
}

// Stacked beams: block b occupies entries [b*Nt, (b+1)*Nt).
CVector stack(const BeamformerSet& beams, int nt) {
  CVector x(static_cast<Eigen::Index>(beams.vectors.size()) * nt);
  for (std::size_t b = 0; b < beams.vectors.size(); ++b) x.segment(static_cast<Eigen::Index>(b) * nt, nt) = beams.vectors[b];
  return x;
}

BeamformerSet unstack(const CVector& x, int blocks, int nt) {
  BeamformerSet out;
  for (int b = 0; b < blocks; ++b) out.vectors.emplace_back(x.segment(static_cast<Eigen::Index>(b) * nt, nt));
  return out;
}

// Per-user received powers from every beam, plus F_k for a given eta.
struct Powers {
  std::vector<double> signal;
  std::vector<double> interference;  // excludes noise
};

Powers received(const RoundLinks& links, const CVector& x) {
  const int nt = links.antennas();
  Powers p;
  const auto& served = links.served();
  p.signal.resize(served.size());
  p.interference.resize(served.size());
  for (std::size_t u = 0; u < served.size(); ++u) {
    double sig = 0.0;
    double intf = 0.0;
    for (int b = 0; b < links.blocks(); ++b) {
      const double g = links.gain(u, x.segment(static_cast<Eigen::Index>(b) * nt, nt));
      if (b == served[u].block)
        sig = g;
      else
        intf += g;
    }
    p.signal[u] = sig;
    p.interference[u] = intf;
  }
  return p;
}

double min_sinr_of(const RoundLinks& links, const CVector& x) {
  const Powers p = received(links, x);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t u = 0; u < p.signal.size(); ++u)
    m = std::min(m, p.signal[u] / (p.interference[u] + SystemConfig::noise_power));
  return m;
}

double min_f_of(const RoundLinks& links, const CVector& x, double eta) {
  const Powers p = received(links, x);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t u = 0; u < p.signal.size(); ++u)
    m = std::min(m, p.signal[u] - eta * (p.interference[u] + SystemConfig::noise_power));
  return m;
}

// Value and 2 d/dx* gradient of mu log sum exp(-F_k / mu) on the stacked vector.
double smoothed(const RoundLinks& links, const CVector& x, double eta, double mu, CVector* grad) {
  const int nt = links.antennas();
  const auto& served = links.served();
  const Powers p = received(links, x);
  std::vector<double> z(served.size());
  double zmax = -std::numeric_limits<double>::infinity();
  for (std::size_t u = 0; u < served.size(); ++u) {
    const double f = p.signal[u] - eta * (p.interference[u] + SystemConfig::noise_power);
    z[u] = -f / mu;
    zmax = std::max(zmax, z[u]);
  }
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  const double value = mu * (zmax + std::log(sum));
  if (grad != nullptr) {
    grad->setZero(x.size());
    for (std::size_t u = 0; u < served.size(); ++u) {
      const double w = z[u] / sum;
      for (int b = 0; b < links.blocks(); ++b) {
        const auto seg = x.segment(static_cast<Eigen::Index>(b) * nt, nt);
        const double coeff = b == served[u].block ? -2.0 * w : 2.0 * eta * w;
        grad->segment(static_cast<Eigen::Index>(b) * nt, nt) += coeff * (served[u].gram * seg);
      }
    }
  }
  return value;
}

// Unit dominant eigenvector of a Hermitian PSD matrix, phase-fixed so its
// largest entry is real positive.
CVector dominant_direction(const CMatrix& gram) {
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram);
  CVector u = eig.eigenvectors().col(eig.eigenvectors().cols() - 1);
  Eigen::Index big = 0;
  u.cwiseAbs().maxCoeff(&big);
  u *= std::conj(u(big)) / std::abs(u(big));
  return u.normalized();
}

double real_inner(const CVector& a, const CVector& b) { return a.dot(b).real(); }

CVector project_tangent(const CVector& x, const CVector& v, double power) {
  return v - (real_inner(x, v) / power) * x;
}

CVector retract(const CVector& y, double power) { return y * (std::sqrt(power) / y.norm()); }

struct InnerResult {
  CVector x;
  int iterations = 0;
  double grad_norm = 0.0;
};

// Riemannian conjugate gradient descent of the smoothed objective on the
// sphere |x|^2 = P: tangent projection, Polak-Ribiere+ with restart,
// Armijo backtracking, normalization retraction.
InnerResult rcg_minimize(const RoundLinks& links, CVector x, double eta, double mu, double power,
                         const SolverParams& params) {
  InnerResult res;
  CVector egrad;
  double f = smoothed(links, x, eta, mu, &egrad);
  CVector rgrad = project_tangent(x, egrad, power);
  CVector dir = -rgrad;
  const double radius = std::sqrt(power);
  double step_len = 0.5 * radius;
  res.grad_norm = rgrad.norm();

  for (int it = 0; it < params.max_inner; ++it) {
    const double gnorm = rgrad.norm();
    res.grad_norm = gnorm;
    if (gnorm <= params.eps_grad * std::max(1.0, egrad.norm())) break;

    double slope = real_inner(rgrad, dir);
    if (!(slope < 0.0)) {
      dir = -rgrad;
      slope = -gnorm * gnorm;
    }
    const double dnorm = dir.norm();
    double alpha = step_len / dnorm;
    bool accepted = false;
    CVector xn;
    double fn = 0.0;
    for (int bt = 0; bt < 60; ++bt) {
      xn = retract(x + alpha * dir, power);
      fn = smoothed(links, xn, eta, mu, nullptr);
      if (fn <= f + params.armijo_c * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= params.armijo_backtrack;
    }
    res.iterations = it + 1;
    if (!accepted) break;

    CVector egrad_new;
    smoothed(links, xn, eta, mu, &egrad_new);
    const CVector rgrad_new = project_tangent(xn, egrad_new, power);
    const CVector rgrad_moved = project_tangent(xn, rgrad, power);
    const double beta = std::max(0.0, real_inner(rgrad_new, rgrad_new - rgrad_moved) / (gnorm * gnorm));
    dir = -rgrad_new + beta * project_tangent(xn, dir, power);

    const double decrease = f - fn;
    step_len = std::min(2.0 * alpha * dnorm, radius);
    x = std::move(xn);
    f = fn;
    egrad = std::move(egrad_new);
    rgrad = rgrad_new;
    if (decrease <= 1e-15 * (1.0 + std::abs(f))) break;
  }
  res.x = std::move(x);
  return res;
}

}  // namespace

double sinr(const ChannelSet& channels, UserId sender, const RoundAction& action, const BeamformerSet& beams,
            UserId user) {
  const RoundLinks links(channels, sender, action);
  check_beams(links, beams);
  const auto& served = links.served();
  for (std::size_t u = 0; u < served.size(); ++u) {
    if (served[u].user != user) continue;
    double sig = 0.0;
    double intf = 0.0;
    for (int b = 0; b < links.blocks(); ++b) {
      const double g = links.gain(u, beams.vectors[static_cast<std::size_t>(b)]);
      if (b == served[u].block)
        sig = g;
      else
        intf += g;
    }
    return sig / (intf + SystemConfig::noise_power);
  }
  throw std::invalid_argument("user " + std::to_string(user) + " has no assigned message in this round");
}

std::vector<double> round_sinrs(const ChannelSet& channels, UserId sender, const RoundAction& action,
                                const BeamformerSet& beams) {
  const RoundLinks links(channels, sender, action);
  check_beams(links, beams);
  if (links.blocks() == 0) return {};
  const Powers p = received(links, stack(beams, links.antennas()));
  std::vector<double> out(p.signal.size());
  for (std::size_t u = 0; u < out.size(); ++u) out[u] = p.signal[u] / (p.interference[u] + SystemConfig::noise_power);
  return out;
}

double round_time(std::span<const double> sinrs, const SystemConfig& config) {
  double worst = 0.0;
  for (double s : sinrs) {
    if (std::isnan(s) || s < 0.0) throw std::invalid_argument("SINR must be a nonnegative number");
    if (s == 0.0) return kInfiniteTime;
    worst = std::max(worst, config.file_bits / (config.bandwidth * std::log2(1.0 + s)));
  }
  return worst;
}

CVector mrt_beamformer(const CMatrix& h, double power) {
  if (!(h.norm() > 0.0)) throw std::invalid_argument("MRT undefined for an all-zero channel");
  if (!(power >= 0.0)) throw std::invalid_argument("power must be nonnegative");
  return std::sqrt(power) * dominant_direction(h * h.adjoint());
}

double smoothed_objective(const BeamformerSet& beams, double eta, double mu, const RoundLinks& links) {
  if (!(mu > 0.0)) throw std::invalid_argument("smoothing parameter must be positive");
  check_beams(links, beams);
  if (links.served().empty()) throw std::invalid_argument("smoothed objective needs at least one served user");
  return smoothed(links, stack(beams, links.antennas()), eta, mu, nullptr);
}

BeamformerSet smoothed_gradient(const BeamformerSet& beams, double eta, double mu, const RoundLinks& links) {
  if (!(mu > 0.0)) throw std::invalid_argument("smoothing parameter must be positive");
  check_beams(links, beams);
  if (links.served().empty()) throw std::invalid_argument("smoothed gradient needs at least one served user");
  CVector g;
  smoothed(links, stack(beams, links.antennas()), eta, mu, &g);
  return unstack(g, links.blocks(), links.antennas());
}

BeamformerSet mrt_equal_power(const RoundLinks& links, double power) {
  BeamformerSet out;
  const int blocks = links.blocks();
  const auto& served = links.served();
  for (int b = 0; b < blocks; ++b) {
    std::size_t best = served.size();
    double best_gain = -1.0;
    for (std::size_t u = 0; u < served.size(); ++u) {
      if (served[u].block != b) continue;
      const double g = Eigen::SelfAdjointEigenSolver<CMatrix>(served[u].gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
      if (g > best_gain) {
        best_gain = g;
        best = u;
      }
    }
    if (best == served.size()) throw std::invalid_argument("message without destinations");
    // gram = H H^dagger, so its dominant eigenvector is the MRT direction.
    out.vectors.emplace_back(std::sqrt(power / blocks) * dominant_direction(served[best].gram));
  }
  return out;
}

SolveResult dtrcg_solve(const ChannelSet& channels, UserId sender, const RoundAction& action, double power,
                        const SolverParams& params) {
  params.validate();
  if (action.skip()) throw std::invalid_argument("nothing to beamform for a skip action");
  if (!(power > 0.0)) throw std::invalid_argument("power must be positive");
  const RoundLinks links(channels, sender, action);
  const int nt = links.antennas();

  CVector best = stack(mrt_equal_power(links, power), nt);
  double eta = min_sinr_of(links, best);
  double mu = params.mu;

  SolveResult res;
  bool converged = false;
  for (int outer = 1; outer <= params.max_outer; ++outer) {
    InnerResult inner = rcg_minimize(links, best, eta, mu, power, params);
    res.inner_iterations += inner.iterations;
    const double fmin = min_f_of(links, inner.x, eta);
    const double s = min_sinr_of(links, inner.x);
    res.trace.push_back({outer, eta, fmin, inner.grad_norm, mu});
    res.outer_iterations = outer;

    const bool improved = s > eta;
    const double tol = params.eps_dinkelbach * (1.0 + eta);
    if (improved) {
      best = std::move(inner.x);
      eta = s;
    }
    if (std::abs(fmin) < tol) {
      converged = true;
      break;
    }
    // At the smoothing floor without progress every further pass repeats this one.
    if (mu <= params.mu_floor && !improved) {
      converged = true;
      break;
    }
    mu = std::max(mu * params.mu_decay, params.mu_floor);
  }
  res.hit_iteration_cap = !converged;
  res.beams = unstack(retract(best, power), links.blocks(), nt);
  res.min_sinr = min_sinr_of(links, stack(res.beams, nt));
  return res;
}

void write_trace_csv(std::ostream& out, const std::vector<SolverTrace>& trace) {
  out << "outer,eta,min_f,grad_norm,mu\n";
  for (const auto& t : trace) out << t.outer << ',' << t.eta << ',' << t.min_f << ',' << t.grad_norm << ',' << t.mu << '\n';
}

nlohmann::ordered_json beams_to_json(const BeamformerSet& beams) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& v : beams.vectors) out.push_back(vector_to_json(v));
  return out;
}

BeamformerSet beams_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_array()) throw std::invalid_argument("beams must be an array of vectors");
  BeamformerSet out;
  for (const auto& v : j) out.vectors.push_back(vector_from_json(v));
  return out;
}

}  // namespace weic
