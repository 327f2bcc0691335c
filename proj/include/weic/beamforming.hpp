#pragma once

#include <limits>
#include <span>
#include <vector>

#include "weic/channel.hpp"
#include "weic/eic.hpp"

namespace weic {

/// One beamforming vector per message of a round, in block order.
struct BeamformerSet {
  std::vector<CVector> vectors;

  double total_power() const;
  bool empty() const { return vectors.empty(); }
};

/// Knobs of the Dinkelbach-type Riemannian conjugate gradient solver.
struct SolverParams {
  double mu = 1.0;               // initial smoothing parameter
  double mu_decay = 0.3;         // per outer iteration
  double mu_floor = 1e-4;
  double eps_dinkelbach = 1e-4;  // relative to 1 + eta
  double eps_grad = 1e-6;        // relative Riemannian gradient norm
  int max_outer = 30;
  int max_inner = 200;
  double armijo_c = 1e-4;
  double armijo_backtrack = 0.5;

  void validate() const;
};

constexpr double kInfiniteTime = std::numeric_limits<double>::infinity();

/// Precomputed per-round geometry: for each served user, its message and the
/// Gram matrix H_k H_k^dagger of its link from the sender.
class RoundLinks {
 public:
  RoundLinks(const ChannelSet& channels, UserId sender, const RoundAction& action);

  struct Served {
    UserId user;
    int block;
    CMatrix gram;
  };

  UserId sender() const { return sender_; }
  int blocks() const { return blocks_; }
  int antennas() const { return antennas_; }
  const std::vector<Served>& served() const { return served_; }

  /// |H_k^dagger v|^2 for user entry `u` and beam `v`.
  double gain(std::size_t u, const CVector& v) const;

 private:
  UserId sender_;
  int blocks_;
  int antennas_;
  std::vector<Served> served_;
};

/// SINR of user k. Throws std::invalid_argument when k has no message in the action.
double sinr(const ChannelSet& channels, UserId sender, const RoundAction& action, const BeamformerSet& beams,
            UserId user);

/// SINR of every served user, ordered as RoundAction::served().
std::vector<double> round_sinrs(const ChannelSet& channels, UserId sender, const RoundAction& action,
                                const BeamformerSet& beams);

/// max over served users of B / (W log2(1 + SINR)); 0 for an empty round,
/// kInfiniteTime when a served SINR is zero.
double round_time(std::span<const double> sinrs, const SystemConfig& config);

/// sqrt(P) times the dominant left singular vector of H, i.e. the unit
/// direction maximizing |H^dagger v|. Throws on an all-zero matrix.
CVector mrt_beamformer(const CMatrix& h, double power);

/// mu * log sum_k exp(-F_k / mu), with
/// F_k = |H_k^dagger v_C(k)|^2 - eta (sum_{i != C(k)} |H_k^dagger v_i|^2 + 1).
/// Approximates -min_k F_k from above within mu log(#served).
double smoothed_objective(const BeamformerSet& beams, double eta, double mu, const RoundLinks& links);

/// Gradient of smoothed_objective with respect to each beam, in the
/// 2 d/dv* convention (the real-embedded Euclidean gradient).
BeamformerSet smoothed_gradient(const BeamformerSet& beams, double eta, double mu, const RoundLinks& links);

struct SolverTrace {
  int outer;
  double eta;
  double min_f;
  double grad_norm;
  double mu;
};

struct SolveResult {
  BeamformerSet beams;
  double min_sinr = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  bool hit_iteration_cap = false;
  std::vector<SolverTrace> trace;
};

/// Per-message MRT toward the block member with the strongest link, equal
/// power split. The solver's starting point.
BeamformerSet mrt_equal_power(const RoundLinks& links, double power);

/// Max-min SINR beamforming for one round. Beams end on the power sphere.
/// Throws std::invalid_argument for a skip action.
SolveResult dtrcg_solve(const ChannelSet& channels, UserId sender, const RoundAction& action, double power,
                        const SolverParams& params = {});

/// Writes "outer,eta,min_f,grad_norm,mu" rows.
void write_trace_csv(std::ostream& out, const std::vector<SolverTrace>& trace);

nlohmann::ordered_json beams_to_json(const BeamformerSet& beams);
BeamformerSet beams_from_json(const nlohmann::ordered_json& j);

}  // namespace weic
