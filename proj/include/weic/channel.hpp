#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "weic/scenario.hpp"

namespace weic {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Link matrices H[t][k] for every ordered sender/receiver pair. Round t reads
/// row t. Receiver k observes H[t][k]^dagger x, so H is Nt x Nt with the
/// transmit side on the rows.
class ChannelSet {
 public:
  ChannelSet() = default;
  ChannelSet(int users, int antennas);

  int users() const { return users_; }
  int antennas() const { return antennas_; }

  /// Throws std::out_of_range for sender == receiver (half-duplex, no self link).
  const CMatrix& link(UserId sender, UserId receiver) const;
  CMatrix& link(UserId sender, UserId receiver);

 private:
  std::size_t slot(UserId sender, UserId receiver) const;

  int users_ = 0;
  int antennas_ = 0;
  std::vector<CMatrix> links_;
};

struct ChannelOptions {
  // Off: one draw per episode with H[t][k] = H[k][t]^T. On: every link drawn
  // independently, as if each round saw a fresh fading block.
  bool per_round_refresh = false;
};

/// I.i.d. CN(0, 1) entries from a seeded generator.
ChannelSet sample_channels(std::uint64_t seed, const SystemConfig& config, ChannelOptions options = {});

/// Mean of trace-normalized Gram matrices H^dagger H over the destination set.
CMatrix composite_channel(const ChannelSet& channels, UserId sender, std::span<const UserId> dests);

/// Re<S_i, S_j>_F / (|S_i|_F |S_j|_F).
double composite_similarity(const CMatrix& a, const CMatrix& b);

nlohmann::ordered_json matrix_to_json(const CMatrix& m);
CMatrix matrix_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json vector_to_json(const CVector& v);
CVector vector_from_json(const nlohmann::ordered_json& j);

/// Nested [t][k][row][col] of [re, im]; diagonal entries are null.
nlohmann::ordered_json channels_to_json(const ChannelSet& channels);
ChannelSet channels_from_json(const nlohmann::ordered_json& j);

}  // namespace weic
