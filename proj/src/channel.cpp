#include "weic/channel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "weic/seeding.hpp"

namespace weic {

ChannelSet::ChannelSet(int users, int antennas)
    : users_(users), antennas_(antennas), links_(static_cast<std::size_t>(users * users)) {
  for (int t = 0; t < users; ++t)
    for (int k = 0; k < users; ++k)
      if (t != k) links_[slot(t, k)] = CMatrix::Zero(antennas, antennas);
}

std::size_t ChannelSet::slot(UserId sender, UserId receiver) const {
  if (sender < 0 || sender >= users_ || receiver < 0 || receiver >= users_)
    throw std::out_of_range("link index out of range");
  if (sender == receiver) throw std::out_of_range("no self link for user " + std::to_string(sender));
  return static_cast<std::size_t>(sender * users_ + receiver);
}

const CMatrix& ChannelSet::link(UserId sender, UserId receiver) const { return links_[slot(sender, receiver)]; }
CMatrix& ChannelSet::link(UserId sender, UserId receiver) { return links_[slot(sender, receiver)]; }

ChannelSet sample_channels(std::uint64_t seed, const SystemConfig& config, ChannelOptions options) {
  config.validate();
  const int K = config.users;
  const int Nt = config.antennas;
  ChannelSet set(K, Nt);
  std::mt19937_64 rng(mix_seed(seed ^ 0x6368616e6e656cULL));
  std::normal_distribution<double> half(0.0, std::sqrt(0.5));
  auto draw = [&](CMatrix& m) {
    for (int r = 0; r < Nt; ++r)
      for (int c = 0; c < Nt; ++c) {
        const double re = half(rng);
        const double im = half(rng);
        m(r, c) = {re, im};
      }
  };
  for (int t = 0; t < K; ++t)
    for (int k = 0; k < K; ++k) {
      if (t == k) continue;
      if (options.per_round_refresh) {
        draw(set.link(t, k));
      } else if (t < k) {
        draw(set.link(t, k));
        set.link(k, t) = set.link(t, k).transpose();
      }
    }
  return set;
}

CMatrix composite_channel(const ChannelSet& channels, UserId sender, std::span<const UserId> dests) {
  if (dests.empty()) throw std::invalid_argument("composite channel undefined for empty destination set");
  const int Nt = channels.antennas();
  CMatrix s = CMatrix::Zero(Nt, Nt);
  for (UserId k : dests) {
    if (k == sender) throw std::invalid_argument("sender cannot be its own destination");
    const CMatrix& h = channels.link(sender, k);
    CMatrix gram = h.adjoint() * h;
    const double tr = gram.trace().real();
    if (!(tr > 0.0)) throw std::invalid_argument("composite channel undefined for an all-zero link");
    s += gram / tr;
  }
  s /= static_cast<double>(dests.size());
  return s;
}

double composite_similarity(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("composite shapes differ");
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw std::invalid_argument("cosine similarity undefined for a zero matrix");
  // Frobenius inner product <A, B> = tr(A^dagger B).
  const double inner = (a.array().conjugate() * b.array()).sum().real();
  return std::clamp(inner / (na * nb), -1.0, 1.0);
}

nlohmann::ordered_json matrix_to_json(const CMatrix& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

CMatrix matrix_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_array()) throw std::invalid_argument("matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  CMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw std::invalid_argument("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& z = row.at(static_cast<std::size_t>(c));
      if (!z.is_array() || z.size() != 2) throw std::invalid_argument("complex entries are [re, im] pairs");
      m(r, c) = {z.at(0).get<double>(), z.at(1).get<double>()};
    }
  }
  return m;
}

nlohmann::ordered_json vector_to_json(const CVector& v) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back({v(i).real(), v(i).imag()});
  return out;
}

CVector vector_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_array()) throw std::invalid_argument("vector must be an array of [re, im] pairs");
  CVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& z = j[i];
    if (!z.is_array() || z.size() != 2 || !z[0].is_number() || !z[1].is_number())
      throw std::invalid_argument("complex entries are [re, im] pairs");
    v(static_cast<Eigen::Index>(i)) = {z[0].get<double>(), z[1].get<double>()};
  }
  return v;
}

nlohmann::ordered_json channels_to_json(const ChannelSet& channels) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (int t = 0; t < channels.users(); ++t) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int k = 0; k < channels.users(); ++k)
      row.push_back(t == k ? nlohmann::ordered_json(nullptr) : matrix_to_json(channels.link(t, k)));
    out.push_back(std::move(row));
  }
  return out;
}

ChannelSet channels_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("channels must be a nonempty [t][k] array");
  const int K = static_cast<int>(j.size());
  int Nt = -1;
  for (int t = 0; t < K && Nt < 0; ++t)
    for (int k = 0; k < K; ++k)
      if (t != k) {
        Nt = static_cast<int>(j.at(static_cast<std::size_t>(t)).at(static_cast<std::size_t>(k)).size());
        break;
      }
  ChannelSet set(K, std::max(Nt, 0));
  for (int t = 0; t < K; ++t) {
    const auto& row = j.at(static_cast<std::size_t>(t));
    if (!row.is_array() || static_cast<int>(row.size()) != K) throw std::invalid_argument("channels must be K x K");
    for (int k = 0; k < K; ++k) {
      if (t == k) continue;
      CMatrix m = matrix_from_json(row.at(static_cast<std::size_t>(k)));
      if (m.rows() != Nt || m.cols() != Nt) throw std::invalid_argument("every link must be Nt x Nt");
      set.link(t, k) = std::move(m);
    }
  }
  return set;
}

}  // namespace weic
