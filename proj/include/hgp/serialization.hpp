#pragma once

// JSON records for noise realizations, coefficient fields and simulation
// checkpoints. Doubles are written in shortest round-trip form, so a record
// read back reproduces the in-memory state bit for bit.

#include <hgp/dynamics.hpp>
#include <hgp/hermite_core.hpp>
#include <hgp/noise_renorm.hpp>

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hgp {

using json = nlohmann::json;

inline constexpr const char* kNoiseSchema = "hgp.noise/1";
inline constexpr const char* kFieldSchema = "hgp.field/1";
inline constexpr const char* kCheckpointSchema = "hgp.checkpoint/1";

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// FNV-1a over the little-endian bytes of the doubles, as 16 hex digits.
inline std::string fnv1a_checksum(const std::vector<double>& xs) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double x : xs) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[i] = hex[h & 0xfu];
  return out;
}

namespace detail {

/// Column-major (k1 fastest) flattening.
inline std::vector<double> flatten(const Eigen::MatrixXd& m) { return {m.data(), m.data() + m.size()}; }

/// Interleaved re, im in column-major order.
inline std::vector<double> interleave(const Eigen::MatrixXcd& m) {
  std::vector<double> out;
  out.reserve(2 * m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    out.push_back(m.data()[i].real());
    out.push_back(m.data()[i].imag());
  }
  return out;
}

inline Eigen::MatrixXcd deinterleave(const std::vector<double>& xs, int K) {
  if (xs.size() != 2u * K * K) throw FormatError("coefficient array has the wrong length for K=" + std::to_string(K));
  Eigen::MatrixXcd m(K, K);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = cplx(xs[2 * i], xs[2 * i + 1]);
  return m;
}

inline void expect_schema(const json& j, const char* schema) {
  if (!j.contains("schema") || j.at("schema") != schema) {
    throw FormatError(std::string("expected a record with schema ") + schema);
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace detail

inline json noise_to_json(const NoiseRealization& n) {
  const auto xi = detail::flatten(n.xi);
  return {{"schema", kNoiseSchema},
          {"generator", "splitmix64-counter/box-muller-cos"},
          {"seed", n.seed},
          {"stream_index", n.stream_index},
          {"K", n.K},
          {"layout", "column-major, k1 fastest"},
          {"xi", xi},
          {"checksum_fnv1a", fnv1a_checksum(xi)}};
}

inline NoiseRealization noise_from_json(const json& j) {
  detail::expect_schema(j, kNoiseSchema);
  NoiseRealization n;
  n.seed = j.at("seed").get<std::uint64_t>();
  n.stream_index = j.at("stream_index").get<std::uint64_t>();
  n.K = j.at("K").get<int>();
  const auto xi = j.at("xi").get<std::vector<double>>();
  if (xi.size() != static_cast<std::size_t>(n.K) * n.K) throw FormatError("noise record: xi has the wrong length");
  if (fnv1a_checksum(xi) != j.at("checksum_fnv1a").get<std::string>()) throw FormatError("noise record: checksum mismatch");
  n.xi = Eigen::Map<const Eigen::MatrixXd>(xi.data(), n.K, n.K);
  return n;
}

inline json field_to_json(const CoefField& c) {
  return {{"schema", kFieldSchema}, {"K", c.K()}, {"real", c.is_real()}, {"coef", detail::interleave(c.coef())}};
}

/// Reads a field onto `grid`. A field with a smaller cutoff is zero-padded;
/// a larger one is rejected.
inline CoefField field_from_json(const json& j, const GridPtr& grid) {
  detail::expect_schema(j, kFieldSchema);
  const int K = j.at("K").get<int>();
  if (K > grid->K) throw FormatError("field record has cutoff " + std::to_string(K) + " above the grid cutoff");
  Eigen::MatrixXcd coef = Eigen::MatrixXcd::Zero(grid->K, grid->K);
  coef.topLeftCorner(K, K) = detail::deinterleave(j.at("coef").get<std::vector<double>>(), K);
  return CoefField(grid, coef, j.value("real", false));
}

inline CoefField load_field(const std::string& path, const GridPtr& grid) {
  return field_from_json(detail::read_json_file(path), grid);
}

/// Everything needed to continue a single simulation exactly.
struct Checkpoint {
  double t = 0.0;
  int N = 0;
  int K = 0;
  int Mq = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream_index = 0;
  bool zero_noise = false;
  bool counterterm = true;
  double lambda = 0.0;
  IntegratorConfig config;
  Eigen::MatrixXcd u;
};

inline json checkpoint_to_json(const Checkpoint& c) {
  return {{"schema", kCheckpointSchema},
          {"t", c.t},
          {"N", c.N},
          {"K", c.K},
          {"Mq", c.Mq},
          {"seed", c.seed},
          {"stream_index", c.stream_index},
          {"noise", c.zero_noise ? "zero" : "white"},
          {"counterterm", c.counterterm},
          {"lambda", c.lambda},
          {"config",
           {{"dt", c.config.dt},
            {"t_final", c.config.t_final},
            {"record_every", c.config.record_every},
            {"sigma_list", c.config.sigma_list},
            {"blowup_factor", c.config.blowup_factor}}},
          {"u", detail::interleave(c.u)}};
}

inline Checkpoint checkpoint_from_json(const json& j) {
  detail::expect_schema(j, kCheckpointSchema);
  Checkpoint c;
  c.t = j.at("t").get<double>();
  c.N = j.at("N").get<int>();
  c.K = j.at("K").get<int>();
  c.Mq = j.at("Mq").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.stream_index = j.at("stream_index").get<std::uint64_t>();
  c.zero_noise = j.at("noise").get<std::string>() == "zero";
  c.counterterm = j.at("counterterm").get<bool>();
  c.lambda = j.at("lambda").get<double>();
  const json& cfg = j.at("config");
  c.config.dt = cfg.at("dt").get<double>();
  c.config.t_final = cfg.at("t_final").get<double>();
  c.config.record_every = cfg.at("record_every").get<int>();
  c.config.sigma_list = cfg.at("sigma_list").get<std::vector<double>>();
  c.config.blowup_factor = cfg.at("blowup_factor").get<double>();
  c.u = detail::deinterleave(j.at("u").get<std::vector<double>>(), c.K);
  return c;
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << j.dump(1) << '\n';
}

inline Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_json(detail::read_json_file(path)); }

}  // namespace hgp
