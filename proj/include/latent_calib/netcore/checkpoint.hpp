#pragma once

// Binary parameter checkpoint ("LCNN" container). All integers and floats little-endian.
//
//   offset  size  field
//   0       4     magic "LCNN"
//   4       4     u32 format version (= 1)
//   8       8     u64 rng_seed
//   16      4     u32 layer count L
//   then L layer records:
//           4     u32 in_dim
//           4     u32 out_dim
//           1     u8 activation (0 = Identity, 1 = ReLU)
//           8*in_dim*out_dim   f64 weights, row-major (in_dim rows)
//           8*out_dim          f64 biases
//   then    1     u8 has_optimizer_state
//   if set: 3x f64 beta1, beta2, epsilon; u64 step;
//           per layer: f64 m_weights, v_weights (in*out each), m_biases, v_biases (out each)

#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

#include "latent_calib/netcore/network.hpp"

namespace latent_calib::netcore {

inline constexpr std::array<char, 4> kCheckpointMagic{'L', 'C', 'N', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_integral_v<T>);
  std::array<char, sizeof(T)> buf{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  }
  os.write(buf.data(), buf.size());
}

inline void put_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }

template <typename T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> buf{};
  is.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!is) throw CheckpointError("truncated checkpoint");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_le<std::uint64_t>(is)); }

inline void put_tensor(std::ostream& os, const Tensor2& t) {
  for (Eigen::Index i = 0; i < t.size(); ++i) put_f64(os, t.data()[i]);
}

inline Tensor2 get_tensor(std::istream& is, Eigen::Index rows, Eigen::Index cols) {
  Tensor2 t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = get_f64(is);
  return t;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const NetworkParameters& net) {
  validate(net);
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_le<std::uint32_t>(os, kCheckpointVersion);
  detail::put_le<std::uint64_t>(os, net.rng_seed);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& l : net.layers) {
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.in_dim()));
    detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.out_dim()));
    detail::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(l.activation));
    detail::put_tensor(os, l.weights);
    detail::put_tensor(os, l.biases);
  }
  const auto& st = net.optimizer;
  const bool has_state = st.m_weights.size() == net.layers.size();
  detail::put_le<std::uint8_t>(os, has_state ? 1 : 0);
  if (has_state) {
    detail::put_f64(os, st.beta1);
    detail::put_f64(os, st.beta2);
    detail::put_f64(os, st.epsilon);
    detail::put_le<std::uint64_t>(os, st.step);
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
      detail::put_tensor(os, st.m_weights[k]);
      detail::put_tensor(os, st.v_weights[k]);
      detail::put_tensor(os, st.m_biases[k]);
      detail::put_tensor(os, st.v_biases[k]);
    }
  }
  if (!os) throw CheckpointError("failed writing checkpoint");
}

inline NetworkParameters read_checkpoint(std::istream& is) {
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kCheckpointMagic) throw CheckpointError("bad checkpoint magic");
  const auto version = detail::get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  NetworkParameters net;
  net.rng_seed = detail::get_le<std::uint64_t>(is);
  const auto n_layers = detail::get_le<std::uint32_t>(is);
  if (n_layers == 0 || n_layers > 1024) throw CheckpointError("implausible layer count");
  for (std::uint32_t k = 0; k < n_layers; ++k) {
    const auto in = detail::get_le<std::uint32_t>(is);
    const auto out = detail::get_le<std::uint32_t>(is);
    const auto act = detail::get_le<std::uint8_t>(is);
    if (act > 1) throw CheckpointError("unknown activation code");
    DenseLayer l;
    l.activation = static_cast<Activation>(act);
    l.weights = detail::get_tensor(is, in, out);
    l.biases = detail::get_tensor(is, 1, out);
    net.layers.push_back(std::move(l));
  }
  if (detail::get_le<std::uint8_t>(is) == 1) {
    auto& st = net.optimizer;
    st.beta1 = detail::get_f64(is);
    st.beta2 = detail::get_f64(is);
    st.epsilon = detail::get_f64(is);
    st.step = detail::get_le<std::uint64_t>(is);
    for (const auto& l : net.layers) {
      st.m_weights.push_back(detail::get_tensor(is, l.in_dim(), l.out_dim()));
      st.v_weights.push_back(detail::get_tensor(is, l.in_dim(), l.out_dim()));
      st.m_biases.push_back(detail::get_tensor(is, 1, l.out_dim()));
      st.v_biases.push_back(detail::get_tensor(is, 1, l.out_dim()));
    }
  }
  try {
    validate(net);
  } catch (const DimensionError& e) {
    throw CheckpointError(std::string("inconsistent checkpoint: ") + e.what());
  }
  return net;
}

inline void save_checkpoint(const std::filesystem::path& path, const NetworkParameters& net) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open " + path.string() + " for writing");
  write_checkpoint(os, net);
}

inline NetworkParameters load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace latent_calib::netcore
