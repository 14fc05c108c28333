#include "oel/network.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "oel/common.hpp"
#include "oel/sampling.hpp"

namespace oel {

InitKind init_from_string(const std::string& s) {
  if (s == "gaussian") return InitKind::gaussian;
  if (s == "orthogonal") return InitKind::orthogonal;
  if (s == "mixed") return InitKind::mixed;
  throw std::invalid_argument("unknown init scheme: " + s);
}

const char* to_string(InitKind k) {
  switch (k) {
    case InitKind::gaussian: return "gaussian";
    case InitKind::orthogonal: return "orthogonal";
    case InitKind::mixed: return "mixed";
  }
  return "?";
}

void NetworkConfig::validate() const {
  if (n_in < 1 || n_hidden < 1 || n_out < 1) throw std::invalid_argument("widths must be >= 1");
  if (layers < 1) throw std::invalid_argument("layers must be >= 1");
  if (!(init.cw > 0.0)) throw std::invalid_argument("CW must be positive");
  if (init.cb < 0.0) throw std::invalid_argument("Cb must be non-negative");
}

ParameterSet init_network(const NetworkConfig& config, const SeedTree& seed) {
  config.validate();
  ParameterSet p;
  p.weights.reserve(config.layers);
  p.biases.reserve(config.layers);
  for (int l = 1; l <= config.layers; ++l) {
    int rows = config.width(l), cols = config.width(l - 1);
    SeedTree node = seed.child("layer", std::uint64_t(l));
    Rng wstream = node.child("W").stream();
    bool gaussian_layer = config.init.kind == InitKind::gaussian ||
                          (config.init.kind == InitKind::mixed && l == 1);
    if (gaussian_layer)
      p.weights.push_back(sample_gaussian_matrix(rows, cols, config.init.cw, wstream));
    else
      p.weights.push_back(sample_semi_orthogonal(rows, cols, config.init.cw, wstream));
    if (config.init.cb == 0.0) {
      p.biases.push_back(Eigen::VectorXd::Zero(rows));
    } else {
      Rng bstream = node.child("b").stream();
      Eigen::VectorXd b(rows);
      double s = std::sqrt(config.init.cb);
      for (int i = 0; i < rows; ++i) b[i] = s * bstream.next_normal();
      p.biases.push_back(std::move(b));
    }
  }
  return p;
}

PreactivationStack forward(const NetworkConfig& config, const ParameterSet& params,
                           const Eigen::VectorXd& x) {
  if (x.size() != config.n_in) throw std::invalid_argument("forward: input width mismatch");
  PreactivationStack s;
  s.input = x;
  s.z.reserve(config.layers);
  Activation act{config.act};
  Eigen::VectorXd a = x;
  for (int l = 1; l <= config.layers; ++l) {
    Eigen::VectorXd z = params.biases[l - 1] + params.weights[l - 1] * a;
    if (l < config.layers) {
      a.resize(z.size());
      for (int i = 0; i < z.size(); ++i) a[i] = act.f(z[i]);
    }
    s.z.push_back(std::move(z));
  }
  return s;
}

std::vector<PreactivationStack> forward_batch(const NetworkConfig& config,
                                              const ParameterSet& params,
                                              const std::vector<Eigen::VectorXd>& xs) {
  std::vector<PreactivationStack> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(forward(config, params, x));
  return out;
}

namespace {

constexpr char kMagic[4] = {'O', 'E', 'L', '1'};
constexpr std::uint32_t kKindParameters = 0;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, std::size_t& off) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw FormatError("truncated header", off);
  off += 4;
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

void put_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  // Row-major f64 little-endian. Host is assumed little-endian.
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) {
      double v = m(i, j);
      os.write(reinterpret_cast<const char*>(&v), 8);
    }
}

}  // namespace

void save_parameters(const std::string& path, const NetworkConfig& config,
                     const ParameterSet& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.write(kMagic, 4);
  put_u32(os, kKindParameters);
  put_u32(os, std::uint32_t(config.layers));
  put_u32(os, std::uint32_t(config.n_in));
  put_u32(os, std::uint32_t(config.n_hidden));
  put_u32(os, std::uint32_t(config.n_out));
  put_u32(os, std::uint32_t(config.act));
  put_u32(os, std::uint32_t(config.init.kind));
  double cw = config.init.cw, cb = config.init.cb;
  os.write(reinterpret_cast<const char*>(&cw), 8);
  os.write(reinterpret_cast<const char*>(&cb), 8);
  for (const auto& w : params.weights) put_matrix(os, w);
  for (const auto& b : params.biases) put_matrix(os, b);
}

std::pair<NetworkConfig, ParameterSet> load_parameters(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::size_t off = 0;
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic, want OEL1", 0);
  off += 4;
  std::uint32_t kind = get_u32(is, off);
  if (kind != kKindParameters) throw FormatError("not a parameter container", 4);
  NetworkConfig c;
  c.layers = int(get_u32(is, off));
  c.n_in = int(get_u32(is, off));
  c.n_hidden = int(get_u32(is, off));
  c.n_out = int(get_u32(is, off));
  c.act = ActKind(get_u32(is, off));
  c.init.kind = InitKind(get_u32(is, off));
  is.read(reinterpret_cast<char*>(&c.init.cw), 8);
  is.read(reinterpret_cast<char*>(&c.init.cb), 8);
  if (!is) throw FormatError("truncated header", off);
  off += 16;
  c.validate();
  ParameterSet p;
  auto read_matrix = [&](int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) {
        double v;
        is.read(reinterpret_cast<char*>(&v), 8);
        if (!is) throw FormatError("truncated payload", off);
        off += 8;
        m(i, j) = v;
      }
    return m;
  };
  for (int l = 1; l <= c.layers; ++l) p.weights.push_back(read_matrix(c.width(l), c.width(l - 1)));
  for (int l = 1; l <= c.layers; ++l) p.biases.push_back(read_matrix(c.width(l), 1));
  return {c, p};
}

}  // namespace oel
