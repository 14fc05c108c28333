#include "oel/dataset.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "oel/common.hpp"

namespace oel::data {

namespace {

std::vector<unsigned char> read_all(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return std::vector<unsigned char>((std::istreambuf_iterator<char>(is)),
                                    std::istreambuf_iterator<char>());
}

std::vector<unsigned char> gunzip(const std::vector<unsigned char>& in) {
  z_stream strm{};
  if (inflateInit2(&strm, 16 + MAX_WBITS) != Z_OK)
    throw std::runtime_error("zlib inflateInit failed");
  std::vector<unsigned char> out;
  out.reserve(in.size() * 4);
  unsigned char buf[1 << 16];
  strm.next_in = const_cast<unsigned char*>(in.data());
  strm.avail_in = uInt(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    strm.next_out = buf;
    strm.avail_out = sizeof(buf);
    rc = inflate(&strm, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&strm);
      throw FormatError("gzip payload corrupt", std::size_t(strm.total_in));
    }
    out.insert(out.end(), buf, buf + (sizeof(buf) - strm.avail_out));
  }
  inflateEnd(&strm);
  return out;
}

std::vector<unsigned char> read_maybe_gzip(const std::string& path) {
  std::vector<unsigned char> bytes = read_all(path);
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return gunzip(bytes);
  return bytes;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off) {
  if (off + 4 > b.size()) throw FormatError("truncated IDX header", off);
  return std::uint32_t(b[off]) << 24 | std::uint32_t(b[off + 1]) << 16 |
         std::uint32_t(b[off + 2]) << 8 | std::uint32_t(b[off + 3]);
}

}  // namespace

std::vector<int> Dataset::indices(Split s) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

Dataset load_mnist_idx(const std::string& image_path, const std::string& label_path) {
  std::vector<unsigned char> img = read_maybe_gzip(image_path);
  std::vector<unsigned char> lab = read_maybe_gzip(label_path);

  std::uint32_t magic = be32(img, 0);
  if (magic != 2051) throw FormatError("image magic " + std::to_string(magic) + ", want 2051", 0);
  std::uint32_t count = be32(img, 4), rows = be32(img, 8), cols = be32(img, 12);
  std::size_t need = 16 + std::size_t(count) * rows * cols;
  if (img.size() < need) throw FormatError("image payload truncated", img.size());

  std::uint32_t lmagic = be32(lab, 0);
  if (lmagic != 2049)
    throw FormatError("label magic " + std::to_string(lmagic) + ", want 2049", 0);
  std::uint32_t lcount = be32(lab, 4);
  if (lcount != count)
    throw FormatError("label count " + std::to_string(lcount) + " != image count " +
                          std::to_string(count),
                      4);
  if (lab.size() < 8 + lcount) throw FormatError("label payload truncated", lab.size());

  Dataset ds;
  int dim = int(rows * cols);
  ds.inputs.resize(count, dim);
  ds.labels = Eigen::MatrixXd::Zero(count, 10);
  ds.raw_labels.resize(count);
  ds.split.assign(count, Split::train);
  for (std::uint32_t i = 0; i < count; ++i) {
    const unsigned char* px = img.data() + 16 + std::size_t(i) * dim;
    for (int j = 0; j < dim; ++j) ds.inputs(i, j) = double(px[j]) / 255.0;
    std::uint8_t y = lab[8 + i];
    if (y > 9) throw FormatError("label value " + std::to_string(y) + " out of range", 8 + i);
    ds.raw_labels[i] = y;
    ds.labels(i, y) = 1.0;
  }
  return ds;
}

StandardizeTransform standardize(Dataset& ds, Split fit_on) {
  std::vector<int> rows = ds.indices(fit_on);
  if (rows.empty()) rows = ds.indices(Split::train);
  if (rows.empty()) throw std::invalid_argument("standardize: empty dataset");
  double n = double(rows.size()) * ds.dim();
  double mean = 0.0;
  for (int r : rows) mean += ds.inputs.row(r).sum();
  mean /= n;
  double ss = 0.0;
  for (int r : rows) ss += (ds.inputs.row(r).array() - mean).square().sum();
  double var = ss / n;
  if (var <= 0.0) throw std::invalid_argument("standardize: zero variance");
  double sd = std::sqrt(var);
  ds.inputs = (ds.inputs.array() - mean) / sd;
  return {mean, sd};
}

void split_and_subsample(Dataset& ds, int train_size, int val_size, std::uint64_t seed) {
  int n = ds.size();
  if (train_size < 0 || val_size < 0 || train_size + val_size > n)
    throw std::invalid_argument("split sizes oversubscribe the dataset");
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng rng = SeedTree(seed).child("split").stream();
  for (int i = n - 1; i > 0; --i) {
    int j = int(rng.next_u64() % std::uint64_t(i + 1));
    std::swap(order[i], order[j]);
  }
  for (int i = 0; i < n; ++i) {
    Split s = i < train_size ? Split::train : (i < train_size + val_size ? Split::val : Split::test);
    ds.split[order[i]] = s;
  }
}

std::vector<Eigen::VectorXd> random_inputs(int dim, int count, std::uint64_t seed) {
  std::vector<Eigen::VectorXd> out(count);
  SeedTree root(seed);
  for (int c = 0; c < count; ++c) {
    Rng rng = root.child("input", std::uint64_t(c)).stream();
    out[c].resize(dim);
    for (int i = 0; i < dim; ++i) out[c][i] = rng.next_double();
  }
  return out;
}

Dataset synthetic_mnist_like(int count, std::uint64_t seed) {
  constexpr int kSide = 28, kDim = kSide * kSide, kClasses = 10;
  SeedTree root(seed);
  // class prototypes: sums of a few smooth Gaussian bumps, fixed per class
  std::vector<Eigen::VectorXd> proto(kClasses, Eigen::VectorXd::Zero(kDim));
  for (int c = 0; c < kClasses; ++c) {
    Rng rng = root.child("class", std::uint64_t(c)).stream();
    for (int bump = 0; bump < 4; ++bump) {
      double cx = 4.0 + 20.0 * rng.next_double();
      double cy = 4.0 + 20.0 * rng.next_double();
      double s2 = 2.0 + 10.0 * rng.next_double();
      double amp = 0.5 + 0.5 * rng.next_double();
      for (int y = 0; y < kSide; ++y)
        for (int x = 0; x < kSide; ++x) {
          double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
          proto[c][y * kSide + x] += amp * std::exp(-d2 / (2.0 * s2));
        }
    }
    proto[c] = proto[c].cwiseMin(1.0);
  }
  Dataset ds;
  ds.inputs.resize(count, kDim);
  ds.labels = Eigen::MatrixXd::Zero(count, kClasses);
  ds.raw_labels.resize(count);
  ds.split.assign(count, Split::train);
  Rng rng = root.child("samples").stream();
  for (int i = 0; i < count; ++i) {
    int c = int(rng.next_u64() % kClasses);
    double jitter = 0.35;
    for (int j = 0; j < kDim; ++j) {
      double v = proto[c][j] + jitter * (rng.next_double() - 0.5);
      ds.inputs(i, j) = std::min(1.0, std::max(0.0, v));
    }
    ds.raw_labels[i] = std::uint8_t(c);
    ds.labels(i, c) = 1.0;
  }
  return ds;
}

void write_idx_pair(const Dataset& ds, const std::string& image_path,
                    const std::string& label_path) {
  int side = int(std::lround(std::sqrt(double(ds.dim()))));
  if (side * side != ds.dim()) throw std::invalid_argument("write_idx_pair: non-square images");
  auto put_be32 = [](std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<char*>(b), 4);
  };
  std::ofstream io(image_path, std::ios::binary);
  if (!io) throw std::runtime_error("cannot write: " + image_path);
  put_be32(io, 2051);
  put_be32(io, std::uint32_t(ds.size()));
  put_be32(io, std::uint32_t(side));
  put_be32(io, std::uint32_t(side));
  for (int i = 0; i < ds.size(); ++i)
    for (int j = 0; j < ds.dim(); ++j) {
      double v = ds.inputs(i, j);
      unsigned char px =
          static_cast<unsigned char>(std::lround(std::min(1.0, std::max(0.0, v)) * 255.0));
      io.write(reinterpret_cast<char*>(&px), 1);
    }
  std::ofstream lo(label_path, std::ios::binary);
  if (!lo) throw std::runtime_error("cannot write: " + label_path);
  put_be32(lo, 2049);
  put_be32(lo, std::uint32_t(ds.size()));
  for (int i = 0; i < ds.size(); ++i) {
    unsigned char y = ds.raw_labels[i];
    lo.write(reinterpret_cast<char*>(&y), 1);
  }
}

namespace {
constexpr char kMagic[4] = {'O', 'E', 'L', '1'};
constexpr std::uint32_t kKindDataset = 1;

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
}  // namespace

void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write: " + path);
  os.write(kMagic, 4);
  put_u32(os, kKindDataset);
  put_u32(os, std::uint32_t(ds.size()));
  put_u32(os, std::uint32_t(ds.dim()));
  put_u32(os, std::uint32_t(ds.classes()));
  for (int i = 0; i < ds.size(); ++i)
    for (int j = 0; j < ds.dim(); ++j) {
      double v = ds.inputs(i, j);
      os.write(reinterpret_cast<const char*>(&v), 8);
    }
  for (int i = 0; i < ds.size(); ++i)
    for (int j = 0; j < ds.classes(); ++j) {
      double v = ds.labels(i, j);
      os.write(reinterpret_cast<const char*>(&v), 8);
    }
  for (int i = 0; i < ds.size(); ++i) {
    unsigned char y = ds.raw_labels[i];
    unsigned char s = static_cast<unsigned char>(ds.split[i]);
    os.write(reinterpret_cast<char*>(&y), 1);
    os.write(reinterpret_cast<char*>(&s), 1);
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::size_t off = 0;
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic, want OEL1", 0);
  off += 4;
  if (get_u32(is, off) != kKindDataset) throw FormatError("not a dataset container", 4);
  std::uint32_t count = get_u32(is, off), dim = get_u32(is, off), classes = get_u32(is, off);
  Dataset ds;
  ds.inputs.resize(count, dim);
  ds.labels.resize(count, classes);
  ds.raw_labels.resize(count);
  ds.split.resize(count);
  auto read_block = [&](Eigen::MatrixXd& m) {
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) {
        double v;
        is.read(reinterpret_cast<char*>(&v), 8);
        if (!is) throw FormatError("truncated payload", off);
        off += 8;
        m(i, j) = v;
      }
  };
  read_block(ds.inputs);
  read_block(ds.labels);
  for (std::uint32_t i = 0; i < count; ++i) {
    unsigned char y, s;
    is.read(reinterpret_cast<char*>(&y), 1);
    is.read(reinterpret_cast<char*>(&s), 1);
    if (!is) throw FormatError("truncated tags", off);
    off += 2;
    ds.raw_labels[i] = y;
    ds.split[i] = Split(s);
  }
  return ds;
}

}  // namespace oel::data
