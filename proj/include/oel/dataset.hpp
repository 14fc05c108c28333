#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "oel/rng.hpp"

namespace oel::data {

enum class Split { train, val, test };

struct Dataset {
  Eigen::MatrixXd inputs;          // rows = examples
  Eigen::MatrixXd labels;          // one-hot rows
  std::vector<std::uint8_t> raw_labels;
  std::vector<Split> split;        // tag per example

  int size() const { return int(inputs.rows()); }
  int dim() const { return int(inputs.cols()); }
  int classes() const { return int(labels.cols()); }

  /// Row indices carrying the given tag.
  std::vector<int> indices(Split s) const;
};

/// Parse the big-endian IDX pair (images magic 2051, labels magic 2049);
/// pixels are mapped to [0,1]. Gzip members are detected by magic and
/// inflated transparently.
Dataset load_mnist_idx(const std::string& image_path, const std::string& label_path);

struct StandardizeTransform {
  double mean = 0.0;
  double std = 1.0;
};

/// Global scalar standardization: one (mean, std) fit over every pixel of
/// the examples tagged `fit_on`, applied to all rows.
StandardizeTransform standardize(Dataset& ds, Split fit_on = Split::train);

/// Deterministic shuffle + tagging: first train_size rows -> train, next
/// val_size -> val, remainder -> test.
void split_and_subsample(Dataset& ds, int train_size, int val_size, std::uint64_t seed);

/// Uniform-[0,1] input vectors, fixed across an ensemble.
std::vector<Eigen::VectorXd> random_inputs(int dim, int count, std::uint64_t seed);

/// Deterministic MNIST-shaped surrogate (28x28 images, 10 classes): smooth
/// class-dependent blob patterns plus pixel noise, written through the same
/// code paths as the real data. Used where the real corpus is not on disk.
Dataset synthetic_mnist_like(int count, std::uint64_t seed);

/// Write a dataset out as a raw IDX pair (images + labels).
void write_idx_pair(const Dataset& ds, const std::string& image_path,
                    const std::string& label_path);

/// OEL1 container with the dataset header variant; bit-exact round trip.
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

}  // namespace oel::data
