#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpgm/tensor.hpp"

namespace cpgm {

// In-memory image dataset: pixels flat in (N, C, H, W) row-major order, values
// in [0, 1]. Label -1 marks unknown samples; known labels lie in
// [0, num_classes).
struct Dataset {
  static constexpr int kUnknownLabel = -1;

  Eigen::Index num = 0;
  Eigen::Index channels = 0;
  Eigen::Index height = 0;
  Eigen::Index width = 0;
  int num_classes = 0;
  Array pixels;
  std::vector<int> labels;

  Eigen::Index image_size() const { return channels * height * width; }
  void validate() const;

  // (B, C, H, W) tensor of the selected images; not gradient-tracked.
  TensorPtr batch(const std::vector<Eigen::Index>& indices) const;
  Dataset select(const std::vector<Eigen::Index>& indices) const;
  std::vector<Eigen::Index> indices_of_class(int label) const;
};

// Big-endian IDX pair (images magic 0x00000803, labels magic 0x00000801);
// pixel bytes are divided by 255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Every pixel iid uniform on [0,1]; all labels set to the unknown sentinel.
Dataset gen_noise_dataset(Eigen::Index n, Eigen::Index c, Eigen::Index h, Eigen::Index w,
                          std::uint64_t seed);

// pixel' = clamp(pixel + u, 0, 1) with u ~ Uniform[0,1]; labels become unknown.
Dataset gen_mnist_noise(const Dataset& base, std::uint64_t seed);

// Synthetic structured grayscale classes (disk, ring, cross, horizontal
// stripes, checkerboard, vertical bar) with per-sample jitter and pixel noise.
// class_ids select archetypes; emitted labels are the positions in class_ids.
constexpr int kNumShapeArchetypes = 6;
Dataset gen_shapes_dataset(Eigen::Index per_class, const std::vector<int>& class_ids,
                           Eigen::Index h, Eigen::Index w, std::uint64_t seed);

struct SplitSpec {
  enum class UnknownSource { heldout_classes, external_dataset, synthetic };
  std::vector<int> known_classes;
  UnknownSource unknown_source = UnknownSource::heldout_classes;
  std::vector<int> heldout_classes;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct SplitResult {
  Dataset train;
  Dataset known_test;
  Dataset unknown_test;          // empty unless unknown_source is heldout_classes
  std::vector<int> class_remap;  // class_remap[new_label] = original label
};

// Partitions the dataset: known classes (labels remapped to [0,K)) split into
// train/known_test by train_fraction; heldout classes become unknown_test with
// the sentinel label.
SplitResult make_split(const Dataset& dataset, const SplitSpec& spec);

// Exact area-average downsampling; upscaling is unsupported.
Dataset downscale(const Dataset& dataset, Eigen::Index h, Eigen::Index w);

// JSON manifest (kind, seed, dims, count, classes) so a synthetic dataset is
// reconstructible from the manifest alone.
std::string shapes_manifest(Eigen::Index per_class, const std::vector<int>& class_ids,
                            Eigen::Index h, Eigen::Index w, std::uint64_t seed);
std::string noise_manifest(Eigen::Index n, Eigen::Index c, Eigen::Index h, Eigen::Index w,
                           std::uint64_t seed);

}  // namespace cpgm
