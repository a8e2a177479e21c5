#include "cpgm/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "cpgm/errors.hpp"
#include "cpgm/rng.hpp"

namespace cpgm {

void Dataset::validate() const {
  if (static_cast<Eigen::Index>(labels.size()) != num) {
    throw ContractError("dataset: " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(num) + " images");
  }
  if (pixels.size() != num * image_size()) {
    throw ContractError("dataset: pixel buffer does not match dimensions");
  }
  if (num > 0 && ((pixels < 0.0).any() || (pixels > 1.0).any())) {
    throw ContractError("dataset: pixel values outside [0,1]");
  }
  for (int lbl : labels) {
    if (lbl != kUnknownLabel && (lbl < 0 || lbl >= num_classes)) {
      throw ContractError("dataset: label " + std::to_string(lbl) + " outside [0," +
                          std::to_string(num_classes) + ")");
    }
  }
}

TensorPtr Dataset::batch(const std::vector<Eigen::Index>& indices) const {
  const Eigen::Index isz = image_size();
  Array out(static_cast<Eigen::Index>(indices.size()) * isz);
  Eigen::Index row = 0;
  for (Eigen::Index idx : indices) {
    if (idx < 0 || idx >= num) throw ContractError("dataset batch index out of range");
    out.segment(row * isz, isz) = pixels.segment(idx * isz, isz);
    ++row;
  }
  return Tensor::create({static_cast<Eigen::Index>(indices.size()), channels, height, width},
                        std::move(out), false);
}

Dataset Dataset::select(const std::vector<Eigen::Index>& indices) const {
  Dataset out;
  out.num = static_cast<Eigen::Index>(indices.size());
  out.channels = channels;
  out.height = height;
  out.width = width;
  out.num_classes = num_classes;
  out.pixels.resize(out.num * image_size());
  out.labels.reserve(indices.size());
  const Eigen::Index isz = image_size();
  Eigen::Index row = 0;
  for (Eigen::Index idx : indices) {
    if (idx < 0 || idx >= num) throw ContractError("dataset select index out of range");
    out.pixels.segment(row * isz, isz) = pixels.segment(idx * isz, isz);
    out.labels.push_back(labels[static_cast<std::size_t>(idx)]);
    ++row;
  }
  return out;
}

std::vector<Eigen::Index> Dataset::indices_of_class(int label) const {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < num; ++i) {
    if (labels[static_cast<std::size_t>(i)] == label) out.push_back(i);
  }
  return out;
}

namespace {

std::uint32_t read_be32(std::istream& in, std::size_t& offset, const char* what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) {
    throw FormatError(std::string("truncated while reading ") + what, offset);
  }
  offset += 4;
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw FormatError("cannot open " + images_path, 0);
  std::size_t off = 0;
  const std::uint32_t img_magic = read_be32(img, off, "image magic");
  if (img_magic != 0x00000803) {
    throw FormatError("bad image magic " + std::to_string(img_magic), 0);
  }
  const std::uint32_t n = read_be32(img, off, "image count");
  const std::uint32_t rows = read_be32(img, off, "row count");
  const std::uint32_t cols = read_be32(img, off, "column count");

  std::vector<unsigned char> raw(static_cast<std::size_t>(n) * rows * cols);
  img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(img.gcount()) != raw.size()) {
    throw FormatError("truncated image data", off + static_cast<std::size_t>(img.gcount()));
  }

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw FormatError("cannot open " + labels_path, 0);
  std::size_t loff = 0;
  const std::uint32_t lab_magic = read_be32(lab, loff, "label magic");
  if (lab_magic != 0x00000801) {
    throw FormatError("bad label magic " + std::to_string(lab_magic), 0);
  }
  const std::uint32_t ln = read_be32(lab, loff, "label count");
  if (ln != n) {
    throw FormatError("image count " + std::to_string(n) + " does not match label count " +
                          std::to_string(ln),
                      loff);
  }
  std::vector<unsigned char> lraw(ln);
  lab.read(reinterpret_cast<char*>(lraw.data()), static_cast<std::streamsize>(lraw.size()));
  if (static_cast<std::size_t>(lab.gcount()) != lraw.size()) {
    throw FormatError("truncated label data", loff + static_cast<std::size_t>(lab.gcount()));
  }

  Dataset out;
  out.num = static_cast<Eigen::Index>(n);
  out.channels = 1;
  out.height = static_cast<Eigen::Index>(rows);
  out.width = static_cast<Eigen::Index>(cols);
  out.pixels.resize(out.num * out.image_size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out.pixels[static_cast<Eigen::Index>(i)] = static_cast<Scalar>(raw[i]) / 255.0;
  }
  out.labels.assign(lraw.begin(), lraw.end());
  int max_label = 0;
  for (int lbl : out.labels) max_label = std::max(max_label, lbl);
  out.num_classes = max_label + 1;
  out.validate();
  return out;
}

Dataset gen_noise_dataset(Eigen::Index n, Eigen::Index c, Eigen::Index h, Eigen::Index w,
                          std::uint64_t seed) {
  if (n < 1) throw ContractError("gen_noise_dataset: n >= 1 required");
  RandomSource rng(seed);
  Dataset out;
  out.num = n;
  out.channels = c;
  out.height = h;
  out.width = w;
  out.num_classes = 0;
  out.pixels.resize(n * out.image_size());
  for (Eigen::Index i = 0; i < out.pixels.size(); ++i) out.pixels[i] = rng.uniform();
  out.labels.assign(static_cast<std::size_t>(n), Dataset::kUnknownLabel);
  out.validate();
  return out;
}

Dataset gen_mnist_noise(const Dataset& base, std::uint64_t seed) {
  if (base.num < 1) throw ContractError("gen_mnist_noise: base dataset is empty");
  RandomSource rng(seed);
  Dataset out = base;
  for (Eigen::Index i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = std::clamp(out.pixels[i] + rng.uniform(), 0.0, 1.0);
  }
  out.num_classes = 0;
  out.labels.assign(static_cast<std::size_t>(out.num), Dataset::kUnknownLabel);
  out.validate();
  return out;
}

namespace {

// One jittered 16x16-ish grayscale pattern per archetype. Coordinates are in
// pixel units; `fg` is the foreground intensity for this sample.
void render_shape(int archetype, Eigen::Index h, Eigen::Index w, RandomSource& rng,
                  Scalar* out) {
  const double cy = h / 2.0 + rng.uniform(-1.5, 1.5);
  const double cx = w / 2.0 + rng.uniform(-1.5, 1.5);
  const double scale = std::min(h, w) / 16.0;
  const Scalar fg = rng.uniform(0.65, 0.95);

  auto at = [&](Eigen::Index y, Eigen::Index x) -> Scalar& { return out[y * w + x]; };

  switch (archetype) {
    case 0: {  // filled disk
      const double r = rng.uniform(3.0, 5.0) * scale;
      for (Eigen::Index y = 0; y < h; ++y) {
        for (Eigen::Index x = 0; x < w; ++x) {
          const double d = std::hypot(y + 0.5 - cy, x + 0.5 - cx);
          if (d <= r) at(y, x) = fg;
        }
      }
      break;
    }
    case 1: {  // ring
      const double r = rng.uniform(4.5, 6.0) * scale;
      const double t = 1.4 * scale;
      for (Eigen::Index y = 0; y < h; ++y) {
        for (Eigen::Index x = 0; x < w; ++x) {
          const double d = std::hypot(y + 0.5 - cy, x + 0.5 - cx);
          if (std::abs(d - r) <= t) at(y, x) = fg;
        }
      }
      break;
    }
    case 2: {  // cross
      const double half = rng.uniform(1.0, 1.6) * scale;
      for (Eigen::Index y = 0; y < h; ++y) {
        for (Eigen::Index x = 0; x < w; ++x) {
          if (std::abs(y + 0.5 - cy) <= half || std::abs(x + 0.5 - cx) <= half) {
            at(y, x) = fg;
          }
        }
      }
      break;
    }
    case 3: {  // horizontal stripes
      const int period = 4;
      const int phase = rng.uniform_int(0, period - 1);
      for (Eigen::Index y = 0; y < h; ++y) {
        if (((y + phase) / 2) % 2 == 0) {
          for (Eigen::Index x = 0; x < w; ++x) at(y, x) = fg;
        }
      }
      break;
    }
    case 4: {  // checkerboard
      const int cell = std::max<int>(2, static_cast<int>(4 * scale));
      const int py = rng.uniform_int(0, cell - 1);
      const int px = rng.uniform_int(0, cell - 1);
      for (Eigen::Index y = 0; y < h; ++y) {
        for (Eigen::Index x = 0; x < w; ++x) {
          if ((((y + py) / cell) + ((x + px) / cell)) % 2 == 0) at(y, x) = fg;
        }
      }
      break;
    }
    case 5: {  // vertical bar
      const double half = rng.uniform(1.5, 2.2) * scale;
      for (Eigen::Index y = 0; y < h; ++y) {
        for (Eigen::Index x = 0; x < w; ++x) {
          if (std::abs(x + 0.5 - cx) <= half) at(y, x) = fg;
        }
      }
      break;
    }
    default:
      throw ContractError("gen_shapes_dataset: unknown archetype " +
                          std::to_string(archetype));
  }
}

}  // namespace

Dataset gen_shapes_dataset(Eigen::Index per_class, const std::vector<int>& class_ids,
                           Eigen::Index h, Eigen::Index w, std::uint64_t seed) {
  if (per_class < 1) throw ContractError("gen_shapes_dataset: per_class >= 1 required");
  if (class_ids.empty()) throw ContractError("gen_shapes_dataset: no classes requested");
  for (int id : class_ids) {
    if (id < 0 || id >= kNumShapeArchetypes) {
      throw ContractError("gen_shapes_dataset: archetype id " + std::to_string(id) +
                          " out of range");
    }
  }
  RandomSource rng(seed);
  Dataset out;
  out.num = per_class * static_cast<Eigen::Index>(class_ids.size());
  out.channels = 1;
  out.height = h;
  out.width = w;
  out.num_classes = static_cast<int>(class_ids.size());
  out.pixels = Array::Zero(out.num * out.image_size());
  out.labels.resize(static_cast<std::size_t>(out.num));

  Eigen::Index row = 0;
  for (std::size_t k = 0; k < class_ids.size(); ++k) {
    for (Eigen::Index i = 0; i < per_class; ++i, ++row) {
      Scalar* img = out.pixels.data() + row * out.image_size();
      render_shape(class_ids[k], h, w, rng, img);
      for (Eigen::Index p = 0; p < out.image_size(); ++p) {
        img[p] = std::clamp(img[p] + rng.uniform(-0.04, 0.04), 0.0, 1.0);
      }
      out.labels[static_cast<std::size_t>(row)] = static_cast<int>(k);
    }
  }
  out.validate();
  return out;
}

SplitResult make_split(const Dataset& dataset, const SplitSpec& spec) {
  if (spec.known_classes.empty()) {
    throw ConfigError("split.known_classes", "at least one known class required");
  }
  std::set<int> known(spec.known_classes.begin(), spec.known_classes.end());
  if (known.size() != spec.known_classes.size()) {
    throw ConfigError("split.known_classes", "classes must be distinct");
  }
  for (int c : spec.heldout_classes) {
    if (known.count(c)) {
      throw ConfigError("split.heldout_classes",
                        "class " + std::to_string(c) + " overlaps known classes");
    }
  }
  if (!(spec.train_fraction > 0.0 && spec.train_fraction <= 1.0)) {
    throw ConfigError("split.train_fraction", "must be in (0,1]");
  }

  RandomSource rng(spec.seed);
  SplitResult out;
  out.class_remap = spec.known_classes;

  std::vector<Eigen::Index> train_idx, test_idx;
  std::vector<int> train_labels, test_labels;
  for (std::size_t k = 0; k < spec.known_classes.size(); ++k) {
    auto idx = dataset.indices_of_class(spec.known_classes[k]);
    rng.shuffle(idx);
    const auto n_train = static_cast<std::size_t>(
        std::round(spec.train_fraction * static_cast<double>(idx.size())));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (i < n_train) {
        train_idx.push_back(idx[i]);
        train_labels.push_back(static_cast<int>(k));
      } else {
        test_idx.push_back(idx[i]);
        test_labels.push_back(static_cast<int>(k));
      }
    }
  }

  out.train = dataset.select(train_idx);
  out.train.labels = std::move(train_labels);
  out.train.num_classes = static_cast<int>(spec.known_classes.size());
  out.known_test = dataset.select(test_idx);
  out.known_test.labels = std::move(test_labels);
  out.known_test.num_classes = static_cast<int>(spec.known_classes.size());

  if (spec.unknown_source == SplitSpec::UnknownSource::heldout_classes) {
    std::vector<Eigen::Index> unk_idx;
    for (int c : spec.heldout_classes) {
      auto idx = dataset.indices_of_class(c);
      unk_idx.insert(unk_idx.end(), idx.begin(), idx.end());
    }
    out.unknown_test = dataset.select(unk_idx);
    out.unknown_test.labels.assign(out.unknown_test.labels.size(), Dataset::kUnknownLabel);
    out.unknown_test.num_classes = 0;
  }

  out.train.validate();
  out.known_test.validate();
  out.unknown_test.validate();
  return out;
}

Dataset downscale(const Dataset& dataset, Eigen::Index h, Eigen::Index w) {
  if (h < 1 || w < 1) throw ContractError("downscale: target dims must be >= 1");
  if (h > dataset.height || w > dataset.width) {
    throw ContractError("downscale: upscaling is unsupported (target " + std::to_string(h) +
                        "x" + std::to_string(w) + " from " + std::to_string(dataset.height) +
                        "x" + std::to_string(dataset.width) + ")");
  }
  Dataset out;
  out.num = dataset.num;
  out.channels = dataset.channels;
  out.height = h;
  out.width = w;
  out.num_classes = dataset.num_classes;
  out.labels = dataset.labels;
  out.pixels = Array::Zero(out.num * out.image_size());

  const double sy = static_cast<double>(dataset.height) / static_cast<double>(h);
  const double sx = static_cast<double>(dataset.width) / static_cast<double>(w);
  for (Eigen::Index img = 0; img < dataset.num; ++img) {
    for (Eigen::Index c = 0; c < dataset.channels; ++c) {
      const Scalar* src =
          dataset.pixels.data() + (img * dataset.channels + c) * dataset.height * dataset.width;
      Scalar* dst = out.pixels.data() + (img * out.channels + c) * h * w;
      for (Eigen::Index oy = 0; oy < h; ++oy) {
        const double y0 = oy * sy, y1 = (oy + 1) * sy;
        for (Eigen::Index ox = 0; ox < w; ++ox) {
          const double x0 = ox * sx, x1 = (ox + 1) * sx;
          double acc = 0.0;
          for (Eigen::Index iy = static_cast<Eigen::Index>(std::floor(y0));
               iy < static_cast<Eigen::Index>(std::ceil(y1)); ++iy) {
            const double wy =
                std::min<double>(y1, iy + 1.0) - std::max<double>(y0, static_cast<double>(iy));
            if (wy <= 0.0) continue;
            for (Eigen::Index ix = static_cast<Eigen::Index>(std::floor(x0));
                 ix < static_cast<Eigen::Index>(std::ceil(x1)); ++ix) {
              const double wx = std::min<double>(x1, ix + 1.0) -
                                std::max<double>(x0, static_cast<double>(ix));
              if (wx <= 0.0) continue;
              acc += wy * wx * src[iy * dataset.width + ix];
            }
          }
          dst[oy * w + ox] = std::clamp(acc / (sy * sx), 0.0, 1.0);
        }
      }
    }
  }
  out.validate();
  return out;
}

std::string shapes_manifest(Eigen::Index per_class, const std::vector<int>& class_ids,
                            Eigen::Index h, Eigen::Index w, std::uint64_t seed) {
  nlohmann::json j;
  j["kind"] = "shapes";
  j["seed"] = seed;
  j["dims"] = {1, h, w};
  j["count"] = per_class * static_cast<Eigen::Index>(class_ids.size());
  j["per_class"] = per_class;
  j["classes"] = class_ids;
  return j.dump();
}

std::string noise_manifest(Eigen::Index n, Eigen::Index c, Eigen::Index h, Eigen::Index w,
                           std::uint64_t seed) {
  nlohmann::json j;
  j["kind"] = "noise";
  j["seed"] = seed;
  j["dims"] = {c, h, w};
  j["count"] = n;
  return j.dump();
}

}  // namespace cpgm
