#include "esm/serialize.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "esm/errors.hpp"

namespace esm {

namespace {

constexpr char kNetMagic[8] = {'E', 'S', 'M', 'N', 'E', 'T', '1', '\0'};
constexpr char kEnsMagic[8] = {'E', 'S', 'M', 'E', 'N', 'S', '1', '\0'};

constexpr uint32_t kMaxWidth = 1u << 20;
constexpr uint32_t kMaxLayers = 64;
constexpr uint32_t kMaxCount = 1u << 28;

void put_u8(std::ostream& out, uint8_t v) {
  out.put(static_cast<char>(v));
}

void put_u32(std::ostream& out, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void put_f64(std::ostream& out, double v) {
  put_u64(out, std::bit_cast<uint64_t>(v));
}

void take_bytes(std::istream& in, char* dst, std::streamsize len,
                const char* what) {
  in.read(dst, len);
  if (in.gcount() != len) {
    throw ValidationError(std::string("truncated model file while reading ") +
                          what);
  }
}

uint8_t take_u8(std::istream& in, const char* what) {
  char b;
  take_bytes(in, &b, 1, what);
  return static_cast<uint8_t>(b);
}

uint32_t take_u32(std::istream& in, const char* what) {
  char b[4];
  take_bytes(in, b, 4, what);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<uint32_t>(static_cast<uint8_t>(b[i])) << (8 * i);
  }
  return v;
}

uint64_t take_u64(std::istream& in, const char* what) {
  char b[8];
  take_bytes(in, b, 8, what);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<uint64_t>(static_cast<uint8_t>(b[i])) << (8 * i);
  }
  return v;
}

double take_f64(std::istream& in, const char* what) {
  return std::bit_cast<double>(take_u64(in, what));
}

void take_magic(std::istream& in, const char (&magic)[8], const char* label) {
  char b[8];
  in.read(b, 8);
  if (in.gcount() != 8 || !std::equal(b, b + 8, magic)) {
    throw ValidationError(std::string("not an ") + label +
                          " file (bad magic)");
  }
}

void put_net_config(std::ostream& out, const NetworkConfig& config) {
  put_u32(out, static_cast<uint32_t>(config.widths.size()));
  for (int w : config.widths) put_u32(out, static_cast<uint32_t>(w));
  put_f64(out, config.learning_rate);
  put_u32(out, static_cast<uint32_t>(config.epochs));
  put_u32(out, static_cast<uint32_t>(config.batch_size));
  put_f64(out, config.dropout_rate);
  put_f64(out, config.weight_decay);
  put_f64(out, config.clamp_F);
  put_u32(out, static_cast<uint32_t>(config.init_scheme));
  put_u64(out, config.seed);
}

NetworkConfig take_net_config(std::istream& in) {
  NetworkConfig config;
  const uint32_t n_widths = take_u32(in, "widths count");
  if (n_widths < 3 || n_widths > kMaxLayers) {
    throw ValidationError("model file declares " + std::to_string(n_widths) +
                          " layer widths");
  }
  config.widths.resize(n_widths);
  for (uint32_t l = 0; l < n_widths; ++l) {
    const uint32_t w = take_u32(in, "layer width");
    if (w < 1 || w > kMaxWidth) {
      throw ValidationError("model file declares layer width " +
                            std::to_string(w));
    }
    config.widths[l] = static_cast<int>(w);
  }
  config.learning_rate = take_f64(in, "learning_rate");
  config.epochs = static_cast<int>(take_u32(in, "epochs"));
  config.batch_size = static_cast<int>(take_u32(in, "batch_size"));
  config.dropout_rate = take_f64(in, "dropout_rate");
  config.weight_decay = take_f64(in, "weight_decay");
  config.clamp_F = take_f64(in, "clamp_F");
  const uint32_t scheme = take_u32(in, "init_scheme");
  if (scheme != static_cast<uint32_t>(InitScheme::he_uniform)) {
    throw ValidationError("model file uses unknown init scheme " +
                          std::to_string(scheme));
  }
  config.init_scheme = static_cast<InitScheme>(scheme);
  config.seed = take_u64(in, "seed");
  config.validate();  // corrupt hyperparameters surface as ValidationError
  return config;
}

}  // namespace

void save_network(const Network& net, std::ostream& out) {
  out.write(kNetMagic, 8);
  put_net_config(out, net.config);
  const int n_layers = static_cast<int>(net.weights.size());
  for (int l = 0; l < n_layers; ++l) {
    const Matrix& W = net.weights[l];
    for (long i = 0; i < W.rows(); ++i) {
      for (long j = 0; j < W.cols(); ++j) put_f64(out, W(i, j));
    }
  }
  for (int l = 0; l < n_layers; ++l) {
    const Vector& b = net.biases[l];
    for (long i = 0; i < b.size(); ++i) put_f64(out, b(i));
  }
  put_f64(out, net.final_train_loss);
  if (!out) throw ValidationError("write failure while saving network");
}

Network load_network(std::istream& in) {
  take_magic(in, kNetMagic, "ESMNET1 network");
  Network net;
  net.config = take_net_config(in);
  const auto& w = net.config.widths;
  const int n_layers = static_cast<int>(w.size()) - 1;
  net.weights.resize(n_layers);
  net.biases.resize(n_layers);
  for (int l = 0; l < n_layers; ++l) {
    Matrix& W = net.weights[l];
    W.resize(w[l + 1], w[l]);
    for (long i = 0; i < W.rows(); ++i) {
      for (long j = 0; j < W.cols(); ++j) W(i, j) = take_f64(in, "weight");
    }
  }
  for (int l = 0; l < n_layers; ++l) {
    Vector& b = net.biases[l];
    b.resize(w[l + 1]);
    for (long i = 0; i < b.size(); ++i) b(i) = take_f64(in, "bias");
  }
  net.final_train_loss = take_f64(in, "final_train_loss");
  return net;
}

void save_ensemble(const EnsembleModel& model, std::ostream& out) {
  out.write(kEnsMagic, 8);
  put_u32(out, static_cast<uint32_t>(model.spec.family));
  put_u32(out, static_cast<uint32_t>(model.spec.n_trial));
  put_u8(out, model.standardizer.enabled ? 1 : 0);
  if (model.standardizer.enabled) {
    put_u32(out, static_cast<uint32_t>(model.standardizer.mean.size()));
    for (double v : model.standardizer.mean) put_f64(out, v);
    for (double v : model.standardizer.scale) put_f64(out, v);
  }
  put_u64(out, model.master_seed);

  const SubsampleDesign& design = model.design;
  put_u32(out, static_cast<uint32_t>(design.n));
  put_u32(out, static_cast<uint32_t>(design.r));
  put_u32(out, static_cast<uint32_t>(design.B));
  put_u8(out, design.complete ? 1 : 0);
  for (const auto& row : design.indices) {
    // sorted distinct indices as (start, length) runs
    std::vector<std::pair<uint32_t, uint32_t>> runs;
    for (size_t k = 0; k < row.size(); ++k) {
      if (!runs.empty() && row[k] == runs.back().first + runs.back().second) {
        ++runs.back().second;
      } else {
        runs.emplace_back(row[k], 1);
      }
    }
    put_u32(out, static_cast<uint32_t>(runs.size()));
    for (const auto& [start, len] : runs) {
      put_u32(out, start);
      put_u32(out, len);
    }
  }

  put_net_config(out, model.config);
  for (const Network& net : model.networks) save_network(net, out);
  if (!out) throw ValidationError("write failure while saving ensemble");
}

EnsembleModel load_ensemble(std::istream& in) {
  take_magic(in, kEnsMagic, "ESMENS1 model");
  EnsembleModel model;

  const uint32_t family = take_u32(in, "family");
  if (family > static_cast<uint32_t>(Family::binomial)) {
    throw ValidationError("model file uses unknown family code " +
                          std::to_string(family));
  }
  model.spec.family = static_cast<Family>(family);
  model.spec.n_trial = static_cast<int>(take_u32(in, "n_trial"));
  model.spec.validate();

  const uint8_t standardized = take_u8(in, "standardize flag");
  if (standardized > 1) {
    throw ValidationError("model file has corrupt standardize flag");
  }
  model.standardizer.enabled = standardized == 1;
  if (model.standardizer.enabled) {
    const uint32_t p = take_u32(in, "standardizer size");
    if (p < 1 || p > kMaxWidth) {
      throw ValidationError("model file declares standardizer over " +
                            std::to_string(p) + " features");
    }
    model.standardizer.mean.resize(p);
    model.standardizer.scale.resize(p);
    for (double& v : model.standardizer.mean) v = take_f64(in, "feature mean");
    for (double& v : model.standardizer.scale) {
      v = take_f64(in, "feature scale");
    }
  }
  model.master_seed = take_u64(in, "master_seed");

  SubsampleDesign& design = model.design;
  design.n = static_cast<int>(take_u32(in, "design n"));
  design.r = static_cast<int>(take_u32(in, "design r"));
  design.B = static_cast<int>(take_u32(in, "design B"));
  if (design.n < 2 || design.n > static_cast<int>(kMaxCount) || design.B < 1 ||
      design.B > static_cast<int>(kMaxCount) || design.r < 1 ||
      design.r >= design.n) {
    throw ValidationError("model file declares implausible design sizes");
  }
  const uint8_t complete = take_u8(in, "complete flag");
  if (complete > 1) {
    throw ValidationError("model file has corrupt complete flag");
  }
  design.complete = complete == 1;
  design.indices.resize(design.B);
  for (auto& row : design.indices) {
    const uint32_t n_runs = take_u32(in, "run count");
    if (n_runs > static_cast<uint32_t>(design.r)) {
      throw ValidationError("model file has corrupt index runs");
    }
    row.clear();
    row.reserve(design.r);
    for (uint32_t k = 0; k < n_runs; ++k) {
      const uint32_t start = take_u32(in, "run start");
      const uint32_t len = take_u32(in, "run length");
      if (len == 0 || start + static_cast<uint64_t>(len) >
                          static_cast<uint64_t>(design.n)) {
        throw ValidationError("model file has corrupt index run");
      }
      for (uint32_t i = 0; i < len; ++i) row.push_back(start + i);
    }
  }
  design.validate();

  model.config = take_net_config(in);
  model.networks.resize(design.B);
  for (Network& net : model.networks) {
    net = load_network(in);
    if (net.config.widths != model.config.widths) {
      throw ValidationError("embedded network widths disagree with ensemble");
    }
  }
  model.membership = membership_from_design(design);
  return model;
}

void save_ensemble_file(const EnsembleModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  save_ensemble(model, out);
  out.close();
  if (!out) throw ValidationError("write failure while saving " + path);
}

EnsembleModel load_ensemble_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  return load_ensemble(in);
}

}  // namespace esm
