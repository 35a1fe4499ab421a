#pragma once

#include <iosfwd>
#include <string>

#include "esm/ensemble.hpp"
#include "esm/net.hpp"

namespace esm {

// Versioned binary formats, explicitly little-endian, doubles stored as raw
// 64-bit patterns (round-trips are 0 ULP). Wrong or truncated input throws
// ValidationError.
//
// ESMNET1:  magic, widths, hyperparameters, row-major weights, biases,
//           final_train_loss.
// ESMENS1:  magic, family, optional standardizer block, master_seed, design
//           (index lists as run-length pairs), NetworkConfig, B embedded
//           ESMNET1 blocks. The membership matrix is rebuilt on load.

void save_network(const Network& net, std::ostream& out);
Network load_network(std::istream& in);

void save_ensemble(const EnsembleModel& model, std::ostream& out);
EnsembleModel load_ensemble(std::istream& in);

void save_ensemble_file(const EnsembleModel& model, const std::string& path);
EnsembleModel load_ensemble_file(const std::string& path);

}  // namespace esm
