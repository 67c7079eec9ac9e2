#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cwnet/complex.hpp"
#include "cwnet/errors.hpp"

namespace cwnet {

struct GeneratorConfig {
  int dataset_size = 500;
  int dimension = 2;
  std::vector<int> max_profile{8, 12, 6}; // padded sizes per dimension
  // Lower bounds on real cells. The defaults pin the skeleton sizes at the
  // profile caps so the target varies only through the 2-cell count: the
  // readout sees top-dimension states only, and those are blind to global
  // vertex and edge counts (their receptive field is the faces' boundary
  // edges). min_cells[2] >= 1 keeps the top level populated; lower the mins
  // for wider but largely unlearnable size mixtures.
  std::vector<int> min_cells{8, 12, 1};
  std::uint64_t seed = 42;
};

void check_config(const GeneratorConfig& cfg); // throws std::invalid_argument

struct DatasetItem {
  CWComplex complex;
  double target = 0.0; // total real cell count
};

struct Dataset {
  int dimension = 2;
  std::vector<int> max_profile;
  std::uint64_t seed = 0;
  std::vector<DatasetItem> items;
  int size() const { return static_cast<int>(items.size()); }
};

struct GenerationStats {
  int clamped_edge_ranges = 0; // edge budget hit the simple-graph cap
  int forced_empty_top = 0;    // no spare edge to close any 2-cell
};

CWComplex random_complex(const GeneratorConfig& cfg, std::uint64_t item_seed,
                         GenerationStats* stats = nullptr);

Dataset generate_dataset(const GeneratorConfig& cfg,
                         GenerationStats* stats = nullptr);

// Deterministic shuffled split into floor(fraction*N) train items and the
// remainder; both halves keep ascending original order. Throws on empty side.
std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double fraction,
                                          std::uint64_t seed);

std::vector<double> targets_of(const Dataset& d);

// CWDS text format; see save for the exact layout
void save_dataset(const Dataset& d, std::ostream& os);
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(std::istream& is); // throws DataError with line context
Dataset load_dataset(const std::string& path);

bool operator==(const Dataset& a, const Dataset& b);

} // namespace cwnet
