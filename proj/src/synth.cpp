#include "cwnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "cwnet/rng.hpp"
#include "cwnet/textio.hpp"

namespace cwnet {

void check_config(const GeneratorConfig& cfg) {
  if (cfg.dataset_size < 1)
    throw std::invalid_argument("generator: dataset_size must be >= 1");
  if (cfg.dimension < 0 || cfg.dimension > 2)
    throw std::invalid_argument("generator: dimension must be 0, 1 or 2");
  size_t n1 = static_cast<size_t>(cfg.dimension) + 1;
  if (cfg.max_profile.size() != n1 || cfg.min_cells.size() != n1)
    throw std::invalid_argument(
        "generator: max_profile and min_cells need one entry per dimension");
  if (cfg.max_profile[0] < 3)
    throw std::invalid_argument("generator: maxN_0 must be >= 3");
  for (size_t k = 0; k < n1; ++k) {
    if (cfg.min_cells[k] < 0 || cfg.min_cells[k] > cfg.max_profile[k])
      throw std::invalid_argument("generator: need 0 <= min <= max per dimension");
  }
  if (cfg.min_cells[0] < 1)
    throw std::invalid_argument("generator: minN_0 must be >= 1");
}

namespace {

// oriented edge as (tail, head)
using EdgeList = std::vector<std::pair<int, int>>;

// chain coefficients of the shortest simple cycle through edge e:
// traverse e tail->head, then follow a shortest head->tail path avoiding e.
// BFS in edge-index order keeps the choice deterministic; short faces keep
// boundary sizes (and downstream feature magnitudes) nearly uniform.
std::vector<int> cycle_column(const EdgeList& edges, int n0, int n1, int e) {
  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<size_t>(n0));
  for (int g = 0; g < n1; ++g) {
    if (g == e) continue;
    auto [t, h] = edges[static_cast<size_t>(g)];
    adj[static_cast<size_t>(t)].push_back({h, g});
    adj[static_cast<size_t>(h)].push_back({t, g});
  }
  auto [tail, head] = edges[static_cast<size_t>(e)];
  std::vector<int> via_edge(static_cast<size_t>(n0), -1);
  std::vector<int> via_vertex(static_cast<size_t>(n0), -1);
  std::vector<int> queue{head};
  via_vertex[static_cast<size_t>(head)] = head;
  for (size_t q = 0; q < queue.size() && via_vertex[static_cast<size_t>(tail)] < 0;
       ++q) {
    for (auto [w, g] : adj[static_cast<size_t>(queue[q])]) {
      if (via_vertex[static_cast<size_t>(w)] >= 0) continue;
      via_vertex[static_cast<size_t>(w)] = queue[q];
      via_edge[static_cast<size_t>(w)] = g;
      queue.push_back(w);
    }
  }
  std::vector<int> col(static_cast<size_t>(n1), 0);
  col[static_cast<size_t>(e)] = 1;
  // walk tail back to head; the cycle traverses each step via_vertex[v] -> v
  for (int v = tail; v != head; v = via_vertex[static_cast<size_t>(v)]) {
    int g = via_edge[static_cast<size_t>(v)];
    col[static_cast<size_t>(g)] +=
        edges[static_cast<size_t>(g)].first == v ? -1 : 1;
  }
  return col;
}

} // namespace

CWComplex random_complex(const GeneratorConfig& cfg, std::uint64_t item_seed,
                         GenerationStats* stats) {
  check_config(cfg);
  Rng rng(item_seed);
  const int n = cfg.dimension;
  const int n0 = rng.uniform_int(cfg.min_cells[0], cfg.max_profile[0]);

  if (n == 0) return build_complex(0, {cfg.max_profile[0]}, {}, {n0});

  // connected simple graph: random attachment tree + distinct extra pairs
  const long cap = static_cast<long>(n0) * (n0 - 1) / 2;
  const bool want_face = n >= 2 && cfg.min_cells[2] >= 1;
  long lo = std::max<long>(cfg.min_cells[1], want_face ? n0 : n0 - 1);
  long hi = std::min<long>(cfg.max_profile[1], cap);
  if (lo > hi) {
    lo = hi;
    if (stats) ++stats->clamped_edge_ranges;
  }
  const int n1 =
      rng.uniform_int(static_cast<int>(lo), static_cast<int>(hi));

  EdgeList edges;
  edges.reserve(static_cast<size_t>(n1));
  std::set<std::pair<int, int>> used;
  for (int v = 1; v < n0; ++v) {
    int u = rng.uniform_int(0, v - 1);
    used.insert({std::min(u, v), std::max(u, v)});
    edges.emplace_back(rng.uniform_int(0, 1) ? std::pair{u, v} : std::pair{v, u});
  }
  while (static_cast<int>(edges.size()) < n1) {
    int u = rng.uniform_int(0, n0 - 1);
    int v = rng.uniform_int(0, n0 - 1);
    if (u == v) continue;
    if (!used.insert({std::min(u, v), std::max(u, v)}).second) continue;
    edges.emplace_back(rng.uniform_int(0, 1) ? std::pair{u, v} : std::pair{v, u});
  }

  IMat b1 = IMat::Zero(cfg.max_profile[0], cfg.max_profile[1]);
  for (int e = 0; e < n1; ++e) {
    b1(edges[static_cast<size_t>(e)].first, e) = -1;
    b1(edges[static_cast<size_t>(e)].second, e) = 1;
  }
  if (n == 1)
    return build_complex(1, {cfg.max_profile[0], cfg.max_profile[1]}, {b1},
                         {n0, n1});

  // 2-cells glued along shortest cycles through the extra edges
  const int extras = n1 - (n0 - 1);
  int n2 = 0;
  if (extras <= 0) {
    if (stats && cfg.min_cells[2] >= 1) ++stats->forced_empty_top;
  } else {
    n2 = rng.uniform_int(cfg.min_cells[2], cfg.max_profile[2]);
  }
  IMat b2 = IMat::Zero(cfg.max_profile[1], cfg.max_profile[2]);
  for (int f = 0; f < n2; ++f) {
    int e = rng.uniform_int(n0 - 1, n1 - 1);
    std::vector<int> col = cycle_column(edges, n0, n1, e);
    // attaching maps traverse their cycle in a random direction
    int flip = rng.uniform_int(0, 1) ? -1 : 1;
    for (int r = 0; r < n1; ++r) b2(r, f) = flip * col[static_cast<size_t>(r)];
  }
  return build_complex(
      2, {cfg.max_profile[0], cfg.max_profile[1], cfg.max_profile[2]}, {b1, b2},
      {n0, n1, n2});
}

Dataset generate_dataset(const GeneratorConfig& cfg, GenerationStats* stats) {
  check_config(cfg);
  Dataset d;
  d.dimension = cfg.dimension;
  d.max_profile = cfg.max_profile;
  d.seed = cfg.seed;
  d.items.reserve(static_cast<size_t>(cfg.dataset_size));
  for (int i = 0; i < cfg.dataset_size; ++i) {
    DatasetItem item;
    item.complex = random_complex(
        cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(i)), stats);
    item.target = static_cast<double>(total_cells(item.complex));
    d.items.push_back(std::move(item));
  }
  return d;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double fraction,
                                          std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("split: fraction must lie in (0, 1)");
  const int n = d.size();
  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i)
    std::swap(idx[static_cast<size_t>(i)],
              idx[static_cast<size_t>(rng.uniform_int(0, i))]);
  const int train_n = static_cast<int>(std::floor(fraction * n));
  if (train_n < 1 || train_n >= n)
    throw std::invalid_argument("split: a side would be empty");
  std::vector<int> train_idx(idx.begin(), idx.begin() + train_n);
  std::vector<int> test_idx(idx.begin() + train_n, idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  auto take = [&](const std::vector<int>& which) {
    Dataset part;
    part.dimension = d.dimension;
    part.max_profile = d.max_profile;
    part.seed = d.seed;
    part.items.reserve(which.size());
    for (int i : which) part.items.push_back(d.items[static_cast<size_t>(i)]);
    return part;
  };
  return {take(train_idx), take(test_idx)};
}

std::vector<double> targets_of(const Dataset& d) {
  std::vector<double> t;
  t.reserve(d.items.size());
  for (const DatasetItem& it : d.items) t.push_back(it.target);
  return t;
}

void save_dataset(const Dataset& d, std::ostream& os) {
  os << "CWDS 1\n";
  os << "config " << d.size() << " " << d.dimension;
  for (int k = 0; k < 3; ++k)
    os << " "
       << (k < static_cast<int>(d.max_profile.size()) ? d.max_profile[static_cast<size_t>(k)] : 0);
  os << " " << d.seed << "\n";
  for (int i = 0; i < d.size(); ++i) {
    const DatasetItem& it = d.items[static_cast<size_t>(i)];
    const CWComplex& cx = it.complex;
    os << "item " << i << " " << format_double(it.target) << "\n";
    os << "sizes";
    for (int k = 0; k <= cx.dimension; ++k) os << " " << cx.size(k);
    os << "\n";
    for (int k = 1; k <= cx.dimension; ++k) {
      os << "B " << k << "\n";
      const IMat& b = cx.boundary(k);
      if (b.cols() == 0) continue; // blank rows would vanish on re-reading
      for (int r = 0; r < b.rows(); ++r) {
        for (int c = 0; c < b.cols(); ++c) {
          if (c) os << " ";
          os << b(r, c);
        }
        os << "\n";
      }
    }
    os << "mask";
    for (int k = 0; k <= cx.dimension; ++k) os << " " << cx.real(k);
    os << "\n";
  }
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  save_dataset(d, os);
  if (!os) throw DataError("write failed: " + path);
}

Dataset load_dataset(std::istream& is) {
  LineReader rd(is);
  auto toks = rd.next();
  if (toks.size() != 2 || toks[0] != "CWDS") rd.fail("expected 'CWDS <version>'");
  if (toks[1] != "1") rd.fail("unsupported CWDS version " + toks[1]);

  toks = rd.next();
  if (toks.size() != 7 || toks[0] != "config")
    rd.fail("expected 'config <count> <n> <maxN_0> <maxN_1> <maxN_2> <seed>'");
  const long count = rd.parse_int(toks[1], "dataset_size");
  const long dim = rd.parse_int(toks[2], "dimension");
  if (count < 0) rd.fail("negative dataset size");
  if (dim < 0 || dim > 2) rd.fail("dimension must be 0, 1 or 2");
  Dataset d;
  d.dimension = static_cast<int>(dim);
  for (long k = 0; k <= dim; ++k)
    d.max_profile.push_back(
        static_cast<int>(rd.parse_int(toks[static_cast<size_t>(3 + k)], "max profile")));
  d.seed = rd.parse_u64(toks[6], "seed");

  for (long i = 0; i < count; ++i) {
    toks = rd.next();
    if (toks.size() != 3 || toks[0] != "item")
      rd.fail("expected 'item <index> <target>' (item " + std::to_string(i) + ")");
    if (rd.parse_int(toks[1], "item index") != i)
      rd.fail("items must appear in order; expected index " + std::to_string(i));
    DatasetItem item;
    item.target = rd.parse_real(toks[2], "target");

    toks = rd.next();
    if (toks.empty() || toks[0] != "sizes" ||
        toks.size() != static_cast<size_t>(dim) + 2)
      rd.fail("expected 'sizes' with " + std::to_string(dim + 1) + " entries");
    std::vector<int> sizes;
    for (long k = 0; k <= dim; ++k) {
      long s = rd.parse_int(toks[static_cast<size_t>(1 + k)], "skeleton size");
      if (s < 0 || s > 100000) rd.fail("skeleton size out of range");
      sizes.push_back(static_cast<int>(s));
    }

    std::vector<IMat> incidence;
    for (long k = 1; k <= dim; ++k) {
      toks = rd.next();
      if (toks.size() != 2 || toks[0] != "B" ||
          rd.parse_int(toks[1], "matrix degree") != k)
        rd.fail("expected 'B " + std::to_string(k) + "'");
      IMat b(sizes[static_cast<size_t>(k) - 1], sizes[static_cast<size_t>(k)]);
      if (b.cols() == 0) {
        incidence.push_back(std::move(b));
        continue;
      }
      for (int r = 0; r < b.rows(); ++r) {
        toks = rd.next();
        if (static_cast<Eigen::Index>(toks.size()) != b.cols())
          rd.fail("expected " + std::to_string(b.cols()) + " entries in row " +
                  std::to_string(r) + " of B_" + std::to_string(k));
        for (int c = 0; c < b.cols(); ++c)
          b(r, c) = static_cast<int>(
              rd.parse_int(toks[static_cast<size_t>(c)], "incidence entry"));
      }
      incidence.push_back(std::move(b));
    }

    toks = rd.next();
    if (toks.empty() || toks[0] != "mask" ||
        toks.size() != static_cast<size_t>(dim) + 2)
      rd.fail("expected 'mask' with " + std::to_string(dim + 1) + " entries");
    std::vector<int> real_counts;
    for (long k = 0; k <= dim; ++k)
      real_counts.push_back(
          static_cast<int>(rd.parse_int(toks[static_cast<size_t>(1 + k)], "mask count")));

    try {
      item.complex = build_complex(static_cast<int>(dim), std::move(sizes),
                                   std::move(incidence), std::move(real_counts));
    } catch (const std::invalid_argument& e) {
      rd.fail("item " + std::to_string(i) + " is not a valid complex: " + e.what());
    }
    d.items.push_back(std::move(item));
  }
  return d;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open dataset: " + path);
  return load_dataset(is);
}

bool operator==(const Dataset& a, const Dataset& b) {
  if (a.dimension != b.dimension || a.max_profile != b.max_profile ||
      a.seed != b.seed || a.items.size() != b.items.size())
    return false;
  for (size_t i = 0; i < a.items.size(); ++i) {
    if (!(a.items[i].complex == b.items[i].complex)) return false;
    if (a.items[i].target != b.items[i].target) return false;
  }
  return true;
}

} // namespace cwnet
