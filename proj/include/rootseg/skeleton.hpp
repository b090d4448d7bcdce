#pragma once

#include <array>
#include <numeric>
#include <vector>

#include "rootseg/image.hpp"
#include "rootseg/morphology.hpp"

namespace rootseg {

/// Per-pixel connected-component labels (0 = background, components numbered
/// 1..K in scan order) plus per-component pixel counts; areas[k] is the area
/// of component k, areas[0] is unused.
struct ComponentMap {
  int width = 0;
  int height = 0;
  std::vector<int> labels;
  std::vector<int> areas;

  int count() const { return static_cast<int>(areas.size()) - 1; }
};

/// Fills small gaps between segments of the same root: binary closing with a
/// 3x3 square. Extensive: output contains the input.
inline BinaryMask fill_gaps(const BinaryMask& mask) { return binary_close(mask, 3); }

namespace detail {

struct ThinningNeighborhood {
  std::array<int, 8> p;  // p2..p9 clockwise from north

  int transitions() const {
    int a = 0;
    for (int k = 0; k < 8; ++k) a += (p[k] == 0 && p[(k + 1) % 8] == 1);
    return a;
  }
  int count() const { return std::accumulate(p.begin(), p.end(), 0); }
};

inline ThinningNeighborhood neighborhood(const BinaryMask& m, int r, int c) {
  ThinningNeighborhood nb{};
  nb.p = {m.at_or_bg(r - 1, c) ? 1 : 0,     m.at_or_bg(r - 1, c + 1) ? 1 : 0,
          m.at_or_bg(r, c + 1) ? 1 : 0,     m.at_or_bg(r + 1, c + 1) ? 1 : 0,
          m.at_or_bg(r + 1, c) ? 1 : 0,     m.at_or_bg(r + 1, c - 1) ? 1 : 0,
          m.at_or_bg(r, c - 1) ? 1 : 0,     m.at_or_bg(r - 1, c - 1) ? 1 : 0};
  return nb;
}

inline bool thinning_condition(const ThinningNeighborhood& nb, int subiter) {
  const int b = nb.count();
  if (b < 2 || b > 6) return false;
  if (nb.transitions() != 1) return false;
  const int p2 = nb.p[0], p4 = nb.p[2], p6 = nb.p[4], p8 = nb.p[6];
  if (subiter == 0) return (p2 * p4 * p6) == 0 && (p4 * p6 * p8) == 0;
  return (p2 * p4 * p8) == 0 && (p2 * p6 * p8) == 0;
}

}  // namespace detail

/// Iterative two-subiteration thinning with the Zhang-Suen deletion tests.
/// Candidates are marked against a snapshot, then deleted in scan order with
/// the tests re-checked against the live raster; the transition test then
/// guarantees every deleted pixel is 8-simple, so the number of 8-connected
/// components never changes (the classic fully-parallel rule can erase a
/// 2x2 block outright). Output is a subset of the input, one pixel wide
/// except at junctions.
inline BinaryMask skeletonize(const BinaryMask& mask) {
  if (mask.empty()) throw EmptyImage("skeletonize: empty mask");
  BinaryMask cur = mask;
  std::vector<int> marked;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int subiter = 0; subiter < 2; ++subiter) {
      marked.clear();
      for (int r = 0; r < cur.height; ++r)
        for (int c = 0; c < cur.width; ++c) {
          if (!cur.at(r, c)) continue;
          if (detail::thinning_condition(detail::neighborhood(cur, r, c), subiter))
            marked.push_back(r * cur.width + c);
        }
      for (int idx : marked) {
        const int r = idx / cur.width, c = idx % cur.width;
        if (detail::thinning_condition(detail::neighborhood(cur, r, c), subiter)) {
          cur.data[idx] = 0;
          changed = true;
        }
      }
    }
  }
  return cur;
}

/// Connected-component labeling by union-find over a single raster scan.
/// Component ids are assigned in scan order of their first pixel.
inline ComponentMap label_components(const BinaryMask& mask, int connectivity = 8) {
  if (mask.empty()) throw EmptyImage("label_components: empty mask");
  if (connectivity != 4 && connectivity != 8)
    throw InvalidParams("label_components: connectivity must be 4 or 8");

  const int w = mask.width, h = mask.height;
  std::vector<int> parent(static_cast<size_t>(w) * h);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&parent](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  auto unite = [&](int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };

  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (!mask.at(r, c)) continue;
      const int idx = r * w + c;
      if (c > 0 && mask.at(r, c - 1)) unite(idx, idx - 1);
      if (r > 0 && mask.at(r - 1, c)) unite(idx, idx - w);
      if (connectivity == 8 && r > 0) {
        if (c > 0 && mask.at(r - 1, c - 1)) unite(idx, idx - w - 1);
        if (c + 1 < w && mask.at(r - 1, c + 1)) unite(idx, idx - w + 1);
      }
    }

  ComponentMap cm{w, h, std::vector<int>(static_cast<size_t>(w) * h, 0), {0}};
  std::vector<int> id_of_root(static_cast<size_t>(w) * h, 0);
  int next_id = 0;
  for (int i = 0; i < w * h; ++i) {
    if (!mask.data[i]) continue;
    const int root = find(i);
    if (id_of_root[root] == 0) {
      id_of_root[root] = ++next_id;
      cm.areas.push_back(0);
    }
    cm.labels[i] = id_of_root[root];
    ++cm.areas[id_of_root[root]];
  }
  return cm;
}

/// Removes every 8-connected component with pixel count strictly below alpha.
inline BinaryMask filter_small(const BinaryMask& skel, int alpha = 20) {
  if (skel.empty()) throw EmptyImage("filter_small: empty mask");
  const ComponentMap cm = label_components(skel, 8);
  BinaryMask out(skel.width, skel.height);
  for (int i = 0; i < skel.size(); ++i) {
    const int id = cm.labels[i];
    out.data[i] = (id > 0 && cm.areas[id] >= alpha) ? 1 : 0;
  }
  return out;
}

}  // namespace rootseg
