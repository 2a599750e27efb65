#pragma once

// Independent reference implementations used by the unit and acceptance
// suites. They favour literal definitions over speed and share no code with
// the library beyond the Tensor container.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "awe/rng.hpp"
#include "awe/tensor.hpp"

namespace oracle {

using awe::nn::Tensor;

inline Tensor random_matrix(std::size_t rows, std::size_t cols, awe::Rng& rng, double scale = 1.0) {
  Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
  return t;
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// h' from the gate equations, one scalar at a time. w: in x 3h, u: h x 3h.
inline std::vector<double> gru_cell(const Tensor& w, const Tensor& u, const Tensor& b, const std::vector<double>& x,
                                    const std::vector<double>& h) {
  const std::size_t hd = h.size();
  auto dot_x = [&](std::size_t col) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * w(i, col);
    return s;
  };
  std::vector<double> z(hd), r(hd), out(hd);
  for (std::size_t j = 0; j < hd; ++j) {
    double hz = 0.0, hr = 0.0;
    for (std::size_t i = 0; i < hd; ++i) {
      hz += h[i] * u(i, j);
      hr += h[i] * u(i, hd + j);
    }
    z[j] = sigmoid(dot_x(j) + hz + b[j]);
    r[j] = sigmoid(dot_x(hd + j) + hr + b[hd + j]);
  }
  for (std::size_t j = 0; j < hd; ++j) {
    double hn = 0.0;
    for (std::size_t i = 0; i < hd; ++i) hn += r[i] * h[i] * u(i, 2 * hd + j);
    const double n = std::tanh(dot_x(2 * hd + j) + hn + b[2 * hd + j]);
    out[j] = (1.0 - z[j]) * h[j] + z[j] * n;
  }
  return out;
}

inline std::vector<double> log_softmax(const std::vector<double>& v) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : v) mx = std::max(mx, x);
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  std::vector<double> out;
  for (double x : v) out.push_back(x - mx - std::log(s));
  return out;
}

// HSIC(K, L) = sum_ijkl-free form tr(K H L H) / (N-1)^2 written as explicit
// double sums over the centering matrix H = I - 11^T / N.
inline double hsic(const std::vector<std::vector<double>>& k, const std::vector<std::vector<double>>& l) {
  const std::size_t n = k.size();
  auto h = [&](std::size_t i, std::size_t j) { return (i == j ? 1.0 : 0.0) - 1.0 / static_cast<double>(n); };
  std::vector<std::vector<double>> kh(n, std::vector<double>(n, 0.0)), lh = kh;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t p = 0; p < n; ++p) {
        kh[i][j] += k[i][p] * h(p, j);
        lh[i][j] += l[i][p] * h(p, j);
      }
    }
  }
  double tr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) tr += kh[i][j] * lh[j][i];
  }
  const double d = static_cast<double>(n - 1);
  return tr / (d * d);
}

// Columns of a D x N matrix are the examples.
inline std::vector<std::vector<double>> linear_gram(const Tensor& x) {
  const std::size_t n = x.cols();
  std::vector<std::vector<double>> k(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t d = 0; d < x.rows(); ++d) k[i][j] += x(d, i) * x(d, j);
    }
  }
  return k;
}

inline double column_distance(const Tensor& x, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t d = 0; d < x.rows(); ++d) s += (x(d, i) - x(d, j)) * (x(d, i) - x(d, j));
  return std::sqrt(s);
}

inline std::vector<std::vector<double>> rbf_gram(const Tensor& x, double fraction) {
  const std::size_t n = x.cols();
  std::vector<double> dists;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) dists.push_back(column_distance(x, i, j));
  }
  std::sort(dists.begin(), dists.end());
  const std::size_t m = dists.size();
  const double median = m % 2 ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
  const double sigma = fraction * median;
  std::vector<std::vector<double>> k(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = column_distance(x, i, j);
      k[i][j] = std::exp(-d * d / (2.0 * sigma * sigma));
    }
  }
  return k;
}

inline double cka_from_grams(const std::vector<std::vector<double>>& k, const std::vector<std::vector<double>>& l) {
  return hsic(k, l) / std::sqrt(hsic(k, k) * hsic(l, l));
}

inline double linear_cka(const Tensor& x, const Tensor& y) { return cka_from_grams(linear_gram(x), linear_gram(y)); }
inline double rbf_cka(const Tensor& x, const Tensor& y, double fraction) {
  return cka_from_grams(rbf_gram(x, fraction), rbf_gram(y, fraction));
}

// AP straight from the definition: for each relevant position r (1-based),
// count relevant items at positions <= r.
inline double average_precision(const std::vector<bool>& rel) {
  double total = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < rel.size(); ++r) {
    if (!rel[r]) continue;
    std::size_t above = 0;
    for (std::size_t q = 0; q <= r; ++q) above += rel[q] ? 1 : 0;
    total += static_cast<double>(above) / static_cast<double>(r + 1);
    ++hits;
  }
  return hits ? total / static_cast<double>(hits) : 0.0;
}

inline double half_cosine_distance(const Tensor& x, std::size_t i, std::size_t j) {
  double dot = 0.0, ni = 0.0, nj = 0.0;
  for (std::size_t d = 0; d < x.rows(); ++d) {
    dot += x(d, i) * x(d, j);
    ni += x(d, i) * x(d, i);
    nj += x(d, j) * x(d, j);
  }
  return (1.0 - dot / std::sqrt(ni * nj)) / 2.0;
}

// mAP with every pairwise distance recomputed and a full stable sort per
// query. Returns {mAP, queries}; queries == 0 means no relevant pair.
inline std::pair<double, std::size_t> map_same_different(const Tensor& x, const std::vector<std::string>& words,
                                                         const std::vector<std::string>& speakers,
                                                         bool different_speaker) {
  const std::size_t n = x.cols();
  double total = 0.0;
  std::size_t queries = 0;
  for (std::size_t q = 0; q < n; ++q) {
    std::vector<std::pair<double, std::size_t>> items;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == q) continue;
      if (different_speaker && words[j] == words[q] && speakers[j] == speakers[q]) continue;
      items.push_back({half_cosine_distance(x, q, j), j});
    }
    std::sort(items.begin(), items.end());
    std::vector<bool> rel;
    bool any = false;
    for (const auto& [d, j] : items) {
      rel.push_back(words[j] == words[q]);
      any = any || rel.back();
    }
    if (!any) continue;
    total += average_precision(rel);
    ++queries;
  }
  return {queries ? total / static_cast<double>(queries) : 0.0, queries};
}

// Naive Ward: recompute every cluster-pair distance from the member points at
// each step, sqrt(2|A||B|/(|A|+|B|)) * |c_A - c_B|. Returns merges as
// (members of A, members of B, height) with A holding the smaller cluster id.
struct NaiveMerge {
  std::set<std::size_t> a;
  std::set<std::size_t> b;
  double height;
};

inline std::vector<NaiveMerge> naive_ward(const Tensor& pts) {
  const std::size_t m = pts.rows(), f = pts.cols();
  struct Cluster {
    std::size_t id;
    std::set<std::size_t> members;
  };
  std::vector<Cluster> active;
  for (std::size_t i = 0; i < m; ++i) active.push_back({i, {i}});
  auto centroid = [&](const std::set<std::size_t>& s) {
    std::vector<double> c(f, 0.0);
    for (std::size_t i : s) {
      for (std::size_t k = 0; k < f; ++k) c[k] += pts(i, k);
    }
    for (double& v : c) v /= static_cast<double>(s.size());
    return c;
  };
  std::vector<NaiveMerge> out;
  std::size_t next = m;
  while (active.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bx = 0, by = 0;
    for (std::size_t x = 0; x < active.size(); ++x) {
      for (std::size_t y = 0; y < active.size(); ++y) {
        if (active[x].id >= active[y].id) continue;
        const auto ca = centroid(active[x].members), cb = centroid(active[y].members);
        double s = 0.0;
        for (std::size_t k = 0; k < f; ++k) s += (ca[k] - cb[k]) * (ca[k] - cb[k]);
        const double na = static_cast<double>(active[x].members.size());
        const double nb = static_cast<double>(active[y].members.size());
        const double d = std::sqrt(2.0 * na * nb / (na + nb)) * std::sqrt(s);
        const bool better = d < best - 1e-12 ||
                            (std::abs(d - best) <= 1e-12 &&
                             std::make_pair(active[x].id, active[y].id) < std::make_pair(active[bx].id, active[by].id));
        if (better) {
          best = d;
          bx = x;
          by = y;
        }
      }
    }
    Cluster merged{next++, active[bx].members};
    merged.members.insert(active[by].members.begin(), active[by].members.end());
    out.push_back({active[bx].members, active[by].members, best});
    const std::size_t hi = std::max(bx, by), lo = std::min(bx, by);
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(hi));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(lo));
    active.push_back(std::move(merged));
  }
  return out;
}

// Largest |analytic - numeric| / max(|analytic|, |numeric|, floor) over every
// coordinate, central differences with step h. The floor only matters for
// entries whose gradient is itself below it.
inline double max_relative_error(std::vector<Tensor*> params, const std::vector<Tensor>& analytic,
                                 const std::function<double()>& loss, double h = 1e-5, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p];
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double keep = t[i];
      t[i] = keep + h;
      const double up = loss();
      t[i] = keep - h;
      const double down = loss();
      t[i] = keep;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p][i];
      const double denom = std::max({floor, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace oracle
