#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "cpgflex/errors.hpp"
#include "cpgflex/evolve.hpp"

namespace cpgflex::evolve {

bool dominates(const Fitness& a, const Fitness& b) {
  bool strictly = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return false;
    if (a[i] > b[i]) strictly = true;
  }
  return strictly;
}

std::vector<std::vector<std::size_t>> nondominated_sort(const std::vector<Fitness>& points) {
  const std::size_t n = points.size();
  std::vector<std::vector<std::size_t>> fronts;
  if (n == 0) return fronts;
  const std::size_t m = points.front().size();
  for (const auto& p : points)
    if (p.size() != m) throw ConfigurationError("fitness vectors differ in length");

  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> count(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (dominates(points[i], points[j])) {
        dominated[i].push_back(j);
        ++count[j];
      } else if (dominates(points[j], points[i])) {
        dominated[j].push_back(i);
        ++count[i];
      }
    }
  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < n; ++i)
    if (count[i] == 0) current.push_back(i);
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (std::size_t i : current)
      for (std::size_t j : dominated[i])
        if (--count[j] == 0) next.push_back(j);
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(current));
    current = std::move(next);
  }
  return fronts;
}

std::size_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::vector<std::vector<double>> reference_points(std::size_t objectives, std::size_t partitions) {
  if (objectives < 2) throw ConfigurationError("reference points need at least two objectives");
  if (partitions < 1) throw ConfigurationError("reference points need at least one partition");
  std::vector<std::vector<double>> out;
  std::vector<std::size_t> counts(objectives, 0);
  // Enumerate compositions of `partitions` into `objectives` parts, lexicographically.
  const auto recurse = [&](auto&& self, std::size_t dim, std::size_t left) -> void {
    if (dim + 1 == objectives) {
      counts[dim] = left;
      std::vector<double> p(objectives);
      for (std::size_t i = 0; i < objectives; ++i)
        p[i] = static_cast<double>(counts[i]) / static_cast<double>(partitions);
      out.push_back(std::move(p));
      return;
    }
    for (std::size_t c = 0; c <= left; ++c) {
      counts[dim] = c;
      self(self, dim + 1, left - c);
    }
  };
  recurse(recurse, 0, partitions);
  return out;
}

namespace {

// Intercepts of the hyperplane through the extreme points, per objective, or
// nullopt when the plane is degenerate.
std::optional<std::vector<double>> hyperplane_intercepts(const std::vector<std::vector<double>>& ext) {
  const std::size_t m = ext.size();
  Eigen::MatrixXd a(static_cast<long>(m), static_cast<long>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) a(static_cast<long>(i), static_cast<long>(j)) = ext[i][j];
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) return std::nullopt;
  const Eigen::VectorXd x = lu.solve(Eigen::VectorXd::Ones(static_cast<long>(m)));
  std::vector<double> out(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double xi = x(static_cast<long>(j));
    if (!(xi > 0.0)) return std::nullopt;
    out[j] = 1.0 / xi;
    if (!std::isfinite(out[j]) || out[j] < 1e-10) return std::nullopt;
  }
  return out;
}

}  // namespace

std::vector<std::size_t> nsga3_select(const std::vector<Fitness>& pool,
                                      const std::vector<std::vector<double>>& refs, std::size_t k,
                                      Rng& rng) {
  if (k > pool.size()) throw ConfigurationError("cannot select more survivors than the pool holds");
  std::vector<std::size_t> chosen;
  if (k == 0) return chosen;
  const auto fronts = nondominated_sort(pool);
  std::size_t last = 0;
  for (; last < fronts.size(); ++last) {
    if (chosen.size() + fronts[last].size() > k) break;
    chosen.insert(chosen.end(), fronts[last].begin(), fronts[last].end());
  }
  if (chosen.size() == k) {
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }
  if (refs.empty()) throw ConfigurationError("no reference points");
  const std::size_t m = pool.front().size();
  const std::vector<std::size_t>& partial = fronts[last];

  // Keep the best value of every objective: the partial front is the first
  // front only when nothing was chosen yet, and then it holds each maximum.
  std::vector<std::size_t> candidates = partial;
  std::vector<bool> taken(pool.size(), false);
  if (chosen.empty()) {
    for (std::size_t j = 0; j < m && chosen.size() < k; ++j) {
      std::size_t best = partial.front();
      for (std::size_t i : partial)
        if (pool[i][j] > pool[best][j]) best = i;
      if (!taken[best]) {
        taken[best] = true;
        chosen.push_back(best);
      }
    }
    std::erase_if(candidates, [&](std::size_t i) { return taken[i]; });
  }

  // Normalize in minimization form over chosen + partial front.
  std::vector<std::size_t> members = chosen;
  members.insert(members.end(), candidates.begin(), candidates.end());
  std::vector<double> ideal(m, std::numeric_limits<double>::infinity());
  for (std::size_t i : members)
    for (std::size_t j = 0; j < m; ++j) ideal[j] = std::min(ideal[j], -pool[i][j]);
  const auto translated = [&](std::size_t i, std::size_t j) { return -pool[i][j] - ideal[j]; };

  std::vector<std::vector<double>> extremes(m, std::vector<double>(m));
  for (std::size_t axis = 0; axis < m; ++axis) {
    double best_asf = std::numeric_limits<double>::infinity();
    std::size_t best_i = members.front();
    for (std::size_t i : members) {
      double asf = 0.0;
      for (std::size_t j = 0; j < m; ++j)
        asf = std::max(asf, translated(i, j) / (j == axis ? 1.0 : 1e-6));
      if (asf < best_asf) {
        best_asf = asf;
        best_i = i;
      }
    }
    for (std::size_t j = 0; j < m; ++j) extremes[axis][j] = translated(best_i, j);
  }
  std::vector<double> scale;
  if (auto icpt = hyperplane_intercepts(extremes)) {
    scale = *icpt;
  } else {
    scale.assign(m, 0.0);
    for (std::size_t i : members)
      for (std::size_t j = 0; j < m; ++j) scale[j] = std::max(scale[j], translated(i, j));
  }
  for (double& s : scale)
    if (!(s > 1e-12)) s = 1.0;

  // Associate each member with its closest reference line.
  std::vector<std::vector<double>> dirs = refs;
  for (auto& d : dirs) {
    double nrm = 0.0;
    for (double v : d) nrm += v * v;
    nrm = std::sqrt(nrm);
    for (double& v : d) v /= nrm;
  }
  std::vector<std::size_t> niche(pool.size(), 0);
  std::vector<double> distance(pool.size(), 0.0);
  std::vector<double> fn(m);
  for (std::size_t i : members) {
    for (std::size_t j = 0; j < m; ++j) fn[j] = translated(i, j) / scale[j];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < dirs.size(); ++r) {
      double proj = 0.0, sq = 0.0;
      for (std::size_t j = 0; j < m; ++j) proj += fn[j] * dirs[r][j];
      for (std::size_t j = 0; j < m; ++j) {
        const double e = fn[j] - proj * dirs[r][j];
        sq += e * e;
      }
      if (sq < best) {
        best = sq;
        niche[i] = r;
      }
    }
    distance[i] = std::sqrt(best);
  }

  std::vector<std::size_t> count(refs.size(), 0);
  for (std::size_t i : chosen) ++count[niche[i]];
  std::vector<std::vector<std::size_t>> waiting(refs.size());
  for (std::size_t i : candidates) waiting[niche[i]].push_back(i);
  std::vector<bool> active(refs.size());
  for (std::size_t r = 0; r < refs.size(); ++r) active[r] = !waiting[r].empty();

  while (chosen.size() < k) {
    std::size_t lowest = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> ties;
    for (std::size_t r = 0; r < refs.size(); ++r) {
      if (!active[r]) continue;
      if (count[r] < lowest) {
        lowest = count[r];
        ties.clear();
      }
      if (count[r] == lowest) ties.push_back(r);
    }
    const std::size_t r = ties[uniform_index(rng, ties.size())];
    auto& bucket = waiting[r];
    std::size_t pick;
    if (count[r] == 0) {
      pick = 0;
      for (std::size_t q = 1; q < bucket.size(); ++q)
        if (distance[bucket[q]] < distance[bucket[pick]]) pick = q;
    } else {
      pick = uniform_index(rng, bucket.size());
    }
    chosen.push_back(bucket[pick]);
    bucket.erase(bucket.begin() + static_cast<long>(pick));
    ++count[r];
    if (bucket.empty()) active[r] = false;
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<genome::Genome> vary(const std::vector<genome::Genome>& parents, double p_c,
                                 double p_m, Rng& rng) {
  if (parents.size() % 2 != 0) throw ConfigurationError("population size must be even");
  std::vector<std::size_t> order(parents.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[uniform_index(rng, i)]);
  // Children take their parents' slots, so no variation leaves the population as is.
  std::vector<genome::Genome> out(parents.size());
  for (std::size_t i = 0; i < order.size(); i += 2) {
    genome::Genome a = parents[order[i]];
    genome::Genome b = parents[order[i + 1]];
    if (a.alleles.size() != b.alleles.size()) throw ConfigurationError("genome lengths differ");
    if (uniform01(rng) < p_c)
      for (std::size_t g = 0; g < a.alleles.size(); ++g)
        if (uniform01(rng) < 0.5) std::swap(a.alleles[g], b.alleles[g]);
    out[order[i]] = std::move(a);
    out[order[i + 1]] = std::move(b);
  }
  if (p_m > 0.0)
    for (auto& g : out)
      for (int& allele : g.alleles)
        if (uniform01(rng) < p_m)
          allele = genome::kAlleleMin + static_cast<int>(uniform_index(rng, 10));
  return out;
}

double hypervolume_2d(const std::vector<Fitness>& points, const Fitness& ref) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : points) {
    if (p.size() != 2) throw ConfigurationError("hypervolume_2d needs two objectives");
    if (p[0] > ref[0] && p[1] > ref[1]) pts.emplace_back(p[0], p[1]);
  }
  // Sweep by descending first objective, accumulating slabs of new second-objective height.
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second > b.second;
  });
  double area = 0.0, top = ref[1];
  for (const auto& [f1, f2] : pts) {
    if (f2 > top) {
      area += (f1 - ref[0]) * (f2 - top);
      top = f2;
    }
  }
  return area;
}

Fitness median_fitness(const std::vector<Fitness>& samples) {
  if (samples.empty()) throw ConfigurationError("median of no samples");
  const std::size_t m = samples.front().size();
  Fitness out(m);
  std::vector<double> col(samples.size());
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t s = 0; s < samples.size(); ++s) {
      if (samples[s].size() != m) throw ConfigurationError("fitness vectors differ in length");
      col[s] = samples[s][j];
    }
    std::sort(col.begin(), col.end());
    const std::size_t h = col.size() / 2;
    out[j] = col.size() % 2 ? col[h] : 0.5 * (col[h - 1] + col[h]);
  }
  return out;
}

}  // namespace cpgflex::evolve
