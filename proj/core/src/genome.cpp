#include "cpgflex/genome.hpp"

#include <cmath>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cpgflex/errors.hpp"
#include "cpgflex/rng.hpp"

namespace cpgflex {

std::string save_rng(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng load_rng(const std::string& state) {
  Rng rng;
  std::istringstream is(state);
  is >> rng;
  if (!is) throw ConfigurationError("corrupt rng state");
  return rng;
}

}  // namespace cpgflex

namespace cpgflex::genome {

namespace {

constexpr std::size_t kCpgShared = 5;
constexpr std::size_t kCpgPerType = 6;
constexpr std::size_t kBodyParams = 9;

std::vector<ParamEntry> cpg_entries(const neuro::CpgTopology& topology) {
  std::vector<ParamEntry> e{
      {"gamma", 0.01, 0.1},   {"a", 0.2, 2.0},        {"b", 0.02, 0.2},
      {"kappa", 0.5, 5.0},    {"u0", 0.1, 1.0},       {"c_in", 1.1, 2.0},
      {"c_a", 1.1, 2.0},      {"c_b", 1.1, 2.0},      {"d_in", -0.9, 0.9},
      {"d_a", -0.9, 0.9},     {"d_b", -0.9, 0.9},
  };
  for (const auto& wc : topology.classes) e.push_back({"w_" + wc.name, -1.8, 1.8});
  e.insert(e.end(), {{"theta0_hip", 2.7, 27.0},
                     {"theta0_leg", 4.5, 45.0},
                     {"theta0_knee", 7.2, 72.0, true},
                     {"A", 0.005, 0.05},
                     {"B", 0.005, 0.05},
                     {"q_a_front", -0.45, 0.45},
                     {"q_b_front", -0.45, 0.45},
                     {"q_a_side", -0.45, 0.45},
                     {"q_b_side", -0.45, 0.45}});
  return e;
}

std::vector<ParamEntry> filter_entries() {
  using stimulus::kFilterNeurons;
  using stimulus::kFilterTargets;
  std::vector<ParamEntry> e;
  for (std::size_t i = 0; i < kFilterNeurons; ++i) e.push_back({fmt::format("G{}", i), -1.0, 1.0});
  for (std::size_t f = 0; f < kFilterNeurons; ++f)
    for (std::size_t l = 0; l < kFilterTargets; ++l)
      e.push_back({fmt::format("M{}_{}", f, l), -10.0, 10.0});
  for (std::size_t i = 0; i < kFilterNeurons; ++i)
    for (std::size_t j = 0; j < kFilterNeurons; ++j)
      if (i != j) e.push_back({fmt::format("W{}_{}", i, j), -1.2, 0.0});
  e.push_back({"c", 2.0, 2.5});
  e.push_back({"gamma_lowpass", 0.05, 0.55});
  return e;
}

}  // namespace

std::string to_string(Kind kind) { return kind == Kind::Cpg ? "cpg" : "filter"; }

Kind kind_from_string(const std::string& name) {
  if (name == "cpg") return Kind::Cpg;
  if (name == "filter") return Kind::Filter;
  throw ConfigurationError("unknown genome kind '" + name + "'");
}

ParamMap::ParamMap(Kind kind, std::vector<ParamEntry> entries)
    : kind_(kind), entries_(std::move(entries)) {
  for (const auto& e : entries_)
    if (!(e.high >= e.low)) throw ConfigurationError("parameter '" + e.name + "' has high < low");
}

ParamMap ParamMap::cpg(const neuro::CpgTopology& topology) {
  return ParamMap(Kind::Cpg, cpg_entries(topology));
}

ParamMap ParamMap::filter() { return ParamMap(Kind::Filter, filter_entries()); }

ParamMap ParamMap::for_kind(Kind kind) { return kind == Kind::Cpg ? cpg() : filter(); }

double ParamMap::decode_allele(std::size_t index, int allele) const {
  const ParamEntry& e = entries_.at(index);
  if (allele < kAlleleMin || allele > kAlleleMax)
    throw ValidationError("allele " + std::to_string(index) + " = " + std::to_string(allele) +
                              " outside [1, 10]",
                          index);
  const double value =
      allele == kAlleleMax ? e.high : e.low + (allele - 1) * (e.high - e.low) / 9.0;
  return e.negated ? -value : value;
}

int ParamMap::encode_value(std::size_t index, double value) const {
  const ParamEntry& e = entries_.at(index);
  const double magnitude = e.negated ? -value : value;
  const double span = e.high - e.low;
  const long allele = span > 0.0 ? std::lround((magnitude - e.low) / span * 9.0) + 1 : 1;
  if (allele < kAlleleMin || allele > kAlleleMax ||
      std::abs(decode_allele(index, static_cast<int>(allele)) - value) >
          1e-9 * std::max(1.0, std::abs(value)))
    throw ValidationError("value " + std::to_string(value) + " of '" + e.name +
                              "' is not on the allele grid",
                          index);
  return static_cast<int>(allele);
}

std::string ParamMap::version_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto feed = [&](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  };
  feed(to_string(kind_));
  for (const auto& e : entries_)
    feed(fmt::format("|{}:{:.17g}:{:.17g}:{}", e.name, e.low, e.high, e.negated ? 1 : 0));
  return fmt::format("{:016x}", h);
}

void validate(const Genome& genome, const ParamMap& map) {
  if (genome.kind != map.kind())
    throw ValidationError("genome kind " + to_string(genome.kind) + " does not match map " +
                          to_string(map.kind()));
  if (genome.alleles.size() != map.size())
    throw ValidationError("genome has " + std::to_string(genome.alleles.size()) +
                          " alleles, expected " + std::to_string(map.size()));
  for (std::size_t i = 0; i < genome.alleles.size(); ++i) {
    const int a = genome.alleles[i];
    if (a < kAlleleMin || a > kAlleleMax)
      throw ValidationError("allele " + std::to_string(i) + " = " + std::to_string(a) +
                                " outside [1, 10]",
                            i);
  }
}

std::vector<double> decode_values(const Genome& genome, const ParamMap& map) {
  validate(genome, map);
  std::vector<double> out(map.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = map.decode_allele(i, genome.alleles[i]);
  return out;
}

Genome encode_values(const std::vector<double>& values, const ParamMap& map) {
  if (values.size() != map.size())
    throw ValidationError("expected " + std::to_string(map.size()) + " values");
  Genome g{map.kind(), std::vector<int>(values.size())};
  for (std::size_t i = 0; i < values.size(); ++i) g.alleles[i] = map.encode_value(i, values[i]);
  return g;
}

Genome random_genome(const ParamMap& map, std::mt19937_64& rng) {
  Genome g{map.kind(), std::vector<int>(map.size())};
  for (auto& a : g.alleles) a = kAlleleMin + static_cast<int>(uniform_index(rng, 10));
  return g;
}

Genome random_genome(Kind kind, std::mt19937_64& rng) {
  return random_genome(ParamMap::for_kind(kind), rng);
}

CpgDecoded decode_cpg(const Genome& genome, const neuro::CpgTopology& topology) {
  const ParamMap map = ParamMap::cpg(topology);
  const std::vector<double> v = decode_values(genome, map);
  neuro::CpgParameters p;
  p.gamma = v[0];
  p.a = v[1];
  p.b = v[2];
  p.kappa = v[3];
  p.u0 = v[4];
  for (std::size_t k = 0; k < 3; ++k) {
    p.c[k] = v[kCpgShared + k];
    p.d[k] = v[kCpgShared + 3 + k];
  }
  const std::size_t w0 = kCpgShared + kCpgPerType;
  p.weights.assign(v.begin() + static_cast<long>(w0),
                   v.begin() + static_cast<long>(w0 + topology.classes.size()));
  const std::size_t b0 = w0 + topology.classes.size();
  static_assert(kBodyParams == 9);
  body::JointCommandParams cmd;
  cmd.theta0_hip = v[b0 + 0];
  cmd.theta0_leg = v[b0 + 1];
  cmd.theta0_knee = v[b0 + 2];
  cmd.A = v[b0 + 3];
  cmd.B = v[b0 + 4];
  cmd.q_a_front = v[b0 + 5];
  cmd.q_b_front = v[b0 + 6];
  cmd.q_a_side = v[b0 + 7];
  cmd.q_b_side = v[b0 + 8];
  return {neuro::build_cpg(p, topology), cmd};
}

stimulus::FilterWiring decode_filter(const Genome& genome) {
  using stimulus::kFilterNeurons;
  using stimulus::kFilterTargets;
  const std::vector<double> v = decode_values(genome, ParamMap::filter());
  stimulus::FilterWiring f;
  std::size_t k = 0;
  for (std::size_t i = 0; i < kFilterNeurons; ++i) f.G[i] = v[k++];
  for (std::size_t i = 0; i < kFilterNeurons; ++i)
    for (std::size_t l = 0; l < kFilterTargets; ++l) f.M[i][l] = v[k++];
  for (std::size_t i = 0; i < kFilterNeurons; ++i)
    for (std::size_t j = 0; j < kFilterNeurons; ++j) f.W[i][j] = i == j ? 0.0 : v[k++];
  f.c = v[k++];
  f.gamma_lowpass = v[k++];
  return f;
}

nlohmann::json to_json(const Genome& genome) {
  return {{"kind", to_string(genome.kind)},
          {"map_hash", ParamMap::for_kind(genome.kind).version_hash()},
          {"alleles", genome.alleles}};
}

Genome genome_from_json(const nlohmann::json& doc) {
  Genome g;
  g.kind = kind_from_string(doc.at("kind").get<std::string>());
  g.alleles = doc.at("alleles").get<std::vector<int>>();
  const ParamMap map = ParamMap::for_kind(g.kind);
  if (doc.contains("map_hash") && doc["map_hash"].get<std::string>() != map.version_hash())
    throw ValidationError("genome was written for a different parameter map (hash " +
                          doc["map_hash"].get<std::string>() + ")");
  validate(g, map);
  return g;
}

}  // namespace cpgflex::genome
