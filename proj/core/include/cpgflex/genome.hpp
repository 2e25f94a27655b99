#pragma once

// Integer genotypes. Every allele is an integer in [1, 10] and maps linearly
// onto its parameter range, endpoints included:
//
//   value = low + (allele - 1) * (high - low) / 9
//
// Ranges marked `negated` are stored by magnitude and decode to -value.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cpgflex/body.hpp"
#include "cpgflex/neuro.hpp"
#include "cpgflex/stimulus.hpp"

namespace cpgflex::genome {

inline constexpr int kAlleleMin = 1;
inline constexpr int kAlleleMax = 10;

enum class Kind { Cpg, Filter };

std::string to_string(Kind kind);
Kind kind_from_string(const std::string& name);

struct ParamEntry {
  std::string name;
  double low = 0.0;
  double high = 0.0;
  bool negated = false;
};

class ParamMap {
 public:
  ParamMap(Kind kind, std::vector<ParamEntry> entries);

  /// 23 CPG entries (5 shared, 6 per neuron type, one per topology weight
  /// class) followed by 9 joint/feedback entries.
  static ParamMap cpg(const neuro::CpgTopology& topology = neuro::CpgTopology::standard());
  /// 6 G, 24 M, 30 within-layer weights, shared c, low-pass constant.
  static ParamMap filter();
  static ParamMap for_kind(Kind kind);

  Kind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<ParamEntry>& entries() const noexcept { return entries_; }
  const ParamEntry& operator[](std::size_t i) const { return entries_[i]; }

  double decode_allele(std::size_t index, int allele) const;
  /// Inverse of decode_allele; throws if `value` is off the allele grid.
  int encode_value(std::size_t index, double value) const;

  /// FNV-1a hash over names and ranges, hex encoded.
  std::string version_hash() const;

 private:
  Kind kind_;
  std::vector<ParamEntry> entries_;
};

struct Genome {
  Kind kind = Kind::Cpg;
  std::vector<int> alleles;

  friend bool operator==(const Genome&, const Genome&) = default;
};

/// Throws ValidationError (with index) for length mismatch or out-of-range alleles.
void validate(const Genome& genome, const ParamMap& map);

std::vector<double> decode_values(const Genome& genome, const ParamMap& map);
Genome encode_values(const std::vector<double>& values, const ParamMap& map);

Genome random_genome(Kind kind, std::mt19937_64& rng);
Genome random_genome(const ParamMap& map, std::mt19937_64& rng);

struct CpgDecoded {
  neuro::NetworkSpec cpg;
  body::JointCommandParams command;
};

CpgDecoded decode_cpg(const Genome& genome,
                      const neuro::CpgTopology& topology = neuro::CpgTopology::standard());
stimulus::FilterWiring decode_filter(const Genome& genome);

nlohmann::json to_json(const Genome& genome);
Genome genome_from_json(const nlohmann::json& doc);

}  // namespace cpgflex::genome
