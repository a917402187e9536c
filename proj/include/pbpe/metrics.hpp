#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pbpe/corpus.hpp"
#include "pbpe/tokenizer.hpp"

namespace pbpe {

// Empirical token frequencies over an evaluation corpus.
struct UnigramDistribution {
  std::map<Bytes, std::uint64_t> freq;
  std::uint64_t total = 0;

  void add(const Bytes& token, std::uint64_t n = 1);
  std::vector<double> probabilities() const;
};

UnigramDistribution unigram_distribution(const TokenizerModel& model, std::span<const Bytes> docs);

// Both corpus-level estimators of the compression rate:
//   mean_of_ratios = (1/|D|) * sum_d units(d) / tokens(d)
//   ratio_of_sums  = sum_d units(d) / sum_d tokens(d)
// Documents that encode to zero tokens (only the empty string) are skipped.
struct CompressionRate {
  double mean_of_ratios = 0.0;
  double ratio_of_sums = 0.0;
  std::uint64_t units = 0;
  std::uint64_t tokens = 0;
  std::size_t documents = 0;
};

CompressionRate compression_rate(const TokenizerModel& model, std::span<const Bytes> docs, NormUnit unit);

// Tokens per whitespace-delimited word. Throws DataError if there are no words.
double fertility(const TokenizerModel& model, std::span<const Bytes> docs);

// Distinct observed tokens / vocabulary size.
double vocab_utilization(const TokenizerModel& model, std::span<const Bytes> docs);

// Distinct observed tokens / total tokens (0 for an empty token stream).
double type_token_ratio(const TokenizerModel& model, std::span<const Bytes> docs);

// Frequency-weighted mean rank, rank 1 = most frequent; ties are ordered by
// token bytes. Throws DataError on an empty distribution.
double avg_token_rank(const UnigramDistribution& dist);

inline constexpr double kRenyiInfinity = std::numeric_limits<double>::infinity();

// Renyi entropy in bits. alpha == 1 gives Shannon entropy and
// alpha == kRenyiInfinity gives min-entropy. Throws UsageError for alpha <= 0.
double renyi_entropy(std::span<const double> probabilities, double alpha);
double renyi_entropy(const UnigramDistribution& dist, double alpha);

// Inequality of per-language costs; 0 when all costs are equal. Throws
// DataError for an empty vector or a non-positive cost.
double gini(std::span<const double> costs);

struct GoldSegmentation {
  Bytes word;
  std::set<std::size_t> boundaries;  // interior byte offsets
};

// "un|happi|ness" -> {"unhappiness", {2, 7}}.
GoldSegmentation parse_segmentation(std::string_view segmented);

// TSV lines "word<TAB>seg|ment|ed"; blank lines and '#' comments are skipped.
std::vector<GoldSegmentation> parse_gold_tsv(std::string_view text);
std::vector<GoldSegmentation> load_gold_tsv(const std::filesystem::path& path);

struct MorphScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t words = 0;
  friend bool operator==(const MorphScores&, const MorphScores&) = default;
};

// Boundary precision/recall of the model's segmentation of each gold word,
// macro-averaged over words. An empty predicted (or gold) boundary set gives
// precision (or recall) 1.
MorphScores morph_boundary_scores(const TokenizerModel& model, std::span<const GoldSegmentation> gold);

struct CrEstimates {
  double mean_of_ratios = 0.0;
  double ratio_of_sums = 0.0;
  friend bool operator==(const CrEstimates&, const CrEstimates&) = default;
};

struct MetricValues {
  std::map<std::string, CrEstimates> compression_rate;  // by unit name
  double fertility = 0.0;
  double vocab_utilization = 0.0;
  double type_token_ratio = 0.0;
  double avg_token_rank = 0.0;
  std::map<std::string, double> renyi_entropy;  // by order label
  std::uint64_t tokens = 0;
  std::uint64_t lines = 0;
  double tokens_per_line = 0.0;
  std::optional<MorphScores> morph_boundary;
  friend bool operator==(const MetricValues&, const MetricValues&) = default;
};

struct MetricReport {
  MetricValues global;
  // Gini over per-language tokens per line on the parallel corpus.
  double gini = 0.0;
  // max / min of the per-language ratio-of-sums CR in lines.
  double cr_spread = 0.0;
  std::map<std::string, MetricValues> per_language;
  nlohmann::ordered_json provenance = nlohmann::ordered_json::object();
  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

struct ReportOptions {
  std::vector<NormUnit> units{kAllNormUnits.begin(), kAllNormUnits.end()};
  std::vector<double> renyi_orders{1.0, 2.0, 2.5, kRenyiInfinity};
  std::map<LanguageId, std::vector<GoldSegmentation>> gold;
  nlohmann::ordered_json provenance = nlohmann::ordered_json::object();
};

std::string renyi_label(double alpha);

MetricReport full_report(const TokenizerModel& model, const ParallelDevCorpus& dev, const ReportOptions& options = {});

nlohmann::ordered_json report_to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::ordered_json& j);

}  // namespace pbpe
