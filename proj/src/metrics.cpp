#include "pbpe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "pbpe/error.hpp"

namespace pbpe {

namespace {

struct EncodedDocs {
  std::vector<const Bytes*> docs;
  std::vector<std::vector<TokenId>> ids;

  void add(const TokenizerModel& model, const Bytes& doc) {
    docs.push_back(&doc);
    ids.push_back(model.encode_ids(doc));
  }
  void append(const EncodedDocs& other) {
    docs.insert(docs.end(), other.docs.begin(), other.docs.end());
    ids.insert(ids.end(), other.ids.begin(), other.ids.end());
  }
  std::uint64_t total_tokens() const {
    std::uint64_t t = 0;
    for (const auto& v : ids) t += v.size();
    return t;
  }
};

EncodedDocs encode_all(const TokenizerModel& model, std::span<const Bytes> docs) {
  EncodedDocs e;
  for (const Bytes& d : docs) e.add(model, d);
  return e;
}

CompressionRate cr_of(const EncodedDocs& e, NormUnit unit) {
  CompressionRate cr;
  double ratio_sum = 0.0;
  for (std::size_t i = 0; i < e.docs.size(); ++i) {
    const std::uint64_t n_tok = e.ids[i].size();
    if (n_tok == 0) continue;
    const std::uint64_t n_unit = unit_length(*e.docs[i], unit).value;
    ratio_sum += static_cast<double>(n_unit) / static_cast<double>(n_tok);
    cr.units += n_unit;
    cr.tokens += n_tok;
    ++cr.documents;
  }
  if (cr.documents == 0) throw DataError("compression rate of an empty corpus");
  cr.mean_of_ratios = ratio_sum / static_cast<double>(cr.documents);
  cr.ratio_of_sums = static_cast<double>(cr.units) / static_cast<double>(cr.tokens);
  return cr;
}

double fertility_of(const EncodedDocs& e) {
  std::uint64_t words = 0;
  for (const Bytes* d : e.docs) words += unit_length(*d, NormUnit::kWords).value;
  if (words == 0) throw DataError("fertility of a corpus with no words");
  return static_cast<double>(e.total_tokens()) / static_cast<double>(words);
}

std::size_t distinct_tokens(const EncodedDocs& e) {
  std::unordered_set<TokenId> seen;
  for (const auto& v : e.ids) seen.insert(v.begin(), v.end());
  return seen.size();
}

double ttr_of(const EncodedDocs& e) {
  const std::uint64_t total = e.total_tokens();
  return total == 0 ? 0.0 : static_cast<double>(distinct_tokens(e)) / static_cast<double>(total);
}

double vocab_util_of(const TokenizerModel& model, const EncodedDocs& e) {
  return static_cast<double>(distinct_tokens(e)) / static_cast<double>(model.vocab_size());
}

UnigramDistribution dist_of(const TokenizerModel& model, const EncodedDocs& e) {
  std::unordered_map<TokenId, std::uint64_t> counts;
  for (const auto& v : e.ids) {
    for (TokenId id : v) ++counts[id];
  }
  UnigramDistribution d;
  for (const auto& [id, n] : counts) d.add(model.token_bytes(id), n);
  return d;
}

}  // namespace

void UnigramDistribution::add(const Bytes& token, std::uint64_t n) {
  if (n == 0) return;
  freq[token] += n;
  total += n;
}

std::vector<double> UnigramDistribution::probabilities() const {
  std::vector<double> p;
  p.reserve(freq.size());
  for (const auto& [tok, n] : freq) p.push_back(static_cast<double>(n) / static_cast<double>(total));
  return p;
}

UnigramDistribution unigram_distribution(const TokenizerModel& model, std::span<const Bytes> docs) {
  return dist_of(model, encode_all(model, docs));
}

CompressionRate compression_rate(const TokenizerModel& model, std::span<const Bytes> docs, NormUnit unit) {
  return cr_of(encode_all(model, docs), unit);
}

double fertility(const TokenizerModel& model, std::span<const Bytes> docs) {
  return fertility_of(encode_all(model, docs));
}

double vocab_utilization(const TokenizerModel& model, std::span<const Bytes> docs) {
  return vocab_util_of(model, encode_all(model, docs));
}

double type_token_ratio(const TokenizerModel& model, std::span<const Bytes> docs) {
  return ttr_of(encode_all(model, docs));
}

double avg_token_rank(const UnigramDistribution& dist) {
  if (dist.total == 0) throw DataError("average token rank of an empty distribution");
  std::vector<std::pair<std::uint64_t, const Bytes*>> order;
  order.reserve(dist.freq.size());
  for (const auto& [tok, n] : dist.freq) order.emplace_back(n, &tok);
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  double weighted = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    weighted += static_cast<double>(order[r].first) * static_cast<double>(r + 1);
  }
  return weighted / static_cast<double>(dist.total);
}

double renyi_entropy(std::span<const double> probabilities, double alpha) {
  if (!(alpha > 0.0)) throw UsageError("Renyi order must be positive");
  if (probabilities.empty()) throw DataError("Renyi entropy of an empty distribution");
  const double pmax = *std::max_element(probabilities.begin(), probabilities.end());
  if (std::isinf(alpha)) return -std::log2(pmax);
  if (alpha == 1.0) {
    double h = 0.0;
    for (double p : probabilities) {
      if (p > 0.0) h -= p * std::log2(p);
    }
    return h;
  }
  // Scaled by pmax so that large orders do not underflow.
  double s = 0.0;
  for (double p : probabilities) {
    if (p > 0.0) s += std::pow(p / pmax, alpha);
  }
  return (alpha * std::log2(pmax) + std::log2(s)) / (1.0 - alpha);
}

double renyi_entropy(const UnigramDistribution& dist, double alpha) {
  if (dist.total == 0) throw DataError("Renyi entropy of an empty distribution");
  const auto p = dist.probabilities();
  return renyi_entropy(p, alpha);
}

double gini(std::span<const double> costs) {
  if (costs.empty()) throw DataError("Gini coefficient of an empty cost vector");
  std::vector<double> c(costs.begin(), costs.end());
  for (double v : c) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DataError("Gini costs must be positive and finite");
  }
  std::sort(c.begin(), c.end());
  const auto n = static_cast<double>(c.size());
  double weighted = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    weighted += (n - static_cast<double>(i)) * c[i];  // (n + 1 - i) with 1-based i
    sum += c[i];
  }
  const double g = (n + 1.0 - 2.0 * weighted / sum) / n;
  return std::max(0.0, g);
}

GoldSegmentation parse_segmentation(std::string_view segmented) {
  GoldSegmentation g;
  std::size_t start = 0;
  while (true) {
    const std::size_t bar = segmented.find('|', start);
    const std::string_view piece = segmented.substr(start, bar == std::string_view::npos ? bar : bar - start);
    if (piece.empty()) throw DataError("empty morpheme in segmentation '" + std::string(segmented) + "'");
    g.word += piece;
    if (bar == std::string_view::npos) break;
    g.boundaries.insert(g.word.size());
    start = bar + 1;
  }
  return g;
}

std::vector<GoldSegmentation> parse_gold_tsv(std::string_view text) {
  std::vector<GoldSegmentation> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw DataError("gold line " + std::to_string(line_no) + ": expected word<TAB>segmentation");
    }
    GoldSegmentation g = parse_segmentation(line.substr(tab + 1));
    if (g.word != line.substr(0, tab)) {
      throw DataError("gold line " + std::to_string(line_no) + ": segmentation does not spell the word");
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<GoldSegmentation> load_gold_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open gold segmentation " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_gold_tsv(ss.str());
}

MorphScores morph_boundary_scores(const TokenizerModel& model, std::span<const GoldSegmentation> gold) {
  if (gold.empty()) throw DataError("morph boundary scores need at least one gold word");
  MorphScores s;
  for (const GoldSegmentation& g : gold) {
    for (std::size_t b : g.boundaries) {
      if (b == 0 || b >= g.word.size()) {
        throw DataError("gold boundary " + std::to_string(b) + " is outside word '" + escape_bytes(g.word) + "'");
      }
    }
    std::set<std::size_t> predicted;
    std::size_t offset = 0;
    const auto ids = model.encode_ids(g.word);
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
      offset += model.token_bytes(ids[i]).size();
      predicted.insert(offset);
    }
    std::size_t hits = 0;
    for (std::size_t b : predicted) hits += g.boundaries.count(b);
    s.precision += predicted.empty() ? 1.0 : static_cast<double>(hits) / static_cast<double>(predicted.size());
    s.recall += g.boundaries.empty() ? 1.0 : static_cast<double>(hits) / static_cast<double>(g.boundaries.size());
  }
  s.words = gold.size();
  s.precision /= static_cast<double>(s.words);
  s.recall /= static_cast<double>(s.words);
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

std::string renyi_label(double alpha) {
  if (std::isinf(alpha)) return "inf";
  std::ostringstream ss;
  ss << alpha;
  return ss.str();
}

namespace {

MetricValues values_of(const TokenizerModel& model, const EncodedDocs& e, const ReportOptions& options) {
  MetricValues v;
  for (NormUnit u : options.units) {
    const CompressionRate cr = cr_of(e, u);
    v.compression_rate[std::string(to_string(u))] = {cr.mean_of_ratios, cr.ratio_of_sums};
  }
  v.fertility = fertility_of(e);
  v.vocab_utilization = vocab_util_of(model, e);
  v.type_token_ratio = ttr_of(e);
  const UnigramDistribution dist = dist_of(model, e);
  v.avg_token_rank = avg_token_rank(dist);
  for (double a : options.renyi_orders) v.renyi_entropy[renyi_label(a)] = renyi_entropy(dist, a);
  v.tokens = e.total_tokens();
  v.lines = e.docs.size();
  v.tokens_per_line = static_cast<double>(v.tokens) / static_cast<double>(v.lines);
  return v;
}

}  // namespace

MetricReport full_report(const TokenizerModel& model, const ParallelDevCorpus& dev, const ReportOptions& options) {
  dev.validate();
  MetricReport report;
  EncodedDocs all;
  std::vector<double> costs;
  std::vector<double> cr_lines;
  std::vector<GoldSegmentation> all_gold;
  for (std::size_t i = 0; i < dev.languages.size(); ++i) {
    const EncodedDocs e = encode_all(model, dev.lines[i]);
    MetricValues v = values_of(model, e, options);
    if (auto g = options.gold.find(dev.languages[i]); g != options.gold.end() && !g->second.empty()) {
      v.morph_boundary = morph_boundary_scores(model, g->second);
      all_gold.insert(all_gold.end(), g->second.begin(), g->second.end());
    }
    costs.push_back(v.tokens_per_line);
    cr_lines.push_back(static_cast<double>(v.lines) / static_cast<double>(v.tokens));
    report.per_language.emplace(dev.languages[i].code(), std::move(v));
    all.append(e);
  }
  for (const auto& [lang, g] : options.gold) {
    if (std::find(dev.languages.begin(), dev.languages.end(), lang) == dev.languages.end()) {
      throw DataError("gold segmentation given for '" + lang.code() + "', which is not in the dev corpus");
    }
  }
  report.global = values_of(model, all, options);
  if (!all_gold.empty()) report.global.morph_boundary = morph_boundary_scores(model, all_gold);
  report.gini = gini(costs);
  const auto [lo, hi] = std::minmax_element(cr_lines.begin(), cr_lines.end());
  report.cr_spread = *hi / *lo;

  auto& prov = report.provenance = options.provenance;
  prov["vocab_size"] = model.vocab_size();
  prov["num_merges"] = model.num_merges();
  prov["languages"] = nlohmann::ordered_json::array();
  for (const auto& l : dev.languages) prov["languages"].push_back(l.code());
  prov["dev_lines"] = dev.num_lines();
  prov["units"] = nlohmann::ordered_json::array();
  for (NormUnit u : options.units) prov["units"].push_back(to_string(u));
  prov["gini_cost"] = "tokens_per_line";
  prov["cr_estimators"] = {"mean_of_ratios", "ratio_of_sums"};
  return report;
}

namespace {

nlohmann::ordered_json values_to_json(const MetricValues& v) {
  nlohmann::ordered_json j;
  auto& cr = j["compression_rate"] = nlohmann::ordered_json::object();
  for (const auto& [unit, est] : v.compression_rate) {
    cr[unit] = {{"mean_of_ratios", est.mean_of_ratios}, {"ratio_of_sums", est.ratio_of_sums}};
  }
  j["fertility"] = v.fertility;
  j["vocab_utilization"] = v.vocab_utilization;
  j["type_token_ratio"] = v.type_token_ratio;
  j["avg_token_rank"] = v.avg_token_rank;
  auto& re = j["renyi_entropy"] = nlohmann::ordered_json::object();
  for (const auto& [label, h] : v.renyi_entropy) re[label] = h;
  j["tokens"] = v.tokens;
  j["lines"] = v.lines;
  j["tokens_per_line"] = v.tokens_per_line;
  if (v.morph_boundary) {
    j["morph_boundary_p"] = v.morph_boundary->precision;
    j["morph_boundary_r"] = v.morph_boundary->recall;
    j["morph_boundary_f1"] = v.morph_boundary->f1;
    j["morph_boundary_words"] = v.morph_boundary->words;
  }
  return j;
}

MetricValues values_from_json(const nlohmann::ordered_json& j) {
  MetricValues v;
  for (const auto& [unit, est] : j.at("compression_rate").items()) {
    v.compression_rate[unit] = {est.at("mean_of_ratios").get<double>(), est.at("ratio_of_sums").get<double>()};
  }
  v.fertility = j.at("fertility").get<double>();
  v.vocab_utilization = j.at("vocab_utilization").get<double>();
  v.type_token_ratio = j.at("type_token_ratio").get<double>();
  v.avg_token_rank = j.at("avg_token_rank").get<double>();
  for (const auto& [label, h] : j.at("renyi_entropy").items()) v.renyi_entropy[label] = h.get<double>();
  v.tokens = j.at("tokens").get<std::uint64_t>();
  v.lines = j.at("lines").get<std::uint64_t>();
  v.tokens_per_line = j.at("tokens_per_line").get<double>();
  if (j.contains("morph_boundary_p")) {
    v.morph_boundary = MorphScores{j.at("morph_boundary_p").get<double>(), j.at("morph_boundary_r").get<double>(),
                                   j.at("morph_boundary_f1").get<double>(),
                                   j.at("morph_boundary_words").get<std::size_t>()};
  }
  return v;
}

}  // namespace

nlohmann::ordered_json report_to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["global"] = values_to_json(report.global);
  j["global"]["gini"] = report.gini;
  j["global"]["cr_spread"] = report.cr_spread;
  auto& per = j["per_language"] = nlohmann::ordered_json::object();
  for (const auto& [lang, v] : report.per_language) per[lang] = values_to_json(v);
  j["provenance"] = report.provenance;
  return j;
}

MetricReport report_from_json(const nlohmann::ordered_json& j) {
  MetricReport r;
  try {
    r.global = values_from_json(j.at("global"));
    r.gini = j.at("global").at("gini").get<double>();
    r.cr_spread = j.at("global").at("cr_spread").get<double>();
    for (const auto& [lang, v] : j.at("per_language").items()) r.per_language[lang] = values_from_json(v);
    r.provenance = j.at("provenance");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed metric report: ") + e.what());
  }
  return r;
}

}  // namespace pbpe
