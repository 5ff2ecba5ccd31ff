#include "samkit/metrics.hpp"

#include <cctype>
#include <cmath>
#include <unordered_map>

#include "samkit/errors.hpp"
#include "samkit/util.hpp"

namespace samkit {

double mean_of(const std::vector<double>& values) {
  if (values.empty()) throw EmptyInput("mean of an empty series");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double population_std(const std::vector<double>& values) {
  double m = mean_of(values);
  double acc = 0.0;
  for (double v : values) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(values.size()));
}

namespace {

void check_paired(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.empty() || y.empty()) throw EmptyInput("paired series is empty");
  if (x.size() != y.size()) throw Error("paired series length mismatch");
}

}  // namespace

double pcc(const std::vector<double>& x, const std::vector<double>& y) {
  check_paired(x, y);
  std::size_t n = x.size();
  if (n < 2) throw DegenerateSeries("correlation needs at least two pairs");
  double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw DegenerateSeries("correlation of a constant series");
  return sxy / std::sqrt(sxx * syy);
}

double mae(const std::vector<double>& x, const std::vector<double>& y) {
  check_paired(x, y);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::fabs(x[i] - y[i]);
  return acc / static_cast<double>(x.size());
}

HashEmbedder::HashEmbedder(std::size_t dim) : dim_(dim) {
  if (dim_ == 0) throw ConfigError("embedder dimension must be positive");
}

namespace {

// splitmix64, the usual seeding stream.
inline std::uint64_t mix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<double> HashEmbedder::embed(std::string_view token) const {
  std::uint64_t state = fnv1a64(token);
  std::vector<double> v(dim_);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    // 53 mantissa bits, mapped onto [-1, 1].
    double u = static_cast<double>(mix64(state) >> 11) * 0x1.0p-53;
    v[i] = 2.0 * u - 1.0;
    norm2 += v[i] * v[i];
  }
  double norm = std::sqrt(norm2);
  if (norm > 0.0)
    for (double& c : v) c /= norm;
  return v;
}

std::vector<std::string> similarity_tokens(std::string_view text) {
  auto tokens = alnum_tokens(text);
  for (auto& token : tokens)
    for (char& c : token) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return tokens;
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

double greedy_side(const std::vector<std::vector<double>>& from,
                   const std::vector<std::vector<double>>& to) {
  double acc = 0.0;
  for (const auto& f : from) {
    double best = -1.0;
    for (const auto& t : to) best = std::max(best, cosine(f, t));
    acc += best;
  }
  return acc / static_cast<double>(from.size());
}

}  // namespace

SimilarityScore similarity_from_embeddings(
    const std::vector<std::vector<double>>& real_vectors,
    const std::vector<std::vector<double>>& synthetic_vectors) {
  if (real_vectors.empty() || synthetic_vectors.empty())
    throw EmptyText("similarity needs tokens on both sides");
  SimilarityScore score;
  score.precision = greedy_side(synthetic_vectors, real_vectors);
  score.recall = greedy_side(real_vectors, synthetic_vectors);
  double denom = score.precision + score.recall;
  score.f1 = denom > 0.0 ? 2.0 * score.precision * score.recall / denom : 0.0;
  return score;
}

SimilarityScore similarity(const std::string& real_text, const std::string& synthetic_text,
                           const TokenEmbedder& embedder) {
  auto real_tokens = similarity_tokens(real_text);
  auto synthetic_tokens = similarity_tokens(synthetic_text);
  if (real_tokens.empty() || synthetic_tokens.empty())
    throw EmptyText("similarity needs tokens on both sides");
  std::unordered_map<std::string, std::vector<double>> cache;
  auto embed_all = [&](const std::vector<std::string>& tokens) {
    std::vector<std::vector<double>> out;
    out.reserve(tokens.size());
    for (const auto& token : tokens) {
      auto it = cache.find(token);
      if (it == cache.end()) it = cache.emplace(token, embedder.embed(token)).first;
      out.push_back(it->second);
    }
    return out;
  };
  return similarity_from_embeddings(embed_all(real_tokens), embed_all(synthetic_tokens));
}

SimilaritySummary similarity_summary(const std::vector<double>& f1_scores) {
  SimilaritySummary summary;
  summary.mean_f1 = mean_of(f1_scores);
  summary.std_f1 = population_std(f1_scores);
  summary.count = f1_scores.size();
  return summary;
}

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  std::size_t na = a.size(), nb = b.size();
  if (na < 2 || nb < 2)
    throw DegenerateSeries("each cohort needs at least two observations");
  double ma = mean_of(a), mb = mean_of(b);
  double va = 0.0, vb = 0.0;
  for (double v : a) va += (v - ma) * (v - ma);
  for (double v : b) vb += (v - mb) * (v - mb);
  va /= static_cast<double>(na - 1);
  vb /= static_cast<double>(nb - 1);
  double sa = va / static_cast<double>(na);
  double sb = vb / static_cast<double>(nb);
  double se2 = sa + sb;
  if (se2 == 0.0)
    throw DegenerateSeries("both cohorts are constant, standard error is zero");
  WelchResult result;
  result.t = (ma - mb) / std::sqrt(se2);
  double denom = sa * sa / static_cast<double>(na - 1) + sb * sb / static_cast<double>(nb - 1);
  result.df = se2 * se2 / denom;
  double x = result.df / (result.df + result.t * result.t);
  result.p_two_sided = regularized_incomplete_beta(result.df / 2.0, 0.5, x);
  return result;
}

}  // namespace samkit
