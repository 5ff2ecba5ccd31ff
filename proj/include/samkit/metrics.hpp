#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace samkit {

double mean_of(const std::vector<double>& values);           // EmptyInput on empty
double population_std(const std::vector<double>& values);    // EmptyInput on empty
double pcc(const std::vector<double>& x, const std::vector<double>& y);
double mae(const std::vector<double>& x, const std::vector<double>& y);

struct SimilarityScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct TokenEmbedder {
  virtual ~TokenEmbedder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> embed(std::string_view token) const = 0;
};

/// Deterministic random-projection embedder: token bytes seed a fixed PRNG
/// stream, components land in [-1, 1], vector normalized to unit length.
class HashEmbedder : public TokenEmbedder {
 public:
  explicit HashEmbedder(std::size_t dim = 64);
  std::size_t dim() const override { return dim_; }
  std::vector<double> embed(std::string_view token) const override;

 private:
  std::size_t dim_;
};

std::vector<std::string> similarity_tokens(std::string_view text);

/// Greedy-matching token similarity. Precision averages, over synthetic
/// tokens, each token's best cosine against the real tokens; recall mirrors
/// it over real tokens; f1 is their harmonic mean (0 when both vanish).
/// Scores are raw, no baseline rescaling. Either side tokenizing to nothing
/// raises EmptyText.
SimilarityScore similarity(const std::string& real_text, const std::string& synthetic_text,
                           const TokenEmbedder& embedder);

SimilarityScore similarity_from_embeddings(const std::vector<std::vector<double>>& real_vectors,
                                           const std::vector<std::vector<double>>& synthetic_vectors);

struct SimilaritySummary {
  double mean_f1 = 0.0;
  double std_f1 = 0.0;  // population standard deviation
  std::size_t count = 0;
};

SimilaritySummary similarity_summary(const std::vector<double>& f1_scores);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
};

/// Welch's unequal-variance t-test with the Welch-Satterthwaite degrees of
/// freedom; two-sided p via the regularized incomplete beta function.
/// Fewer than two observations on a side, or a zero combined standard error,
/// raises DegenerateSeries.
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace samkit
