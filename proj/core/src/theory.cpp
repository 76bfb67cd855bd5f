#include "attest/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "attest/parallel.hpp"

namespace attest {
namespace {

constexpr std::size_t kChunks = 64;

void require_positive(std::span<const double> variances) {
  if (variances.empty()) throw std::invalid_argument("variances must be non-empty");
  for (double v : variances) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("variances must be positive and finite");
    }
  }
}

// P_{p,i}(t) for every position i and trigram t.
std::vector<std::vector<double>> position_probabilities(std::span<const double> p,
                                                        const GeneratorConfig& config,
                                                        const Matrix& vocab) {
  std::vector<std::vector<double>> probs;
  probs.reserve(config.max_length);
  std::map<double, std::vector<double>> by_beta;
  for (std::size_t i = 1; i <= config.max_length; ++i) {
    auto it = by_beta.find(config.beta(i));
    if (it == by_beta.end()) {
      const TrigramSampler sampler(vocab, p, config.beta(i));
      it = by_beta.emplace(config.beta(i), sampler.probabilities(1.0)).first;
    }
    const double alpha = config.alpha(i);
    const double uniform = (1.0 - alpha) / static_cast<double>(vocab.rows());
    std::vector<double> row(it->second.size());
    for (std::size_t t = 0; t < row.size(); ++t) row[t] = alpha * it->second[t] + uniform;
    probs.push_back(std::move(row));
  }
  return probs;
}

double sequence_probability(std::span<const TrigramId> trigrams,
                            const std::vector<std::vector<double>>& probs,
                            std::span<const double> length_pmf) {
  if (trigrams.empty() || trigrams.size() > length_pmf.size()) return 0.0;
  double prob = length_pmf[trigrams.size() - 1];
  for (std::size_t i = 0; i < trigrams.size(); ++i) prob *= probs[i].at(trigrams[i]);
  return prob;
}

std::vector<TrigramId> draw_query(Rng& rng, std::span<const double> p,
                                  const GeneratorConfig& config, const Matrix& vocab) {
  const std::size_t n = sample_query_length(rng, config.lambda, config.max_length);
  std::vector<TrigramId> out(n);
  for (std::size_t i = 1; i <= n; ++i) {
    const TrigramSampler sampler(vocab, p, config.beta(i));
    out[i - 1] = sampler.sample(rng, config.alpha(i));
  }
  return out;
}

// Injective key of a sequence over an alphabet of size m.
class SequenceKeys {
 public:
  SequenceKeys(std::size_t m, std::size_t max_length) : base_(m + 1) {
    double span = 1.0;
    for (std::size_t i = 0; i < max_length; ++i) span *= static_cast<double>(base_);
    if (span >= 1.8e19) throw std::invalid_argument("universe too large for sequence keys");
  }
  std::uint64_t operator()(std::span<const TrigramId> seq) const {
    std::uint64_t key = 0;
    for (auto it = seq.rbegin(); it != seq.rend(); ++it) key = key * base_ + (*it + 1);
    return key;
  }

 private:
  std::uint64_t base_;
};

std::vector<std::pair<QueryId, QueryId>> all_pairs(std::size_t n) {
  std::vector<std::pair<QueryId, QueryId>> pairs;
  for (QueryId j = 0; j < n; ++j) {
    for (QueryId k = j + 1; k < n; ++k) pairs.emplace_back(j, k);
  }
  return pairs;
}

std::vector<double> dots_over_d(std::span<const std::vector<TrigramId>> sample,
                                const GeneratorConfig& config, const Matrix& vocab) {
  std::vector<Vec> vecs;
  for (const auto& q : sample) vecs.push_back(model_query_vector(q, config, vocab));
  std::vector<double> out;
  for (auto [j, k] : all_pairs(sample.size())) {
    out.push_back(dot(vecs[j], vecs[k]) / static_cast<double>(vocab.cols()));
  }
  return out;
}

GeneratorConfig single_config(std::size_t d, std::size_t m, std::vector<double> alphas,
                              std::vector<double> betas) {
  GeneratorConfig config;
  config.d = d;
  config.m = m;
  config.max_length = alphas.size();
  config.lambda = 1.0;
  config.alphas = std::move(alphas);
  config.betas = std::move(betas);
  return config;
}

Check make_check(std::string name, bool passed, double measured, double threshold,
                 std::string detail = {}) {
  return Check{std::move(name), passed, measured, threshold, std::move(detail)};
}

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

}  // namespace

std::vector<double> blue_weights(std::span<const double> variances) {
  require_positive(variances);
  std::vector<double> w(variances.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = 1.0 / variances[i];
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

EstimatorVariances estimator_variances(std::span<const double> variances) {
  require_positive(variances);
  double sum = 0.0;
  double inv = 0.0;
  for (double v : variances) {
    sum += v;
    inv += 1.0 / v;
  }
  const double k = static_cast<double>(variances.size());
  return {sum / (k * k), 1.0 / inv};
}

double harmonic(std::size_t k) {
  double h = 0.0;
  for (std::size_t i = k; i >= 1; --i) h += 1.0 / static_cast<double>(i);
  return h;
}

Vec model_query_vector(std::span<const TrigramId> trigrams, const GeneratorConfig& config,
                       const Matrix& vocab) {
  Vec out(vocab.cols(), 0.0);
  for (std::size_t i = 0; i < trigrams.size(); ++i) {
    axpy(config.beta(i + 1), vocab.row(trigrams[i]), out);
  }
  return out;
}

double query_probability(std::span<const TrigramId> trigrams, std::span<const double> p,
                         const GeneratorConfig& config, const Matrix& vocab) {
  const auto pmf = truncated_poisson_pmf(config.lambda, config.max_length);
  return sequence_probability(trigrams, position_probabilities(p, config, vocab), pmf);
}

Vec sample_close_product(Rng& rng, std::span<const double> p, double epsilon) {
  if (epsilon <= 0.0) return Vec(p.begin(), p.end());
  const double scale = epsilon / std::sqrt(static_cast<double>(p.size()));
  for (;;) {
    Vec q(p.begin(), p.end());
    for (double& x : q) x += scale * rng.normal();
    const double n = norm(q);
    for (double& x : q) x /= n;
    if (squared_distance(p, q) <= epsilon * epsilon) return q;
  }
}

std::vector<std::vector<TrigramId>> pmi_query_sample(const GeneratorConfig& config,
                                                     const Matrix& vocab, std::size_t extra,
                                                     std::uint64_t seed) {
  std::vector<std::vector<TrigramId>> sample;
  for (TrigramId t = 0; t < vocab.rows(); ++t) sample.push_back({t});
  if (config.max_length < 2) return sample;
  std::map<std::vector<TrigramId>, bool> seen;
  Rng rng = Rng::stream(seed, 0x9a11);
  std::size_t added = 0;
  for (std::size_t attempt = 0; added < extra && attempt < 1000 * (extra + 1); ++attempt) {
    const Vec p = sample_unit_sphere(rng, config.d);
    auto q = draw_query(rng, p, config, vocab);
    if (q.size() < 2 || !seen.emplace(q, true).second) continue;
    sample.push_back(std::move(q));
    ++added;
  }
  return sample;
}

PmiEstimate enumerate_pmi(const GeneratorConfig& config, const Matrix& vocab,
                          std::span<const std::vector<TrigramId>> sample, std::size_t n_pairs,
                          std::uint64_t seed, std::size_t threads) {
  if (n_pairs == 0) throw std::invalid_argument("n_pairs must be positive");
  const std::size_t nq = sample.size();
  const auto pmf = truncated_poisson_pmf(config.lambda, config.max_length);
  struct Acc {
    std::vector<double> marginal, joint;
  };
  std::vector<Acc> acc(kChunks);
  parallel_for(kChunks, threads, [&](std::size_t c) {
    Acc& a = acc[c];
    a.marginal.assign(nq, 0.0);
    a.joint.assign(nq * nq, 0.0);
    Rng rng = Rng::stream(seed, c);
    const std::size_t begin = n_pairs * c / kChunks;
    const std::size_t end = n_pairs * (c + 1) / kChunks;
    std::vector<double> pa(nq), pb(nq);
    for (std::size_t s = begin; s < end; ++s) {
      const Vec p = sample_unit_sphere(rng, config.d);
      const Vec p2 = sample_close_product(rng, p, config.epsilon_p);
      const auto probs_a = position_probabilities(p, config, vocab);
      const auto probs_b = position_probabilities(p2, config, vocab);
      for (std::size_t j = 0; j < nq; ++j) {
        pa[j] = sequence_probability(sample[j], probs_a, pmf);
        pb[j] = sequence_probability(sample[j], probs_b, pmf);
        a.marginal[j] += 0.5 * (pa[j] + pb[j]);
      }
      for (std::size_t j = 0; j < nq; ++j) {
        for (std::size_t k = j + 1; k < nq; ++k) {
          a.joint[j * nq + k] += 0.5 * (pa[j] * pb[k] + pb[j] * pa[k]);
        }
      }
    }
  });
  std::vector<double> marginal(nq, 0.0), joint(nq * nq, 0.0);
  for (const auto& a : acc) {
    for (std::size_t j = 0; j < nq; ++j) marginal[j] += a.marginal[j];
    for (std::size_t x = 0; x < nq * nq; ++x) joint[x] += a.joint[x];
  }
  const auto dots = dots_over_d(sample, config, vocab);
  const double n = static_cast<double>(n_pairs);
  PmiEstimate out;
  std::size_t idx = 0;
  for (auto [j, k] : all_pairs(nq)) {
    const double pj = marginal[j] / n;
    const double pk = marginal[k] / n;
    const double pjk = joint[j * nq + k] / n;
    const double dd = dots[idx++];
    if (pjk <= 0.0 || pj <= 0.0 || pk <= 0.0) {
      ++out.dropped;
      continue;
    }
    out.pairs.emplace_back(j, k);
    out.pmi.push_back(std::log(pjk) - std::log(pj) - std::log(pk));
    out.dot_over_d.push_back(dd);
    out.standard_error.push_back(0.0);
  }
  return out;
}

PmiEstimate estimate_pmi(const GeneratorConfig& config, const Matrix& vocab,
                         std::span<const std::vector<TrigramId>> sample, std::size_t n_events,
                         std::uint64_t seed, std::size_t threads) {
  if (n_events < 1000) throw std::invalid_argument("estimate_pmi needs >= 1000 events");
  const std::size_t nq = sample.size();
  const SequenceKeys keys(vocab.rows(), config.max_length);
  std::unordered_map<std::uint64_t, std::uint32_t> index;
  for (std::uint32_t j = 0; j < nq; ++j) {
    if (!index.emplace(keys(sample[j]), j).second) {
      throw std::invalid_argument("query sample contains duplicates");
    }
  }
  struct Acc {
    std::vector<std::uint64_t> marginal, joint;
  };
  std::vector<Acc> acc(kChunks);
  parallel_for(kChunks, threads, [&](std::size_t c) {
    Acc& a = acc[c];
    a.marginal.assign(nq, 0);
    a.joint.assign(nq * nq, 0);
    Rng rng = Rng::stream(seed, 0x10000 + c);
    const std::size_t begin = n_events * c / kChunks;
    const std::size_t end = n_events * (c + 1) / kChunks;
    for (std::size_t s = begin; s < end; ++s) {
      const Vec p = sample_unit_sphere(rng, config.d);
      const Vec p2 = sample_close_product(rng, p, config.epsilon_p);
      const auto qa = index.find(keys(draw_query(rng, p, config, vocab)));
      const auto qb = index.find(keys(draw_query(rng, p2, config, vocab)));
      if (qa != index.end()) ++a.marginal[qa->second];
      if (qb != index.end()) ++a.marginal[qb->second];
      if (qa != index.end() && qb != index.end()) ++a.joint[qa->second * nq + qb->second];
    }
  });
  std::vector<double> marginal(nq, 0.0), joint(nq * nq, 0.0);
  for (const auto& a : acc) {
    for (std::size_t j = 0; j < nq; ++j) marginal[j] += static_cast<double>(a.marginal[j]);
    for (std::size_t x = 0; x < nq * nq; ++x) joint[x] += static_cast<double>(a.joint[x]);
  }
  const auto dots = dots_over_d(sample, config, vocab);
  const double draws = 2.0 * static_cast<double>(n_events);
  PmiEstimate out;
  std::size_t idx = 0;
  for (auto [j, k] : all_pairs(nq)) {
    const double cj = marginal[j];
    const double ck = marginal[k];
    const double cjk = joint[j * nq + k] + joint[k * nq + j];
    const double dd = dots[idx++];
    if (cjk == 0.0 || cj == 0.0 || ck == 0.0) {
      ++out.dropped;
      continue;
    }
    // joint_sym = cjk / (2n), marginals c / (2n)
    out.pairs.emplace_back(j, k);
    out.pmi.push_back(std::log(cjk * draws / (cj * ck)));
    out.dot_over_d.push_back(dd);
    out.standard_error.push_back(std::sqrt(1.0 / cjk + 1.0 / cj + 1.0 / ck));
  }
  if (out.pairs.empty()) throw std::runtime_error("estimate_pmi: no pair has counts");
  return out;
}

std::vector<double> position_variances(const SyntheticDataset& dataset,
                                       std::span<const std::size_t> positions,
                                       std::size_t n_products, std::size_t n_samples,
                                       std::uint64_t seed, std::size_t threads) {
  const std::size_t np = dataset.products.rows();
  if (np == 0) throw std::invalid_argument("dataset has no products");
  n_products = std::max<std::size_t>(1, std::min(n_products, np));
  std::vector<std::size_t> chosen(np);
  std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  Rng pick = Rng::stream(seed, 0xb1);
  shuffle(std::span<std::size_t>(chosen), pick);
  chosen.resize(n_products);

  std::vector<double> cell(positions.size() * n_products, 0.0);
  parallel_for(cell.size(), threads, [&](std::size_t x) {
    const std::size_t pos = positions[x / n_products];
    Rng rng = Rng::stream(seed, 0x1000 + x);
    cell[x] = trigram_empirical_variance(rng, dataset.products.row(chosen[x % n_products]), pos,
                                         dataset.config, dataset.vocab, n_samples);
  });
  std::vector<double> out(positions.size(), 0.0);
  for (std::size_t x = 0; x < cell.size(); ++x) out[x / n_products] += cell[x];
  for (double& v : out) v /= static_cast<double>(n_products);
  return out;
}

BlueReport blue_report(const AttentionModel& model, const SyntheticDataset& dataset,
                       const BlueOptions& options) {
  if (options.require_trained) {
    const auto data = model.attn.data();
    const bool untrained =
        std::all_of(data.begin(), data.end(), [](double x) { return x == 0.0; });
    if (untrained) throw std::invalid_argument("blue_report: attention is untrained");
  }
  const std::size_t n_max = model.max_length();
  std::vector<double> raw(n_max, 0.0), rel(n_max, 0.0);
  std::vector<std::size_t> count(n_max, 0);
  for (const auto& q : dataset.queries) {
    const auto w = attention_weights(model, q.trigrams);
    const double n = static_cast<double>(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      raw[i] += w[i];
      rel[i] += n * w[i];
      ++count[i];
    }
  }
  BlueReport report;
  for (std::size_t i = 0; i < n_max; ++i) {
    if (count[i] == 0) continue;
    report.positions.push_back(i + 1);
    report.attention_weight.push_back(raw[i] / static_cast<double>(count[i]));
    report.relative_weight.push_back(rel[i] / static_cast<double>(count[i]));
    report.query_count.push_back(count[i]);
  }
  if (report.positions.empty()) throw std::invalid_argument("blue_report: dataset has no queries");
  report.empirical_variance =
      position_variances(dataset, report.positions, options.variance_products,
                         options.variance_samples, options.seed, options.threads);
  report.blue_weight = blue_weights(report.empirical_variance);
  report.pearson_attention = pearson(report.attention_weight, report.blue_weight);
  report.pearson_relative = pearson(report.relative_weight, report.blue_weight);
  return report;
}

RhoCurve::RhoCurve(const Matrix& vocab, const Matrix& reference_products)
    : m_(vocab.rows()) {
  if (m_ == 0 || reference_products.rows() == 0) {
    throw std::invalid_argument("RhoCurve: empty vocabulary or reference set");
  }
  projections_.reserve(reference_products.rows() * m_);
  for (std::size_t r = 0; r < reference_products.rows(); ++r) {
    for (std::size_t t = 0; t < m_; ++t) {
      projections_.push_back(dot(reference_products.row(r), vocab.row(t)));
    }
  }
}

double RhoCurve::mean_partition(double beta) const {
  double total = 0.0;
  for (double x : projections_) total += std::exp(beta * x);
  return total * static_cast<double>(m_) / static_cast<double>(projections_.size());
}

double RhoCurve::operator()(double alpha, double beta) const {
  return trigram_mean_scale(alpha, beta, m_, mean_partition(beta));
}

BetaFit fit_betas(std::span<const std::size_t> positions, std::span<const double> variances,
                  std::span<const double> alphas, std::span<const double> reference_betas,
                  const RhoCurve& rho, double beta_max) {
  const std::size_t n = positions.size();
  if (variances.size() != n || alphas.size() != n || reference_betas.size() != n) {
    throw std::invalid_argument("fit_betas: inputs must have one entry per position");
  }
  require_positive(variances);
  std::vector<double> xs(positions.begin(), positions.end());
  BetaFit fit;
  fit.line = n >= 2 ? fit_line(xs, variances) : LineFit{variances[0], 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const double ideal = fit.line.intercept + fit.line.slope * xs[i];
    fit.ideal_variance.push_back(ideal);
    const double ref = reference_betas[i];
    const double rho_ref = rho(alphas[i], ref);
    double target = ideal - variances[i] + rho_ref * rho_ref;
    const double tol = 1e-9 * std::max(1.0, std::abs(ideal));
    if (std::abs(target) <= tol) target = 0.0;

    double beta = ref;
    bool flagged = !(fit.line.slope > 0.0) || target < 0.0;
    if (!flagged && target == 0.0) {
      beta = 0.0;
    } else if (!flagged) {
      // rho is increasing only up to where the vocabulary tail dominates
      // the partition function, so bracket the smallest root on a grid.
      const double goal = std::sqrt(target);
      constexpr int kGrid = 400;
      double lo = 0.0, hi = -1.0;
      for (int g = 1; g <= kGrid; ++g) {
        const double b = beta_max * g / kGrid;
        if (rho(alphas[i], b) >= goal) {
          hi = b;
          break;
        }
        lo = b;
      }
      if (hi < 0.0) {
        flagged = true;
      } else {
        for (int it = 0; it < 100 && hi - lo > 1e-12; ++it) {
          const double mid = 0.5 * (lo + hi);
          (rho(alphas[i], mid) < goal ? lo : hi) = mid;
        }
        beta = 0.5 * (lo + hi);
      }
    }
    fit.betas.push_back(beta);
    fit.residuals.push_back(beta - ref);
    fit.flagged.push_back(flagged);
  }
  return fit;
}

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

std::string ValidationReport::to_string() const {
  std::string out;
  char line[512];
  for (const auto& c : checks) {
    std::snprintf(line, sizeof line, "%s %s/%s measured=%.6g threshold=%.6g%s%s\n",
                  c.passed ? "PASS" : "FAIL", suite.c_str(), c.name.c_str(), c.measured,
                  c.threshold, c.detail.empty() ? "" : " ", c.detail.c_str());
    out += line;
  }
  return out;
}

ValidationReport run_mean_suite(const MeanSuiteParams& params) {
  if (params.alphas.size() != params.betas.size() || params.alphas.empty()) {
    throw std::invalid_argument("mean suite needs one beta per alpha");
  }
  const auto config = single_config(params.d, params.m, params.alphas, params.betas);
  Rng vocab_rng = Rng::stream(params.seed, 1);
  const Matrix vocab = sample_trigram_vocab(vocab_rng, params.m, params.d);
  Rng product_rng = Rng::stream(params.seed, 2);
  const Vec p = sample_unit_sphere(product_rng, params.d);

  const std::size_t n = params.alphas.size();
  std::vector<Vec> means(n);
  parallel_for(n, params.threads, [&](std::size_t i) {
    Rng rng = Rng::stream(params.seed, 10 + i);
    means[i] = trigram_empirical_mean(rng, p, i + 1, config, vocab, params.samples);
  });
  ValidationReport report{"mean", {}};
  for (std::size_t i = 0; i < n; ++i) {
    const double z = partition_function(p, params.betas[i], vocab);
    const double rho = trigram_mean_scale(params.alphas[i], params.betas[i], params.m, z);
    const double cosine = cosine_similarity(means[i], p);
    const double rel = std::abs(norm(means[i]) / rho - 1.0);
    const std::string tag = "position" + std::to_string(i + 1);
    const std::string detail = fmt("alpha=%g beta=%g", params.alphas[i], params.betas[i]);
    report.checks.push_back(
        make_check(tag + "_cosine", cosine > params.min_cosine, cosine, params.min_cosine, detail));
    report.checks.push_back(make_check(tag + "_magnitude_rel_error",
                                       rel <= params.max_relative_error, rel,
                                       params.max_relative_error, fmt("rho=%.6g", rho)));
  }
  return report;
}

ValidationReport run_variance_suite(const VarianceSuiteParams& params) {
  if (params.betas.empty()) throw std::invalid_argument("variance suite needs betas");
  Rng vocab_rng = Rng::stream(params.seed, 1);
  const Matrix vocab = sample_trigram_vocab(vocab_rng, params.m, params.d);
  Rng product_rng = Rng::stream(params.seed, 2);
  const Vec p = sample_unit_sphere(product_rng, params.d);
  std::vector<double> values;
  for (std::size_t b = 0; b < params.betas.size(); ++b) {
    const auto config = single_config(params.d, params.m, {params.alpha}, {params.betas[b]});
    Rng rng = Rng::stream(params.seed, 10 + b);
    values.push_back(trigram_empirical_variance(rng, p, 1, config, vocab, params.samples));
  }
  ValidationReport report{"variance", {}};
  const double d = static_cast<double>(params.d);
  const double anchor = std::abs(values[0] - d) / d;
  report.checks.push_back(make_check("anchor_rel_error", anchor <= params.anchor_tolerance, anchor,
                                     params.anchor_tolerance,
                                     fmt("beta=%g estimate=%.6g", params.betas[0], values[0])));
  for (std::size_t b = 1; b < values.size(); ++b) {
    const double step = values[b] - values[b - 1];
    char detail[128];
    std::snprintf(detail, sizeof detail, "beta %g->%g: %.6g -> %.6g", params.betas[b - 1],
                  params.betas[b], values[b - 1], values[b]);
    report.checks.push_back(
        make_check("strict_decrease_" + std::to_string(b), step < 0.0, step, 0.0, detail));
  }
  return report;
}

ValidationReport run_partition_suite(const PartitionSuiteParams& params) {
  ValidationReport report{"partition", {}};
  std::vector<double> rel_std;
  for (std::size_t v = 0; v < params.vocab_sizes.size(); ++v) {
    const std::size_t m = params.vocab_sizes[v];
    Rng vocab_rng = Rng::stream(params.seed, 100 + v);
    const Matrix vocab = sample_trigram_vocab(vocab_rng, m, params.d);
    Rng product_rng = Rng::stream(params.seed, 200 + v);
    std::vector<double> z;
    for (std::size_t k = 0; k < params.n_products; ++k) {
      z.push_back(partition_function(sample_unit_sphere(product_rng, params.d), params.beta,
                                     vocab));
    }
    rel_std.push_back(std::sqrt(sample_variance(z)) / mean(z));
  }
  for (std::size_t v = 1; v < rel_std.size(); ++v) {
    char name[64];
    std::snprintf(name, sizeof name, "rel_std_m%zu_below_m%zu", params.vocab_sizes[v],
                  params.vocab_sizes[v - 1]);
    report.checks.push_back(
        make_check(name, rel_std[v] < rel_std[v - 1], rel_std[v], rel_std[v - 1]));
  }
  return report;
}

ValidationReport run_pmi_suite(const PmiSuiteParams& params) {
  const GeneratorConfig& u = params.universe;
  Rng vocab_rng = Rng::stream(params.seed, 1);
  const Matrix vocab = sample_trigram_vocab(vocab_rng, u.m, u.d);
  const auto sample = pmi_query_sample(u, vocab, params.extra_queries, params.seed);
  ValidationReport report{"pmi", {}};

  const auto exact = enumerate_pmi(u, vocab, sample, params.product_pairs, params.seed,
                                   params.threads);
  const double r = exact.correlation();
  report.checks.push_back(make_check("enumerated_pearson", r > params.min_correlation, r,
                                     params.min_correlation,
                                     "pairs=" + std::to_string(exact.pairs.size()) +
                                         " dropped=" + std::to_string(exact.dropped)));

  GeneratorConfig flat = u;
  std::fill(flat.betas.begin(), flat.betas.end(), 0.0);
  const auto zero = enumerate_pmi(flat, vocab, sample, std::max<std::size_t>(1, params.product_pairs / 100),
                                  params.seed, params.threads);
  double max_abs = 0.0;
  for (double x : zero.pmi) max_abs = std::max(max_abs, std::abs(x));
  report.checks.push_back(make_check("zero_beta_max_abs_pmi", max_abs <= 1e-9, max_abs, 1e-9));

  if (params.events > 0) {
    const auto counted = estimate_pmi(u, vocab, sample, params.events, params.seed, params.threads);
    std::map<std::pair<QueryId, QueryId>, double> exact_by_pair;
    for (std::size_t x = 0; x < exact.pairs.size(); ++x) exact_by_pair[exact.pairs[x]] = exact.pmi[x];
    std::size_t within = 0, compared = 0;
    for (std::size_t x = 0; x < counted.pairs.size(); ++x) {
      const auto it = exact_by_pair.find(counted.pairs[x]);
      if (it == exact_by_pair.end()) continue;
      ++compared;
      if (std::abs(counted.pmi[x] - it->second) <= 3.0 * counted.standard_error[x]) ++within;
    }
    const double frac = compared ? static_cast<double>(within) / static_cast<double>(compared) : 0.0;
    report.checks.push_back(make_check("counted_within_3se", frac >= params.min_within_3se, frac,
                                       params.min_within_3se,
                                       "compared=" + std::to_string(compared) +
                                           " counted_pearson=" + fmt("%.4f", counted.correlation())));
  }
  return report;
}

double mean_uniform_deviation(const AttentionModel& model, std::span<const Query> queries) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& q : queries) {
    const auto w = attention_weights(model, q.trigrams);
    const double uniform = 1.0 / static_cast<double>(w.size());
    for (double x : w) total += std::abs(x - uniform);
    n += w.size();
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

ValidationReport run_blue_suite(const AttentionSuiteParams& params) {
  ValidationReport report{"blue", {}};
  for (std::size_t k : {4u, 10u, 100u}) {
    std::vector<double> v(k);
    for (std::size_t i = 0; i < k; ++i) v[i] = static_cast<double>(i + 1);
    const auto ev = estimator_variances(v);
    const double kd = static_cast<double>(k);
    const double e1 = std::abs(ev.unweighted - (0.5 + 0.5 / kd));
    const double e2 = std::abs(ev.weighted - 1.0 / harmonic(k));
    report.checks.push_back(
        make_check("unweighted_linear_k" + std::to_string(k), e1 <= 1e-12, e1, 1e-12));
    report.checks.push_back(
        make_check("weighted_linear_k" + std::to_string(k), e2 <= 1e-12, e2, 1e-12));
  }

  const SyntheticDataset dataset = generate_dataset(params.dataset, params.threads);
  AttentionModel model = initial_model(params.dataset.m, params.dataset.d,
                                       params.dataset.max_length, params.train.seed);
  const auto trained = train(std::move(model), dataset.queries, dataset.graph, params.train);
  const double dev = mean_uniform_deviation(trained.model, dataset.queries);
  report.checks.push_back(make_check("attention_uniform_mean_abs_dev", dev <= params.uniform_tolerance,
                                     dev, params.uniform_tolerance));

  BlueOptions opts = params.blue;
  opts.require_trained = false;
  opts.threads = params.threads;
  const auto blue = blue_report(trained.model, dataset, opts);
  double sum = 0.0, spread = 0.0;
  const double uniform = 1.0 / static_cast<double>(blue.blue_weight.size());
  for (double w : blue.blue_weight) {
    sum += w;
    spread = std::max(spread, std::abs(w / uniform - 1.0));
  }
  report.checks.push_back(make_check("blue_weights_sum", std::abs(sum - 1.0) <= 1e-12,
                                     std::abs(sum - 1.0), 1e-12));
  report.checks.push_back(make_check("blue_weights_uniform_max_rel_dev", spread <= 0.02, spread, 0.02));
  return report;
}

ValidationReport run_figure1_suite(const AttentionSuiteParams& params, Figure1Data* data) {
  const SyntheticDataset dataset = generate_dataset(params.dataset, params.threads);
  AttentionModel model = initial_model(params.dataset.m, params.dataset.d,
                                       params.dataset.max_length, params.train.seed);
  Figure1Data local;
  Figure1Data& out = data ? *data : local;
  out.training = train(std::move(model), dataset.queries, dataset.graph, params.train);
  BlueOptions opts = params.blue;
  opts.threads = params.threads;
  out.blue = blue_report(out.training.model, dataset, opts);

  const std::size_t n_ref = std::min(opts.variance_products, dataset.products.rows());
  Matrix reference(n_ref, dataset.products.cols());
  for (std::size_t r = 0; r < n_ref; ++r) {
    std::copy_n(dataset.products.row(r).data(), reference.cols(), reference.row(r).data());
  }
  const RhoCurve rho(dataset.vocab, reference);
  std::vector<double> alphas, betas;
  for (std::size_t pos : out.blue.positions) {
    alphas.push_back(dataset.config.alpha(pos));
    betas.push_back(dataset.config.beta(pos));
  }
  out.betas = fit_betas(out.blue.positions, out.blue.empirical_variance, alphas, betas, rho);

  ValidationReport report{"figure1", {}};
  std::vector<double> xs(out.blue.positions.begin(), out.blue.positions.end());
  const double var_r = pearson(xs, out.blue.empirical_variance);
  report.checks.push_back(make_check(
      "attention_vs_blue_pearson", out.blue.pearson_attention >= params.min_correlation,
      out.blue.pearson_attention, params.min_correlation,
      fmt("relative_weight_pearson=%.4f variance_vs_position_pearson=%.4f",
          out.blue.pearson_relative, var_r)));
  return report;
}

std::vector<std::filesystem::path> write_figure1_csvs(const Figure1Data& data,
                                                      const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& b = data.blue;
  std::vector<std::filesystem::path> paths{dir / "figure1_a.csv", dir / "figure1_b.csv",
                                           dir / "figure1_c.csv"};
  auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
  };
  char line[256];
  {
    auto f = open(paths[0]);
    f << "# panel: figure1a attention weights vs BLUE weights\n";
    f << "position,attention_weight,blue_weight,relative_weight\n";
    for (std::size_t i = 0; i < b.positions.size(); ++i) {
      std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", b.positions[i],
                    b.attention_weight[i], b.blue_weight[i], b.relative_weight[i]);
      f << line;
    }
  }
  {
    auto f = open(paths[1]);
    f << "# panel: figure1b empirical variance vs ideal variance line\n";
    f << "position,empirical_variance,ideal_variance\n";
    for (std::size_t i = 0; i < b.positions.size(); ++i) {
      std::snprintf(line, sizeof line, "%zu,%.17g,%.17g\n", b.positions[i],
                    b.empirical_variance[i], data.betas.ideal_variance[i]);
      f << line;
    }
  }
  {
    auto f = open(paths[2]);
    f << "# panel: figure1c fitted beta residuals\n";
    f << "position,beta_residual,beta,flagged\n";
    for (std::size_t i = 0; i < b.positions.size(); ++i) {
      std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%d\n", b.positions[i],
                    data.betas.residuals[i], data.betas.betas[i],
                    data.betas.flagged[i] ? 1 : 0);
      f << line;
    }
  }
  return paths;
}

}  // namespace attest
